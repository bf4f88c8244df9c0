"""Run configuration: JSON documents validated into a :class:`RunConfig`."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .free_energy import SmoothnessPrior
from .gencoord import LinearPlant
from .simlab.experiments import METHODS
from .simlab.scenarios import SCENARIOS, Scenario, get_scenario


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


@dataclass
class RunConfig:
    scenario: str = "paper_system"
    plant: Optional[dict] = None  # inline {"A": ..., "B": ..., "C": ...}
    s_real: Optional[float] = None
    log_prec_w: Optional[float] = None
    log_prec_z: Optional[float] = None
    # observer
    p: int = 6
    d: int = 2
    k_x: float = 1.0
    s_init: float = 0.001
    s_min: float = 1e-4
    s_max: float = 1.0
    eta_s: float = 0.001
    prec_s: float = 1.0
    # experiment
    T: Optional[float] = None
    dt: Optional[float] = None
    seed: int = 0
    seeds: int = 5
    s_values: list = field(default_factory=lambda: [0.1, 0.3, 0.5, 0.7, 0.9])
    p_values: list = field(default_factory=lambda: [0, 1, 2, 3, 4, 5])
    assumed_grid: list = field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])
    methods: list = field(default_factory=lambda: ["DEMs", "KF", "SA", "SMIKF"])
    s_grid: Optional[list] = None
    t_eval: list = field(default_factory=lambda: [5.0])
    sample_count: int = 20000
    # outputs
    out: Optional[str] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; the output path is left out."""
        body = {k: v for k, v in self.to_dict().items() if k != "out"}
        blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def build_scenario(self) -> Scenario:
        if self.plant is not None:
            plant = LinearPlant(self.plant["A"], self.plant["B"], self.plant["C"])
            base = Scenario(self.scenario, plant, 10.0, 0.1, 6.0, 6.0, self.p, self.d)
        else:
            base = get_scenario(self.scenario)
        changes = {"p": self.p, "d": self.d}
        for key in ("T", "dt", "log_prec_w", "log_prec_z"):
            if getattr(self, key) is not None:
                changes[key] = getattr(self, key)
        return dataclasses.replace(base, **changes)

    def observer_options(self) -> dict:
        return dict(
            k_x=self.k_x, s_init=self.s_init, s_min=self.s_min, s_max=self.s_max,
            prior=SmoothnessPrior(self.eta_s, self.prec_s),
        )

    def require_s_real(self) -> float:
        if self.s_real is None:
            raise ConfigError("s_real", "required for this command")
        return float(self.s_real)


_DEFAULTS = RunConfig()
_INT_KEYS = {"p", "d", "seed", "seeds", "sample_count"}
_LIST_KEYS = {"s_values", "p_values", "assumed_grid", "methods", "s_grid", "t_eval"}


def _number(key, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return int(value)
    if not np.isfinite(value):
        raise ConfigError(key, "must be finite")
    return float(value)


def validate(raw: dict) -> RunConfig:
    """Check keys, types and ranges; fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError(None, "configuration must be a key-value object")
    known = {f.name for f in fields(RunConfig)}
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown key")
    vals = {}
    for key, value in raw.items():
        if value is None:
            vals[key] = None
        elif key in ("scenario", "out"):
            if not isinstance(value, str):
                raise ConfigError(key, "expected a string")
            vals[key] = value
        elif key == "plant":
            if not isinstance(value, dict) or set(value) != {"A", "B", "C"}:
                raise ConfigError(key, "expected an object with keys A, B, C")
            vals[key] = {k: np.asarray(v, dtype=float).tolist() for k, v in value.items()}
        elif key in _LIST_KEYS:
            if not isinstance(value, list) or not value:
                raise ConfigError(key, "expected a non-empty list")
            if key == "methods":
                vals[key] = [str(v) for v in value]
            else:
                vals[key] = [_number(key, v, key == "p_values") for v in value]
        else:
            vals[key] = _number(key, value, key in _INT_KEYS)
    cfg = dataclasses.replace(_DEFAULTS, **vals)
    _check_ranges(cfg)
    return cfg


def _check_ranges(cfg: RunConfig):
    if cfg.plant is None and cfg.scenario not in SCENARIOS:
        raise ConfigError("scenario", f"unknown scenario {cfg.scenario!r}; choose from {sorted(SCENARIOS)}")
    if cfg.plant is not None:
        try:
            LinearPlant(cfg.plant["A"], cfg.plant["B"], cfg.plant["C"])
        except ValueError as exc:
            raise ConfigError("plant", str(exc)) from None
    if cfg.s_real is not None and not 0 < cfg.s_real <= 1:
        raise ConfigError("s_real", "must lie in (0, 1]")
    if cfg.dt is not None and not cfg.dt > 0:
        raise ConfigError("dt", "must be positive")
    if cfg.T is not None and not cfg.T > (cfg.dt or 0):
        raise ConfigError("T", "must exceed dt")
    if cfg.p < 0 or cfg.p > 6:
        raise ConfigError("p", "must lie in 0..6")
    if not 0 <= cfg.d <= cfg.p:
        raise ConfigError("d", "must lie in 0..p")
    if not 0 < cfg.s_min <= cfg.s_max <= 1:
        raise ConfigError("s_min", "need 0 < s_min <= s_max <= 1")
    if not cfg.s_min <= cfg.s_init <= cfg.s_max:
        raise ConfigError("s_init", "must lie in [s_min, s_max]")
    if not cfg.prec_s > 0:
        raise ConfigError("prec_s", "must be positive")
    if cfg.seeds < 1:
        raise ConfigError("seeds", "must be >= 1")
    if cfg.sample_count < 1:
        raise ConfigError("sample_count", "must be >= 1")
    for key in ("s_values", "assumed_grid", "s_grid"):
        vals = getattr(cfg, key)
        if vals is not None and any(not 0 < v <= 1 for v in vals):
            raise ConfigError(key, "values must lie in (0, 1]")
    if any(not 0 <= p <= 6 for p in cfg.p_values):
        raise ConfigError("p_values", "orders must lie in 0..6")
    for m in cfg.methods:
        if m not in METHODS:
            raise ConfigError("methods", f"unknown method {m!r}; choose from {list(METHODS)}")


def load_config(path) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(None, f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return validate(raw)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
