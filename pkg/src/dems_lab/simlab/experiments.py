"""Experiment orchestration: benchmark, sweeps, landscapes and Monte Carlo checks.

Every experiment is a grid of independent cells. Cell seeds derive from the
master seed and the cell's grid position only, and results are gathered in
grid order, so serial and parallel runs produce identical records.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from ..baselines import discretize_lti, fit_ar, gaussian_autocovariance, run_kf, run_sa, run_smikf
from ..datasets import Dataset, TrialResult
from ..noise_model import _unit_smoothness
from ..observers import ObserverConfig, run_dem_fixed_s, run_dems
from .scenarios import Scenario, get_scenario

METHODS = ("DEMs", "DEM-fixed", "KF", "SA", "SMIKF")
BENCHMARK_METHODS = ("DEMs", "KF", "SA", "SMIKF")
SA_ORDER = 6
SMIKF_ORDER = 1
RECORD_FIELDS = ["scenario", "method", "s_real", "seed", "p", "sse", "runtime_s"]


@dataclass
class BenchmarkRecord:
    scenario: str
    method: str
    s_real: float
    seed: int
    p: int
    sse: float
    runtime_s: float = float("nan")
    s_assumed: Optional[float] = None
    error: str = ""


def derive_seed(master_seed: int, *cell: int) -> int:
    """Deterministic 32-bit seed for a grid cell."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF, *[int(c) for c in cell]])
    return int(ss.generate_state(1)[0])


def observer_config(scenario: Scenario, s: float, dt: float, p=None, d=None, **overrides) -> ObserverConfig:
    p = scenario.p if p is None else p
    d = min(scenario.d if d is None else d, p)
    return ObserverConfig(scenario.plant, scenario.observer_noise(s), dt, p, d, **overrides)


def run_method(method: str, dataset: Dataset, scenario: Scenario, s_real: float, p=None, d=None,
               s_assumed=None, options=None) -> TrialResult:
    """Run one estimator on ``dataset`` with the scenario's noise assumptions.

    The Kalman-type baselines are calibrated on the exact Gaussian
    autocorrelation at ``s_real``; ``DEM-fixed`` uses ``s_assumed``
    (default ``s_real``) and ``DEMs`` estimates the smoothness itself.
    ``options`` are extra :class:`ObserverConfig` fields for the DEM methods.
    """
    dt = dataset.dt
    if method in ("DEMs", "DEM-fixed"):
        cfg = observer_config(scenario, s_real, dt, p, d, **(options or {}))
        if method == "DEMs":
            return run_dems(dataset, cfg)
        return run_dem_fixed_s(dataset, cfg, s_real if s_assumed is None else s_assumed)
    noise = scenario.observer_noise(s_real)
    dp = discretize_lti(scenario.plant, dt, np.linalg.inv(noise.prec_w), np.linalg.inv(noise.prec_z))
    if method == "KF":
        return run_kf(dataset, dp)
    var = np.diag(dp.Qd)
    if method == "SA":
        return run_sa(dataset, dp, fit_ar(gaussian_autocovariance(var, s_real, dt, SA_ORDER), SA_ORDER))
    if method == "SMIKF":
        return run_smikf(dataset, dp, fit_ar(gaussian_autocovariance(var, s_real, dt, SMIKF_ORDER), SMIKF_ORDER))
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def _timed(method, dataset, scenario, s_real, p, d, s_assumed, seed, options=None):
    t0 = time.perf_counter()
    try:
        res = run_method(method, dataset, scenario, s_real, p, d, s_assumed, options)
        total, err = res.sse, ""
    except Exception as exc:  # a failed cell is data, not a crash
        total, err = float("nan"), f"{type(exc).__name__}: {exc}"
    p_used = scenario.p if p is None else p
    return BenchmarkRecord(scenario.name, method, s_real, seed, p_used, total,
                           time.perf_counter() - t0, s_assumed, err)


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _resolve(scenario) -> Scenario:
    return scenario if isinstance(scenario, Scenario) else get_scenario(scenario)


def _benchmark_cell(task):
    sc, s_real, seed, T, dt, methods, p, d, options = task
    ds = sc.simulate(s_real, seed, T, dt)
    return [_timed(m, ds, sc, s_real, p, d, None, seed, options) for m in methods]


def benchmark_suite(scenario="paper_system", s_values=(0.1, 0.3, 0.5, 0.7, 0.9), n_seeds=10,
                    methods: Sequence[str] = BENCHMARK_METHODS, master_seed=0, dt=None, T=None,
                    p=None, d=None, jobs=1, options=None) -> list[BenchmarkRecord]:
    """Every method on every ``(s_real, replicate)`` dataset.

    All methods of a replicate see the same noise realization.
    """
    sc = _resolve(scenario)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
    tasks = [
        (sc, float(s), derive_seed(master_seed, i, j), T, dt, tuple(methods), p, d, options)
        for i, s in enumerate(s_values)
        for j in range(n_seeds)
    ]
    return [rec for cell in _map(_benchmark_cell, tasks, jobs) for rec in cell]


def _embedding_cell(task):
    sc, s_real, seed, T, dt, p_values, d, options = task
    ds = sc.simulate(s_real, seed, T, dt)
    return [_timed("DEM-fixed", ds, sc, s_real, p, min(d, p), None, seed, options) for p in p_values]


def embedding_sweep(scenario="paper_system", p_values=range(6), s_values=(0.1, 0.3, 0.5, 0.7, 0.9),
                    n_seeds=5, master_seed=0, dt=None, T=None, d=2, jobs=1,
                    options=None) -> list[BenchmarkRecord]:
    """Fixed-smoothness DEM (at the true s) for each embedding order."""
    sc = _resolve(scenario)
    p_values = tuple(int(p) for p in p_values)
    if any(p < 0 or p > 6 for p in p_values):
        raise ValueError("embedding orders must lie in 0..6")
    tasks = [
        (sc, float(s), derive_seed(master_seed, i, j), T, dt, p_values, d, options)
        for i, s in enumerate(s_values)
        for j in range(n_seeds)
    ]
    return [rec for cell in _map(_embedding_cell, tasks, jobs) for rec in cell]


def _mismatch_cell(task):
    sc, s_real, seed, T, dt, grid, p, d, options = task
    ds = sc.simulate(s_real, seed, T, dt)
    recs = [_timed("DEM-fixed", ds, sc, s_real, p, d, a, seed, options) for a in grid]
    recs.append(_timed("KF", ds, sc, s_real, None, None, None, seed))
    return recs


def mismatch_sweep(scenario="paper_system", assumed_grid=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8),
                   s_values=(0.1, 0.3, 0.5), n_seeds=5, master_seed=0, dt=None, T=None,
                   p=None, d=None, jobs=1, options=None) -> list[BenchmarkRecord]:
    """Fixed-smoothness DEM at every assumed ``s``, plus a KF reference per dataset."""
    sc = _resolve(scenario)
    grid = tuple(float(a) for a in assumed_grid)
    if any(not 0 < a <= 1 for a in grid) or any(not 0 < s <= 1 for s in s_values):
        raise ValueError("smoothness grids must lie in (0, 1]")
    tasks = [
        (sc, float(s), derive_seed(master_seed, i, j), T, dt, grid, p, d, options)
        for i, s in enumerate(s_values)
        for j in range(n_seeds)
    ]
    return [rec for cell in _map(_mismatch_cell, tasks, jobs) for rec in cell]


def median_sse(records, method, s_real, p=None, s_assumed=None) -> float:
    vals = [
        r.sse for r in records
        if r.method == method and math.isclose(r.s_real, s_real)
        and (p is None or r.p == p)
        and (s_assumed is None or (r.s_assumed is not None and math.isclose(r.s_assumed, s_assumed)))
    ]
    return float(np.median(vals)) if vals else float("nan")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records, timing: bool = False, assumed: bool = False) -> str:
    """Record CSV. Runtimes are only written with ``timing=True`` since they
    would break byte-for-byte reproducibility."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = RECORD_FIELDS + (["s_assumed"] if assumed else [])
    writer.writerow(header)
    for r in records:
        row = [r.scenario, r.method, _cell(r.s_real), _cell(r.seed), _cell(r.p), _cell(float(r.sse)),
               _cell(float(r.runtime_s)) if timing else ""]
        if assumed:
            row.append(_cell(r.s_assumed))
        writer.writerow(row)
    return buf.getvalue()


def read_records(text: str) -> list[BenchmarkRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(BenchmarkRecord(
            row["scenario"], row["method"], float(row["s_real"]), int(row["seed"]), int(row["p"]),
            float(row["sse"]), float(row["runtime_s"]) if row["runtime_s"] else float("nan"),
            float(row["s_assumed"]) if row.get("s_assumed") else None,
        ))
    return out


@dataclass
class Landscape:
    s_grid: np.ndarray
    F: np.ndarray
    t_eval: float

    @property
    def argmax(self) -> float:
        return float(self.s_grid[int(np.argmax(self.F))])

    def local_maxima(self) -> np.ndarray:
        """Grid points strictly above their neighbours (endpoints included)."""
        F = self.F
        left = np.r_[True, F[1:] > F[:-1]]
        right = np.r_[F[:-1] > F[1:], True]
        return self.s_grid[left & right]

    def interior_maxima(self) -> np.ndarray:
        lm = self.local_maxima()
        return lm[(lm != self.s_grid[0]) & (lm != self.s_grid[-1])]


def fe_landscapes(dataset: Dataset, cfg: ObserverConfig, s_grid, t_evals) -> list[Landscape]:
    """Free energy at each of ``t_evals`` of fixed-smoothness DEM runs over ``s_grid``.

    One run per grid point serves all evaluation times.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.size == 0 or np.any(s_grid <= 0) or np.any(s_grid > 1):
        raise ValueError("s_grid must be non-empty and lie in (0, 1]")
    ks = []
    for t in t_evals:
        k = int(round((t - dataset.times[0]) / dataset.dt))
        if not 0 <= k < dataset.N:
            raise ValueError(f"t_eval={t} outside the dataset span")
        ks.append(k)
    F = np.array([run_dem_fixed_s(dataset, cfg, s).F_traj for s in s_grid])
    return [Landscape(s_grid, F[:, k].copy(), float(dataset.times[k])) for k in ks]


def fe_landscape(dataset: Dataset, cfg: ObserverConfig, s_grid, t_eval: float) -> Landscape:
    """Free energy at ``t_eval`` of fixed-smoothness DEM runs over ``s_grid``."""
    return fe_landscapes(dataset, cfg, s_grid, [t_eval])[0]


def _derivative_stacks(p, s):
    """``S_s`` and ``S_ss`` for an array of smoothness values, shape (N, p+1, p+1)."""
    i = np.arange(p + 1)
    k = np.add.outer(i, i)
    S1 = _unit_smoothness(p)
    s = np.asarray(s, dtype=float)[:, None, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        S_s = np.where(k >= 1, k * S1 * s ** (k - 1.0), 0.0)
        S_ss = np.where(k >= 2, k * (k - 1) * S1 * s ** (k - 2.0), 0.0)
    return S_s, S_ss


def _forms(E, M):
    # eps' (M (x) I) eps with eps reshaped derivative-major to (p+1, channels)
    return np.einsum("nic,nij,njc->n", E, M, E)


@dataclass
class QuadrantResult:
    counts: dict
    samples: np.ndarray = field(repr=False)  # columns: s, eps'Pi_s eps, eps'Pi_ss eps

    @property
    def total(self) -> int:
        return int(self.samples.shape[0])


def quadrant_analysis(sample_count=20000, seed=0, p=6, n=2, m=4) -> QuadrantResult:
    """Quadrants of ``(eps' Pi_s eps, eps' Pi_ss eps)`` for random errors.

    Error entries are uniform on ``(-1, 1)``, ``s`` uniform on ``(0, 1]``,
    noise precisions are identity.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    s = 1.0 - rng.random(sample_count)
    E = rng.uniform(-1.0, 1.0, size=(sample_count, p + 1, n + m))
    S_s, S_ss = _derivative_stacks(p, s)
    a, b = _forms(E, S_s), _forms(E, S_ss)
    counts = {
        "q1": int(np.sum((a > 0) & (b > 0))),
        "q2": int(np.sum((a < 0) & (b > 0))),
        "q3": int(np.sum((a < 0) & (b < 0))),
        "q4": int(np.sum((a > 0) & (b < 0))),
    }
    counts["axis"] = sample_count - sum(counts.values())
    return QuadrantResult(counts, np.column_stack([s, a, b]))


@dataclass
class UniqueMaximumResult:
    trials: int
    roots: int
    violations: int
    root_log: list  # (trial, s_root, F_ss, eps'Pi_s eps)


def unique_maximum_check(trials=100, seed=0, p=6, n=2, m=4, dt=0.1, log_prec=6.0,
                      grid_points=2000) -> UniqueMaximumResult:
    """Locate every stationary point of ``F(s)`` on ``(dt, 1)`` and test it.

    Uses the reduced free energy (prior mean 0, prior precision 1) with
    isotropic precisions ``e**log_prec``. Each root must be a maximum
    (``F_ss < 0``) with ``eps' Pi_s eps > 0``.
    """
    rng = np.random.default_rng(seed)
    K = p * (p + 1)
    scale = math.exp(log_prec)
    grid = np.linspace(dt, 1.0, grid_points)
    log = []
    violations = 0
    for trial in range(trials):
        E = rng.uniform(-1.0, 1.0, size=(1, p + 1, n + m))

        def forms(s):
            S_s, S_ss = _derivative_stacks(p, np.atleast_1d(s))
            return scale * _forms(E, S_s), scale * _forms(E, S_ss)

        def F_s(s):
            a, _ = forms(s)
            return -0.5 * a + 0.5 * K * (n + m) / s - s

        S_s, _ = _derivative_stacks(p, grid)
        a = scale * np.einsum("ic,nij,jc->n", E[0], S_s, E[0])
        vals = -0.5 * a + 0.5 * K * (n + m) / grid - grid
        brackets = np.nonzero((vals[:-1] == 0) | (vals[:-1] * vals[1:] < 0))[0]
        for j in brackets:
            if vals[j] == 0:
                root = grid[j]
            else:
                root = brentq(lambda s: F_s(np.array([s]))[0], grid[j], grid[j + 1], xtol=1e-14)
            a, b = forms(np.array([root]))
            F_ss = -0.5 * b[0] - 0.5 * K * (n + m) / root**2 - 1.0
            ok = F_ss < 0 and a[0] > 0
            violations += not ok
            log.append((trial, float(root), float(F_ss), float(a[0])))
    return UniqueMaximumResult(trials, len(log), violations, log)
