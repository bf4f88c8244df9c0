"""DEM state observer with optional online smoothness estimation (DEMs).

The generalized state follows the linear ODE ``x~' = A1 x~ + B1 [y~; v~]``,
discretized exactly over each sample interval. ``A1`` and ``B1`` depend on
the smoothness through the generalized precision, so they are rebuilt
whenever the smoothness estimate moves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .datasets import Dataset, TrialResult, sse
from .free_energy import FreeEnergyEval, SmoothnessPrior, evaluate, prediction_error
from .gencoord import GeneralizedSystem, LinearPlant, embed_sequence, lift_system
from .noise_model import GeneralizedPrecision, NoiseSpec, generalized_precision, smoothness_precision

SINGULAR_COND = 1e12
SERIES_TOL = 1e-14
CACHE_DS = 1e-12
FLAT_CURVATURE = 1e-9


class DivergenceError(RuntimeError):
    """The observer state became non-finite or blew through its growth bound."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


@dataclass(frozen=True)
class ObserverConfig:
    plant: LinearPlant
    noise: NoiseSpec
    dt: float
    p: int = 6
    d: int = 2
    k_x: float = 1.0
    s_init: float = 0.001
    s_min: float = 1e-4
    s_max: float = 1.0
    prior: SmoothnessPrior = field(default_factory=SmoothnessPrior)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 <= self.d <= self.p:
            raise ValueError(f"need 0 <= d <= p, got d={self.d}, p={self.p}")
        if not 0 < self.s_min <= self.s_max <= 1:
            raise ValueError(f"need 0 < s_min <= s_max <= 1, got [{self.s_min}, {self.s_max}]")
        if not self.s_min <= self.s_init <= self.s_max:
            raise ValueError(f"s_init={self.s_init} outside [{self.s_min}, {self.s_max}]")
        if self.noise.n != self.plant.n or self.noise.m != self.plant.m:
            raise ValueError("noise precisions do not match plant dimensions")


@dataclass
class ObserverState:
    x_gen: np.ndarray
    s: float
    t: float
    last_F: Optional[FreeEnergyEval] = None


def build_observer_matrices(gsys: GeneralizedSystem, gp: GeneralizedPrecision, k_x: float = 1.0):
    """``A1`` and ``B1`` of the DEM state update for the given precision."""
    if gp.block_z.shape[0] != gsys.C_gen.shape[0] or gp.block_w.shape[0] != gsys.A_gen.shape[0]:
        raise ValueError("generalized precision does not match the generalized system")
    Dx, C = gsys.Dx, gsys.C_gen
    M = Dx - gsys.A_gen
    CtPz = C.T @ gp.block_z
    MtPw = M.T @ gp.block_w
    A1 = Dx - k_x * (CtPz @ C) - k_x * (MtPw @ M)
    B1 = k_x * np.hstack([CtPz, MtPw @ gsys.B_gen])
    return A1, B1


def _series_factor(A, dt):
    # dt * sum_k (A dt)^k / (k+1)!
    Ad = A * dt
    term = np.eye(A.shape[0])
    total = term.copy()
    for k in range(1, 500):
        term = term @ Ad / (k + 1)
        total += term
        if np.max(np.abs(term)) <= SERIES_TOL * np.max(np.abs(total)):
            break
    return dt * total


def integral_factor(A, dt: float, expA=None, method: str = "auto") -> np.ndarray:
    """``int_0^dt exp(A tau) d tau``, i.e. ``A^-1 (exp(A dt) - I)``.

    ``method`` is ``"inverse"``, ``"series"``, ``"block"`` (augmented matrix
    exponential) or ``"auto"``: the inverse when ``A`` is well conditioned,
    otherwise the power series when ``||A dt|| <= 1`` and the augmented
    exponential beyond that, where the series would lose digits to
    cancellation.
    """
    n = A.shape[0]
    if method == "auto":
        if np.linalg.cond(A) < SINGULAR_COND:
            method = "inverse"
        elif np.linalg.norm(A, 1) * dt <= 1.0:
            method = "series"
        else:
            method = "block"
    if method == "inverse":
        if expA is None:
            expA = expm(A * dt)
        return np.linalg.solve(A, expA - np.eye(n))
    if method == "series":
        return _series_factor(A, dt)
    if method == "block":
        aug = np.zeros((2 * n, 2 * n))
        aug[:n, :n] = A
        aug[:n, n:] = np.eye(n)
        return expm(aug * dt)[:n, n:]
    raise ValueError(f"unknown method {method!r}")


def discrete_propagator(A, dt: float, method: str = "auto"):
    """``(exp(A dt), int_0^dt exp(A tau) d tau)``; raises on a non-finite exponential."""
    with np.errstate(over="ignore", invalid="ignore"):
        expA = expm(A * dt)
    if not np.all(np.isfinite(expA)):
        raise DivergenceError(f"matrix exponential overflowed; dt={dt} is too large for this system")
    return expA, integral_factor(A, dt, expA, method)


def state_step(A1, B1, x_gen, y_gen, v_gen, dt: float) -> np.ndarray:
    """One exact step of ``x~' = A1 x~ + B1 [y~; v~]`` with the input held."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    expA, G = discrete_propagator(A1, dt)
    u = np.concatenate([np.asarray(y_gen, float), np.asarray(v_gen, float)])
    return expA @ np.asarray(x_gen, float) + G @ (B1 @ u)


def smoothness_step(s, F_s, F_ss, dt, s_min=1e-4, s_max=1.0) -> float:
    """Exponential-Euler (local Newton) update of the smoothness, clamped."""
    if not (math.isfinite(F_s) and math.isfinite(F_ss)):
        raise ValueError(f"non-finite free-energy gradients ({F_s}, {F_ss})")
    if abs(F_ss) < FLAT_CURVATURE:
        ds = F_s * dt
    else:
        ds = math.expm1(F_ss * dt) * F_s / F_ss
    return min(max(s + ds, s_min), s_max)


class _Propagator:
    """Discrete observer matrices at one smoothness value."""

    def __init__(self, gsys, cfg: ObserverConfig, s: float):
        self.s = s
        self.gp = generalized_precision(smoothness_precision(cfg.p, s), cfg.noise)
        self.A1, self.B1 = build_observer_matrices(gsys, self.gp, cfg.k_x)
        self.Phi, G = discrete_propagator(self.A1, cfg.dt)
        self.GB = G @ self.B1
        self.growth = math.exp(min(np.linalg.norm(self.A1, 2) * cfg.dt, 700.0))
        self.b_norm = cfg.dt * np.linalg.norm(self.B1, 2)


def _check_dataset(dataset: Dataset, cfg: ObserverConfig):
    plant = cfg.plant
    if dataset.m != plant.m:
        raise ValueError(f"dataset has {dataset.m} outputs, plant has {plant.m}")
    if dataset.r != plant.r:
        raise ValueError(f"dataset has {dataset.r} inputs, plant has {plant.r}")
    if dataset.has_truth and dataset.n != plant.n:
        raise ValueError(f"dataset truth has {dataset.n} states, plant has {plant.n}")
    if not math.isclose(dataset.dt, cfg.dt, rel_tol=1e-9):
        raise ValueError(f"dataset dt={dataset.dt} differs from observer dt={cfg.dt}")
    if dataset.N < cfg.p + 1:
        raise ValueError(f"dataset has {dataset.N} samples, need at least {cfg.p + 1}")


def _run(dataset: Dataset, cfg: ObserverConfig, s0: float, adapt: bool, method: str) -> TrialResult:
    _check_dataset(dataset, cfg)
    plant, n = cfg.plant, cfg.plant.n
    gsys = lift_system(plant, cfg.p, cfg.d)
    Y = embed_sequence(dataset.y, cfg.dt, cfg.p)
    if plant.r:
        V = embed_sequence(dataset.v, cfg.dt, cfg.d)
    else:
        V = np.zeros((dataset.N, 0))
    U = np.hstack([Y, V])
    N = dataset.N

    x = np.zeros((cfg.p + 1) * n)
    s = s0
    est = np.empty((N, n))
    s_traj = np.empty(N)
    F_traj = np.empty(N)
    prop = _Propagator(gsys, cfg, s)
    fe = evaluate(prediction_error(gsys, x, Y[0], V[0]), prop.gp, s, cfg.prior)
    est[0], s_traj[0], F_traj[0] = x[:n], s, fe.F

    for k in range(N - 1):
        if abs(s - prop.s) >= CACHE_DS:
            prop = _Propagator(gsys, cfg, s)
        u = U[k + 1]
        x_new = prop.Phi @ x + prop.GB @ u
        with np.errstate(over="ignore"):
            bound = prop.growth * (np.linalg.norm(x) + prop.b_norm * np.linalg.norm(u))
        norm_new = np.linalg.norm(x_new)
        if not np.isfinite(norm_new) or norm_new > bound * (1 + 1e-9) + 1e-12:
            raise DivergenceError("observer state diverged", step=k + 1)
        x = x_new
        fe = evaluate(prediction_error(gsys, x, Y[k + 1], V[k + 1]), prop.gp, s, cfg.prior)
        if adapt:
            s = smoothness_step(s, fe.F_s, fe.F_ss, cfg.dt, cfg.s_min, cfg.s_max)
        est[k + 1], s_traj[k + 1], F_traj[k + 1] = x[:n], s, fe.F

    total = sse(est, dataset.x) if dataset.has_truth else float("nan")
    return TrialResult(est, s_traj if adapt else None, F_traj, total, method)


def run_dems(dataset: Dataset, cfg: ObserverConfig) -> TrialResult:
    """Joint state and smoothness estimation.

    Each step propagates the generalized state with the current smoothness,
    recomputes the prediction error against the newly reached sample and
    then takes one Newton step on the smoothness.
    """
    return _run(dataset, cfg, cfg.s_init, adapt=True, method="DEMs")


def run_dem_fixed_s(dataset: Dataset, cfg: ObserverConfig, s_fixed: float) -> TrialResult:
    """DEM state estimation with the smoothness held at ``s_fixed``."""
    if not s_fixed > 0:
        raise ValueError(f"s_fixed must be positive, got {s_fixed}")
    return _run(dataset, cfg, float(s_fixed), adapt=False, method="DEM-fixed")
