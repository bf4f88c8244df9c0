"""Free energy of the generalized prediction error and its smoothness gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gencoord import GeneralizedSystem
from .noise_model import GeneralizedPrecision, log_det_precision_grads


@dataclass(frozen=True)
class SmoothnessPrior:
    """Gaussian prior on the smoothness: mean ``eta_s``, precision ``prec_s``."""

    eta_s: float = 0.001
    prec_s: float = 1.0

    def __post_init__(self):
        if not self.prec_s > 0:
            raise ValueError(f"prec_s must be positive, got {self.prec_s}")


@dataclass(frozen=True)
class FreeEnergyEval:
    F: float
    F_s: float
    F_ss: float
    eps: np.ndarray


def prediction_error(gsys: GeneralizedSystem, x_gen, y_gen, v_gen) -> np.ndarray:
    """Stacked output and state errors ``[y~ - C~x~ ; Dx~ - A~x~ - B~v~]``."""
    x_gen = np.asarray(x_gen, dtype=float)
    y_gen = np.asarray(y_gen, dtype=float)
    v_gen = np.asarray(v_gen, dtype=float)
    for name, vec, M, axis in (
        ("x_gen", x_gen, gsys.A_gen, 1),
        ("y_gen", y_gen, gsys.C_gen, 0),
        ("v_gen", v_gen, gsys.B_gen, 1),
    ):
        if vec.shape != (M.shape[axis],):
            raise ValueError(f"{name} has shape {vec.shape}, expected ({M.shape[axis]},)")
    eps_y = y_gen - gsys.C_gen @ x_gen
    eps_x = gsys.Dx @ x_gen - gsys.A_gen @ x_gen - gsys.B_gen @ v_gen
    return np.concatenate([eps_y, eps_x])


def _split(eps, gp: GeneralizedPrecision):
    eps = np.asarray(eps, dtype=float)
    nz = gp.block_z.shape[0]
    if eps.shape != (nz + gp.block_w.shape[0],):
        raise ValueError(f"error vector has shape {eps.shape}, expected ({nz + gp.block_w.shape[0]},)")
    if not np.all(np.isfinite(eps)):
        raise ValueError("error vector has non-finite entries")
    return eps[:nz], eps[nz:]


def _quad(ez, ew, Mz, Mw) -> float:
    return float(ez @ Mz @ ez + ew @ Mw @ ew)


def precision_forms(eps, gp: GeneralizedPrecision) -> tuple[float, float, float]:
    """``eps' Pi eps``, ``eps' Pi_s eps`` and ``eps' Pi_ss eps``, blockwise."""
    ez, ew = _split(eps, gp)
    return (
        _quad(ez, ew, gp.block_z, gp.block_w),
        _quad(ez, ew, gp.block_z_s, gp.block_w_s),
        _quad(ez, ew, gp.block_z_ss, gp.block_w_ss),
    )


def free_energy(eps, gp: GeneralizedPrecision, s: float, prior: SmoothnessPrior = SmoothnessPrior()) -> float:
    if not s > 0:
        raise ValueError(f"smoothness s must be positive, got {s}")
    ez, ew = _split(eps, gp)
    err = _quad(ez, ew, gp.block_z, gp.block_w)
    return (
        -0.5 * err
        + 0.5 * gp.log_det
        - 0.5 * prior.prec_s * (s - prior.eta_s) ** 2
        + 0.5 * np.log(prior.prec_s)
    )


def free_energy_grads(
    eps, gp: GeneralizedPrecision, s: float, prior: SmoothnessPrior = SmoothnessPrior()
) -> tuple[float, float]:
    """``dF/ds`` and ``d2F/ds2`` with the log-determinant terms in closed form."""
    if not s > 0:
        raise ValueError(f"smoothness s must be positive, got {s}")
    ez, ew = _split(eps, gp)
    q_s = _quad(ez, ew, gp.block_z_s, gp.block_w_s)
    q_ss = _quad(ez, ew, gp.block_z_ss, gp.block_w_ss)
    ld_s, ld_ss = log_det_precision_grads(gp.p, s, gp.n, gp.m)
    F_s = -0.5 * q_s + 0.5 * ld_s - prior.prec_s * (s - prior.eta_s)
    F_ss = -0.5 * q_ss + 0.5 * ld_ss - prior.prec_s
    return F_s, F_ss


def evaluate(eps, gp: GeneralizedPrecision, s: float, prior: SmoothnessPrior = SmoothnessPrior()) -> FreeEnergyEval:
    F = free_energy(eps, gp, s, prior)
    F_s, F_ss = free_energy_grads(eps, gp, s, prior)
    return FreeEnergyEval(F, F_s, F_ss, np.asarray(eps, dtype=float))


def stationarity_residual(
    eps, gp: GeneralizedPrecision, s: float, prior: SmoothnessPrior = SmoothnessPrior(eta_s=0.0)
) -> float:
    """Left minus right side of the stationary-point condition.

    ``0.5 eps' Pi_s eps - K(n+m)/(2s) + prec_s (s - eta_s)``, which is ``-dF/ds``
    and vanishes exactly at stationary points of the free energy.
    """
    F_s, _ = free_energy_grads(eps, gp, s, prior)
    return -F_s
