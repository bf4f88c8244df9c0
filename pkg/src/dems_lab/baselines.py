"""Kalman-filter baselines: white-noise KF, state augmentation (SA) and SMIKF.

All three run on the same sampled model::

    x[k+1] = Ad x[k] + Bd v[k] + q[k],    y[k] = C x[k] + z[k]

where ``q`` has covariance ``Qd`` and, for SA and SMIKF, follows an AR model
fitted to the colored-noise autocorrelation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_discrete_lyapunov, solve_toeplitz

from .datasets import Dataset, TrialResult, sse
from .gencoord import LinearPlant
from .simlab.simulate import zoh_matrices


class FilterError(RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


@dataclass(frozen=True)
class DiscretePlant:
    Ad: np.ndarray
    Bd: np.ndarray
    C: np.ndarray
    Qd: np.ndarray
    Rd: np.ndarray
    dt: float

    @property
    def n(self) -> int:
        return self.Ad.shape[0]


def discretize_lti(plant: LinearPlant, dt: float, cov_w, cov_z) -> DiscretePlant:
    """Zero-order-hold discretization with ``Qd = cov_w * dt`` and ``Rd = cov_z``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    Ad, G = zoh_matrices(plant.A, dt)
    if not (np.all(np.isfinite(Ad)) and np.all(np.isfinite(G))):
        raise FloatingPointError("matrix exponential is not finite")
    cov_w = np.atleast_2d(np.asarray(cov_w, dtype=float))
    cov_z = np.atleast_2d(np.asarray(cov_z, dtype=float))
    return DiscretePlant(Ad, G @ plant.B, plant.C.copy(), cov_w * dt, cov_z, dt)


@dataclass(frozen=True)
class ArModel:
    """Per-channel AR(q): ``u[k] = sum_i coeffs[i-1, c] u[k-i] + xi[k]``."""

    coeffs: np.ndarray  # (q, channels)
    innovation_var: np.ndarray  # (channels,)
    gamma: np.ndarray  # (q+1, channels) autocovariance used for the fit

    @property
    def order(self) -> int:
        return self.coeffs.shape[0]

    @property
    def channels(self) -> int:
        return self.coeffs.shape[1]

    def companion(self, channel: int) -> np.ndarray:
        q = self.order
        F = np.zeros((q, q))
        F[0] = self.coeffs[:, channel]
        F[1:, :-1] = np.eye(q - 1)
        return F

    def spectral_radius(self) -> float:
        return max(np.max(np.abs(np.linalg.eigvals(self.companion(c)))) for c in range(self.channels))


def fit_ar(autocovariance, q: int) -> ArModel:
    """Yule-Walker fit from ``gamma[0..q]`` (one column per channel)."""
    if q < 1:
        raise ValueError(f"AR order must be >= 1, got {q}")
    g = np.asarray(autocovariance, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    if g.shape[0] < q + 1:
        raise ValueError(f"need {q + 1} autocovariance lags, got {g.shape[0]}")
    g = g[: q + 1]
    coeffs = np.empty((q, g.shape[1]))
    innov = np.empty(g.shape[1])
    for c in range(g.shape[1]):
        if not g[0, c] > 0:
            raise ValueError("gamma(0) must be positive")
        T = g[:q, c]
        cond = np.linalg.cond(np.array([[T[abs(i - j)] for j in range(q)] for i in range(q)]))
        if not np.isfinite(cond) or cond > 1e15:
            raise LinAlgError("Yule-Walker Toeplitz system is singular")
        coeffs[:, c] = solve_toeplitz(T, g[1:, c])
        innov[c] = g[0, c] - coeffs[:, c] @ g[1:, c]
    return ArModel(coeffs, innov, g)


def gaussian_autocovariance(var, s: float, dt: float, q: int) -> np.ndarray:
    """``var * exp(-(k dt)^2 / (4 s^2))`` for lags ``k = 0..q``."""
    var = np.atleast_1d(np.asarray(var, dtype=float))
    lags = np.arange(q + 1) * dt
    return np.exp(-(lags**2) / (4.0 * s * s))[:, None] * var[None, :]


def _symmetrize(P):
    return 0.5 * (P + P.T)


def _kalman_gain(P, C, R, step):
    Sk = C @ P @ C.T + R
    try:
        L = np.linalg.cholesky(_symmetrize(Sk))
    except np.linalg.LinAlgError:
        raise FilterError("innovation covariance is not positive definite", step) from None
    # K = P C' S^-1
    return np.linalg.solve(L.T, np.linalg.solve(L, C @ P)).T


def _check(dataset: Dataset, dp: DiscretePlant):
    if dataset.m != dp.C.shape[0]:
        raise ValueError(f"dataset has {dataset.m} outputs, model has {dp.C.shape[0]}")
    if dataset.r != dp.Bd.shape[1]:
        raise ValueError(f"dataset has {dataset.r} inputs, model has {dp.Bd.shape[1]}")
    if not np.isclose(dataset.dt, dp.dt, rtol=1e-9):
        raise ValueError(f"dataset dt={dataset.dt} differs from model dt={dp.dt}")


def _finish(dataset, est, method):
    total = sse(est, dataset.x) if dataset.has_truth else float("nan")
    return TrialResult(est, None, None, total, method)


def run_kf(dataset: Dataset, dp: DiscretePlant, P0=None) -> TrialResult:
    """Standard predict/update Kalman filter; estimates are the posterior means."""
    _check(dataset, dp)
    n = dp.n
    I = np.eye(n)
    x = np.zeros(n)
    P = np.eye(n) if P0 is None else np.asarray(P0, dtype=float)
    est = np.empty((dataset.N, n))
    for k in range(dataset.N):
        if k > 0:
            x = dp.Ad @ x + dp.Bd @ dataset.v[k - 1]
            P = _symmetrize(dp.Ad @ P @ dp.Ad.T + dp.Qd)
        K = _kalman_gain(P, dp.C, dp.Rd, k)
        x = x + K @ (dataset.y[k] - dp.C @ x)
        P = _symmetrize((I - K @ dp.C) @ P)
        est[k] = x
    return _finish(dataset, est, "KF")


def run_sa(dataset: Dataset, dp: DiscretePlant, ar: ArModel, P0=None) -> TrialResult:
    """Kalman filter on the state augmented with ``q`` lags of the process noise.

    Augmented state ``[x[k]; q[k]; q[k-1]; ...; q[k-order+1]]``. Measurement
    noise keeps its white marginal model.
    """
    _check(dataset, dp)
    n, q = dp.n, ar.order
    if ar.channels != n:
        raise ValueError(f"AR model has {ar.channels} channels, state has {n}")
    if ar.spectral_radius() >= 1.0:
        raise FilterError("AR companion matrix is not stable")
    na = n * (1 + q)
    F = np.zeros((na, na))
    F[:n, :n] = dp.Ad
    F[:n, n:2 * n] = np.eye(n)
    for i in range(q):
        F[n:2 * n, n * (1 + i):n * (2 + i)] = np.diag(ar.coeffs[i])
    if q > 1:
        F[2 * n:, n:-n] = np.eye(n * (q - 1))
    Bu = np.zeros((na, dp.Bd.shape[1]))
    Bu[:n] = dp.Bd
    Q = np.zeros((na, na))
    Q[n:2 * n, n:2 * n] = np.diag(ar.innovation_var)
    H = np.zeros((dp.C.shape[0], na))
    H[:, :n] = dp.C

    # stationary covariance of the stacked noise lags
    P = np.zeros((na, na))
    P[:n, :n] = np.eye(n) if P0 is None else np.asarray(P0, dtype=float)
    for i in range(q):
        for j in range(q):
            P[n * (1 + i):n * (2 + i), n * (1 + j):n * (2 + j)] = np.diag(ar.gamma[abs(i - j)])

    I = np.eye(na)
    xa = np.zeros(na)
    est = np.empty((dataset.N, n))
    for k in range(dataset.N):
        if k > 0:
            xa = F @ xa + Bu @ dataset.v[k - 1]
            P = _symmetrize(F @ P @ F.T + Q)
        K = _kalman_gain(P, H, dp.Rd, k)
        xa = xa + K @ (dataset.y[k] - H @ xa)
        P = _symmetrize((I - K @ H) @ P)
        if not np.all(np.isfinite(xa)):
            raise FilterError("state augmentation filter diverged", k)
        est[k] = xa[:n]
    return _finish(dataset, est, "SA")


def run_smikf(dataset: Dataset, dp: DiscretePlant, ar: ArModel, P0=None) -> TrialResult:
    """Kalman filter carrying the state/noise cross-covariance of AR(1) noise."""
    _check(dataset, dp)
    n = dp.n
    if ar.order != 1:
        raise ValueError(f"SMIKF needs an AR(1) model, got order {ar.order}")
    if ar.channels != n:
        raise ValueError(f"AR model has {ar.channels} channels, state has {n}")
    phi = np.diag(ar.coeffs[0])
    if np.max(np.abs(np.diag(phi))) >= 1.0:
        raise FilterError("AR(1) coefficient is not stationary")
    Q_xi = np.diag(ar.innovation_var)
    Sigma_w = solve_discrete_lyapunov(phi, Q_xi)

    I = np.eye(n)
    x = np.zeros(n)
    P = np.eye(n) if P0 is None else np.asarray(P0, dtype=float)
    M = np.zeros((n, n))
    C, Ad = dp.C, dp.Ad
    est = np.empty((dataset.N, n))
    for k in range(dataset.N):
        if k > 0:
            x = Ad @ x + dp.Bd @ dataset.v[k - 1]
            AM = Ad @ M
            P = _symmetrize(Ad @ P @ Ad.T + AM + AM.T + Sigma_w)
        K = _kalman_gain(P, C, dp.Rd, k)
        x = x + K @ (dataset.y[k] - C @ x)
        P = _symmetrize((I - K @ C) @ P)
        if k > 0:
            M = (I - K @ C) @ (Ad @ M + Sigma_w) @ phi.T
        est[k] = x
    return _finish(dataset, est, "SMIKF")
