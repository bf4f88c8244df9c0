"""Colored noise and the smoothness precision structure.

Noise is white Gaussian noise convolved with a Gaussian kernel of width ``s``,
which gives the autocorrelation ``rho(h) = exp(-h**2 / (4 s**2))``. The
covariance between noise derivatives follows from ``rho``'s derivatives at
zero lag; its inverse is the smoothness matrix ``S(s)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

KERNEL_HALF_WIDTH = 6.0  # kernel support is +-6 s


def _check_s(s):
    if not np.isfinite(s) or s <= 0:
        raise ValueError(f"smoothness s must be positive, got {s}")


def _as_precision(P, name: str) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[0] != P.shape[1]:
        raise ValueError(f"{name} must be square, got {P.shape}")
    if not np.allclose(P, P.T, rtol=1e-12, atol=0):
        raise ValueError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} must be positive definite") from None
    return P


@dataclass(frozen=True)
class NoiseSpec:
    """Kernel width plus process/measurement precisions for colored noise."""

    s: float
    prec_w: np.ndarray
    prec_z: np.ndarray
    seed: int = 0

    def __post_init__(self):
        _check_s(self.s)
        object.__setattr__(self, "prec_w", _as_precision(self.prec_w, "prec_w"))
        object.__setattr__(self, "prec_z", _as_precision(self.prec_z, "prec_z"))

    @classmethod
    def isotropic(cls, s, n, m, log_prec_w=6.0, log_prec_z=6.0, seed=0):
        """``prec_w = e**log_prec_w * I_n`` and likewise for ``prec_z``."""
        return cls(s, np.exp(log_prec_w) * np.eye(n), np.exp(log_prec_z) * np.eye(m), seed)

    @property
    def n(self) -> int:
        return self.prec_w.shape[0]

    @property
    def m(self) -> int:
        return self.prec_z.shape[0]


def autocorr_derivatives(s: float, max_order: int) -> np.ndarray:
    """``rho^(k)(0)`` for ``k = 0..max_order`` of ``rho(h) = exp(-h^2/(4 s^2))``."""
    _check_s(s)
    out = np.zeros(max_order + 1)
    a = 1.0 / (2.0 * s * s)
    val = 1.0
    for k in range(0, max_order + 1, 2):
        out[k] = val
        # rho^(2k+2)(0) = -(2k+1) a rho^(2k)(0)
        val *= -(k + 1) * a
    return out


def derivative_covariance(p: int, s: float) -> np.ndarray:
    """Covariance of ``[u, u', ..., u^(p)]`` for unit-variance colored noise."""
    rho = autocorr_derivatives(s, 2 * p)
    i = np.arange(p + 1)
    sign = np.where(i % 2 == 0, 1.0, -1.0)
    return sign[:, None] * rho[i[:, None] + i[None, :]]


@lru_cache(maxsize=None)
def _unit_smoothness(p: int) -> np.ndarray:
    S = np.linalg.inv(derivative_covariance(p, 1.0))
    S = 0.5 * (S + S.T)
    S[(np.add.outer(np.arange(p + 1), np.arange(p + 1)) % 2) == 1] = 0.0
    S.setflags(write=False)
    return S


def _exponents(p):
    i = np.arange(p + 1)
    return np.add.outer(i, i)


@dataclass(frozen=True)
class SmoothnessPrecision:
    p: int
    s: float
    S: np.ndarray = field(repr=False)
    S_s: np.ndarray = field(repr=False)
    S_ss: np.ndarray = field(repr=False)


def smoothness_precision(p: int, s: float) -> SmoothnessPrecision:
    """``S(s)`` and its first two derivatives in ``s``.

    The inverse covariance is computed once at ``s = 1``; entry ``(i, j)``
    scales as ``s**(i+j)``, which is exact and avoids inverting the badly
    conditioned covariance at small ``s``.
    """
    if p < 0:
        raise ValueError(f"order p must be >= 0, got {p}")
    _check_s(s)
    k = _exponents(p)
    with np.errstate(over="raise", under="ignore"):
        try:
            S = _unit_smoothness(p) * s**k
        except FloatingPointError:
            raise np.linalg.LinAlgError(f"smoothness matrix overflows at s={s}, p={p}") from None
    if not np.all(np.isfinite(S)) or S[-1, -1] <= 0.0:
        raise np.linalg.LinAlgError(f"smoothness matrix is ill-conditioned at s={s}, p={p}")
    S_s = k * S / s
    S_ss = k * (k - 1) * S / (s * s)
    return SmoothnessPrecision(p, float(s), S, S_s, S_ss)


@dataclass(frozen=True)
class GeneralizedPrecision:
    """Blocks of ``diag(S (x) Pi_z, S (x) Pi_w)`` and their s-derivatives."""

    p: int
    n: int
    m: int
    s: float
    block_z: np.ndarray = field(repr=False)
    block_w: np.ndarray = field(repr=False)
    block_z_s: np.ndarray = field(repr=False)
    block_w_s: np.ndarray = field(repr=False)
    block_z_ss: np.ndarray = field(repr=False)
    block_w_ss: np.ndarray = field(repr=False)
    log_det: float = 0.0

    @staticmethod
    def _join(bz, bw):
        a, b = bz.shape[0], bw.shape[0]
        out = np.zeros((a + b, a + b))
        out[:a, :a] = bz
        out[a:, a:] = bw
        return out

    def full(self) -> np.ndarray:
        return self._join(self.block_z, self.block_w)

    def full_s(self) -> np.ndarray:
        return self._join(self.block_z_s, self.block_w_s)

    def full_ss(self) -> np.ndarray:
        return self._join(self.block_z_ss, self.block_w_ss)


def generalized_precision(sp: SmoothnessPrecision, noise: NoiseSpec) -> GeneralizedPrecision:
    Pz, Pw = noise.prec_z, noise.prec_w
    n, m = Pw.shape[0], Pz.shape[0]
    _, ld_z = np.linalg.slogdet(Pz)
    _, ld_w = np.linalg.slogdet(Pw)
    log_det = (sp.p + 1) * (ld_z + ld_w) + (n + m) * log_det_S(sp.p, sp.s)
    return GeneralizedPrecision(
        p=sp.p,
        n=n,
        m=m,
        s=sp.s,
        block_z=np.kron(sp.S, Pz),
        block_w=np.kron(sp.S, Pw),
        block_z_s=np.kron(sp.S_s, Pz),
        block_w_s=np.kron(sp.S_s, Pw),
        block_z_ss=np.kron(sp.S_ss, Pz),
        block_w_ss=np.kron(sp.S_ss, Pw),
        log_det=float(log_det),
    )


def log_det_S(p: int, s: float) -> float:
    """``ln det S(s) = ln det S(1) + p(p+1) ln s``."""
    _check_s(s)
    _, ld = np.linalg.slogdet(_unit_smoothness(p))
    return float(ld + p * (p + 1) * np.log(s))


def log_det_precision_grads(p: int, s: float, n: int, m: int) -> tuple[float, float]:
    """First and second ``s``-derivatives of ``ln det`` of the generalized precision."""
    _check_s(s)
    K = p * (p + 1)
    return K * (n + m) / s, -K * (n + m) / (s * s)


def gaussian_kernel(s: float, dt: float) -> np.ndarray:
    """Sampled ``exp(-t^2/(2 s^2))`` on ``|t| <= 6 s``, unit L2 norm."""
    _check_s(s)
    half = int(np.floor(KERNEL_HALF_WIDTH * s / dt + 1e-9))  # guard against 179.99999
    t = np.arange(-half, half + 1) * dt
    g = np.exp(-(t**2) / (2.0 * s * s))
    return g / np.sqrt(np.sum(g * g))


def generate_colored_noise(count: int, dt: float, noise: NoiseSpec, which: str) -> np.ndarray:
    """Colored Gaussian noise samples, shape ``(count, dim)``.

    ``which`` is ``"process"`` (covariance ``prec_w^-1``) or ``"measurement"``
    (``prec_z^-1``). The two streams are independent and each is a pure
    function of ``noise.seed``.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if which == "process":
        prec, stream = noise.prec_w, 0
    elif which == "measurement":
        prec, stream = noise.prec_z, 1
    else:
        raise ValueError(f"which must be 'process' or 'measurement', got {which!r}")
    cov = np.linalg.inv(prec)
    L = np.linalg.cholesky(0.5 * (cov + cov.T))
    g = gaussian_kernel(noise.s, dt)
    rng = np.random.default_rng([int(noise.seed) & 0xFFFFFFFFFFFFFFFF, stream])
    white = rng.standard_normal((count + g.size - 1, prec.shape[0])) @ L.T
    out = np.empty((count, prec.shape[0]))
    for c in range(prec.shape[0]):
        out[:, c] = np.convolve(white[:, c], g, mode="valid")
    return out
