"""Generalized coordinates: shift operators, Kronecker lifts and Taylor embedding.

A generalized vector stacks a signal with its time derivatives,
``[u, u', u'', ...]``, derivative-major: every channel of ``u`` first, then
every channel of ``u'`` and so on. With that layout the lifted system
matrices are literal Kronecker products ``I_{p+1} (x) M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np


@dataclass(frozen=True)
class LinearPlant:
    """Continuous-time LTI plant ``x' = A x + B v + w``, ``y = C x + z``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        n = A.shape[0]
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {C.shape}")
        for name, M in (("A", A), ("B", B), ("C", C)):
            if not np.all(np.isfinite(M)):
                raise ValueError(f"{name} has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.C.shape[0]


def shift_matrix(p: int, block_dim: int = 1) -> np.ndarray:
    """Block shift (derivative) operator of size ``(p+1)*block_dim``.

    Identity blocks sit on the first block superdiagonal, so applying it to a
    generalized vector moves every derivative block up one slot and zeros the
    last one.
    """
    if p < 0:
        raise ValueError(f"order p must be >= 0, got {p}")
    if block_dim < 1:
        raise ValueError(f"block_dim must be >= 1, got {block_dim}")
    return np.kron(np.eye(p + 1, k=1), np.eye(block_dim))


def input_selector(p: int, d: int) -> np.ndarray:
    """``(p+1) x (d+1)`` matrix: identity on top, zero rows below."""
    return np.eye(p + 1, d + 1)


@dataclass(frozen=True)
class GeneralizedSystem:
    plant: LinearPlant
    p: int
    d: int
    A_gen: np.ndarray = field(repr=False)
    B_gen: np.ndarray = field(repr=False)
    C_gen: np.ndarray = field(repr=False)
    Dx: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.plant.n

    @property
    def r(self) -> int:
        return self.plant.r

    @property
    def m(self) -> int:
        return self.plant.m


def lift_system(plant: LinearPlant, p: int, d: int) -> GeneralizedSystem:
    """Kronecker-lift ``plant`` to state order ``p`` and input order ``d``.

    Input derivative slots above ``d`` are zero-padded so that ``B_gen`` maps
    a ``(d+1)r`` generalized input into the ``(p+1)n`` state space.
    """
    if p < 0 or d < 0:
        raise ValueError("embedding orders must be non-negative")
    if d > p:
        raise ValueError(f"input order d={d} exceeds state order p={p}")
    eye = np.eye(p + 1)
    return GeneralizedSystem(
        plant=plant,
        p=p,
        d=d,
        A_gen=np.kron(eye, plant.A),
        B_gen=np.kron(input_selector(p, d), plant.B),
        C_gen=np.kron(eye, plant.C),
        Dx=shift_matrix(p, plant.n),
    )


def taylor_matrix(offsets, dt: float, q: int) -> np.ndarray:
    """``E[i, j] = (offset_i * dt)**j / j!`` for integer sample offsets."""
    tau = np.asarray(offsets, dtype=float) * dt
    return np.stack([tau**j / factorial(j) for j in range(q + 1)], axis=1)


def _embedding_operator(length: int, dt: float, q: int, center: int) -> np.ndarray:
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if q < 0:
        raise ValueError(f"order q must be >= 0, got {q}")
    if length < q + 1:
        raise ValueError(f"window of {length} samples is too short for order {q}")
    if not 0 <= center < length:
        raise ValueError(f"center index {center} outside window of {length}")
    E = taylor_matrix(np.arange(length) - center, dt, q)
    # scale columns by dt**j first: the raw matrix is badly conditioned for small dt
    scale = dt ** np.arange(q + 1)
    En = E / scale
    if np.linalg.cond(En) > 1e12:
        raise np.linalg.LinAlgError("Taylor expansion matrix is singular")
    return np.linalg.pinv(En) / scale[:, None]


def taylor_embed(window, dt: float, q: int, center: int) -> np.ndarray:
    """Estimate ``[u, u', ..., u^(q)]`` at ``window[center]``.

    ``window`` has shape ``(L,)`` or ``(L, base_dim)``. With ``L == q+1`` the
    Taylor matrix is inverted exactly; longer windows give the least-squares
    fit. Exact for polynomials of degree <= q.
    """
    w = np.asarray(window, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    op = _embedding_operator(w.shape[0], dt, q, center)
    return (op @ w).reshape(-1)


def embed_sequence(signal, dt: float, q: int) -> np.ndarray:
    """Generalized coordinates of every sample of a uniformly sampled signal.

    Uses a centered ``q+1`` sample window; near the ends the window is shifted
    to stay inside the record and the center index moves with it.

    Returns an array of shape ``(N, (q+1)*base_dim)``.
    """
    y = np.asarray(signal, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    N, dim = y.shape
    L = q + 1
    if N < L:
        raise ValueError(f"need at least {L} samples to embed at order {q}, got {N}")
    half = q // 2
    out = np.empty((N, L * dim))
    ops = {}
    for k in range(N):
        start = min(max(k - half, 0), N - L)
        center = k - start
        if center not in ops:
            ops[center] = _embedding_operator(L, dt, q, center)
        out[k] = (ops[center] @ y[start:start + L]).reshape(-1)
    return out


def taylor_reconstruct(gen, dt: float, q: int, length: int, center: int) -> np.ndarray:
    """Inverse of :func:`taylor_embed`: sample the Taylor polynomial on the window."""
    g = np.asarray(gen, dtype=float).reshape(q + 1, -1)
    E = taylor_matrix(np.arange(length) - center, dt, q)
    return E @ g
