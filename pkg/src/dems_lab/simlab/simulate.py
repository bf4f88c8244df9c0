"""Plant simulation under colored process and measurement noise."""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from ..datasets import Dataset
from ..gencoord import LinearPlant
from ..noise_model import NoiseSpec, generate_colored_noise

SUBSTEPS = 10


def zoh_matrices(A, dt):
    """``exp(A dt)`` and ``int_0^dt exp(A tau) d tau`` from one augmented exponential."""
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A
    aug[:n, n:] = np.eye(n)
    E = expm(aug * dt)
    return E[:n, :n], E[:n, n:]


def sample_count(T: float, dt: float) -> int:
    return int(round(T / dt)) + 1


def simulate_lti(
    plant: LinearPlant,
    input_fn,
    noise: NoiseSpec,
    T: float,
    dt: float,
    seed=None,
    x0=None,
    *,
    substeps: int = SUBSTEPS,
    noise_gain=None,
    controller=None,
    noiseless: bool = False,
    meta=None,
) -> Dataset:
    """Simulate ``x' = A x + B v + G w``, ``y = C x + z`` on ``[0, T]``.

    The state is propagated exactly on a grid of ``dt/substeps`` with input
    and process noise held over each sub-step. Measurement noise is drawn on
    the ``dt`` grid. ``G`` (``noise_gain``) defaults to the identity, in which
    case ``noise.prec_w`` is ``n x n``; otherwise it matches ``G``'s columns.

    ``input_fn(t)`` gives open-loop inputs on an array of times. A
    ``controller(t, x)`` instead computes the input from the true state once
    per sample and holds it; the applied inputs are what the dataset records.
    ``seed`` overrides ``noise.seed``.
    """
    if not T > dt > 0:
        raise ValueError(f"need T > dt > 0, got T={T}, dt={dt}")
    if seed is not None:
        noise = NoiseSpec(noise.s, noise.prec_w, noise.prec_z, int(seed))
    n, m, r = plant.n, plant.m, plant.r
    G = np.eye(n) if noise_gain is None else np.atleast_2d(np.asarray(noise_gain, dtype=float))
    if G.shape != (n, noise.n):
        raise ValueError(f"noise gain has shape {G.shape}, expected ({n}, {noise.n})")
    if noise.m != m:
        raise ValueError(f"measurement precision is {noise.m}x{noise.m}, plant has {m} outputs")
    N = sample_count(T, dt)
    h = dt / substeps
    M = (N - 1) * substeps + 1
    fine_t = np.arange(M) * h
    times = np.arange(N) * dt

    if input_fn is None:
        v_fine = np.zeros((M, r))
    else:
        v_fine = np.asarray(input_fn(fine_t), dtype=float).reshape(M, r)
    if noiseless:
        w_fine = np.zeros((M, noise.n))
        z = np.zeros((N, m))
    else:
        w_fine = generate_colored_noise(M, h, noise, "process")
        z = generate_colored_noise(N, dt, noise, "measurement")

    Phi, Gam = zoh_matrices(plant.A, h)
    GamB, GamG = Gam @ plant.B, Gam @ G
    drive = w_fine @ GamG.T
    x = np.zeros((M, n))
    x[0] = 0.0 if x0 is None else np.asarray(x0, dtype=float)
    if controller is None:
        drive += v_fine @ GamB.T
        for j in range(M - 1):
            x[j + 1] = Phi @ x[j] + drive[j]
    else:
        for j in range(M - 1):
            if j % substeps == 0:
                v_hold = np.asarray(controller(fine_t[j], x[j]), dtype=float).reshape(r)
            v_fine[j] = v_hold
            x[j + 1] = Phi @ x[j] + GamB @ v_hold + drive[j]
        v_fine[-1] = np.asarray(controller(fine_t[-1], x[-1]), dtype=float).reshape(r)
    if not np.all(np.isfinite(x)):
        bad = int(np.argmax(~np.all(np.isfinite(x), axis=1)))
        raise FloatingPointError(f"non-finite state at t={fine_t[bad]:.6g}")

    idx = np.arange(N) * substeps
    xs = x[idx]
    y = xs @ plant.C.T + z
    info = {"s_real": noise.s, "seed": noise.seed}
    info.update(meta or {})
    return Dataset(dt, times, y, v_fine[idx], xs, w_fine[idx] @ G.T, z, info)
