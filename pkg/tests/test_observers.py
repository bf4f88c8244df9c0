import numpy as np
import pytest

from dems_lab import observers
from dems_lab.gencoord import lift_system
from dems_lab.noise_model import generalized_precision, smoothness_precision
from dems_lab.observers import (
    DivergenceError,
    ObserverConfig,
    build_observer_matrices,
    integral_factor,
    run_dem_fixed_s,
    run_dems,
    smoothness_step,
    state_step,
)
from dems_lab.simlab import observer_config


def matrices(sc, s=0.5, k_x=1.0):
    g = lift_system(sc.plant, 6, 2)
    gp = generalized_precision(smoothness_precision(6, s), sc.observer_noise(s))
    return g, build_observer_matrices(g, gp, k_x)


def test_observer_matrix_shapes_and_structure(sc):
    g, (A1, B1) = matrices(sc)
    assert A1.shape == (14, 14) and B1.shape == (14, 31)
    sym = A1 - g.Dx
    np.testing.assert_allclose(sym, sym.T, rtol=1e-12, atol=1e-9)
    assert np.linalg.eigvalsh(0.5 * (sym + sym.T)).max() <= 1e-9 * np.abs(sym).max()

    _, (A0, B0) = matrices(sc, k_x=0.0)
    np.testing.assert_array_equal(A0, g.Dx)
    assert not np.any(B0)


def test_state_step_fixed_point(sc, rng):
    _, (A1, B1) = matrices(sc)
    u = rng.normal(size=31)
    x_star = -np.linalg.solve(A1, B1 @ u)
    x_next = state_step(A1, B1, x_star, u[:28], u[28:], 0.1)
    assert np.max(np.abs(x_next - x_star)) <= 1e-10


def test_state_step_small_dt_is_identity(sc, rng):
    _, (A1, B1) = matrices(sc)
    x = rng.normal(size=14)
    u = rng.normal(size=31)
    np.testing.assert_allclose(state_step(A1, B1, x, u[:28], u[28:], 1e-12), x, rtol=1e-8, atol=1e-8)
    with pytest.raises(ValueError):
        state_step(A1, B1, x, u[:28], u[28:], 0.0)


def test_integral_factor_paths_agree(rng):
    A = rng.normal(size=(5, 5)) - 3 * np.eye(5)
    dt = 0.1
    ref = integral_factor(A, dt, method="inverse")
    for method in ("series", "block", "auto"):
        np.testing.assert_allclose(integral_factor(A, dt, method=method), ref, rtol=1e-10)
    # singular generator: the inverse path is unusable but the others are exact
    D = np.eye(4, k=1)
    expected = dt * np.eye(4) + dt**2 / 2 * D + dt**3 / 6 * D @ D + dt**4 / 24 * D @ D @ D
    np.testing.assert_allclose(integral_factor(D, dt), expected, rtol=1e-13)
    np.testing.assert_allclose(integral_factor(D, 50.0), integral_factor(D, 50.0, method="block"), rtol=1e-12)
    with pytest.raises(ValueError):
        integral_factor(A, dt, method="nope")


def test_smoothness_step_limits():
    assert smoothness_step(0.3, 0.0, -5.0, 0.1) == 0.3
    assert smoothness_step(0.3, 0.2, -1.0, 1e6) == pytest.approx(0.5)
    assert smoothness_step(0.3, 0.2, -1e-12, 0.1) == pytest.approx(0.3 + 0.02)
    assert smoothness_step(0.3, 0.2, -1e-6, 0.1) == pytest.approx(0.3 + 0.02, rel=1e-6)
    assert smoothness_step(0.9, 100.0, -1.0, 1.0) == 1.0
    assert smoothness_step(0.001, -100.0, -1.0, 1.0) == 1e-4
    with pytest.raises(ValueError):
        smoothness_step(0.3, np.nan, -1.0, 0.1)


def test_config_validation(sc):
    with pytest.raises(ValueError):
        observer_config(sc, 0.5, 0.0)
    with pytest.raises(ValueError):
        observer_config(sc, 0.5, 0.1, s_init=2.0)
    with pytest.raises(ValueError):
        ObserverConfig(sc.plant, sc.observer_noise(0.5), 0.1, p=2, d=3)
    with pytest.raises(ValueError):
        observer_config(sc, 0.5, 0.1, s_min=0.5, s_max=0.2)


def test_dataset_mismatch_rejected(sc, short_dataset):
    with pytest.raises(ValueError, match="dt"):
        run_dems(short_dataset, observer_config(sc, 0.5, 0.05))


def test_run_dems_is_deterministic_and_bounded(sc, short_dataset):
    cfg = observer_config(sc, 0.5, short_dataset.dt)
    a, b = run_dems(short_dataset, cfg), run_dems(short_dataset, cfg)
    np.testing.assert_array_equal(a.estimates, b.estimates)
    np.testing.assert_array_equal(a.s_traj, b.s_traj)
    assert a.sse == b.sse
    assert np.all((a.s_traj >= cfg.s_min) & (a.s_traj <= cfg.s_max))
    assert a.estimates.shape == (short_dataset.N, 2)


def test_pinned_bounds_equal_fixed_smoothness(sc, short_dataset):
    s0 = 0.37
    cfg = observer_config(sc, 0.5, short_dataset.dt, s_init=s0, s_min=s0, s_max=s0)
    a = run_dems(short_dataset, cfg)
    b = run_dem_fixed_s(short_dataset, cfg, s0)
    np.testing.assert_array_equal(a.estimates, b.estimates)
    np.testing.assert_array_equal(a.F_traj, b.F_traj)
    assert np.all(a.s_traj == s0)
    assert b.s_traj is None


def test_propagator_cache_matches_recomputation(sc, short_dataset, monkeypatch):
    cfg = observer_config(sc, 0.5, short_dataset.dt)
    cached = run_dem_fixed_s(short_dataset, cfg, 0.5)
    monkeypatch.setattr(observers, "CACHE_DS", -1.0)  # rebuild every step
    fresh = run_dem_fixed_s(short_dataset, cfg, 0.5)
    np.testing.assert_array_equal(cached.estimates, fresh.estimates)


def test_divergence_tripwire(sc, short_dataset):
    # an anti-stable k_x flips the correction into positive feedback
    cfg = observer_config(sc, 0.5, short_dataset.dt, k_x=-1.0)
    with pytest.raises(DivergenceError) as info:
        run_dem_fixed_s(short_dataset, cfg, 0.5)
    assert info.value.step is None or info.value.step >= 0


def test_fixed_smoothness_sse_is_lowest_at_truth(sc):
    s_real = 0.5
    grid = (0.2, 0.5, 0.8)
    sse = {a: [] for a in grid}
    for seed in range(3):
        ds = sc.simulate(s_real, seed)
        cfg = observer_config(sc, s_real, ds.dt)
        for a in grid:
            sse[a].append(run_dem_fixed_s(ds, cfg, a).sse)
    med = {a: np.median(v) for a, v in sse.items()}
    assert med[0.5] < med[0.2] and med[0.5] < med[0.8]


def test_convergence_example(sc):
    ds = sc.simulate(0.4, 1)
    res = run_dems(ds, observer_config(sc, 0.4, ds.dt))
    assert abs(res.s_traj[-1] - 0.4) <= 0.2
