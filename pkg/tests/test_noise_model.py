import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dems_lab.noise_model import (
    NoiseSpec,
    autocorr_derivatives,
    derivative_covariance,
    gaussian_kernel,
    generalized_precision,
    generate_colored_noise,
    log_det_S,
    log_det_precision_grads,
    smoothness_precision,
)


def published_S(s):
    """The published p = 6 smoothness matrix, entry by entry."""
    S = np.zeros((7, 7))
    entries = {
        (0, 0): 35 / 16, (0, 2): 35 / 8 * s**2, (0, 4): 7 / 4 * s**4, (0, 6): s**6 / 6,
        (1, 1): 35 / 4 * s**2, (1, 3): 7 * s**4, (1, 5): s**6,
        (2, 2): 77 / 4 * s**4, (2, 4): 19 / 2 * s**6, (2, 6): s**8,
        (3, 3): 8 * s**6, (3, 5): 4 / 3 * s**8,
        (4, 4): 17 / 3 * s**8, (4, 6): 2 / 3 * s**10,
        (5, 5): 4 / 15 * s**10,
        (6, 6): 4 / 45 * s**12,
    }
    for (i, j), v in entries.items():
        S[i, j] = S[j, i] = v
    return S


def test_autocorr_derivatives():
    assert autocorr_derivatives(0.3, 0)[0] == 1.0
    assert autocorr_derivatives(0.5, 2)[2] == pytest.approx(-2.0)
    assert autocorr_derivatives(1.0, 4)[4] == pytest.approx(0.75)
    assert not np.any(autocorr_derivatives(0.7, 7)[1::2])


def test_derivative_covariance_small_orders():
    s = 0.4
    a = 1 / (2 * s * s)
    np.testing.assert_allclose(derivative_covariance(1, s), [[1, 0], [0, a]], rtol=1e-14)
    np.testing.assert_allclose(derivative_covariance(2, s), [[1, 0, -a], [0, a, 0], [-a, 0, 3 * a * a]], rtol=1e-14)
    C = derivative_covariance(6, 0.3)
    np.testing.assert_array_equal(C, C.T)


@pytest.mark.parametrize("s", [0.1, 0.5, 1.0])
def test_smoothness_matrix_matches_published_entries(s):
    S = smoothness_precision(6, s).S
    ref = published_S(s)
    nz = ref != 0
    np.testing.assert_allclose(S[nz], ref[nz], rtol=1e-10)
    assert not np.any(S[~nz])
    assert np.linalg.det(S) == pytest.approx(512 / 6075 * s**42, rel=1e-8)


def test_smoothness_small_orders():
    s = 0.6
    np.testing.assert_allclose(smoothness_precision(0, s).S, [[1.0]])
    np.testing.assert_allclose(
        smoothness_precision(2, s).S, [[1.5, 0, s**2], [0, 2 * s**2, 0], [s**2, 0, 2 * s**4]], rtol=1e-12
    )


@given(p=st.integers(0, 6), s=st.floats(0.05, 1.0), lam=st.sampled_from([0.5, 2.0]))
def test_scaling_law(p, s, lam):
    k = np.add.outer(np.arange(p + 1), np.arange(p + 1))
    np.testing.assert_allclose(
        smoothness_precision(p, lam * s).S, lam**k * smoothness_precision(p, s).S, rtol=1e-12, atol=0
    )


@settings(max_examples=25)
@given(p=st.integers(1, 6), s=st.floats(0.1, 0.9))
def test_derivatives_match_finite_differences(p, s):
    h = 1e-5
    sp = smoothness_precision(p, s)
    lo, hi = smoothness_precision(p, s - h).S, smoothness_precision(p, s + h).S
    fd_s = (hi - lo) / (2 * h)
    fd_ss = (hi - 2 * sp.S + lo) / h**2
    big = np.abs(sp.S_s) > 1e-8 * np.abs(sp.S_s).max()
    np.testing.assert_allclose(sp.S_s[big], fd_s[big], rtol=1e-5)
    big = np.abs(sp.S_ss) > 1e-3 * np.abs(sp.S_ss).max()
    np.testing.assert_allclose(sp.S_ss[big], fd_ss[big], rtol=1e-3)


def test_smoothness_is_spd_and_rejects_bad_s():
    for s in (0.05, 0.3, 1.0):
        assert np.linalg.eigvalsh(smoothness_precision(6, s).S).min() > 0
    with pytest.raises(ValueError):
        smoothness_precision(6, 0.0)
    with pytest.raises(ValueError):
        smoothness_precision(-1, 0.5)


def test_generalized_precision():
    e6 = np.exp(6.0)
    gp = generalized_precision(smoothness_precision(0, 0.3), NoiseSpec.isotropic(0.3, 2, 4))
    np.testing.assert_allclose(gp.full(), e6 * np.eye(6))

    gp = generalized_precision(smoothness_precision(6, 0.5), NoiseSpec.isotropic(0.5, 2, 4))
    full = gp.full()
    assert full.shape == (42, 42)
    np.testing.assert_array_equal(full[:28, 28:], 0)
    assert np.linalg.eigvalsh(full).min() > 0
    _, ld = np.linalg.slogdet(full)
    assert gp.log_det == pytest.approx(ld, rel=1e-10)


def test_log_det_S():
    assert log_det_S(6, 1.0) == pytest.approx(np.log(512 / 6075), abs=1e-12)
    assert log_det_S(6, 1.0) == pytest.approx(-2.473613, abs=1e-6)
    assert log_det_S(6, 0.3) - log_det_S(6, 1.0) == pytest.approx(42 * np.log(0.3), rel=1e-12)
    assert log_det_S(2, 1.0) == pytest.approx(np.log(4.0), rel=1e-12)


def test_log_det_precision_grads():
    assert log_det_precision_grads(6, 0.5, 2, 4) == pytest.approx((504.0, -1008.0), rel=1e-15)
    assert log_det_precision_grads(0, 0.5, 2, 4) == (0.0, 0.0)
    noise = NoiseSpec.isotropic(0.5, 2, 4)

    def ld(s):
        return generalized_precision(smoothness_precision(6, s), noise).log_det

    for s in (0.2, 0.5, 0.9):
        h = 1e-4 * s
        first, second = log_det_precision_grads(6, s, 2, 4)
        assert first == 42 * 6 / s
        assert (ld(s + h) - ld(s - h)) / (2 * h) == pytest.approx(first, rel=1e-6)
        assert (ld(s + h) - 2 * ld(s) + ld(s - h)) / h**2 == pytest.approx(second, rel=1e-5)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(-0.1, np.eye(2), np.eye(1))
    with pytest.raises(ValueError):
        NoiseSpec(0.1, [[1, 2], [2, 1]], np.eye(1))
    with pytest.raises(ValueError):
        NoiseSpec(0.1, [[1, 0.5], [0, 1]], np.eye(1))


def test_kernel_has_unit_energy():
    g = gaussian_kernel(0.3, 0.01)
    assert np.sum(g**2) == pytest.approx(1.0)
    assert g.size == 2 * 180 + 1


def test_colored_noise_is_deterministic_and_streams_differ():
    noise = NoiseSpec(0.2, np.eye(2), np.eye(3), seed=7)
    a = generate_colored_noise(500, 0.05, noise, "process")
    np.testing.assert_array_equal(a, generate_colored_noise(500, 0.05, noise, "process"))
    assert generate_colored_noise(500, 0.05, noise, "measurement").shape == (500, 3)
    with pytest.raises(ValueError):
        generate_colored_noise(10, 0.05, noise, "other")


def _autocorr(x, lag):
    x = x - x.mean()
    return float(np.dot(x[:-lag], x[lag:]) / np.dot(x, x))


def test_colored_noise_statistics():
    N = 100_000
    near_white = generate_colored_noise(N, 0.1, NoiseSpec(0.01, [[1.0]], [[1.0]], seed=1), "process")[:, 0]
    assert abs(_autocorr(near_white, 1)) < 0.1

    var = 0.25
    x = generate_colored_noise(N, 0.05, NoiseSpec(0.5, [[1 / var]], [[1.0]], seed=2), "process")[:, 0]
    assert np.var(x) == pytest.approx(var, rel=0.05)

    s, dt = 0.4, 0.05
    x = generate_colored_noise(N, dt, NoiseSpec(s, [[1.0]], [[1.0]], seed=3), "process")[:, 0]
    # standard error of a correlated sample autocorrelation, via the effective sample size
    tau = np.sqrt(2 * np.pi) * s / dt
    se = np.sqrt(2 * tau / N)
    for lag in (1, 2, 4):
        assert abs(_autocorr(x, lag) - np.exp(-(lag * dt) ** 2 / (4 * s * s))) < 3 * se
