import numpy as np
import pytest

from dems_lab.datasets import Dataset, read_dataset, sse, write_dataset
from dems_lab.simlab import (
    benchmark_suite,
    derive_seed,
    embedding_sweep,
    fe_landscape,
    get_scenario,
    median_sse,
    mismatch_sweep,
    observer_config,
    quadrant_analysis,
    read_records,
    records_to_csv,
    scenario_paper_system,
    scenario_quadrotor,
    simulate_lti,
    unique_maximum_check,
)
from dems_lab.simlab.scenarios import C_B_PHI, I_XX, gaussian_bump
from dems_lab.simlab.simulate import zoh_matrices


def test_benchmark_plant():
    plant = scenario_paper_system()
    assert (plant.n, plant.r, plant.m) == (2, 1, 4)
    assert plant.A[0, 0] == 0.0484
    np.testing.assert_array_equal(plant.B[:, 0], [0.3604, 0.0776])
    assert plant.C[3, 1] == -0.9290
    assert np.all(np.linalg.eigvals(plant.A).real < 0)


def test_quadrotor_plant():
    plant = scenario_quadrotor()
    assert C_B_PHI / I_XX == pytest.approx(0.3747, abs=1e-4)
    assert plant.B[1, 0] == -plant.B[1, 1]
    np.testing.assert_array_equal(plant.C, [[1.0, 0.0]])


def test_bump_input_peaks_at_twelve():
    assert gaussian_bump(12.0)[0] == 1.0


def test_simulation_basics(sc):
    zero = simulate_lti(sc.plant, None, sc.observer_noise(0.3), 5.0, 0.1, noiseless=True)
    assert zero.N == 51
    for a in (zero.y, zero.v, zero.x, zero.w, zero.z):
        assert not np.any(a)
    a, b = sc.simulate(0.3, 11, T=5.0), sc.simulate(0.3, 11, T=5.0)
    assert a.equals(b)
    assert not a.equals(sc.simulate(0.3, 12, T=5.0))
    with pytest.raises(ValueError):
        simulate_lti(sc.plant, None, sc.observer_noise(0.3), 0.05, 0.1)


def test_noiseless_propagation_identity(sc):
    dt = 0.1
    ds = simulate_lti(sc.plant, lambda t: np.ones((len(t), 1)), sc.observer_noise(0.3), 5.0, dt,
                      x0=[0.5, -1.0], noiseless=True)
    Phi, G = zoh_matrices(sc.plant.A, dt)
    pred = ds.x[:-1] @ Phi.T + (G @ sc.plant.B @ np.ones(1))
    np.testing.assert_allclose(ds.x[1:], pred, atol=1e-10)


def test_sse_examples():
    a = np.arange(6.0).reshape(3, 2)
    assert sse(a, a) == 0.0
    b = a.copy()
    b[:, 1] += 1.0
    assert sse(b, a) == 3.0
    assert sse([[1.0], [2.0], [4.0]], [[0.0], [0.0], [1.0]]) == 1 + 4 + 9
    with pytest.raises(ValueError):
        sse(a, a[:2])


def test_dataset_csv_round_trip(sc, tmp_path):
    ds = sc.simulate(0.4, 5, T=6.0)
    path = tmp_path / "d.csv"
    write_dataset(ds, path)
    header = path.read_text().splitlines()[0]
    assert header == "t,y1,y2,y3,y4,v1,x1,x2,w1,w2,z1,z2,z3,z4"
    back = read_dataset(path, dt=ds.dt)
    assert back.equals(ds)
    assert read_dataset(path).dt == pytest.approx(ds.dt, rel=1e-12)
    with pytest.raises(ValueError):
        read_dataset(path, dt=0.2)


def test_dataset_ingest_without_truth(tmp_path):
    path = tmp_path / "log.csv"
    path.write_text("t,y1\n0,1.5\n0.5,2.0\n1.0,2.5\n")
    ds = read_dataset(path)
    assert (ds.N, ds.m, ds.r, ds.has_truth, ds.dt) == (3, 1, 0, False, 0.5)
    path.write_text("time,y1\n0,1\n")
    with pytest.raises(ValueError):
        read_dataset(path)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(0.1, [0.0, 0.1, 0.3], np.zeros(3), np.zeros((3, 0)))
    with pytest.raises(ValueError):
        Dataset(0.1, [0.0, 0.1], np.zeros(3), np.zeros((2, 0)))


def test_derive_seed():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    assert len({derive_seed(0, i, j) for i in range(5) for j in range(10)}) == 50
    assert derive_seed(0, 1, 2) != derive_seed(1, 1, 2)


def test_suite_record_counts_and_parallel_identity():
    kw = dict(T=8.0, n_seeds=2, master_seed=9)
    serial = benchmark_suite("paper_system", (0.3, 0.5), **kw)
    assert len(serial) == 2 * 2 * 4
    parallel = benchmark_suite("paper_system", (0.3, 0.5), jobs=3, **kw)
    assert records_to_csv(serial) == records_to_csv(parallel)
    assert all(r.error == "" for r in serial)

    emb = embedding_sweep("paper_system", (0, 2), (0.3,), **kw)
    assert len(emb) == 2 * 1 * 2 and {r.p for r in emb} == {0, 2}

    mm = mismatch_sweep("paper_system", (0.2, 0.5), (0.3,), **kw)
    assert sum(r.method == "DEM-fixed" for r in mm) == 2 * 1 * 2
    assert sum(r.method == "KF" for r in mm) == 2


def test_suite_rejects_bad_grids():
    with pytest.raises(ValueError):
        benchmark_suite("paper_system", (0.3,), methods=("UKF",))
    with pytest.raises(ValueError):
        embedding_sweep("paper_system", (7,))
    with pytest.raises(ValueError):
        mismatch_sweep("paper_system", (0.0,))
    with pytest.raises(ValueError):
        get_scenario("nope")


def test_failed_cells_become_records():
    recs = benchmark_suite("paper_system", (0.9,), n_seeds=1, methods=("SA",), dt=0.05, T=6.0)
    assert len(recs) == 1 and np.isnan(recs[0].sse) and "LinAlgError" in recs[0].error


def test_record_csv_round_trip():
    recs = mismatch_sweep("paper_system", (0.3,), (0.3,), n_seeds=1, T=6.0)
    text = records_to_csv(recs, assumed=True)
    back = read_records(text)
    assert [(r.method, r.s_assumed, r.sse) for r in back] == [(r.method, r.s_assumed, r.sse) for r in recs]
    assert text.splitlines()[0] == "scenario,method,s_real,seed,p,sse,runtime_s,s_assumed"
    assert median_sse(back, "DEM-fixed", 0.3, s_assumed=0.3) == recs[0].sse
    timed = records_to_csv(recs, timing=True)
    assert float(timed.splitlines()[1].split(",")[6]) >= 0


def test_landscape_example(sc):
    ds = sc.simulate(0.5, 0)
    grid = np.round(np.arange(2, 41) * 0.025, 10)
    ls = fe_landscape(ds, observer_config(sc, 0.5, ds.dt), grid, 5.0)
    assert ls.F.shape == grid.shape and ls.t_eval == 5.0
    assert abs(ls.argmax - 0.5) <= 0.15
    assert ls.F[0] < ls.F.max() and ls.F[-1] < ls.F.max()
    with pytest.raises(ValueError):
        fe_landscape(ds, observer_config(sc, 0.5, ds.dt), grid, 99.0)


def test_quadrant_analysis_examples():
    a = quadrant_analysis(20_000, seed=0)
    assert a.counts["q4"] == 0
    assert a.counts["q1"] / a.total > 0.5
    assert a.counts == quadrant_analysis(20_000, seed=0).counts
    assert quadrant_analysis(20_000, seed=0, p=2, n=1, m=1).counts["q4"] == 0


def test_unique_maximum_check_small():
    res = unique_maximum_check(trials=10, seed=3)
    assert res.roots >= 1 and res.violations == 0
    for _, s, F_ss, a in res.root_log:
        assert 0.1 < s < 1 and F_ss < 0 and a > 0
