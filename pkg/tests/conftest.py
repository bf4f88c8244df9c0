import numpy as np
import pytest

from dems_lab.simlab import get_scenario


@pytest.fixture(scope="session")
def sc():
    return get_scenario("paper_system")


@pytest.fixture(scope="session")
def short_dataset(sc):
    # 16 s of the benchmark system at s_real = 0.5
    return sc.simulate(0.5, seed=3, T=16.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
