import numpy as np
import pytest

from kesten_evt import recursion, tail
from kesten_evt.model import AffineLawSpec, ConstantB, ScalarTwoPoint
from kesten_evt.rng import RngStream


def l2p(b_scale=1.0):
    return AffineLawSpec(1, ScalarTwoPoint(2.0, 0.5, 1.0 / 3.0), ConstantB([b_scale]))


@pytest.fixture(scope="session")
def l2p_spec():
    return l2p()


@pytest.fixture(scope="session")
def l2p_sample():
    # shared mid-size stationary batch; heavy sizes live in the acceptance suite
    return recursion.sample_stationary(l2p(), 300_000, 1e-6, RngStream(101))


@pytest.fixture(scope="session")
def l2p_fit(l2p_sample):
    return tail.fit_tail(l2p_sample.values, k_frac=0.01)


@pytest.fixture(scope="session")
def l2p_traj():
    start = recursion.sample_stationary(l2p(), 1, 1e-8, RngStream(102)).values
    return recursion.simulate_path(l2p(), np.atleast_1d(start[0]), 300_000, RngStream(103))
