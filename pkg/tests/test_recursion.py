import math

import numpy as np
import pytest
from scipy import stats

from kesten_evt import linrw, recursion
from kesten_evt.errors import TruncationStall
from kesten_evt.model import AffineLawSpec, ConstantB, ScalarTwoPoint
from kesten_evt.rng import RngStream

L2P = AffineLawSpec(1, ScalarTwoPoint(2.0, 0.5, 1 / 3), ConstantB([1.0]))


def test_zero_b_from_origin_stays_zero():
    spec = AffineLawSpec(1, ScalarTwoPoint(2.0, 0.5, 1 / 3), ConstantB([0.0]))
    traj = recursion.simulate_path(spec, [0.0], 100, RngStream(1))
    assert np.all(traj.points == 0.0)


def test_first_step_is_b():
    traj = recursion.simulate_path(L2P, [0.0], 10, RngStream(2))
    assert traj.points[0] == 1.0  # X_1 = A_1 * 0 + B_1


def test_replay_bit_exact():
    t1 = recursion.simulate_path(L2P, [0.3], 500, RngStream(3, 9))
    t2 = recursion.simulate_path(L2P, [0.3], 500, RngStream(3, 9))
    assert np.array_equal(t1.points, t2.points)


def test_overflow_flagged():
    spec = AffineLawSpec(1, ScalarTwoPoint(3.0, 3.0, 0.5), ConstantB([1.0]))
    traj = recursion.simulate_path(spec, [1.0], 700, RngStream(4))
    assert "Overflow" in traj.flags


def test_coupling_contraction_identity():
    # two starts under the same draws differ by exactly |S_n| |x - y|
    x_traj = recursion.simulate_path(L2P, [5.0], 300, RngStream(5, 1))
    y_traj = recursion.simulate_path(L2P, [-2.0], 300, RngStream(5, 1))
    prods = linrw.simulate_products(L2P, 300, RngStream(5, 1))
    gap = np.abs(x_traj.points - y_traj.points)
    expected = np.exp(prods.log_norms) * 7.0
    rel = np.abs(gap - expected) / np.maximum(expected, 1e-300)
    assert rel.max() <= 1e-10


def test_backward_geometric_series_exact():
    spec = AffineLawSpec(1, ScalarTwoPoint(0.5, 0.5, 0.5), ConstantB([1.0]))
    samp = recursion.sample_stationary(spec, 200, 1e-8, RngStream(6))
    assert samp.method == "Backward"
    assert np.max(np.abs(samp.values - 2.0)) <= 1e-8  # sum 2^-k = 2


def test_backward_vs_burnin_same_law():
    b = recursion.sample_stationary(L2P, 10**4, 1e-6, RngStream(7), method="Backward")
    f = recursion.sample_stationary(L2P, 10**4, 1e-6, RngStream(8), method="BurnIn", burn_in=1000)
    ks = stats.ks_2samp(b.radii(), f.radii()).statistic
    assert ks <= 0.02


def test_stationarity_one_step():
    samp = recursion.sample_stationary(L2P, 10**4, 1e-6, RngStream(9))
    stepped = recursion.forward_step(L2P, samp.values, RngStream(10))
    ks = stats.ks_2samp(np.abs(samp.values), np.abs(stepped)).statistic
    assert ks <= 2 * 1.36 / math.sqrt(10**4)


def test_truncation_stall_near_critical():
    # no contraction at all: |A| = 1 never shrinks the running product
    spec = AffineLawSpec(1, ScalarTwoPoint(1.0, 1.0, 0.5), ConstantB([1.0]))
    with pytest.raises(TruncationStall):
        recursion.sample_stationary(spec, 16, 1e-6, RngStream(11))


def test_burnin_accepts_start_batch():
    start = recursion.sample_stationary(L2P, 64, 1e-6, RngStream(12)).values
    out = recursion.sample_stationary(L2P, 64, 1e-6, RngStream(13), method="BurnIn",
                                      burn_in=0, start=start)
    assert np.array_equal(out.values, start)


def test_tail_heaviness_of_stationary_law(l2p_sample):
    # Kesten tail: t P(|X| > t) approaches a positive constant for alpha = 1
    radii = l2p_sample.radii()
    vals = [t * (radii > t).mean() for t in (50, 100, 200)]
    assert all(v > 1.0 for v in vals)
    assert max(vals) / min(vals) < 1.5
