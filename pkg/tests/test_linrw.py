import math

import numpy as np
import pytest

from kesten_evt import linrw
from kesten_evt.errors import NoBracket
from kesten_evt.model import (
    AffineLawSpec,
    ConstantB,
    FiniteSupportA,
    GarchSquared,
    RotationScale,
    ScalarDist,
    ScalarLognormal,
    ScalarTwoPoint,
    SimBudget,
)
from kesten_evt.rng import RngStream

L2P = AffineLawSpec(1, ScalarTwoPoint(2.0, 0.5, 1 / 3), ConstantB([1.0]))
LOG2 = math.log(2.0)


def exact_l2p_logk(s):
    return math.log((1 / 3) * 2.0**s + (2 / 3) * 2.0**-s)


# --- product paths -------------------------------------------------------------


def test_deterministic_half_products():
    spec = AffineLawSpec(1, ScalarTwoPoint(0.5, 0.5, 0.5), ConstantB([1.0]))
    path = linrw.simulate_products(spec, 50, RngStream(1))
    assert np.allclose(path.log_norms, -np.arange(1, 51) * LOG2)


def test_rotation_only_products_are_isometries():
    spec = AffineLawSpec(
        2,
        RotationScale(ScalarDist("uniform", (0.0, 2 * math.pi)), ScalarDist("fixed", (1.0,))),
        ConstantB([0.0, 0.0]),
    )
    path = linrw.simulate_products(spec, 200, RngStream(2))
    assert np.max(np.abs(path.log_norms)) < 1e-10


def test_l2p_products_slln():
    path = linrw.simulate_products(L2P, 20000, RngStream(3))
    rate = path.log_norms[-1] / 20000
    sigma = math.sqrt(8 / 9) * LOG2 / math.sqrt(20000)
    assert abs(rate + LOG2 / 3) <= 3 * sigma


def test_renormalization_no_overflow():
    spec = AffineLawSpec(1, ScalarTwoPoint(3.0, 3.0, 0.5), ConstantB([1.0]))  # expanding
    path = linrw.simulate_products(spec, 5000, RngStream(4))
    assert np.isfinite(path.log_norms).all()
    assert np.allclose(path.log_norms, np.arange(1, 5001) * math.log(3.0))


def test_checkpoint_restart_matches_single_pass():
    spec = AffineLawSpec(
        2,
        FiniteSupportA(
            np.array(
                [
                    [[math.cos(0.7), -math.sin(0.7)], [math.sin(0.7), math.cos(0.7)]],
                    [[1.4, 0.1], [0.0, 0.5]],
                ]
            ),
            [0.5, 0.5],
        ),
        ConstantB([1.0, 0.0]),
    )
    n = 4000
    gen = spec.stream(RngStream(5))
    a = spec.draw_a(gen, n)
    logs_full, m_full, ls_full = linrw._kernels.product_lognorms_2d(a, np.eye(2), 0.0)
    logs_1, m_1, ls_1 = linrw._kernels.product_lognorms_2d(a[: n // 2], np.eye(2), 0.0)
    logs_2, m_2, ls_2 = linrw._kernels.product_lognorms_2d(a[n // 2 :], m_1, ls_1)
    rel = np.abs(np.concatenate([logs_1, logs_2]) - logs_full) / np.maximum(np.abs(logs_full), 1.0)
    assert rel.max() <= 1e-10


# --- Lyapunov -------------------------------------------------------------------


def test_lyapunov_l2p():
    est = linrw.estimate_lyapunov(L2P, SimBudget(2000, 200), RngStream(6))
    assert abs(est.value + LOG2 / 3) <= 4 * est.stderr


def test_lyapunov_lognormal_is_mu():
    spec = AffineLawSpec(1, ScalarLognormal(-0.5, 1.0), ConstantB([1.0]))
    est = linrw.estimate_lyapunov(spec, SimBudget(2000, 200), RngStream(7))
    assert abs(est.value + 0.5) <= 4 * est.stderr


def test_lyapunov_positive_for_expander():
    spec = AffineLawSpec(1, ScalarTwoPoint(3.0, 3.0, 0.5), ConstantB([1.0]))
    est = linrw.estimate_lyapunov(spec, SimBudget(500, 20), RngStream(8))
    assert abs(est.value - math.log(3.0)) < 1e-12


# --- moment curve ---------------------------------------------------------------


def test_k_zero_is_one():
    assert linrw.estimate_k(L2P, 0.0, SimBudget(), RngStream(9)).log_k == 0.0


def test_k_exact_l2p_unit_root():
    est = linrw.estimate_k(L2P, 1.0, SimBudget(), RngStream(10))
    assert est.exact
    assert abs(est.log_k) < 1e-15
    for s in (0.3, 0.8, 1.7):
        assert np.isclose(linrw.estimate_k(L2P, s, SimBudget(), RngStream(10)).log_k,
                          exact_l2p_logk(s))


def test_k_lognormal_mc_near_zero_at_one():
    spec = AffineLawSpec(1, ScalarLognormal(-0.5, 1.0), ConstantB([1.0]))
    est = linrw.estimate_k(spec, 1.0, SimBudget(path_length=8, replicas=50000), RngStream(11))
    assert not est.exact
    assert abs(est.log_k) <= max(3 * est.stderr, 0.03)


def test_log_convexity_exact_curve():
    s = np.linspace(0.05, 2.5, 25)
    vals = np.array([exact_l2p_logk(x) for x in s])
    interior = vals[1:-1]
    chords = 0.5 * (vals[:-2] + vals[2:])
    assert np.all(interior <= chords + 1e-12)


def test_k_slope_at_zero_matches_lyapunov():
    lyap = linrw.estimate_lyapunov(L2P, SimBudget(2000, 200), RngStream(12))
    k0 = linrw.estimate_k(L2P, 0.0, SimBudget(), RngStream(12)).log_k
    k005 = linrw.estimate_k(L2P, 0.05, SimBudget(), RngStream(12)).log_k
    slope = (k005 - k0) / 0.05
    assert abs(slope - lyap.value) <= 4 * lyap.stderr + 0.01


def test_moment_curve_rows():
    curve = linrw.moment_curve(L2P, [0.0, 0.5, 1.0], SimBudget(), RngStream(13))
    rows = list(curve.to_rows())
    assert [r["s"] for r in rows] == [0.0, 0.5, 1.0]
    assert rows[2]["log_k"] == pytest.approx(0.0, abs=1e-14)


# --- alpha solve ----------------------------------------------------------------


def test_solve_alpha_l2p_exact():
    alpha = linrw.solve_alpha(L2P, SimBudget(), RngStream(14), tol=1e-9)
    assert abs(alpha - 1.0) <= 1e-6


def test_solve_alpha_lognormal():
    spec = AffineLawSpec(1, ScalarLognormal(-0.5, 1.0), ConstantB([1.0]))
    alpha = linrw.solve_alpha(spec, SimBudget(path_length=8, replicas=100000), RngStream(15), tol=0.05)
    assert abs(alpha - 1.0) <= 0.05


def test_solve_alpha_garch():
    spec = AffineLawSpec(1, GarchSquared(1.0), ConstantB([1.0]))
    alpha = linrw.solve_alpha(spec, SimBudget(path_length=8, replicas=100000), RngStream(16), tol=0.05)
    assert abs(alpha - 1.0) <= 0.05


def test_solve_alpha_no_bracket_for_contraction():
    spec = AffineLawSpec(1, ScalarTwoPoint(0.5, 0.5, 0.5), ConstantB([1.0]))
    with pytest.raises(NoBracket, match="expansion"):
        linrw.solve_alpha(spec, SimBudget(), RngStream(17))


def test_solve_alpha_seed_stable():
    spec = AffineLawSpec(1, ScalarLognormal(-0.5, 1.0), ConstantB([1.0]))
    a1 = linrw.solve_alpha(spec, SimBudget(path_length=8, replicas=50000), RngStream(18), tol=0.05)
    a2 = linrw.solve_alpha(spec, SimBudget(path_length=8, replicas=100000), RngStream(19), tol=0.05)
    assert abs(a1 - a2) <= 2 * 0.05


def test_op_norm_dims():
    assert linrw.op_norm(np.array([[-3.0]])) == 3.0
    m = np.array([[1.0, 2.0], [0.5, -1.0]])
    assert np.isclose(linrw.op_norm(m), np.linalg.norm(m, ord=2))
    m3 = np.arange(9, dtype=float).reshape(3, 3) + np.eye(3)
    assert np.isclose(linrw.op_norm(m3), np.linalg.norm(m3, ord=2))
