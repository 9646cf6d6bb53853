import math

import numpy as np
import pytest

from kesten_evt.errors import DimensionMismatch, ModelError
from kesten_evt.model import (
    AffineLawSpec,
    ConstantB,
    FiniteSupportA,
    FiniteSupportB,
    GarchSquared,
    GaussianIsoB,
    RotationScale,
    ScalarDist,
    ScalarLognormal,
    ScalarTwoPoint,
    SimBudget,
    check_ce,
    check_ip,
    sample_pair,
    spec_from_dict,
    spec_to_dict,
)
from kesten_evt.rng import RngStream

L2P = AffineLawSpec(1, ScalarTwoPoint(2.0, 0.5, 1 / 3), ConstantB([1.0]))


# --- validation --------------------------------------------------------------


def test_weights_must_sum_to_one():
    with pytest.raises(ModelError):
        FiniteSupportA(np.array([[[1.0]], [[2.0]]]), [0.5, 0.6])
    with pytest.raises(ModelError):
        FiniteSupportA(np.array([[[1.0]], [[2.0]]]), [1.1, -0.1])


def test_singular_support_matrix_rejected():
    with pytest.raises(ModelError):
        FiniteSupportA(np.array([[[1.0, 0.0], [0.0, 0.0]]]), [1.0])


def test_scalar_variant_needs_d1():
    with pytest.raises(DimensionMismatch):
        AffineLawSpec(2, ScalarTwoPoint(2.0, 0.5, 0.5), ConstantB([1.0, 0.0]))


def test_b_dimension_checked():
    with pytest.raises(DimensionMismatch):
        AffineLawSpec(1, ScalarTwoPoint(2.0, 0.5, 0.5), ConstantB([1.0, 2.0]))


def test_budget_positive():
    with pytest.raises(ModelError):
        SimBudget(0, 1, 1)


# --- sampling ----------------------------------------------------------------


def test_two_point_frequencies():
    gen = L2P.stream(RngStream(7))
    a = L2P.draw_a(gen, 10**5)
    freq2 = (a == 2.0).mean()
    assert a.min() in (0.5, 2.0) and a.max() in (0.5, 2.0)
    assert abs(freq2 - 1 / 3) <= 0.01


def test_constant_b_always_constant():
    gen = L2P.stream(RngStream(8))
    b = L2P.draw_b(gen, 1000)
    assert np.all(b == 1.0)


def test_sample_pair_deterministic():
    pairs1 = [sample_pair(L2P, RngStream(3, 5)) for _ in range(4)]
    pairs2 = [sample_pair(L2P, RngStream(3, 5)) for _ in range(4)]
    assert pairs1 == pairs2
    seq1 = L2P.draw_a(L2P.stream(RngStream(3, 5)), 64)
    seq2 = L2P.draw_a(L2P.stream(RngStream(3, 6)), 64)
    assert not np.array_equal(seq1, seq2)


def test_seed_domain_decorrelates_draws():
    other = AffineLawSpec(1, ScalarTwoPoint(2.0, 0.5, 1 / 3), ConstantB([1.0]), seed_domain=9)
    a1 = L2P.draw_a(L2P.stream(RngStream(3)), 100)
    a2 = other.draw_a(other.stream(RngStream(3)), 100)
    assert not np.array_equal(a1, a2)


def test_rotation_scale_draws_rotations():
    spec = AffineLawSpec(
        2,
        RotationScale(ScalarDist("uniform", (0.0, 2 * math.pi)), ScalarDist("fixed", (1.0,))),
        ConstantB([0.0, 0.0]),
    )
    a = spec.draw_a(spec.stream(RngStream(1)), 200)
    dets = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    assert np.allclose(dets, 1.0)
    assert np.allclose(np.linalg.norm(a, ord=2, axis=(1, 2)), 1.0)


# --- serialization ------------------------------------------------------------


@pytest.mark.parametrize(
    "spec",
    [
        L2P,
        AffineLawSpec(1, ScalarLognormal(-0.5, 1.0), ConstantB([1.0]), seed_domain=4),
        AffineLawSpec(1, GarchSquared(1.0), GaussianIsoB([0.0], 1.0)),
        AffineLawSpec(
            2,
            FiniteSupportA(
                np.array([[[0.0, -1.0], [1.0, 0.0]], [[2.0, 0.0], [0.0, 1 / 3]]]), [0.4, 0.6]
            ),
            FiniteSupportB(np.array([[1.0, 0.0], [0.0, 1.0]]), [0.5, 0.5]),
        ),
        AffineLawSpec(
            2,
            RotationScale(ScalarDist("fixed", (1.1,)), ScalarDist("twopoint", (1.5, 0.5, 0.3))),
            GaussianIsoB([0.0, 0.0], 2.0),
        ),
    ],
)
def test_roundtrip(spec):
    doc = spec_to_dict(spec)
    back = spec_from_dict(doc)
    assert spec_to_dict(back) == doc
    # draws agree through the roundtrip
    a1 = spec.draw_a(spec.stream(RngStream(5)), 50)
    a2 = back.draw_a(back.stream(RngStream(5)), 50)
    assert np.array_equal(np.asarray(a1), np.asarray(a2))


def test_from_dict_reports_missing_field():
    with pytest.raises(ModelError, match="dimension"):
        spec_from_dict({"a_law": {}, "b_law": {}})


# --- condition i-p heuristic ---------------------------------------------------


def test_ip_two_point_arithmetic_flagged():
    v = check_ip(L2P, 60, RngStream(11))
    assert v.proximal_found
    assert v.nonarith_1d is False  # all log-products live in (log 2) Z


def test_ip_lognormal_nonarithmetic():
    spec = AffineLawSpec(1, ScalarLognormal(-0.5, 1.0), ConstantB([1.0]))
    v = check_ip(spec, 40, RngStream(12))
    assert v.nonarith_1d is True


def test_ip_rotation_plus_diagonal_proximal_irreducible():
    spec = AffineLawSpec(
        2,
        FiniteSupportA(
            np.array(
                [
                    [[math.cos(1.0), -math.sin(1.0)], [math.sin(1.0), math.cos(1.0)]],
                    [[2.0, 0.0], [0.0, 1 / 3]],
                ]
            ),
            [0.5, 0.5],
        ),
        ConstantB([1.0, 0.0]),
    )
    v = check_ip(spec, 150, RngStream(13))
    assert v.proximal_found
    assert v.irreducible_heuristic
    assert v.nonarith_1d is None


def test_ip_two_diagonals_reducible():
    spec = AffineLawSpec(
        2,
        FiniteSupportA(np.array([[[2.0, 0.0], [0.0, 0.5]], [[0.5, 0.0], [0.0, 2.0]]]), [0.5, 0.5]),
        ConstantB([1.0, 0.0]),
    )
    v = check_ip(spec, 80, RngStream(14))
    assert not v.irreducible_heuristic  # coordinate axes are invariant


def test_ip_proximal_monotone_in_probes():
    spec = AffineLawSpec(
        2,
        FiniteSupportA(
            np.array(
                [
                    [[math.cos(1.0), -math.sin(1.0)], [math.sin(1.0), math.cos(1.0)]],
                    [[2.0, 0.0], [0.0, 1 / 3]],
                ]
            ),
            [0.5, 0.5],
        ),
        ConstantB([1.0, 0.0]),
    )
    found = [check_ip(spec, n, RngStream(15)).proximal_found for n in (10, 40, 160)]
    for earlier, later in zip(found[:-1], found[1:]):
        assert later or not earlier  # never flips True -> False


# --- condition (c-e) aggregate -------------------------------------------------


def test_ce_l2p():
    rep = check_ce(L2P, SimBudget(2000, 200, 20000), RngStream(16))
    assert rep.lyapunov_negative
    assert rep.alpha_root is not None and abs(rep.alpha_root - 1.0) <= 0.05
    assert rep.moments_finite
    assert rep.no_fixed_point
    assert rep.satisfied
    assert abs(rep.lyapunov + math.log(2) / 3) <= 5 * rep.lyapunov_stderr


def test_ce_pure_contraction_has_no_root():
    spec = AffineLawSpec(1, ScalarTwoPoint(0.5, 0.5, 0.5), ConstantB([1.0]))
    rep = check_ce(spec, SimBudget(1000, 100, 10000), RngStream(17))
    assert rep.alpha_root is None
    assert rep.lyapunov_negative
    assert not rep.satisfied


def test_ce_fixed_point_detected():
    spec = AffineLawSpec(1, ScalarTwoPoint(0.5, 0.5, 0.5), ConstantB([0.0]))
    rep = check_ce(spec, SimBudget(1000, 100, 10000), RngStream(18))
    assert not rep.no_fixed_point  # x = 0 is fixed when B = 0
    assert not rep.fixed_point_generic


def test_ce_continuous_b_generic_fixed_point():
    spec = AffineLawSpec(1, ScalarTwoPoint(0.5, 0.5, 0.5), GaussianIsoB([1.0], 1.0))
    rep = check_ce(spec, SimBudget(1000, 100, 10000), RngStream(19))
    assert rep.no_fixed_point
    assert rep.fixed_point_generic


def test_ce_reproducible():
    r1 = check_ce(L2P, SimBudget(500, 50, 5000), RngStream(20))
    r2 = check_ce(L2P, SimBudget(500, 50, 5000), RngStream(20))
    assert r1.lyapunov == r2.lyapunov
    assert r1.alpha_root == r2.alpha_root
