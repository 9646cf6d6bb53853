import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from kesten_evt.rng import RngStream


def test_same_pair_bit_identical():
    a = RngStream(123, 7).generator().random(1000)
    b = RngStream(123, 7).generator().random(1000)
    assert np.array_equal(a, b)


def test_distinct_streams_differ():
    a = RngStream(123, 7).generator().random(1000)
    b = RngStream(123, 8).generator().random(1000)
    c = RngStream(124, 7).generator().random(1000)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_streams_uncorrelated():
    a = RngStream(5, 0).generator().standard_normal(20000)
    b = RngStream(5, 1).generator().standard_normal(20000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.03


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**63), st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_child_deterministic_and_distinct(seed, sid, idx):
    s = RngStream(seed, sid)
    c1, c2 = s.child(idx), s.child(idx)
    assert c1 == c2
    assert s.child(idx) != s.child(idx + 1)
    assert c1.seed == seed  # children share the seed namespace


def test_domain_decorrelates():
    s = RngStream(9, 0)
    assert s.domain(1) != s.domain(2)
    assert s.domain(1) == s.domain(1)
