"""The two kernel builds must agree bit-for-bit: they consume the same
pre-drawn arrays in the same per-sample order."""

import numpy as np
import pytest

from kesten_evt import _kernels as K


@pytest.fixture
def gen():
    return np.random.default_rng(99)


def test_backward_pass_1d_builds_agree(gen):
    R, m = 257, 64
    a = gen.normal(0, 0.7, (R, m))
    a[a == 0] = 0.5
    b = gen.normal(1, 1, (R, m))
    states = []
    for impl in (K._backward_pass_1d_numpy, K._backward_pass_1d_loop):
        x = np.zeros(R)
        p = np.ones(R)
        alive = np.ones(R, dtype=np.uint8)
        kc = np.zeros(R, dtype=np.int64)
        impl(a, b, x, p, alive, kc, 2.0, 1e-4)
        states.append((x.copy(), p.copy(), alive.copy(), kc.copy()))
    for s1, s2 in zip(*states):
        assert np.array_equal(s1, s2)


def test_walk_pass_1d_builds_agree(gen):
    R, m = 300, 128
    a = np.exp(gen.normal(-0.3, 0.8, (R, m))) * np.sign(gen.normal(size=(R, m)))
    v = 1.0 / gen.random(R)
    states = []
    for impl in (K._walk_pass_1d_numpy, K._walk_pass_1d_loop):
        vv = v.copy()
        alive = np.ones(R, dtype=np.uint8)
        steps = np.zeros(R, dtype=np.int64)
        hits = np.zeros(R, dtype=np.int64)
        sup1 = np.zeros(R)
        impl(a, vv, alive, steps, hits, sup1, 1e-3, 100, 1.0, 0)
        states.append((vv.copy(), steps.copy(), hits.copy(), sup1.copy()))
    for s1, s2 in zip(*states):
        assert np.array_equal(s1, s2)


def test_hit_pass_1d_builds_agree(gen):
    R, m = 200, 256
    a = np.where(gen.random((R, m)) < 1 / 3, 2.0, 0.5)
    b = np.ones((R, m))
    states = []
    for impl in (K._hit_pass_1d_numpy, K._hit_pass_1d_loop):
        x = np.zeros(R)
        alive = np.ones(R, dtype=np.uint8)
        steps = np.zeros(R, dtype=np.int64)
        tau = np.zeros(R, dtype=np.int64)
        impl(a, b, x, alive, steps, tau, 30.0, 0, 10**6)
        states.append((x.copy(), tau.copy(), steps.copy()))
    for s1, s2 in zip(*states):
        assert np.array_equal(s1, s2)


def test_walk_pass_2d_builds_agree(gen):
    R, m = 150, 64
    ang = gen.random((R, m)) * 2 * np.pi
    rad = np.where(gen.random((R, m)) < 0.4, 1.5, 0.45)
    A = np.empty((R, m, 2, 2))
    A[..., 0, 0] = rad * np.cos(ang)
    A[..., 0, 1] = -rad * np.sin(ang)
    A[..., 1, 0] = rad * np.sin(ang)
    A[..., 1, 1] = rad * np.cos(ang)
    v = gen.normal(size=(R, 2)) * 3
    states = []
    for impl in (K._walk_pass_2d_numpy, K._walk_pass_2d_loop):
        vv = v.copy()
        alive = np.ones(R, dtype=np.uint8)
        steps = np.zeros(R, dtype=np.int64)
        hits = np.zeros(R, dtype=np.int64)
        sup1 = np.zeros(R)
        impl(A, vv, alive, steps, hits, sup1, 1e-3, 400, 1.0, 1, 1.0, 0.0, 0.5, 0)
        states.append((vv.copy(), steps.copy(), hits.copy(), sup1.copy()))
    for s1, s2 in zip(*states):
        assert np.allclose(s1, s2, rtol=0, atol=0)


def test_opnorm2_matches_svd(gen):
    for _ in range(50):
        m = gen.normal(size=(2, 2))
        assert np.isclose(
            K._opnorm2(m[0, 0], m[0, 1], m[1, 0], m[1, 1]),
            np.linalg.norm(m, ord=2),
            rtol=1e-10,
        )


def test_affine_path_matches_manual(gen):
    a = gen.normal(size=100)
    b = gen.normal(size=100)
    path = K.affine_path_1d(a, b, 0.5)
    cur = 0.5
    for k in range(100):
        cur = a[k] * cur + b[k]
        assert path[k] == cur
