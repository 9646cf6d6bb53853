"""Shared driver for linear-walk excursions v -> A v.

Walks run until the vector norm falls below eps_stop or a step cap is hit;
below eps_stop the walk cannot re-enter the unit-ball complement without a
norm jump by 1/eps_stop, whose probability is negligible under a negative
Lyapunov exponent.  Counts the steps i >= 1 landing in a target set
(annulus, optionally cut to a sign/cone)."""

from __future__ import annotations

import numpy as np

from . import _kernels
from .model import AffineLawSpec
from .rng import RngStream

_CHUNK = 16384
_PASS_STEPS = 128

_NORM_CODE = {"l2": 0, "linf": 1, "l1": 2}


def walk_hit_counts(
    spec: AffineLawSpec,
    v0: np.ndarray,
    rng: RngStream,
    eps_stop: float,
    horizon: int,
    radius: float = 1.0,
    sign_mode: int = 0,
    cone_axis=None,
    cos_half: float = -1.0,
    norm: str = "l2",
):
    """Returns (hits, hit_horizon): per start vector, the number of steps
    i >= 1 with S_i v in the target, and whether the step cap was reached."""
    d = spec.dimension
    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    if d > 1 and v0.ndim == 1:
        v0 = v0[None, :]
    count = len(v0)
    hits = np.zeros(count, dtype=np.int64)
    capped = np.zeros(count, dtype=bool)
    norm_mode = _NORM_CODE[norm]
    cone_on = 0 if cone_axis is None else 1
    if cone_on and d == 2:
        ax = np.asarray(cone_axis, dtype=float)
        ax = ax / np.linalg.norm(ax)
        ux, uy = float(ax[0]), float(ax[1])
    else:
        ux = uy = 0.0
    for ci, c0 in enumerate(range(0, count, _CHUNK)):
        c1 = min(c0 + _CHUNK, count)
        m = c1 - c0
        gen = spec.stream(rng.child(ci))
        steps = np.zeros(m, dtype=np.int64)
        h = np.zeros(m, dtype=np.int64)
        sup1 = np.zeros(m)
        alive = np.ones(m, dtype=np.uint8)
        if d == 1:
            v = np.array(v0[c0:c1], dtype=float)
            while alive.any():
                a = spec.draw_a(gen, m * _PASS_STEPS).reshape(m, _PASS_STEPS)
                _kernels.walk_pass_1d(
                    np.ascontiguousarray(a), v, alive, steps, h, sup1,
                    eps_stop, horizon, radius, sign_mode,
                )
        elif d == 2:
            v = np.array(v0[c0:c1], dtype=float)
            while alive.any():
                a = spec.draw_a(gen, m * _PASS_STEPS).reshape(m, _PASS_STEPS, 2, 2)
                _kernels.walk_pass_2d(
                    np.ascontiguousarray(a), v, alive, steps, h, sup1,
                    eps_stop, horizon, radius, cone_on, ux, uy, cos_half, norm_mode,
                )
        else:
            v = np.array(v0[c0:c1], dtype=float)
            while alive.any():
                a = spec.draw_a(gen, m * _PASS_STEPS).reshape(m, _PASS_STEPS, d, d)
                _walk_pass_nd(a, v, alive, steps, h, eps_stop, horizon, radius, norm_mode)
        hits[c0:c1] = h
        capped[c0:c1] = steps >= horizon
    return hits, capped


def _walk_pass_nd(A, v, alive, steps, hits, eps_stop, horizon, radius, norm_mode):
    m = A.shape[1]
    for j in range(m):
        live = alive == 1
        if not live.any():
            break
        v[live] = np.einsum("ril,rl->ri", A[live, j], v[live])
        steps[live] += 1
        if norm_mode == 1:
            nv = np.abs(v).max(axis=1)
        elif norm_mode == 2:
            nv = np.abs(v).sum(axis=1)
        else:
            nv = np.sqrt((v * v).sum(axis=1))
        hits[live & (nv > radius)] += 1
        stop = live & ((nv < eps_stop) | (steps >= horizon))
        alive[stop] = 0
