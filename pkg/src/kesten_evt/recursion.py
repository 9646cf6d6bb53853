"""Affine Markov chain X_n = A_n X_{n-1} + B_n and its stationary law.

Draw-order contract: every path consumes its A draws first, then its B
draws, from one generator.  A product path on the same stream therefore
sees exactly the linear parts of the affine path, which makes the coupling
identity |X_n^x - X_n^y| = |S_n (x - y)| checkable pathwise.

Stationary sampling is chunked: the batch is processed in fixed-size
chunks, each chunk on its own child stream, so results do not depend on
thread count or on the numba/numpy kernel build.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import TruncationStall
from .model import AffineLawSpec
from .rng import RngStream

_OVERFLOW_LIMIT = 1e300
_CHUNK = 16384
_PASS_STEPS = 64
_BACKWARD_CAP = 10**6


@dataclass
class Trajectory:
    """One realized path X_1, ..., X_n (points[k] is X_{k+1})."""

    start: np.ndarray
    points: np.ndarray  # (n,) in d = 1, else (n, d)
    spec: Optional[AffineLawSpec] = None
    rng: Optional[RngStream] = None
    flags: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.points)

    def radii(self, norm: str = "l2") -> np.ndarray:
        return vector_norms(self.points, norm)


def vector_norms(points: np.ndarray, norm: str = "l2") -> np.ndarray:
    if points.ndim == 1:
        return np.abs(points)
    if norm == "l2":
        return np.sqrt((points * points).sum(axis=1))
    if norm == "linf":
        return np.abs(points).max(axis=1)
    if norm == "l1":
        return np.abs(points).sum(axis=1)
    raise ValueError(f"unknown norm {norm!r}")


def simulate_path(spec: AffineLawSpec, x, n: int, rng: RngStream) -> Trajectory:
    """Exact forward iteration from x; no renormalization.

    An Overflow flag is set when any |X_k| exceeds 1e300, which signals a
    violated contraction hypothesis (or a misestimated tail index) upstream.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    d = spec.dimension
    x0 = np.atleast_1d(np.asarray(x, dtype=float))
    if len(x0) != d:
        raise ValueError(f"start point has dimension {len(x0)}, spec says {d}")
    gen = spec.stream(rng)
    a = spec.draw_a(gen, n)
    b = spec.draw_b(gen, n)
    if d == 1:
        pts = _kernels.affine_path_1d(a, b, float(x0[0]))
    elif d == 2:
        pts = _kernels.affine_path_2d(np.ascontiguousarray(a), np.ascontiguousarray(b), x0)
    else:
        pts = np.empty((n, d))
        cur = x0.copy()
        for k in range(n):
            cur = a[k] @ cur + b[k]
            pts[k] = cur
    flags = []
    mx = np.max(np.abs(pts))
    if not np.isfinite(mx) or mx > _OVERFLOW_LIMIT:
        flags.append("Overflow")
    return Trajectory(x0, pts, spec, rng, flags)


def forward_step(spec: AffineLawSpec, values: np.ndarray, rng: RngStream) -> np.ndarray:
    """One Markov step applied to a whole batch (used by stationarity checks)."""
    gen = spec.stream(rng)
    m = len(values)
    a = spec.draw_a(gen, m)
    b = spec.draw_b(gen, m)
    if spec.dimension == 1:
        return a * values + b
    return np.einsum("ril,rl->ri", a, values) + b


@dataclass
class StationarySample:
    """Batch of draws approximately distributed as the stationary law."""

    values: np.ndarray  # (batch,) in d = 1, else (batch, d)
    method: str  # "Backward" or "BurnIn"
    truncation_error_bound: float
    terms_used_max: int = 0
    flags: list = field(default_factory=list)

    def radii(self, norm: str = "l2") -> np.ndarray:
        return vector_norms(self.values, norm)


def sample_stationary(
    spec: AffineLawSpec,
    batch: int,
    eps_trunc: float,
    rng: RngStream,
    method: str = "Backward",
    burn_in: int = 1000,
    start: Optional[np.ndarray] = None,
) -> StationarySample:
    """Sample the stationary law.

    Backward: accumulate the a.s. convergent series sum_k (A_1...A_k) B_{k+1},
    truncated adaptively at the first K with |A_1...A_K| * E_bound(|B|) below
    eps_trunc; the realized bound is certified per sample.  BurnIn: forward
    iteration from 0 (or from `start`, then burn_in may be 0).
    """
    if eps_trunc <= 0:
        raise ValueError("eps_trunc must be positive")
    if method == "Backward":
        return _sample_backward(spec, batch, eps_trunc, rng)
    if method != "BurnIn":
        raise ValueError("method must be 'Backward' or 'BurnIn'")
    return _sample_burnin(spec, batch, burn_in, rng, start, eps_trunc)


def _sample_backward(spec, batch, eps_trunc, rng):
    d = spec.dimension
    env_b = spec.b_envelope()
    out = np.empty(batch) if d == 1 else np.empty((batch, d))
    kmax = 0
    for c0 in range(0, batch, _CHUNK):
        c1 = min(c0 + _CHUNK, batch)
        m = c1 - c0
        gen = spec.stream(rng.child(c0 // _CHUNK))
        if d == 1:
            x = np.zeros(m)
            p = np.ones(m)
        else:
            x = np.zeros((m, d))
            p = np.broadcast_to(np.eye(d), (m, d, d)).copy()
        alive = np.ones(m, dtype=np.uint8)
        kcount = np.zeros(m, dtype=np.int64)
        total = 0
        while alive.any():
            a = spec.draw_a(gen, m * _PASS_STEPS)
            b = spec.draw_b(gen, m * _PASS_STEPS)
            if d == 1:
                a = np.ascontiguousarray(a.reshape(m, _PASS_STEPS))
                b = np.ascontiguousarray(b.reshape(m, _PASS_STEPS))
                _kernels.backward_pass_1d(a, b, x, p, alive, kcount, env_b, eps_trunc)
            else:
                a = np.ascontiguousarray(a.reshape(m, _PASS_STEPS, d, d))
                b = np.ascontiguousarray(b.reshape(m, _PASS_STEPS, d))
                _kernels.backward_pass_nd(a, b, x, p, alive, kcount, env_b, eps_trunc)
            total += _PASS_STEPS
            if total >= _BACKWARD_CAP:
                raise TruncationStall(
                    f"backward series not converged after {total} terms; "
                    "the Lyapunov exponent may be near 0"
                )
        out[c0:c1] = x
        kmax = max(kmax, int(kcount.max()))
    return StationarySample(out, "Backward", eps_trunc, kmax)


def _sample_burnin(spec, batch, burn_in, rng, start, eps_trunc):
    d = spec.dimension
    if start is not None:
        vals = np.array(start, dtype=float, copy=True)
        if len(vals) != batch:
            raise ValueError("start batch size mismatch")
    else:
        vals = np.zeros(batch) if d == 1 else np.zeros((batch, d))
    gen = spec.stream(rng)
    for _ in range(burn_in):
        a = spec.draw_a(gen, batch)
        b = spec.draw_b(gen, batch)
        if d == 1:
            vals = a * vals + b
        else:
            vals = np.einsum("ril,rl->ri", a, vals) + b
    # burn-in gives a distributional, not pathwise, bound; report the target
    return StationarySample(vals, "BurnIn", eps_trunc)


def stationary_paths_sums(spec, n, replicas, rng, eps_trunc=1e-8, threads=1):
    """Per-replica (sum of X_1..X_n, max |X_i|) from stationary starts.

    Helper shared by the partial-sum and block-maxima drivers; paths are
    generated one replica at a time so memory stays flat.
    """
    from ._parallel import pmap

    d = spec.dimension
    starts = sample_stationary(spec, replicas, eps_trunc, rng.child(0)).values

    def one(r):
        traj = simulate_path(spec, np.atleast_1d(starts[r]), n, rng.child(r + 1))
        if d == 1:
            return traj.points.sum(), np.abs(traj.points).max()
        return traj.points.sum(axis=0), traj.radii().max()

    results = pmap(one, range(replicas), threads)
    sums = np.array([s for s, _ in results])
    maxima = np.array([m for _, m in results])
    return sums, maxima
