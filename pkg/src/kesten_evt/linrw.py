"""Linear random walk S_n v = A_n ... A_1 v: product-path simulation,
Lyapunov exponent, the moment-growth curve k(s) = lim (E|S_n|^s)^{1/n},
and the unit-root solve that identifies the tail index alpha.

Moment estimation of E|S_n|^s is exponentially hard in variance for s near
alpha.  The estimator here works in the log domain with max-shift
stabilization on a ladder n in {n0, 2n0, 4n0}, pools the independent
length-n segments hiding inside each replica row, applies a second-order
bias correction to log-of-mean, and extrapolates linearly in 1/n only when
the fitted slope is statistically significant.  A HeavyTailVariance flag
reports when the top 1% of summands carry most of the moment mass; honest
uncertainty beats silent bias.

Matrix norm is the operator 2-norm (closed form for d <= 2); the constants
downstream are norm-dependent, so the choice is fixed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import NoBracket, NoisyCurve, SingularProduct
from .model import AffineLawSpec, FiniteSupportA, ScalarTwoPoint, SimBudget
from .rng import RngStream

_HEAVY_TOP_FRAC = 0.01
_HEAVY_MASS = 0.5


def op_norm(m: np.ndarray) -> float:
    """Operator 2-norm; closed form for d <= 2, SVD above."""
    m = np.atleast_2d(m)
    d = m.shape[0]
    if d == 1:
        return abs(float(m[0, 0]))
    if d == 2:
        return float(_kernels._opnorm2(m[0, 0], m[0, 1], m[1, 0], m[1, 1]))
    return float(np.linalg.norm(m, ord=2))


@dataclass
class ProductState:
    """Resumable running-product state (matrix stored renormalized)."""

    matrix: np.ndarray
    log_scale: float
    steps_done: int


@dataclass
class ProductPath:
    """Log operator norms log|S_1| .. log|S_n| of one product path."""

    log_norms: np.ndarray
    state: ProductState
    checkpoints: list = field(default_factory=list)  # (index, matrix, log_scale)

    @property
    def n(self) -> int:
        return len(self.log_norms)


def simulate_products(
    spec: AffineLawSpec,
    n: int,
    rng: RngStream,
    checkpoint_every: Optional[int] = None,
    resume: Optional[ProductState] = None,
) -> ProductPath:
    """Simulate |S_1|, ..., |S_n| in the log domain.

    The running matrix is renormalized whenever its norm leaves
    [2^-512, 2^512], so paths of any length stay representable.  Passing
    `resume` continues a previous path; the caller owns draw continuity
    (use a fresh child stream per segment).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = spec.stream(rng)
    d = spec.dimension
    a = spec.draw_a(gen, n)
    if d == 1:
        if np.any(a == 0.0):
            raise SingularProduct("sampled a singular 1x1 coefficient")
        offset = resume.log_scale if resume is not None else 0.0
        logs = offset + np.cumsum(np.log(np.abs(a)))
        state = ProductState(np.array([[math.copysign(1.0, a[-1])]]), logs[-1], n)
        path = ProductPath(logs, state)
    elif d == 2:
        dets = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
        if np.any(np.abs(dets) < 1e-300):
            raise SingularProduct("sampled a numerically singular 2x2 coefficient")
        m0 = resume.matrix if resume is not None else np.eye(2)
        ls0 = resume.log_scale if resume is not None else 0.0
        logs, m_out, ls = _kernels.product_lognorms_2d(a, np.ascontiguousarray(m0), ls0)
        path = ProductPath(logs, ProductState(m_out, ls, n))
    else:
        m = resume.matrix.copy() if resume is not None else np.eye(d)
        ls = resume.log_scale if resume is not None else 0.0
        logs = np.empty(n)
        for k in range(n):
            m = a[k] @ m
            nrm = np.linalg.norm(m, ord=2)
            if nrm < 1e-300:
                raise SingularProduct("running product collapsed to numerical zero")
            logs[k] = math.log(nrm) + ls
            if nrm > _kernels._RENORM_HI or nrm < _kernels._RENORM_LO:
                m /= nrm
                ls += math.log(nrm)
        path = ProductPath(logs, ProductState(m, ls, n))
    if checkpoint_every:
        for idx in range(checkpoint_every - 1, n, checkpoint_every):
            path.checkpoints.append((idx + 1, None, path.log_norms[idx]))
    return path


@dataclass
class LyapunovEstimate:
    value: float  # nats per step
    stderr: float
    n: int


def estimate_lyapunov(spec: AffineLawSpec, budget: SimBudget, rng: RngStream) -> LyapunovEstimate:
    """Batch mean of n^{-1} log|S_n| over independent replica streams."""
    n = budget.path_length
    vals = np.empty(budget.replicas)
    for r in range(budget.replicas):
        path = simulate_products(spec, n, rng.child(r))
        vals[r] = path.log_norms[-1] / n
    stderr = float(vals.std(ddof=1) / math.sqrt(budget.replicas)) if budget.replicas > 1 else 0.0
    return LyapunovEstimate(float(vals.mean()), stderr, n)


# --- moment curve -----------------------------------------------------------


@dataclass
class KEstimate:
    log_k: float
    stderr: float
    exact: bool
    flags: list = field(default_factory=list)
    rungs: list = field(default_factory=list)  # (n, estimate, stderr)


@dataclass
class MomentCurve:
    s_grid: np.ndarray
    log_k: np.ndarray
    stderr: np.ndarray
    n_used: int
    replicas: int

    def to_rows(self):
        for s, lk, se in zip(self.s_grid, self.log_k, self.stderr):
            yield {"s": s, "log_k": lk, "stderr": se, "n_used": self.n_used, "replicas": self.replicas}


def _exact_log_k(spec: AffineLawSpec, s: float) -> float:
    """d = 1 finite support: E|S_n|^s = (E|A|^s)^n, so log k(s) = log E|A|^s."""
    a = spec.a_law
    if isinstance(a, ScalarTwoPoint):
        atoms = np.array([a.a1, a.a2])
        w = np.array([a.p, 1 - a.p])
    else:
        atoms = a.matrices[:, 0, 0]
        w = a.weights
    return float(np.log(np.sum(w * np.abs(atoms) ** s)))


def has_exact_curve(spec: AffineLawSpec) -> bool:
    return spec.dimension == 1 and isinstance(spec.a_law, (ScalarTwoPoint, FiniteSupportA))


class _LadderSampler:
    """Frozen log|S_n| segment draws reused across s evaluations."""

    def __init__(self, spec: AffineLawSpec, budget: SimBudget, rng: RngStream):
        n0 = max(1, budget.path_length // 4)
        self.ladder = [n0, 2 * n0, 4 * n0]
        nmax = self.ladder[-1]
        self.replicas = budget.replicas
        if spec.dimension == 1:
            gen = spec.stream(rng)
            a = spec.draw_a(gen, budget.replicas * nmax)
            if np.any(a == 0.0):
                raise SingularProduct("sampled a singular 1x1 coefficient")
            steps = np.log(np.abs(a)).reshape(budget.replicas, nmax)
            self._seg_logs = {
                n: steps[:, : (nmax // n) * n].reshape(-1, n).sum(axis=1) for n in self.ladder
            }
        else:
            # matrix norms are not multiplicative, so disjoint row segments
            # cannot be sliced out of one long path; pool independent short
            # product paths per rung instead, one child stream per segment
            self._seg_logs = {}
            task = 0
            for n in self.ladder:
                nseg = nmax // n
                vals = np.empty(budget.replicas * nseg)
                for i in range(len(vals)):
                    path = simulate_products(spec, n, rng.child(task))
                    vals[i] = path.log_norms[-1]
                    task += 1
                self._seg_logs[n] = vals

    def rung(self, n: int, s: float):
        """(estimate of n^-1 log E|S_n|^s, stderr, heavy_flag)."""
        z = s * self._seg_logs[n]
        m = float(z.max())
        w = np.exp(z - m)
        mw = float(w.mean())
        est = (m + math.log(mw)) / n
        rel = float(w.std() / (mw * math.sqrt(len(w))))
        est += -0.5 * rel * rel / n  # second-order bias correction of log-mean
        k = max(1, len(w) // 100)
        top_share = float(np.partition(w, len(w) - k)[-k:].sum() / w.sum())
        return est, rel / n, top_share > _HEAVY_MASS


def _combine_rungs(ns, ests, ses):
    """Weighted 1/n extrapolation with a slope-significance guard."""
    x = 1.0 / np.asarray(ns, dtype=float)
    ests = np.asarray(ests)
    wts = 1.0 / np.maximum(np.asarray(ses), 1e-15) ** 2
    wsum = wts.sum()
    xb = (wts * x).sum() / wsum
    yb = (wts * ests).sum() / wsum
    denom = (wts * (x - xb) ** 2).sum()
    slope = (wts * (x - xb) * (ests - yb)).sum() / denom
    slope_se = math.sqrt(1.0 / denom)
    value = yb - slope * xb if abs(slope) >= 2.0 * slope_se else yb
    spread = float(ests.max() - ests.min())
    stderr = math.sqrt(min(ses) ** 2 + (spread / 2.0) ** 2)
    return float(value), stderr


def estimate_k(spec: AffineLawSpec, s: float, budget: SimBudget, rng: RngStream,
               _sampler: Optional[_LadderSampler] = None) -> KEstimate:
    """Estimate log k(s); exact in d = 1 for finite-support laws."""
    if s < 0:
        raise ValueError("s must be >= 0")
    if s == 0.0:
        return KEstimate(0.0, 0.0, True)
    if has_exact_curve(spec):
        return KEstimate(_exact_log_k(spec, s), 0.0, True)
    sampler = _sampler if _sampler is not None else _LadderSampler(spec, budget, rng)
    rungs = []
    heavy = False
    for n in sampler.ladder:
        est, se, hflag = sampler.rung(n, s)
        rungs.append((n, est, se))
        heavy = heavy or hflag
    value, stderr = _combine_rungs(
        [r[0] for r in rungs], [r[1] for r in rungs], [r[2] for r in rungs]
    )
    flags = ["HeavyTailVariance"] if heavy else []
    return KEstimate(value, stderr, False, flags, rungs)


def moment_curve(spec: AffineLawSpec, s_grid, budget: SimBudget, rng: RngStream) -> MomentCurve:
    s_grid = np.asarray(s_grid, dtype=float)
    sampler = None if has_exact_curve(spec) else _LadderSampler(spec, budget, rng)
    log_k = np.empty(len(s_grid))
    stderr = np.empty(len(s_grid))
    for i, s in enumerate(s_grid):
        est = estimate_k(spec, float(s), budget, rng, _sampler=sampler)
        log_k[i] = est.log_k
        stderr[i] = est.stderr
    return MomentCurve(s_grid, log_k, stderr, budget.path_length, budget.replicas)


def solve_alpha(
    spec: AffineLawSpec,
    budget: SimBudget,
    rng: RngStream,
    bracket=(1e-3, 4.0),
    tol: float = 1e-8,
) -> float:
    """Bisection for the root of log k(alpha) = 0.

    On the exact d = 1 curve the root is found to machine-level bracket
    width.  On the Monte Carlo curve the same frozen draws back every
    evaluation (the curve is then smooth in s); the per-evaluation stderr
    widens the acceptance band, and NoisyCurve is raised when the stderr at
    the candidate root exceeds tol.
    """
    s_lo, s_hi = bracket
    if not 0 <= s_lo < s_hi:
        raise ValueError("bracket must satisfy 0 <= s_lo < s_hi")
    exact = has_exact_curve(spec)
    sampler = None if exact else _LadderSampler(spec, budget, rng)

    def f(s: float) -> KEstimate:
        return estimate_k(spec, s, budget, rng, _sampler=sampler)

    lo, hi = f(s_lo), f(s_hi)
    if lo.log_k >= 0:
        raise NoBracket(f"log k({s_lo}) = {lo.log_k:.4g} >= 0: no contraction on the bracket")
    if hi.log_k <= 0:
        raise NoBracket(
            f"log k({s_hi}) = {hi.log_k:.4g} <= 0: no expansion on the bracket"
        )
    a, b = s_lo, s_hi
    mid_est = None
    for _ in range(200):
        mid = 0.5 * (a + b)
        mid_est = f(mid)
        if mid_est.log_k < 0:
            a = mid
        else:
            b = mid
        if b - a <= max(tol * 1e-2, 1e-12) or (exact and b - a <= 1e-12):
            break
    root = 0.5 * (a + b)
    final = f(root)
    if abs(final.log_k) > tol + 3.0 * final.stderr:
        raise NoisyCurve(
            f"|log k({root:.6g})| = {abs(final.log_k):.3g} exceeds tol {tol} + 3 stderr"
        )
    if not exact and final.stderr > tol:
        raise NoisyCurve(
            f"stderr {final.stderr:.3g} at the candidate root exceeds tol {tol}; "
            "increase replicas or shorten the ladder"
        )
    return root
