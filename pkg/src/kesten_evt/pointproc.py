"""Exceedance point processes, the Fréchet fit for normalized maxima, the
compound-Poisson structure test, the logarithm-law diagnostic, and the
block-factorization mixing gap I_n."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import NoExceedance
from .extremal import DEFAULT_RUN_LENGTH, BlockScheme
from .model import AffineLawSpec
from .recursion import Trajectory, stationary_paths_sums, vector_norms
from .rng import RngStream
from .tail import TailFit, u_n

_BAD_FIT_KS = 0.15
_MIN_CLUSTERS = 20


@dataclass
class ExceedanceProcess:
    """Marked exceedances of one path: (time index i, mark u^{-1} X_i)."""

    n: int
    u: float
    times: np.ndarray  # strictly increasing indices (1-based)
    marks: np.ndarray  # (m,) or (m, d): u^{-1} X_i
    delta: float = 1.0

    @property
    def count(self) -> int:
        return len(self.times)

    def time_counts(self) -> np.ndarray:
        """Projection on time: counts per index (the time-exceedance process)."""
        return self.times

    def mark_radii(self) -> np.ndarray:
        return vector_norms(self.marks)


def exceedances(traj: Trajectory, u: float, delta: float = 1.0) -> ExceedanceProcess:
    """Extract all (i, u^{-1} X_i) with |X_i| > u * delta; possibly empty."""
    if u <= 0 or not 0 < delta <= 1:
        raise ValueError("need u > 0 and delta in (0, 1]")
    radii = traj.radii()
    idx = np.where(radii > u * delta)[0]
    marks = traj.points[idx] / u
    return ExceedanceProcess(traj.n, u, idx + 1, marks, delta)


@dataclass
class BlockMaxima:
    maxima: np.ndarray  # M_n per replica
    n: int


def block_maxima(
    spec: AffineLawSpec, n: int, replicas: int, rng: RngStream,
    eps_trunc: float = 1e-8, threads: int = 1,
) -> BlockMaxima:
    """Path maxima M_n = max |X_k| over stationary-start replicas."""
    _, maxima = stationary_paths_sums(spec, n, replicas, rng, eps_trunc, threads)
    return BlockMaxima(maxima, n)


@dataclass
class FrechetFit:
    theta_fit: float
    ks_distance: float
    replicas: int
    flags: list = field(default_factory=list)


def frechet_fit(maxima: BlockMaxima, fit: TailFit) -> FrechetFit:
    """Max-likelihood theta under the Fréchet family exp(-theta t^-alpha)
    with alpha pinned from the tail fit (alpha is identified far more
    precisely by Hill / the moment curve; joint fitting confounds the two).
    """
    if len(maxima.maxima) < 200:
        raise ValueError("need at least 200 replicas")
    u = u_n(fit, maxima.n)
    t = maxima.maxima / u
    flags = []
    pos = t > 0
    if not pos.all():
        flags.append("BadFit")
        t = t[pos]
    alpha = fit.alpha
    # d/dtheta log-likelihood = R/theta - sum t^-alpha = 0
    theta_hat = len(t) / float(np.sum(t**-alpha))
    ks = float(stats.kstest(t, lambda x: np.exp(-theta_hat * x**-alpha)).statistic)
    if ks > _BAD_FIT_KS:
        flags.append("BadFit")
    return FrechetFit(float(theta_hat), ks, len(t), flags)


def _decluster(times: np.ndarray, gap: int) -> list:
    """Runs declustering: a gap > `gap` opens a new cluster; returns
    (start_time, size) per cluster."""
    clusters = []
    start = times[0]
    size = 1
    for prev, cur in zip(times[:-1], times[1:]):
        if cur - prev > gap:
            clusters.append((start, size))
            start, size = cur, 1
        else:
            size += 1
    clusters.append((start, size))
    return clusters


@dataclass
class InterexceedanceReport:
    cluster_count_poisson_ks: float
    size_dist_tv: float
    n_clusters: int
    sizes: np.ndarray
    flags: list = field(default_factory=list)


def interexceedance_test(
    proc: ExceedanceProcess,
    nu: np.ndarray,
    run_gap: int = DEFAULT_RUN_LENGTH,
) -> InterexceedanceReport:
    """Compound-Poisson structure test at the process level.

    (a) cluster start times should be Poisson: rescaled start gaps vs Exp(1);
    (b) empirical cluster sizes vs the reference size law nu, in total
    variation (tail mass beyond len(nu) counts as discrepancy).
    """
    if proc.count == 0:
        raise NoExceedance("empty exceedance process")
    clusters = _decluster(proc.times, run_gap)
    n_cl = len(clusters)
    flags = ["TooFewClusters"] if n_cl < _MIN_CLUSTERS else []
    starts = np.array([c[0] for c in clusters], dtype=float)
    sizes = np.array([c[1] for c in clusters])
    gaps = np.diff(starts)
    ks = 1.0
    if len(gaps) >= 5:
        rate = n_cl / proc.n
        ks = float(stats.kstest(gaps * rate, "expon").statistic)
    K = len(nu)
    emp = np.bincount(np.minimum(sizes, K + 1), minlength=K + 2).astype(float)[1 : K + 1]
    emp_tail = max(0.0, 1.0 - emp.sum() / n_cl)
    emp = emp / n_cl
    ref = np.asarray(nu, dtype=float)
    tv = 0.5 * (np.abs(emp - ref).sum() + emp_tail)
    return InterexceedanceReport(ks, float(tv), n_cl, sizes, flags)


def loglaw_diag(trajs: Sequence[Trajectory], checkpoints=(10**4, 10**5, 10**6)) -> dict:
    """Logarithm-law diagnostic: per path, log M_n / log n at the checkpoints;
    reports median and IQR at the largest reachable n."""
    ratios_at = {}
    for cp in checkpoints:
        vals = []
        for traj in trajs:
            if traj.n >= cp:
                radii = traj.radii()[:cp]
                m = radii.max()
                if m > 0:
                    vals.append(math.log(m) / math.log(cp))
                else:
                    vals.append(0.0)
        if vals:
            ratios_at[cp] = np.asarray(vals)
    if not ratios_at:
        raise ValueError("trajectories shorter than the smallest checkpoint")
    top = max(ratios_at)
    vals = ratios_at[top]
    q1, q3 = np.quantile(vals, [0.25, 0.75])
    return {
        "median_ratio": float(np.median(vals)),
        "spread": float(q3 - q1),
        "n": top,
        "per_checkpoint": {n: float(np.median(v)) for n, v in ratios_at.items()},
    }


@dataclass(frozen=True)
class BumpSpec:
    """Lipschitz bump on {|x| > delta}: ramps from delta at slope `lipschitz`
    up to height `sup_norm`, plateaus, and ramps back to 0 at outer_radius
    (compact support in the normalized mark space)."""

    delta: float = 1.0
    sup_norm: float = 1.0
    lipschitz: float = 2.0
    outer_radius: float = 8.0

    def __call__(self, r: np.ndarray) -> np.ndarray:
        up = self.lipschitz * (r - self.delta)
        down = self.lipschitz * (self.outer_radius - r)
        return np.clip(np.minimum(up, down), 0.0, self.sup_norm)


@dataclass
class MixingCurve:
    n_grid: np.ndarray
    i_n: np.ndarray
    stderr: np.ndarray
    flags: list = field(default_factory=list)

    def loglog_slope(self) -> float:
        """Least-squares slope of log I_n against log n (zeros clipped)."""
        y = np.log(np.maximum(self.i_n, 1e-300))
        x = np.log(self.n_grid.astype(float))
        return float(np.polyfit(x, y, 1)[0])


def mixing_gap(
    paths_radii: Sequence[np.ndarray],
    f_spec: BumpSpec,
    fit: TailFit,
    n_grid: Optional[Sequence[int]] = None,
) -> MixingCurve:
    """Block-factorization defect of the exceedance Laplace functional.

    I_n = |E exp(-sum_i f(u_n^{-1} X_i)) - prod_j E exp(-sum_{block j} ...)|
    with blocks of length r_n = ceil(sqrt(n)).  The product term multiplies
    per-block replica means of the same trajectory set (independent-block
    surrogate by common random numbers).
    """
    R = len(paths_radii)
    min_len = min(len(p) for p in paths_radii)
    if n_grid is None:
        n_grid = [2**k for k in range(10, 17) if 2**k <= min_len]
    n_grid = [n for n in n_grid if n <= min_len]
    if not n_grid:
        raise ValueError("paths shorter than the smallest grid point")
    i_vals, errs, flags = [], [], []
    for n in n_grid:
        u = u_n(fit, n)
        r_n = int(math.ceil(math.sqrt(n)))
        k_n = n // r_n
        term1 = np.empty(R)
        block_factors = np.empty((R, k_n))
        for r, radii in enumerate(paths_radii):
            g = f_spec(radii[:n] / u)
            term1[r] = math.exp(-g.sum())
            block_factors[r] = np.exp(-g[: k_n * r_n].reshape(k_n, r_n).sum(axis=1))
        first = term1.mean()
        col_sums = block_factors.sum(axis=0)
        prod = float(np.prod(col_sums / R))
        i_n = abs(first - prod)
        # leave-one-out jackknife of the signed difference: the two terms share
        # paths, so their covariance shrinks the error well below the first
        # term's replica noise
        loo_first = (first * R - term1) / (R - 1)
        loo_log_prod = np.log(np.maximum(col_sums[None, :] - block_factors, 1e-300)).sum(axis=1)
        loo_prod = np.exp(loo_log_prod - k_n * math.log(R - 1))
        loo_diff = loo_first - loo_prod
        se = math.sqrt(max(R - 1, 1) * loo_diff.var())
        i_vals.append(i_n)
        errs.append(se)
        if se > i_n:
            flags.append(f"VarianceTooHigh@n={n}")
    return MixingCurve(np.asarray(n_grid), np.asarray(i_vals), np.asarray(errs), flags)


def stationary_mark_paths(
    spec: AffineLawSpec, n: int, replicas: int, rng: RngStream,
    eps_trunc: float = 1e-8, threads: int = 1,
) -> list:
    """Radii of `replicas` stationary-start paths of length n (mixing input)."""
    from ._parallel import pmap
    from .recursion import sample_stationary, simulate_path

    starts = sample_stationary(spec, replicas, eps_trunc, rng.child(0)).values

    def one(r):
        return simulate_path(spec, np.atleast_1d(starts[r]), n, rng.child(r + 1)).radii()

    return pmap(one, range(replicas), threads)
