"""Tail index alpha, tail constant c of the stationary law, the normalizing
levels u_n with u_n^alpha = c n / alpha, and sampling from the normalized
tail measure restricted to the unit-ball complement (Pareto radius times an
empirical direction law).

The directional factor of the tail measure has no analytic form; it is
estimated as the empirical direction law of extreme stationary samples,
which the product structure of the limit measure justifies.  When the tail
measure splits into two extremal components the directional estimator mixes
them; this is a recorded caveat, not resolved here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateTail, MissingDirections
from .rng import RngStream

_PLATEAU_SPREAD_LIMIT = 0.5
_CIRCLE_CELLS = 64
_NET_CELLLS = 128


@dataclass
class DirectionalHist:
    """Empirical direction law of exceedances.

    kind 'signs' (d = 1, cells -1/+1), 'circle' (d = 2, equal-angle cells),
    or 'net' (d >= 3, nearest-center cells on a fixed unit-vector net).
    """

    kind: str
    weights: np.ndarray
    centers: np.ndarray  # cell centers: signs, angles, or unit vectors

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        s = w.sum()
        if s <= 0:
            raise ValueError("directional histogram needs positive mass")
        self.weights = w / s


def _fixed_net(d: int, k: int = _NET_CELLLS) -> np.ndarray:
    # deterministic unit-vector net; fixed key so cells are stable run to run
    gen = np.random.Generator(np.random.Philox(key=np.array([0xD1CE, d], dtype=np.uint64)))
    v = gen.standard_normal((k, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def directional_hist(points: np.ndarray, threshold: float, norm: str = "l2") -> DirectionalHist:
    """Direction law of the samples with radius above `threshold`."""
    from .recursion import vector_norms

    pts = np.atleast_1d(points)
    radii = vector_norms(pts, norm)
    exc = pts[radii > threshold]
    if len(exc) == 0:
        raise MissingDirections(f"no exceedances above {threshold}")
    if pts.ndim == 1:
        w_plus = float((exc > 0).mean())
        return DirectionalHist("signs", np.array([1.0 - w_plus, w_plus]), np.array([-1.0, 1.0]))
    d = pts.shape[1]
    if d == 2:
        ang = np.arctan2(exc[:, 1], exc[:, 0])
        edges = np.linspace(-math.pi, math.pi, _CIRCLE_CELLS + 1)
        counts, _ = np.histogram(ang, bins=edges)
        centers = 0.5 * (edges[:-1] + edges[1:])
        return DirectionalHist("circle", counts.astype(float), centers)
    net = _fixed_net(d)
    dirs = exc / np.linalg.norm(exc, axis=1, keepdims=True)
    nearest = np.argmax(dirs @ net.T, axis=1)
    counts = np.bincount(nearest, minlength=len(net)).astype(float)
    keep = counts > 0
    return DirectionalHist("net", counts[keep], net[keep])


@dataclass
class TailFit:
    """Fitted tail: P(|X| > t) ~ (c / alpha) t^-alpha."""

    alpha: float
    c: float
    alpha_stderr: float = 0.0
    c_stderr: float = 0.0
    threshold_used: float = 0.0
    k_frac: float = 0.0
    directional_hist: Optional[DirectionalHist] = None
    dimension: int = 1
    flags: list = field(default_factory=list)

    def __post_init__(self):
        if self.alpha <= 0 or self.c <= 0:
            raise ValueError("alpha and c must be positive")

    def u_n(self, n: int) -> float:
        return u_n(self, n)

    def to_dict(self) -> dict:
        doc = {
            "alpha": self.alpha,
            "alpha_stderr": self.alpha_stderr,
            "c": self.c,
            "c_stderr": self.c_stderr,
            "threshold_used": self.threshold_used,
            "k_frac": self.k_frac,
            "dimension": self.dimension,
            "flags": list(self.flags),
            "directional_hist": None,
        }
        if self.directional_hist is not None:
            doc["directional_hist"] = {
                "kind": self.directional_hist.kind,
                "weights": self.directional_hist.weights.tolist(),
                "centers": np.asarray(self.directional_hist.centers).tolist(),
            }
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "TailFit":
        hist = None
        if doc.get("directional_hist"):
            h = doc["directional_hist"]
            hist = DirectionalHist(h["kind"], np.asarray(h["weights"]), np.asarray(h["centers"]))
        return cls(
            alpha=doc["alpha"],
            c=doc["c"],
            alpha_stderr=doc.get("alpha_stderr", 0.0),
            c_stderr=doc.get("c_stderr", 0.0),
            threshold_used=doc.get("threshold_used", 0.0),
            k_frac=doc.get("k_frac", 0.0),
            directional_hist=hist,
            dimension=doc.get("dimension", 1),
            flags=list(doc.get("flags", [])),
        )


def hill_alpha(samples: np.ndarray, k_frac: float) -> tuple:
    """Hill estimator on the top ceil(k_frac N) order statistics.

    Returns (alpha, stderr) with stderr = alpha / sqrt(k).
    """
    radii = np.asarray(samples, dtype=float)
    n = len(radii)
    if n < 1000:
        raise ValueError("need at least 1e3 samples")
    if not 0 < k_frac <= 0.1:
        raise ValueError("k_frac must lie in (0, 0.1]")
    k = int(math.ceil(k_frac * n))
    part = np.partition(radii, n - k - 1)
    top = np.sort(part[n - k:])[::-1]
    x_k1 = part[n - k - 1]
    if top[0] <= 0 or x_k1 <= 0:
        raise DegenerateTail("nonpositive order statistics in the tail")
    logs = np.log(top) - math.log(x_k1)
    mean_log = logs.mean()
    if mean_log <= 0:
        raise DegenerateTail("top order statistics are tied")
    alpha = 1.0 / mean_log
    return float(alpha), float(alpha / math.sqrt(k))


@dataclass
class TailConstant:
    c: float
    c_stderr: float
    plateau_diag: float
    t_grid: np.ndarray
    c_of_t: np.ndarray
    flags: list = field(default_factory=list)


def default_t_grid(radii: np.ndarray, points: int = 8) -> np.ndarray:
    """Log-spaced grid across the upper decade of the sample (q99 to q99.9)."""
    lo = np.quantile(radii, 0.99)
    hi = np.quantile(radii, 0.999)
    if not 0 < lo < hi:
        raise DegenerateTail("upper quantiles are degenerate")
    return np.exp(np.linspace(math.log(lo), math.log(hi), points))


def tail_constant(samples: np.ndarray, alpha: float, t_grid=None) -> TailConstant:
    """Plateau-median estimate of c from c(t) = alpha t^alpha P(|X| > t).

    The median over a t-grid is robust to pre-asymptotic curvature; a
    NoPlateau flag reports relative spread above 0.5 (enlarge the sample).
    """
    radii = np.asarray(samples, dtype=float)
    n = len(radii)
    if t_grid is None:
        t_grid = default_t_grid(radii)
    t_grid = np.asarray(t_grid, dtype=float)
    tail_p = np.array([(radii > t).mean() for t in t_grid])
    flags = []
    if np.any(tail_p == 0.0):
        flags.append("NoPlateau")
        keep = tail_p > 0
        if not keep.any():
            raise DegenerateTail("no exceedances on the t grid (samples bounded above?)")
        t_grid, tail_p = t_grid[keep], tail_p[keep]
    c_of_t = alpha * t_grid**alpha * tail_p
    c = float(np.median(c_of_t))
    spread = float((c_of_t.max() - c_of_t.min()) / c) if c > 0 else math.inf
    if spread > _PLATEAU_SPREAD_LIMIT and "NoPlateau" not in flags:
        flags.append("NoPlateau")
    # binomial error of the empirical tail at the median grid point
    mid = len(t_grid) // 2
    se = alpha * t_grid[mid] ** alpha * math.sqrt(tail_p[mid] * (1 - tail_p[mid]) / n)
    return TailConstant(c, float(se), spread, t_grid, c_of_t, flags)


def u_n(fit: TailFit, n: int) -> float:
    """Normalizing level: u_n = (c n / alpha)^(1/alpha)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return float((fit.c * n / fit.alpha) ** (1.0 / fit.alpha))


def fit_tail(
    points: np.ndarray,
    k_frac: float = 0.01,
    t_grid=None,
    hist_quantile: float = 0.99,
    alpha: Optional[float] = None,
    norm: str = "l2",
) -> TailFit:
    """Assemble a TailFit from stationary samples.

    When `alpha` is given (e.g. from the moment-curve root) it is used as-is
    and Hill supplies only the stderr scale; otherwise Hill estimates it.
    """
    from .recursion import vector_norms

    pts = np.atleast_1d(np.asarray(points, dtype=float))
    radii = vector_norms(pts, norm)
    a_hat, a_se = hill_alpha(radii, k_frac)
    if alpha is not None:
        a_hat = alpha
    tc = tail_constant(radii, a_hat, t_grid)
    thresh = float(np.quantile(radii, hist_quantile))
    hist = directional_hist(pts, thresh, norm)
    d = 1 if pts.ndim == 1 else pts.shape[1]
    return TailFit(
        alpha=a_hat,
        c=tc.c,
        alpha_stderr=a_se,
        c_stderr=tc.c_stderr,
        threshold_used=thresh,
        k_frac=k_frac,
        directional_hist=hist,
        dimension=d,
        flags=list(tc.flags),
    )


def sample_lambda1(fit: TailFit, count: int, rng: RngStream) -> np.ndarray:
    """Draws from the normalized tail measure on {|v| > 1}.

    Radius is Pareto(alpha) on [1, inf) by inverse CDF; direction comes from
    the directional histogram (d >= 2) or the two-sided sign weights (d = 1).
    """
    gen = rng.generator()
    r = gen.random(count) ** (-1.0 / fit.alpha)
    d = fit.dimension
    if d == 1:
        if fit.directional_hist is None:
            signs = np.ones(count)
        else:
            w_plus = fit.directional_hist.weights[1]
            signs = np.where(gen.random(count) < w_plus, 1.0, -1.0)
        return r * signs
    hist = fit.directional_hist
    if hist is None:
        raise MissingDirections("d >= 2 requires a directional histogram")
    edges = np.cumsum(hist.weights)
    edges[-1] = 1.0
    cells = np.searchsorted(edges, gen.random(count), side="right")
    if hist.kind == "circle":
        width = 2.0 * math.pi / _CIRCLE_CELLS
        ang = hist.centers[cells] + width * (gen.random(count) - 0.5)
        return r[:, None] * np.column_stack([np.cos(ang), np.sin(ang)])
    # net cells: use the cell center direction (documented approximation)
    return r[:, None] * np.asarray(hist.centers)[cells]
