"""Generative model of the i.i.d. pair (A, B) driving the recursion
X_n = A_n X_{n-1} + B_n, plus runtime checks of the standing hypotheses:
negative top Lyapunov exponent with a unit root of the moment curve
(contraction with expansion), and the irreducibility/proximality heuristic
for the matrix semigroup in dimension >= 2.

All spec types are immutable after construction; operations take an explicit
RngStream so replicas can run concurrently on distinct stream ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, Inconclusive, ModelError, NoBracket, SingularProduct
from .rng import RngStream

_WEIGHT_TOL = 1e-12
_DET_TOL = 1e-12


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_weights(weights: np.ndarray, what: str):
    if np.any(weights <= 0):
        raise ModelError(f"{what}: weights must be positive")
    if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
        raise ModelError(f"{what}: weights must sum to 1 within {_WEIGHT_TOL}")


@dataclass(frozen=True)
class ScalarDist:
    """Scalar distribution descriptor used inside RotationScale.

    kind: 'fixed' (value), 'uniform' (lo, hi), 'twopoint' (v1, v2, p),
    'lognormal' (mu_log, sigma_log).
    """

    kind: str
    params: tuple

    def __post_init__(self):
        n_expected = {"fixed": 1, "uniform": 2, "twopoint": 3, "lognormal": 2}
        if self.kind not in n_expected:
            raise ModelError(f"unknown scalar distribution kind {self.kind!r}")
        if len(self.params) != n_expected[self.kind]:
            raise ModelError(f"{self.kind} takes {n_expected[self.kind]} parameters")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    def draw(self, gen: np.random.Generator, n: int) -> np.ndarray:
        p = self.params
        if self.kind == "fixed":
            return np.full(n, p[0])
        if self.kind == "uniform":
            return p[0] + (p[1] - p[0]) * gen.random(n)
        if self.kind == "twopoint":
            return np.where(gen.random(n) < p[2], p[0], p[1])
        return np.exp(gen.normal(p[0], p[1], size=n))


# --- A-law variants ---------------------------------------------------------


@dataclass(frozen=True)
class FiniteSupportA:
    matrices: np.ndarray  # (k, d, d)
    weights: np.ndarray  # (k,)

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=float)
        if mats.ndim == 1:  # list of scalars in d = 1
            mats = mats.reshape(-1, 1, 1)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ModelError("FiniteSupport: matrices must be square and stacked")
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(mats):
            raise ModelError("FiniteSupport: one weight per matrix")
        _check_weights(w, "FiniteSupport A")
        dets = np.linalg.det(mats)
        if np.any(np.abs(dets) <= _DET_TOL):
            # gamma(g) = sup(|g|, |g^-1|) must stay finite
            raise ModelError("FiniteSupport: matrices must be invertible (|det| > 1e-12)")
        object.__setattr__(self, "matrices", _freeze(mats))
        object.__setattr__(self, "weights", _freeze(w))

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]


@dataclass(frozen=True)
class ScalarLognormal:
    mu_log: float
    sigma_log: float

    def __post_init__(self):
        if self.sigma_log <= 0:
            raise ModelError("ScalarLognormal: sigma_log must be positive")


@dataclass(frozen=True)
class ScalarTwoPoint:
    a1: float
    a2: float
    p: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ModelError("ScalarTwoPoint: p must lie in (0, 1)")
        if self.a1 == 0.0 or self.a2 == 0.0:
            raise ModelError("ScalarTwoPoint: atoms must be nonzero")


@dataclass(frozen=True)
class GarchSquared:
    """A = a * Z^2 with Z standard normal."""

    a: float

    def __post_init__(self):
        if self.a <= 0:
            raise ModelError("GarchSquared: a must be positive")


@dataclass(frozen=True)
class RotationScale:
    """d = 2 law: rotation by a random angle times a random radius."""

    angle_law: ScalarDist
    radius_law: ScalarDist


# --- B-law variants ---------------------------------------------------------


@dataclass(frozen=True)
class ConstantB:
    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", _freeze(np.atleast_1d(self.vector)))


@dataclass(frozen=True)
class FiniteSupportB:
    vectors: np.ndarray  # (k, d)
    weights: np.ndarray

    def __post_init__(self):
        vecs = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(vecs):
            raise ModelError("FiniteSupport: one weight per vector")
        _check_weights(w, "FiniteSupport B")
        object.__setattr__(self, "vectors", _freeze(vecs))
        object.__setattr__(self, "weights", _freeze(w))


@dataclass(frozen=True)
class GaussianIsoB:
    mean: np.ndarray
    scale: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ModelError("GaussianIso: scale must be positive")
        object.__setattr__(self, "mean", _freeze(np.atleast_1d(self.mean)))


_SCALAR_A = (ScalarLognormal, ScalarTwoPoint, GarchSquared)


@dataclass(frozen=True)
class AffineLawSpec:
    """Law of the i.i.d. pair (A_n, B_n)."""

    dimension: int
    a_law: object
    b_law: object
    seed_domain: int = 0

    def __post_init__(self):
        d = self.dimension
        if d < 1:
            raise ModelError("dimension must be >= 1")
        a = self.a_law
        if isinstance(a, _SCALAR_A) and d != 1:
            raise DimensionMismatch(f"{type(a).__name__} requires d = 1, got d = {d}")
        if isinstance(a, RotationScale) and d != 2:
            raise DimensionMismatch("RotationScale requires d = 2")
        if isinstance(a, FiniteSupportA) and a.dim != d:
            raise DimensionMismatch(f"FiniteSupport matrices are {a.dim}x{a.dim}, spec says d = {d}")
        bdim = b_dim(self.b_law)
        if bdim != d:
            raise DimensionMismatch(f"B law lives in dimension {bdim}, spec says d = {d}")

    # -- sampling -----------------------------------------------------------

    def stream(self, rng: RngStream) -> np.random.Generator:
        """Generator for this model under the given stream (folds seed_domain)."""
        return rng.domain(self.seed_domain).generator()

    def draw_a(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """n i.i.d. draws of A: shape (n,) when d = 1, else (n, d, d)."""
        a = self.a_law
        if isinstance(a, ScalarTwoPoint):
            return np.where(gen.random(n) < a.p, a.a1, a.a2)
        if isinstance(a, ScalarLognormal):
            return np.exp(gen.normal(a.mu_log, a.sigma_log, size=n))
        if isinstance(a, GarchSquared):
            z = gen.standard_normal(n)
            out = a.a * z * z
            if np.any(out == 0.0):
                raise SingularProduct("GarchSquared drew an exactly singular coefficient")
            return out
        if isinstance(a, FiniteSupportA):
            idx = _draw_index(gen, a.weights, n)
            mats = a.matrices[idx]
            return mats[:, 0, 0] if self.dimension == 1 else mats
        # RotationScale
        ang = a.angle_law.draw(gen, n)
        rad = a.radius_law.draw(gen, n)
        if np.any(rad == 0.0):
            raise SingularProduct("RotationScale drew a zero radius")
        c, s = np.cos(ang), np.sin(ang)
        out = np.empty((n, 2, 2))
        out[:, 0, 0] = rad * c
        out[:, 0, 1] = -rad * s
        out[:, 1, 0] = rad * s
        out[:, 1, 1] = rad * c
        return out

    def draw_b(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """n i.i.d. draws of B: shape (n,) when d = 1, else (n, d)."""
        b = self.b_law
        d = self.dimension
        if isinstance(b, ConstantB):
            out = np.broadcast_to(b.vector, (n, d)).copy()
        elif isinstance(b, FiniteSupportB):
            out = b.vectors[_draw_index(gen, b.weights, n)]
        else:
            out = b.mean + b.scale * gen.standard_normal((n, d))
        return out[:, 0] if d == 1 else out

    def b_envelope(self) -> float:
        """Envelope used by the backward-series truncation rule."""
        b = self.b_law
        if isinstance(b, ConstantB):
            return float(np.linalg.norm(b.vector))
        if isinstance(b, FiniteSupportB):
            return float(np.max(np.linalg.norm(b.vectors, axis=1)))
        return float(np.linalg.norm(b.mean) + 5.0 * b.scale * math.sqrt(self.dimension))

    def support_pairs(self):
        """Atoms ((A, B), weight) of the product support for finite-support laws,
        or None when either marginal is continuous."""
        a, b = self.a_law, self.b_law
        if isinstance(a, ScalarTwoPoint):
            amats = np.array([[[a.a1]], [[a.a2]]])
            aw = np.array([a.p, 1 - a.p])
        elif isinstance(a, FiniteSupportA):
            amats, aw = a.matrices, a.weights
        else:
            return None
        if isinstance(b, ConstantB):
            bvecs = b.vector[None, :]
            bw = np.array([1.0])
        elif isinstance(b, FiniteSupportB):
            bvecs, bw = b.vectors, b.weights
        else:
            return None
        pairs = []
        for Ai, wi in zip(amats, aw):
            for Bj, wj in zip(bvecs, bw):
                pairs.append((Ai, Bj, wi * wj))
        return pairs


def b_dim(b_law) -> int:
    if isinstance(b_law, ConstantB):
        return len(b_law.vector)
    if isinstance(b_law, FiniteSupportB):
        return b_law.vectors.shape[1]
    if isinstance(b_law, GaussianIsoB):
        return len(b_law.mean)
    raise ModelError(f"unknown B law {type(b_law).__name__}")


def _draw_index(gen: np.random.Generator, weights: np.ndarray, n: int) -> np.ndarray:
    # inverse-CDF on the cumulative weights; stable across numpy versions
    edges = np.cumsum(weights)
    edges[-1] = 1.0
    return np.searchsorted(edges, gen.random(n), side="right")


def sample_pair(spec: AffineLawSpec, rng: RngStream):
    """One draw (A, B) from the pair law; A is scalar when d = 1."""
    gen = spec.stream(rng)
    a = spec.draw_a(gen, 1)
    b = spec.draw_b(gen, 1)
    return a[0], b[0]


# --- serialization ----------------------------------------------------------


def spec_to_dict(spec: AffineLawSpec) -> dict:
    a = spec.a_law
    if isinstance(a, FiniteSupportA):
        a_doc = {"FiniteSupport": [[m.tolist(), float(w)] for m, w in zip(a.matrices, a.weights)]}
    elif isinstance(a, ScalarLognormal):
        a_doc = {"ScalarLognormal": {"mu_log": a.mu_log, "sigma_log": a.sigma_log}}
    elif isinstance(a, ScalarTwoPoint):
        a_doc = {"ScalarTwoPoint": {"a1": a.a1, "a2": a.a2, "p": a.p}}
    elif isinstance(a, GarchSquared):
        a_doc = {"GarchSquared": {"a": a.a}}
    else:
        a_doc = {
            "RotationScale": {
                "angle_law": {"kind": a.angle_law.kind, "params": list(a.angle_law.params)},
                "radius_law": {"kind": a.radius_law.kind, "params": list(a.radius_law.params)},
            }
        }
    b = spec.b_law
    if isinstance(b, ConstantB):
        b_doc = {"Constant": b.vector.tolist()}
    elif isinstance(b, FiniteSupportB):
        b_doc = {"FiniteSupport": [[v.tolist(), float(w)] for v, w in zip(b.vectors, b.weights)]}
    else:
        b_doc = {"GaussianIso": {"mean": b.mean.tolist(), "scale": b.scale}}
    return {
        "dimension": spec.dimension,
        "a_law": a_doc,
        "b_law": b_doc,
        "seed_domain": spec.seed_domain,
    }


def spec_from_dict(doc: dict) -> AffineLawSpec:
    try:
        d = int(doc["dimension"])
        a_doc = doc["a_law"]
        b_doc = doc["b_law"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"model document missing field: {exc}") from exc
    (a_kind, a_val), = a_doc.items()
    if a_kind == "FiniteSupport":
        a_law = FiniteSupportA(np.array([m for m, _ in a_val]), np.array([w for _, w in a_val]))
    elif a_kind == "ScalarLognormal":
        a_law = ScalarLognormal(**a_val)
    elif a_kind == "ScalarTwoPoint":
        a_law = ScalarTwoPoint(**a_val)
    elif a_kind == "GarchSquared":
        a_law = GarchSquared(**a_val)
    elif a_kind == "RotationScale":
        a_law = RotationScale(
            ScalarDist(a_val["angle_law"]["kind"], tuple(a_val["angle_law"]["params"])),
            ScalarDist(a_val["radius_law"]["kind"], tuple(a_val["radius_law"]["params"])),
        )
    else:
        raise ModelError(f"unknown A law {a_kind!r}")
    (b_kind, b_val), = b_doc.items()
    if b_kind == "Constant":
        b_law = ConstantB(np.asarray(b_val, dtype=float))
    elif b_kind == "FiniteSupport":
        b_law = FiniteSupportB(np.array([v for v, _ in b_val]), np.array([w for _, w in b_val]))
    elif b_kind == "GaussianIso":
        b_law = GaussianIsoB(np.asarray(b_val["mean"], dtype=float), float(b_val["scale"]))
    else:
        raise ModelError(f"unknown B law {b_kind!r}")
    return AffineLawSpec(d, a_law, b_law, int(doc.get("seed_domain", 0)))


# --- budgets ----------------------------------------------------------------


@dataclass(frozen=True)
class SimBudget:
    """Path length / replica / batch budget shared by the checks and the CLI."""

    path_length: int = 1000
    replicas: int = 1000
    batch: int = 10000

    def __post_init__(self):
        if min(self.path_length, self.replicas, self.batch) < 1:
            raise ModelError("budgets must be positive")


# --- condition i-p heuristic ------------------------------------------------


@dataclass(frozen=True)
class IpVerdict:
    proximal_found: bool
    irreducible_heuristic: bool
    nonarith_1d: Optional[bool]


_PROX_MARGIN = 1e-6
_CF_DEPTH = 20
_CF_TOL = 1e-9


def _is_rational_cf(x: float, depth: int = _CF_DEPTH, tol: float = _CF_TOL) -> bool:
    """Continued-fraction rationality test: terminates within `depth` levels."""
    x = abs(x)
    for _ in range(depth):
        frac = x - math.floor(x)
        if frac < tol:
            return True
        x = 1.0 / frac
    return False


def _random_word_product(spec: AffineLawSpec, gen: np.random.Generator, max_len: int = 12):
    length = int(gen.integers(1, max_len + 1))
    a = spec.draw_a(gen, length)
    if spec.dimension == 1:
        return float(np.prod(a))
    m = a[0]
    for k in range(1, length):
        m = a[k] @ m
    return m


def _proximal(m: np.ndarray) -> bool:
    """Real dominant eigenvalue, strictly ahead in modulus, 1-d eigenspace."""
    ev = np.linalg.eigvals(m)
    order = np.argsort(-np.abs(ev))
    top = ev[order[0]]
    scale = np.abs(top)
    if scale == 0.0 or abs(top.imag) > 1e-9 * scale:
        return False
    if len(ev) > 1 and np.abs(ev[order[1]]) >= scale * (1.0 - _PROX_MARGIN):
        return False
    # eigenspace simplicity via the singular-value gap of (m - top I)
    sv = np.linalg.svd(m - top.real * np.eye(len(m)), compute_uv=False)
    return sv[-1] < 1e-8 * max(scale, 1.0) and sv[-2] > 1e-8 * max(scale, 1.0)


def _real_eigendirections(m: np.ndarray) -> list:
    vals, vecs = np.linalg.eig(m)
    out = []
    for i, v in enumerate(vals):
        if abs(v.imag) <= 1e-9 * max(abs(v), 1.0):
            u = vecs[:, i].real
            nrm = np.linalg.norm(u)
            if nrm > 0:
                out.append(u / nrm)
    return out


def _direction_in(v: np.ndarray, family: list, tol: float = 1e-6) -> bool:
    for w in family:
        if min(np.linalg.norm(v - w), np.linalg.norm(v + w)) < tol:
            return True
    return False


def _invariant_family_detected(generators: Sequence[np.ndarray], seeds: list, cap: int = 16) -> bool:
    """Try to close a finite family of eigendirections under the generators.

    Returns True when some seed direction generates a finite family of
    proper subspaces (lines) that every generator maps into itself; the
    closure aborts (no detection) once the family exceeds `cap`.
    """
    for v0 in seeds:
        family = [v0]
        frontier = [v0]
        finite = True
        while frontier:
            nxt = []
            for v in frontier:
                for g in generators:
                    w = g @ v
                    nrm = np.linalg.norm(w)
                    if nrm < 1e-14:
                        finite = False
                        break
                    w = w / nrm
                    if not _direction_in(w, family):
                        family.append(w)
                        nxt.append(w)
                if not finite or len(family) > cap:
                    finite = False
                    break
            if not finite:
                break
            frontier = nxt
        if finite:
            return True
    return False


def check_ip(spec: AffineLawSpec, n_probe: int, rng: RngStream) -> IpVerdict:
    """Monte Carlo verdict on condition i-p; a heuristic, never a proof.

    Products of random words are scanned cumulatively on per-index child
    streams, so enlarging n_probe extends the same product sequence and
    proximal_found is monotone in n_probe.
    """
    d = spec.dimension
    base = rng.domain(spec.seed_domain)
    if d == 1:
        logs = []
        for i in range(n_probe):
            p = _random_word_product(spec, base.child(i).generator())
            if p == 0.0:
                raise SingularProduct("sampled a singular scalar product")
            logs.append(math.log(abs(p)))
        proximal = len(logs) > 0  # any nonzero scalar is trivially proximal
        nonarith = False
        for i in range(len(logs)):
            for j in range(i + 1, min(len(logs), i + 40)):
                if abs(logs[j]) < 1e-12:
                    continue
                if not _is_rational_cf(logs[i] / logs[j]):
                    nonarith = True
                    break
            if nonarith:
                break
        return IpVerdict(proximal_found=proximal, irreducible_heuristic=True, nonarith_1d=nonarith)

    products = [_random_word_product(spec, base.child(i).generator()) for i in range(n_probe)]
    proximal = any(_proximal(m) for m in products)

    if isinstance(spec.a_law, FiniteSupportA):
        generators = list(spec.a_law.matrices)
    else:
        generators = products[: min(len(products), 32)]
    seeds = []
    for m in products:
        seeds.extend(_real_eigendirections(m))
        if len(seeds) >= 64:
            break
    irreducible = not _invariant_family_detected(generators, seeds)
    return IpVerdict(proximal_found=proximal, irreducible_heuristic=irreducible, nonarith_1d=None)


# --- condition (c-e) aggregate check ----------------------------------------


@dataclass
class CeReport:
    lyapunov_negative: bool
    alpha_root: Optional[float]
    moments_finite: bool
    no_fixed_point: bool
    lyapunov: float = 0.0
    lyapunov_stderr: float = 0.0
    fixed_point_generic: bool = False
    flags: list = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return (
            self.lyapunov_negative
            and self.alpha_root is not None
            and self.moments_finite
            and self.no_fixed_point
        )


_MOMENT_EPS = 0.1  # probe exponent for the moment-finiteness condition


def _gamma_probe(spec: AffineLawSpec, gen: np.random.Generator, n: int) -> np.ndarray:
    """Draws of sup(|A|, |A^-1|) (operator norms)."""
    a = spec.draw_a(gen, n)
    if spec.dimension == 1:
        aa = np.abs(a)
        return np.maximum(aa, 1.0 / aa)
    norms = np.linalg.norm(a, ord=2, axis=(1, 2))
    inv = np.linalg.inv(a)
    inv_norms = np.linalg.norm(inv, ord=2, axis=(1, 2))
    return np.maximum(norms, inv_norms)


def _moments_probe(spec: AffineLawSpec, alpha: float, batch: int, rng: RngStream) -> bool:
    """Tail stability of sample means of |A|^alpha gamma^eps(A) + |B|^(alpha+eps)."""
    gen = spec.stream(rng)
    a = spec.draw_a(gen, batch)
    anorm = np.abs(a) if spec.dimension == 1 else np.linalg.norm(a, ord=2, axis=(1, 2))
    gam = _gamma_probe(spec, spec.stream(rng.child(1)), batch)
    b = spec.draw_b(gen, batch)
    bnorm = np.abs(b) if spec.dimension == 1 else np.linalg.norm(b, axis=1)
    vals = anorm**alpha * gam**_MOMENT_EPS + bnorm ** (alpha + _MOMENT_EPS)
    thirds = [vals[: batch // 4].mean(), vals[: batch // 2].mean(), vals.mean()]
    ref = max(thirds)
    if ref == 0.0:
        return True
    return (max(thirds) - min(thirds)) / ref <= 0.5


def _fixed_point_check(spec: AffineLawSpec):
    """(no_fixed_point, generic). Exactly solvable for finite-support laws."""
    pairs = spec.support_pairs()
    if pairs is None:
        # a nondegenerate continuous B-law a.s. has no common fixed point
        return True, True
    d = spec.dimension
    rows = np.vstack([np.atleast_2d(A) - np.eye(d) for A, _, _ in pairs])
    rhs = np.concatenate([-np.atleast_1d(B) for _, B, _ in pairs])
    x, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    residual = float(np.max(np.abs(rows @ x - rhs)))
    return residual > 1e-9, False


def check_ce(spec: AffineLawSpec, budget: SimBudget, rng: RngStream) -> CeReport:
    """Aggregate numerical check of the contraction-expansion hypothesis."""
    from . import linrw  # local import to avoid a module cycle

    lyap = linrw.estimate_lyapunov(spec, budget, rng.child(1))
    alpha_root = None
    flags = []
    try:
        alpha_root = linrw.solve_alpha(spec, budget, rng.child(2), bracket=(1e-3, 8.0), tol=0.05)
    except NoBracket as exc:
        if "expansion" in str(exc):
            alpha_root = None  # pure contraction: k < 1 everywhere, conclusively no root
        else:
            raise Inconclusive(f"alpha root search failed to bracket: {exc}") from exc
    probe_alpha = alpha_root if alpha_root is not None else 1.0
    moments = _moments_probe(spec, probe_alpha, budget.batch, rng.child(3))
    no_fp, generic = _fixed_point_check(spec)
    return CeReport(
        lyapunov_negative=lyap.value < 0.0,
        alpha_root=alpha_root,
        moments_finite=moments,
        no_fixed_point=no_fp,
        lyapunov=lyap.value,
        lyapunov_stderr=lyap.stderr,
        fixed_point_generic=generic,
        flags=flags,
    )
