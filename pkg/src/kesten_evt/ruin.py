"""Hitting times of dilated target sets, the exponential limit-law fit with
rate c * theta(A), and escape probabilities / capacities of the linear walk."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from . import _kernels
from ._walks import walk_hit_counts
from .errors import AllCensored, RejectionStall
from .model import AffineLawSpec
from .rng import RngStream
from .tail import TailFit, sample_lambda1

_PASS_STEPS = 1024
_CENSOR_LIMIT = 0.05


@dataclass(frozen=True)
class TargetSet:
    """Borel target inside {|v| > 1}: an annulus {|v| > radius} or a cone
    (annulus cut to directions within half_angle of axis; in d = 1 the axis
    sign selects a half-line).  Indicators are O(d) per test."""

    kind: str  # "annulus" | "cone"
    radius: float = 1.0
    axis: Optional[np.ndarray] = None
    half_angle: float = math.pi / 4

    def __post_init__(self):
        if self.kind not in ("annulus", "cone"):
            raise ValueError("kind must be 'annulus' or 'cone'")
        if self.radius < 1.0:
            raise ValueError("target must lie in the unit-ball complement (radius >= 1)")
        if self.kind == "cone":
            if self.axis is None:
                raise ValueError("cone needs an axis")
            ax = np.atleast_1d(np.asarray(self.axis, dtype=float))
            object.__setattr__(self, "axis", ax / np.linalg.norm(ax))

    def indicator(self, points: np.ndarray, t: float = 1.0) -> np.ndarray:
        """Membership of each point in t * target."""
        pts = np.atleast_1d(points)
        if pts.ndim == 1:
            inside = np.abs(pts) > t * self.radius
            if self.kind == "cone":
                inside &= (pts * self.axis[0]) > 0
            return inside
        nrm = np.sqrt((pts * pts).sum(axis=1))
        inside = nrm > t * self.radius
        if self.kind == "cone":
            proj = pts @ self.axis / np.where(nrm > 0, nrm, 1.0)
            inside &= proj >= math.cos(self.half_angle)
        return inside

    def _kernel_params(self, d: int):
        if self.kind == "annulus":
            return 0, 0.0, 0.0, -1.0
        if d == 1:
            sign_mode = 1 if self.axis[0] > 0 else -1
            return sign_mode, 0.0, 0.0, -1.0
        return 1, float(self.axis[0]), float(self.axis[1]), math.cos(self.half_angle)


@dataclass
class HittingTimeSample:
    t: float
    times: np.ndarray  # tau per uncensored replica
    censored: int
    horizon: int
    batch: int

    @property
    def censored_frac(self) -> float:
        return self.censored / self.batch


def default_horizon(fit: TailFit, theta_hat: float, t: float) -> int:
    """About 20 expected interarrival times at rate c theta t^-alpha."""
    rate = fit.c * theta_hat * t**-fit.alpha
    return max(1000, int(20.0 / rate))


def hitting_times(
    spec: AffineLawSpec,
    x,
    target: TargetSet,
    t: float,
    batch: int,
    horizon: int,
    rng: RngStream,
) -> HittingTimeSample:
    """First n >= 1 with X_n in t * target, per replica; censored at horizon."""
    if t < 1.0:
        raise ValueError("dilation level t must be >= 1")
    d = spec.dimension
    x0 = np.atleast_1d(np.asarray(x, dtype=float))
    gen = spec.stream(rng)
    alive = np.ones(batch, dtype=np.uint8)
    steps = np.zeros(batch, dtype=np.int64)
    tau = np.zeros(batch, dtype=np.int64)
    t_radius = t * target.radius
    if d == 1:
        sign_mode, *_ = target._kernel_params(1)
        xs = np.full(batch, x0[0])
        while alive.any():
            a = spec.draw_a(gen, batch * _PASS_STEPS).reshape(batch, _PASS_STEPS)
            b = spec.draw_b(gen, batch * _PASS_STEPS).reshape(batch, _PASS_STEPS)
            _kernels.hit_pass_1d(
                np.ascontiguousarray(a), np.ascontiguousarray(b),
                xs, alive, steps, tau, t_radius, sign_mode, horizon,
            )
    elif d == 2:
        cone_on, ux, uy, cos_half = target._kernel_params(2)
        xs = np.tile(x0, (batch, 1))
        while alive.any():
            a = spec.draw_a(gen, batch * _PASS_STEPS).reshape(batch, _PASS_STEPS, 2, 2)
            b = spec.draw_b(gen, batch * _PASS_STEPS).reshape(batch, _PASS_STEPS, 2)
            _kernels.hit_pass_2d(
                np.ascontiguousarray(a), np.ascontiguousarray(b),
                xs, alive, steps, tau, t_radius, cone_on, ux, uy, cos_half, horizon,
            )
    else:
        xs = np.tile(x0, (batch, 1))
        while alive.any():
            a = spec.draw_a(gen, batch * _PASS_STEPS).reshape(batch, _PASS_STEPS, d, d)
            b = spec.draw_b(gen, batch * _PASS_STEPS).reshape(batch, _PASS_STEPS, d)
            _nd_hit_pass(a, b, xs, alive, steps, tau, target, t, horizon)
    hit = tau > 0
    censored = int(batch - hit.sum())
    if censored == batch:
        raise AllCensored(f"no replica hit the target within {horizon} steps")
    return HittingTimeSample(t, tau[hit].astype(float), censored, horizon, batch)


def _nd_hit_pass(A, B, x, alive, steps, tau, target, t, horizon):
    m = A.shape[1]
    for j in range(m):
        live = alive == 1
        if not live.any():
            break
        x[live] = np.einsum("ril,rl->ri", A[live, j], x[live]) + B[live, j]
        steps[live] += 1
        hit = live & target.indicator(x, t)
        tau[hit] = steps[hit]
        alive[hit] = 0
        alive[(alive == 1) & (steps >= horizon)] = 0


@dataclass
class ExpFit:
    rate: float
    ks_distance: float
    flags: list = field(default_factory=list)


def exp_fit(sample: HittingTimeSample, alpha: float) -> ExpFit:
    """Exponential fit of normalized hitting times tau * t^-alpha.

    Rate is the censoring-adjusted MLE (uncensored count over total observed
    normalized exposure); KS compares uncensored times to Exp(rate).
    """
    flags = []
    if sample.censored_frac > _CENSOR_LIMIT:
        flags.append("CensorBias")
    scale = sample.t**-alpha
    obs = sample.times * scale
    exposure = float(obs.sum() + sample.censored * sample.horizon * scale)
    rate = len(obs) / exposure
    ks = float(stats.kstest(obs, "expon", args=(0, 1.0 / rate)).statistic)
    return ExpFit(float(rate), ks, flags)


@dataclass
class SetTheta:
    theta_A: float
    gamma_A: float
    lambda0_A: float
    stderr: float
    acceptance: float
    flags: list = field(default_factory=list)


def theta_of_set(
    spec: AffineLawSpec,
    fit: TailFit,
    target: TargetSet,
    count: int,
    rng: RngStream,
    eps_stop: float = 1e-3,
    horizon_cap: int = 10**5,
) -> SetTheta:
    """Escape probability and capacity of the target for the linear walk.

    lambda0_A is the normalized tail mass of A, estimated by the acceptance
    rate of tail-measure proposals (the tail measure restricted to the unit
    ball complement is the natural proposal since A lies inside it);
    gamma_A = lambda0_A * P(no return to A); theta_A = gamma_A / lambda0_A.
    """
    gen_accept = 0
    proposals = 0
    accepted = []
    pass_size = max(4096, count)
    for i in range(2000):
        v = sample_lambda1(fit, pass_size, rng.child(2 * i))
        keep = target.indicator(v)
        gen_accept += int(keep.sum())
        proposals += pass_size
        accepted.append(v[keep] if v.ndim == 1 else v[keep, :])
        if gen_accept >= count:
            break
        if proposals >= 10_000 and gen_accept / proposals < 1e-4:
            raise RejectionStall(
                f"acceptance rate {gen_accept / proposals:.2e} below 1e-4 for the target"
            )
    v0 = np.concatenate(accepted)[:count]
    lambda0_A = gen_accept / proposals
    sign_mode, ux, uy, cos_half = target._kernel_params(spec.dimension)
    if spec.dimension == 1:
        hits, capped = walk_hit_counts(
            spec, v0, rng.child(99991), eps_stop=eps_stop, horizon=horizon_cap,
            radius=target.radius, sign_mode=sign_mode,
        )
    else:
        cone_axis = target.axis if target.kind == "cone" else None
        hits, capped = walk_hit_counts(
            spec, v0, rng.child(99991), eps_stop=eps_stop, horizon=horizon_cap,
            radius=target.radius, cone_axis=cone_axis, cos_half=cos_half,
        )
    no_return = float((hits == 0).mean())
    stderr = math.sqrt(max(no_return * (1 - no_return), 1e-12) / len(v0))
    flags = ["Unreliable"] if capped.mean() > 0.01 else []
    return SetTheta(no_return, lambda0_A * no_return, lambda0_A, stderr, lambda0_A, flags)
