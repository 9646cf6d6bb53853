"""Acceptance suite: one function per criterion, each returning a
CriterionResult with the measured quantities in `detail`.  The CLI `suite`
command prints one PASS/FAIL line per criterion; tests/test_acceptance.py
asserts them individually.

Tolerances are pinned here, not configurable: closed-form oracles,
degenerate cases, and cross-estimator consistency at desk scale.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import extremal, linrw, pointproc, recursion, ruin, spectral, stable, tail
from .model import (
    AffineLawSpec,
    ConstantB,
    FiniteSupportA,
    FiniteSupportB,
    GarchSquared,
    ScalarLognormal,
    ScalarTwoPoint,
    SimBudget,
    spec_to_dict,
)
from .rng import RngStream

SEED = 20260810


def l2p_spec(b_scale: float = 1.0) -> AffineLawSpec:
    """A in {2, 1/2} w.p. {1/3, 2/3}, B constant."""
    return AffineLawSpec(1, ScalarTwoPoint(2.0, 0.5, 1.0 / 3.0), ConstantB([b_scale]))


def tuned_twopoint(s: float) -> AffineLawSpec:
    """Two-point model with the moment-curve root at s, from the closed-form
    weight p solving p 2^s + (1-p) 2^-s = 1."""
    p = (1.0 - 2.0**-s) / (2.0**s - 2.0**-s)
    return AffineLawSpec(1, ScalarTwoPoint(2.0, 0.5, p), ConstantB([1.0]))


@dataclass
class CriterionResult:
    name: str
    passed: bool
    detail: str
    seconds: float


class _Shared:
    """Lazily computed fixtures reused across criteria."""

    def __init__(self, threads: int = 1):
        self.threads = threads
        self._cache = {}

    def l2p_fit(self):
        if "fit" not in self._cache:
            samp = recursion.sample_stationary(l2p_spec(), 10**6, 1e-6, RngStream(SEED, 1))
            self._cache["samp"] = samp
            self._cache["fit"] = tail.fit_tail(samp.values, k_frac=0.01)
        return self._cache["samp"], self._cache["fit"]

    def l2p_traj(self):
        if "traj" not in self._cache:
            start = recursion.sample_stationary(l2p_spec(), 1, 1e-8, RngStream(SEED, 2)).values
            self._cache["traj"] = recursion.simulate_path(
                l2p_spec(), np.atleast_1d(start[0]), 10**6, RngStream(SEED, 3)
            )
        return self._cache["traj"]

    def l2p_theta(self):
        if "theta" not in self._cache:
            _, fit = self.l2p_fit()
            self._cache["theta"] = extremal.theta_theory(
                l2p_spec(), fit, 100_000, rng=RngStream(SEED, 4)
            )
        return self._cache["theta"]

    def l2p_clusters(self):
        if "clusters" not in self._cache:
            _, fit = self.l2p_fit()
            self._cache["clusters"] = extremal.cluster_sizes(
                l2p_spec(), fit, 100_000, rng=RngStream(SEED, 4), K=64
            )
        return self._cache["clusters"]


def _result(name, passed, detail, t0):
    return CriterionResult(name, bool(passed), detail, time.time() - t0)


# --- criteria ----------------------------------------------------------------


def crit_01_alpha_exact(shared) -> CriterionResult:
    t0 = time.time()
    alpha = linrw.solve_alpha(l2p_spec(), SimBudget(), RngStream(SEED, 10), tol=1e-9)
    dt = time.time() - t0
    ok = abs(alpha - 1.0) <= 1e-6 and dt < 1.0
    return _result("01 alpha exact curve", ok, f"alpha={alpha:.9f} ({dt:.2f}s)", t0)


def crit_02_alpha_lognormal(shared) -> CriterionResult:
    t0 = time.time()
    spec = AffineLawSpec(1, ScalarLognormal(-0.5, 1.0), ConstantB([1.0]))
    budget = SimBudget(path_length=8, replicas=100_000)  # ladder {2, 4, 8} <= 50
    alpha = linrw.solve_alpha(spec, budget, RngStream(SEED, 11), tol=0.05)
    dt = time.time() - t0
    ok = abs(alpha - 1.0) <= 0.05 and dt < 30.0
    return _result("02 alpha lognormal MC", ok, f"alpha={alpha:.4f} ({dt:.1f}s)", t0)


def crit_03_alpha_garch(shared) -> CriterionResult:
    t0 = time.time()
    spec = AffineLawSpec(1, GarchSquared(1.0), ConstantB([1.0]))
    alpha = linrw.solve_alpha(
        spec, SimBudget(path_length=8, replicas=100_000), RngStream(SEED, 12), tol=0.05
    )
    return _result("03 alpha GARCH route", abs(alpha - 1.0) <= 0.05, f"alpha={alpha:.4f}", t0)


def crit_04_hill(shared) -> CriterionResult:
    t0 = time.time()
    gen = RngStream(SEED, 13).generator()
    pareto2 = gen.random(10**5) ** (-1.0 / 2.0)
    a2, _ = tail.hill_alpha(pareto2, 0.01)
    samp, fit = shared.l2p_fit()
    a1, _ = tail.hill_alpha(samp.radii(), 0.01)
    ok = abs(a2 - 2.0) <= 0.15 and abs(a1 - 1.0) <= 0.1
    return _result("04 Hill consistency", ok, f"pareto2={a2:.3f}, L2P={a1:.3f}", t0)


def crit_05_tail_scaling(shared) -> CriterionResult:
    t0 = time.time()
    _, fit1 = shared.l2p_fit()
    samp2 = recursion.sample_stationary(l2p_spec(2.0), 10**6, 1e-6, RngStream(SEED, 14))
    tc2 = tail.tail_constant(samp2.radii(), fit1.alpha)
    ratio = tc2.c / fit1.c
    ok = abs(ratio / 2.0 - 1.0) <= 0.2
    return _result("05 tail constant scaling", ok,
                    f"c={fit1.c:.3f} -> {tc2.c:.3f}, ratio {ratio:.3f} (target 2)", t0)


def crit_06_theta_triconsistency(shared) -> CriterionResult:
    _, fit = shared.l2p_fit()
    traj = shared.l2p_traj()
    t0 = time.time()  # timed: the three estimators on a prepared fit + path
    tb = extremal.theta_blocks(traj, fit)
    tr = extremal.theta_runs(traj, fit, 50)
    tt = extremal.theta_theory(l2p_spec(), fit, 100_000, rng=RngStream(SEED, 4))
    vals = {"blocks": tb, "runs": tr, "theory": tt}
    pair_ok = all(
        abs(a.value - b.value) <= 0.05
        for i, a in enumerate(vals.values())
        for b in list(vals.values())[i + 1:]
    )
    range_ok = all(0.02 < v.value < 0.98 for v in vals.values())
    below_one = all(v.value + 3 * v.stderr < 1.0 for v in vals.values())
    dt = time.time() - t0
    ok = pair_ok and range_ok and below_one and dt < 120.0
    detail = ", ".join(f"{k}={v.value:.4f}+-{v.stderr:.4f}" for k, v in vals.items())
    return _result("06 theta tri-consistency", ok, f"{detail} ({dt:.0f}s)", t0)


def crit_07_iid_control(shared) -> CriterionResult:
    t0 = time.time()
    gen = RngStream(SEED, 15).generator()
    marks = 1.0 / gen.random(10**6)  # Pareto(1)
    traj = recursion.Trajectory(np.zeros(1), marks)
    fit = tail.TailFit(alpha=1.0, c=1.0, dimension=1)
    # theta = 1 needs the per-block exceedance mean to be small: residual
    # Poisson clumping biases blocks down by (1 - exp(-m)) / m
    tb = extremal.theta_blocks(traj, fit, level_factor=16.0)
    return _result("07 independence control", tb.value >= 0.9,
                    f"theta_blocks={tb.value:.4f} (theory 1)", t0)


def crit_08_cluster_oracle(shared) -> CriterionResult:
    t0 = time.time()
    half = AffineLawSpec(1, FiniteSupportA(np.array([[[0.5]]]), [1.0]), ConstantB([1.0]))
    fit = tail.TailFit(alpha=1.0, c=1.0, dimension=1)
    cl = extremal.cluster_sizes(half, fit, 10**5, rng=RngStream(SEED, 16), K=12)
    expected = 0.5 ** np.arange(1, 13)
    max_err = float(np.max(np.abs(cl.zeta - expected)))
    nonincreasing = bool(np.all(np.diff(cl.zeta) <= 2 * cl.zeta_stderr[1:]))
    nu_sum = float(cl.nu.sum())
    ok = max_err <= 0.01 and abs(nu_sum - 1.0) <= 1e-9 and nonincreasing
    return _result("08 cluster-size oracle", ok,
                    f"max|zeta-2^-k|={max_err:.4f}, sum nu={nu_sum:.6f}", t0)


def crit_09_mean_cluster_identity(shared) -> CriterionResult:
    t0 = time.time()
    cl = shared.l2p_clusters()
    ok = abs(cl.identity_defect) <= 3 * cl.identity_stderr
    return _result("09 mean-cluster identity", ok,
                    f"defect={cl.identity_defect:.4f}, 3 stderr={3 * cl.identity_stderr:.4f}", t0)


def crit_10_frechet(shared) -> CriterionResult:
    t0 = time.time()
    _, fit = shared.l2p_fit()
    bm = pointproc.block_maxima(l2p_spec(), 10**4, 1000, RngStream(SEED, 17),
                                threads=shared.threads)
    ff = pointproc.frechet_fit(bm, fit)
    tb = extremal.theta_blocks(shared.l2p_traj(), fit)
    ok = ff.ks_distance <= 0.08 and abs(ff.theta_fit - tb.value) <= 0.07
    return _result("10 Frechet law", ok,
                    f"theta_fit={ff.theta_fit:.4f}, blocks={tb.value:.4f}, ks={ff.ks_distance:.4f}", t0)


def crit_11_compound_poisson(shared) -> CriterionResult:
    t0 = time.time()
    _, fit = shared.l2p_fit()
    traj = shared.l2p_traj()
    cl = shared.l2p_clusters()
    scheme = extremal.BlockScheme.default(traj.n)
    level = tail.u_n(fit, max(64, scheme.r_n // 4))
    proc = pointproc.exceedances(traj, level)
    rep = pointproc.interexceedance_test(proc, cl.nu)
    ok = rep.size_dist_tv <= 0.1 and rep.cluster_count_poisson_ks <= 0.1
    return _result("11 compound Poisson", ok,
                    f"tv={rep.size_dist_tv:.4f}, gaps ks={rep.cluster_count_poisson_ks:.4f}, "
                    f"clusters={rep.n_clusters}", t0)


def crit_12_ruin(shared) -> CriterionResult:
    t0 = time.time()
    samp, fit = shared.l2p_fit()
    tt = shared.l2p_theta()
    t_level = float(np.quantile(samp.radii(), 0.999))
    target = ruin.TargetSet("annulus", 1.0)
    horizon = ruin.default_horizon(fit, tt.value, t_level)
    hts = ruin.hitting_times(l2p_spec(), [0.0], target, t_level, 1000, horizon, RngStream(SEED, 18))
    ef = ruin.exp_fit(hts, fit.alpha)
    mean_norm = float(np.mean(hts.times) * t_level**-fit.alpha)
    ct = fit.c * tt.value
    rel = abs(mean_norm * ct - 1.0)
    cone = ruin.TargetSet("cone", 1.0, axis=[1.0])
    st = ruin.theta_of_set(l2p_spec(), fit, cone, 50_000, RngStream(SEED, 19))
    cone_ok = st.theta_A <= tt.value + 2 * math.hypot(st.stderr, tt.stderr)
    ok = rel <= 0.15 and ef.ks_distance <= 0.1 and cone_ok
    return _result("12 ruin time", ok,
                    f"mean t^-a tau={mean_norm:.3f} vs 1/(c theta)={1 / ct:.3f} (rel {rel:.3f}), "
                    f"ks={ef.ks_distance:.4f}, theta_cone={st.theta_A:.4f}", t0)


def crit_13_loglaw(shared) -> CriterionResult:
    t0 = time.time()
    start = recursion.sample_stationary(l2p_spec(), 100, 1e-8, RngStream(SEED, 20)).values
    trajs = [
        recursion.simulate_path(l2p_spec(), np.atleast_1d(start[r]), 10**6, RngStream(SEED, 21).child(r))
        for r in range(100)
    ]
    diag = pointproc.loglaw_diag(trajs)
    ok = 0.9 <= diag["median_ratio"] <= 1.1
    return _result("13 logarithm law", ok,
                    f"median log M_n / log n = {diag['median_ratio']:.4f} at n=1e6", t0)


def crit_14_stable(shared) -> CriterionResult:
    t0 = time.time()
    _, fit_raw = shared.l2p_fit()
    fit1 = tail.TailFit(alpha=1.0, c=fit_raw.c, directional_hist=fit_raw.directional_hist,
                        dimension=1)
    s_n = stable.partial_sums(l2p_spec(), fit1, 10**4, 1000, RngStream(SEED, 22),
                              threads=shared.threads)
    s_4n = stable.partial_sums(l2p_spec(), fit1, 4 * 10**4, 1000, RngStream(SEED, 23),
                               threads=shared.threads)
    rep1 = stable.stability_check(s_n, s_4n)
    dt1 = time.time() - t0
    t1 = time.time()
    spec07 = tuned_twopoint(0.7)
    samp07 = recursion.sample_stationary(spec07, 500_000, 1e-6, RngStream(SEED, 24))
    fit07_raw = tail.fit_tail(samp07.values, k_frac=0.01)
    fit07 = tail.TailFit(alpha=0.7, c=fit07_raw.c, directional_hist=fit07_raw.directional_hist,
                         dimension=1)
    a_n = stable.partial_sums(spec07, fit07, 10**4, 1000, RngStream(SEED, 25),
                              threads=shared.threads)
    a_4n = stable.partial_sums(spec07, fit07, 4 * 10**4, 1000, RngStream(SEED, 26),
                               threads=shared.threads)
    rep07 = stable.stability_check(a_n, a_4n)
    dt2 = time.time() - t1
    ok = (
        rep1.regime == stable.REGIME_EQ1 and rep1.ks_distance <= 0.06 and dt1 < 300
        and rep07.regime == stable.REGIME_BELOW1 and rep07.ks_distance <= 0.05
        and rep07.ecf_defect <= 0.05 and dt2 < 300
    )
    return _result("14 stable limit", ok,
                    f"alpha=1: ks={rep1.ks_distance:.4f} ({dt1:.0f}s); "
                    f"alpha=0.7: ks={rep07.ks_distance:.4f}, ecf={rep07.ecf_defect:.4f} ({dt2:.0f}s)", t0)


def crit_15_spectral_gap(shared) -> CriterionResult:
    t0 = time.time()
    bern = AffineLawSpec(
        1,
        FiniteSupportA(np.array([[[0.5]]]), [1.0]),
        FiniteSupportB(np.array([[0.0], [0.5]]), [0.5, 0.5]),
    )
    op = spectral.build_grid_operator(bern, 2048, (0.0, 1.0))
    gap = spectral.second_eigenvalue(op)
    _, dens = spectral.stationary_measure(op)
    dens_err = float(np.max(np.abs(dens - 1.0)))
    ok = abs(gap.lambda2 - 0.5) <= 0.01 and dens_err <= 1e-3
    return _result("15 spectral gap", ok,
                    f"lambda2={gap.lambda2:.5f}, stationary linf err={dens_err:.2e}", t0)


def crit_16_drift(shared) -> CriterionResult:
    t0 = time.time()
    dr = spectral.verify_drift(l2p_spec(), 0.5, 20, [0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 100.0],
                               4000, RngStream(SEED, 27), alpha=1.0)
    margin = (1.0 - dr.beta_hat) / max(dr.beta_stderr, 1e-12)
    ok = dr.beta_hat < 1.0 and margin >= 3.0
    return _result("16 drift inequality", ok,
                    f"beta={dr.beta_hat:.4f}+-{dr.beta_stderr:.4f} (margin {margin:.0f} sigma), "
                    f"b={dr.b_hat:.3f}", t0)


def crit_17_mixing(shared) -> CriterionResult:
    t0 = time.time()
    _, fit = shared.l2p_fit()
    paths = pointproc.stationary_mark_paths(l2p_spec(), 2**16, 2000, RngStream(SEED, 28),
                                            threads=shared.threads)
    curve = pointproc.mixing_gap(paths, pointproc.BumpSpec(), fit)
    slope = curve.loglog_slope()
    gen = RngStream(SEED, 29).generator()
    iid = [1.0 / gen.random(2**16) for _ in range(600)]
    fit_iid = tail.TailFit(alpha=1.0, c=1.0, dimension=1)
    ctrl = pointproc.mixing_gap(iid, pointproc.BumpSpec(), fit_iid)
    iid_ok = bool(np.all(ctrl.i_n <= 2 * ctrl.stderr))
    ok = slope <= -0.3 and iid_ok
    return _result("17 mixing gap", ok,
                    f"slope={slope:.3f} (need <= -0.3), iid within 2 sigma: {iid_ok}", t0)


def crit_18_determinism(shared) -> CriterionResult:
    import tempfile

    from .cli import run as cli_run

    t0 = time.time()
    cfg = {
        "model": spec_to_dict(l2p_spec()),
        "budget": {"path_length": 1000, "replicas": 500, "batch": 20000},
        "seed": SEED,
        "tail": {"batch": 50000},
        "frechet": {"n": 2000, "replicas": 300},
        "simulate": {"n": 5000},
    }
    with tempfile.TemporaryDirectory() as td:
        td = Path(td)
        cfg_path = td / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        outs = []
        for tag, threads in (("a", 1), ("b", 1), ("c", 2)):
            out = td / tag
            for command in ("alpha", "simulate", "frechet"):
                code = cli_run(command, str(cfg_path), out=str(out / command), threads=threads)
                if code == 1:
                    return _result("18 determinism", False, f"{command} exited 1", t0)
            outs.append(out)
        mismatches = []
        for command in ("alpha", "simulate", "frechet"):
            for f in sorted((outs[0] / command).iterdir()):
                for other in outs[1:]:
                    g = other / command / f.name
                    if f.name == "manifest.json":
                        da = json.loads(f.read_text())
                        db = json.loads(g.read_text())
                        da.pop("wall_time_s"), db.pop("wall_time_s")
                        if da != db:
                            mismatches.append(f"{command}/{f.name}")
                    elif f.read_bytes() != g.read_bytes():
                        mismatches.append(f"{command}/{f.name}")
    ok = not mismatches
    return _result("18 determinism", ok,
                    "rerun and 2-thread artifacts byte-identical" if ok else f"mismatches: {mismatches}", t0)


CRITERIA = [
    crit_01_alpha_exact,
    crit_02_alpha_lognormal,
    crit_03_alpha_garch,
    crit_04_hill,
    crit_05_tail_scaling,
    crit_06_theta_triconsistency,
    crit_07_iid_control,
    crit_08_cluster_oracle,
    crit_09_mean_cluster_identity,
    crit_10_frechet,
    crit_11_compound_poisson,
    crit_12_ruin,
    crit_13_loglaw,
    crit_14_stable,
    crit_15_spectral_gap,
    crit_16_drift,
    crit_17_mixing,
    crit_18_determinism,
]


def run_suite(threads: int = 1) -> list:
    shared = _Shared(threads)
    return [fn(shared) for fn in CRITERIA]
