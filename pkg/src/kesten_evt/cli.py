"""Command-line front end.

    kesten-evt <command> --config cfg.json [--seed U64] [--out DIR]
               [--threads N] [--override key=value ...]

Commands: check simulate alpha tail theta clusters frechet pointproc ruin
stable spectral suite.  Every run writes a manifest (command, config hash,
seed, versions, wall time) next to its artifacts.  Exit codes: 0 success,
2 success with soft quality flags (HeavyTailVariance, NoPlateau,
CensorBias, Unreliable, ...), 1 error.

Seeding: the config must carry a seed (no wall-clock seeding); artifacts
rerun byte-identically for the same config + seed, and thread count never
changes numbers, only wall time.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _parallel
from .errors import ConfigError, KestenEvtError, ModelError
from .io import config_hash, write_csv, write_json, write_ndjson
from .model import AffineLawSpec, SimBudget, check_ce, check_ip, spec_from_dict
from .rng import RngStream

COMMANDS = [
    "check", "simulate", "alpha", "tail", "theta", "clusters", "frechet",
    "pointproc", "ruin", "stable", "spectral", "suite",
]


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {path}:{exc.lineno}:{exc.colno} {exc.msg}") from exc


def _apply_override(cfg: dict, key: str, raw: str):
    """Dotted-key override; values parse as JSON, falling back to strings."""
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {key!r} collides with a non-object field")
    node[parts[-1]] = value


def _require(cfg: dict, field: str):
    if field not in cfg:
        raise ConfigError(f"config missing required field {field!r}")
    return cfg[field]


class RunContext:
    def __init__(self, cfg: dict, out_dir: Path, threads: int):
        self.cfg = cfg
        self.out = out_dir
        self.threads = threads
        self.flags: list = []
        try:
            self.spec: AffineLawSpec = spec_from_dict(_require(cfg, "model"))
        except ModelError as exc:
            raise ConfigError(f"field 'model': {exc}") from exc
        seed = cfg.get("seed")
        if seed is None:
            raise ConfigError("config missing required field 'seed' (no wall-clock seeding)")
        self.seed = int(seed)
        b = cfg.get("budget", {})
        self.budget = SimBudget(
            int(b.get("path_length", 1000)),
            int(b.get("replicas", 1000)),
            int(b.get("batch", 10000)),
        )
        self.artifacts: list = []

    def stream(self, task: int) -> RngStream:
        return RngStream(self.seed, task)

    def opts(self, command: str) -> dict:
        return self.cfg.get(command, {})

    def emit_csv(self, name, rows, fieldnames=None):
        self.artifacts.append(name)
        return write_csv(self.out / name, rows, fieldnames)

    def emit_json(self, name, doc):
        self.artifacts.append(name)
        return write_json(self.out / name, doc)

    def emit_ndjson(self, name, records):
        self.artifacts.append(name)
        return write_ndjson(self.out / name, records)

    def absorb(self, flags):
        for f in flags:
            if f not in self.flags:
                self.flags.append(f)


def _fit_from_config(ctx: RunContext):
    """Stationary batch + tail fit used by several commands."""
    from . import recursion, tail

    opts = ctx.opts("tail")
    batch = int(opts.get("batch", ctx.budget.batch))
    samp = recursion.sample_stationary(ctx.spec, batch, float(opts.get("eps_trunc", 1e-6)), ctx.stream(101))
    fit = tail.fit_tail(
        samp.values,
        k_frac=float(opts.get("k_frac", 0.01)),
        alpha=opts.get("alpha"),
    )
    return samp, fit


# --- command implementations -------------------------------------------------


def _cmd_check(ctx: RunContext):
    verdict = check_ip(ctx.spec, int(ctx.opts("check").get("n_probe", 200)), ctx.stream(1))
    report = check_ce(ctx.spec, ctx.budget, ctx.stream(2))
    ctx.emit_json("check.json", {
        "ip": {
            "proximal_found": verdict.proximal_found,
            "irreducible_heuristic": verdict.irreducible_heuristic,
            "nonarith_1d": verdict.nonarith_1d,
        },
        "ce": {
            "lyapunov_negative": report.lyapunov_negative,
            "alpha_root": report.alpha_root,
            "moments_finite": report.moments_finite,
            "no_fixed_point": report.no_fixed_point,
            "lyapunov": report.lyapunov,
            "lyapunov_stderr": report.lyapunov_stderr,
            "fixed_point_generic": report.fixed_point_generic,
            "satisfied": report.satisfied,
        },
    })


def _cmd_simulate(ctx: RunContext):
    from . import recursion

    opts = ctx.opts("simulate")
    n = int(opts.get("n", ctx.budget.path_length))
    start = np.asarray(opts.get("start", [0.0] * ctx.spec.dimension), dtype=float)
    traj = recursion.simulate_path(ctx.spec, start, n, ctx.stream(11))
    ctx.absorb(traj.flags)
    fmt = opts.get("format", "csv")
    pts = np.atleast_2d(traj.points.reshape(n, -1))
    if fmt == "ndjson":
        ctx.emit_ndjson("trajectory.ndjson", ({"k": k + 1, "x": row.tolist()} for k, row in enumerate(pts)))
    else:
        cols = [f"x{j}" for j in range(pts.shape[1])]
        ctx.emit_csv("trajectory.csv", ({"k": k + 1, **dict(zip(cols, row))} for k, row in enumerate(pts)),
                     fieldnames=["k", *cols])


def _cmd_alpha(ctx: RunContext):
    from . import linrw

    opts = ctx.opts("alpha")
    bracket = tuple(opts.get("bracket", (1e-3, 4.0)))
    tol = float(opts.get("tol", 1e-6 if linrw.has_exact_curve(ctx.spec) else 0.05))
    alpha = linrw.solve_alpha(ctx.spec, ctx.budget, ctx.stream(21), bracket=bracket, tol=tol)
    grid = opts.get("s_grid", np.round(np.linspace(0.1, min(2.5 * alpha, bracket[1]), 13), 6).tolist())
    curve = linrw.moment_curve(ctx.spec, grid, ctx.budget, ctx.stream(22))
    lyap = linrw.estimate_lyapunov(ctx.spec, ctx.budget, ctx.stream(23))
    ctx.emit_json("alpha.json", {
        "alpha": alpha, "tol": tol,
        "lyapunov": lyap.value, "lyapunov_stderr": lyap.stderr,
        "exact_curve": linrw.has_exact_curve(ctx.spec),
    })
    ctx.emit_csv("moment_curve.csv", curve.to_rows(),
                 fieldnames=["s", "log_k", "stderr", "n_used", "replicas"])


def _cmd_tail(ctx: RunContext):
    from . import tail

    samp, fit = _fit_from_config(ctx)
    ctx.absorb(fit.flags)
    tc = tail.tail_constant(samp.radii(), fit.alpha)
    ctx.emit_json("tail_fit.json", fit.to_dict())
    ctx.emit_csv("plateau.csv", ({"t": t, "c_of_t": c} for t, c in zip(tc.t_grid, tc.c_of_t)),
                 fieldnames=["t", "c_of_t"])


def _cmd_theta(ctx: RunContext):
    from . import extremal, recursion

    opts = ctx.opts("theta")
    _, fit = _fit_from_config(ctx)
    n = int(opts.get("n", 10**6))
    start = recursion.sample_stationary(ctx.spec, 1, 1e-8, ctx.stream(31)).values
    traj = recursion.simulate_path(ctx.spec, np.atleast_1d(start[0]), n, ctx.stream(32))
    report = extremal.extremal_report(
        ctx.spec, traj, fit, ctx.stream(33),
        theory_draws=int(opts.get("theory_draws", 100_000)),
        run_length=int(opts.get("run_length", extremal.DEFAULT_RUN_LENGTH)),
        K=int(opts.get("K", 48)),
    )
    ctx.absorb(report.theta_theory.flags)
    ctx.emit_json("extremal.json", report.to_dict())
    ctx.emit_csv("anticluster.csv", ({"m": m, "R_m": v} for m, v in report.anticluster_curve),
                 fieldnames=["m", "R_m"])


def _cmd_clusters(ctx: RunContext):
    from . import extremal

    opts = ctx.opts("clusters")
    _, fit = _fit_from_config(ctx)
    cl = extremal.cluster_sizes(
        ctx.spec, fit, int(opts.get("draws", 100_000)),
        rng=ctx.stream(41), K=int(opts.get("K", 48)),
    )
    ctx.absorb(cl.flags)
    ctx.emit_json("clusters.json", {
        "theta": cl.theta, "tail_mass": cl.tail_mass,
        "identity_defect": cl.identity_defect, "identity_stderr": cl.identity_stderr,
        "mean_cluster_size": cl.mean_cluster_size(),
    })
    ctx.emit_csv("cluster_sizes.csv",
                 ({"k": k + 1, "zeta": z, "nu": nu, "zeta_stderr": se}
                  for k, (z, nu, se) in enumerate(zip(cl.zeta, cl.nu, cl.zeta_stderr))),
                 fieldnames=["k", "zeta", "nu", "zeta_stderr"])


def _cmd_frechet(ctx: RunContext):
    from . import pointproc

    opts = ctx.opts("frechet")
    _, fit = _fit_from_config(ctx)
    bm = pointproc.block_maxima(
        ctx.spec, int(opts.get("n", 10**4)), int(opts.get("replicas", 1000)),
        ctx.stream(51), threads=ctx.threads,
    )
    ff = pointproc.frechet_fit(bm, fit)
    ctx.absorb(ff.flags)
    ctx.emit_json("frechet.json", {
        "theta_fit": ff.theta_fit, "ks_distance": ff.ks_distance,
        "replicas": ff.replicas, "alpha": fit.alpha, "flags": ff.flags,
    })


def _cmd_pointproc(ctx: RunContext):
    from . import extremal, pointproc, recursion, tail

    opts = ctx.opts("pointproc")
    _, fit = _fit_from_config(ctx)
    n = int(opts.get("n", 2**16))
    start = recursion.sample_stationary(ctx.spec, 1, 1e-8, ctx.stream(61)).values
    traj = recursion.simulate_path(ctx.spec, np.atleast_1d(start[0]), n, ctx.stream(62))
    scheme = extremal.BlockScheme.default(n)
    level = float(opts.get("level", tail.u_n(fit, max(64, scheme.r_n // 4))))
    proc = pointproc.exceedances(traj, level)
    ctx.emit_ndjson("exceedances.ndjson",
                    ({"i": int(i), "mark": np.atleast_1d(m).tolist()}
                     for i, m in zip(proc.times, proc.marks)))
    cl = extremal.cluster_sizes(ctx.spec, fit, int(opts.get("draws", 100_000)),
                                rng=ctx.stream(63), K=48)
    inter = pointproc.interexceedance_test(proc, cl.nu)
    ctx.absorb(inter.flags)
    paths = pointproc.stationary_mark_paths(ctx.spec, n, int(opts.get("replicas", 800)),
                                            ctx.stream(64), threads=ctx.threads)
    curve = pointproc.mixing_gap(paths, pointproc.BumpSpec(), fit)
    loglaw = pointproc.loglaw_diag(
        [recursion.simulate_path(ctx.spec, np.atleast_1d(start[0]), n, ctx.stream(65 + r))
         for r in range(int(opts.get("loglaw_paths", 20)))],
        checkpoints=(10**4, n) if n < 10**5 else (10**4, 10**5, n),
    )
    ctx.emit_json("pointproc.json", {
        "level": level,
        "interexceedance": {
            "poisson_ks": inter.cluster_count_poisson_ks,
            "size_tv": inter.size_dist_tv,
            "n_clusters": inter.n_clusters,
        },
        "loglaw": loglaw,
        "mixing_slope": curve.loglog_slope(),
    })
    ctx.emit_csv("mixing.csv",
                 ({"n": int(nn), "I_n": i, "stderr": s}
                  for nn, i, s in zip(curve.n_grid, curve.i_n, curve.stderr)),
                 fieldnames=["n", "I_n", "stderr"])


def _cmd_ruin(ctx: RunContext):
    from . import extremal, ruin

    opts = ctx.opts("ruin")
    samp, fit = _fit_from_config(ctx)
    tt = extremal.theta_theory(ctx.spec, fit, int(opts.get("theory_draws", 50_000)),
                               rng=ctx.stream(71))
    ctx.absorb(tt.flags)
    t_level = float(opts.get("t", np.quantile(samp.radii(), float(opts.get("t_quantile", 0.999)))))
    target = ruin.TargetSet(opts.get("target", "annulus"), float(opts.get("radius", 1.0)),
                            axis=opts.get("axis"))
    horizon = int(opts.get("horizon", ruin.default_horizon(fit, tt.value, t_level)))
    sample = ruin.hitting_times(ctx.spec, np.zeros(ctx.spec.dimension), target, t_level,
                                int(opts.get("batch", 1000)), horizon, ctx.stream(72))
    ef = ruin.exp_fit(sample, fit.alpha)
    ctx.absorb(ef.flags)
    st = ruin.theta_of_set(ctx.spec, fit, target, int(opts.get("set_draws", 50_000)), ctx.stream(73))
    ctx.absorb(st.flags)
    ctx.emit_csv("hitting_times.csv",
                 ({"replica": r, "tau": float(t), "censored": 0}
                  for r, t in enumerate(sample.times)),
                 fieldnames=["replica", "tau", "censored"])
    ctx.emit_json("ruin.json", {
        "t": t_level, "horizon": horizon, "censored": sample.censored,
        "rate": ef.rate, "ks_distance": ef.ks_distance,
        "c_theta": fit.c * tt.value,
        "theta_A": st.theta_A, "gamma_A": st.gamma_A, "lambda0_A": st.lambda0_A,
    })


def _cmd_stable(ctx: RunContext):
    from . import stable

    opts = ctx.opts("stable")
    _, fit = _fit_from_config(ctx)
    if opts.get("alpha"):
        fit.alpha = float(opts["alpha"])
    n = int(opts.get("n", 10**4))
    replicas = int(opts.get("replicas", 1000))
    s_n = stable.partial_sums(ctx.spec, fit, n, replicas, ctx.stream(81),
                              centering_batch=int(opts.get("centering_batch", 10**6)),
                              threads=ctx.threads)
    s_4n = stable.partial_sums(ctx.spec, fit, 4 * n, replicas, ctx.stream(82),
                               centering_batch=int(opts.get("centering_batch", 10**6)),
                               threads=ctx.threads)
    rep = stable.stability_check(s_n, s_4n)
    vals = np.atleast_2d(s_n.values.reshape(replicas, -1))
    cols = [f"v{j}" for j in range(vals.shape[1])]
    ctx.emit_csv("partial_sums.csv",
                 ({"replica": r, **dict(zip(cols, row))} for r, row in enumerate(vals)),
                 fieldnames=["replica", *cols])
    ctx.emit_json("stable.json", {
        "regime": rep.regime, "n": n,
        "ks_distance": rep.ks_distance, "ecf_defect": rep.ecf_defect,
        "d_n_per_step": (s_n.d_n_used / n).tolist(),
        "norm_constant": s_n.norm_constant,
    })


def _cmd_spectral(ctx: RunContext):
    from . import spectral

    opts = ctx.opts("spectral")
    out = {}
    if ctx.spec.dimension == 1 and ctx.spec.support_pairs() is not None:
        op = spectral.build_grid_operator(ctx.spec, int(opts.get("N", 2048)),
                                          tuple(opts.get("interval", (0.0, 1.0))))
        gap = spectral.second_eigenvalue(op, int(opts.get("iters", 500)))
        ctx.absorb(gap.flags)
        _, dens = spectral.stationary_measure(op)
        ctx.emit_csv("stationary_density.csv",
                     ({"x": x, "density": d} for x, d in zip(op.grid, dens)),
                     fieldnames=["x", "density"])
        out["lambda2"] = gap.lambda2
        out["residual"] = gap.residual
        out["clamped"] = op.clamped
    chi = float(opts.get("chi", 0.5))
    x_grid = opts.get("x_grid", [0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 100.0])
    dr = spectral.verify_drift(ctx.spec, chi, int(opts.get("ell", 20)), x_grid,
                               int(opts.get("replicas", 4000)), ctx.stream(91),
                               alpha=opts.get("alpha"))
    out["drift"] = {"chi": dr.chi, "ell": dr.ell, "beta_hat": dr.beta_hat,
                    "b_hat": dr.b_hat, "beta_stderr": dr.beta_stderr,
                    "contractive": dr.contractive}
    ctx.emit_csv("drift_envelope.csv",
                 ({"x": x, "moment": m, "stderr": s}
                  for x, m, s in zip(dr.x_grid, dr.moments, dr.moment_stderr)),
                 fieldnames=["x", "moment", "stderr"])
    ctx.emit_json("spectral.json", out)


def _cmd_suite(ctx: RunContext):
    from .acceptance import run_suite

    results = run_suite(threads=ctx.threads)
    rows = []
    for res in results:
        print(f"[{'PASS' if res.passed else 'FAIL'}] {res.name}: {res.detail}")
        rows.append({"criterion": res.name, "passed": res.passed,
                     "detail": res.detail, "seconds": round(res.seconds, 2)})
    ctx.emit_json("suite.json", {"results": rows, "all_passed": all(r.passed for r in results)})
    if not all(r.passed for r in results):
        ctx.flags.append("SuiteFailure")


_DISPATCH = {
    "check": _cmd_check,
    "simulate": _cmd_simulate,
    "alpha": _cmd_alpha,
    "tail": _cmd_tail,
    "theta": _cmd_theta,
    "clusters": _cmd_clusters,
    "frechet": _cmd_frechet,
    "pointproc": _cmd_pointproc,
    "ruin": _cmd_ruin,
    "stable": _cmd_stable,
    "spectral": _cmd_spectral,
    "suite": _cmd_suite,
}


def run(command: str, config_path: str, seed=None, out=None, threads=None, overrides=()) -> int:
    """Programmatic entry point; returns the exit code."""
    t0 = time.time()
    cfg = _load_config(config_path)
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override must look like key=value, got {ov!r}")
        key, raw = ov.split("=", 1)
        _apply_override(cfg, key, raw)
    if seed is not None:
        cfg["seed"] = int(seed)
    out_dir = Path(out if out is not None else cfg.get("output_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    threads = threads if threads is not None else _parallel.default_threads()
    ctx = RunContext(cfg, out_dir, int(threads))
    _DISPATCH[command](ctx)
    code = 2 if ctx.flags else 0
    manifest = {
        "command": command,
        "config_hash": config_hash(cfg),
        "seed": ctx.seed,
        "versions": {
            "kesten_evt": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": round(time.time() - t0, 3),
        "artifacts": ctx.artifacts,
        "flags": ctx.flags,
        "exit_code": code,
    }
    write_json(out_dir / "manifest.json", manifest)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kesten-evt",
        description="Heavy-tailed affine recursion toolkit: simulation, tail/extremal "
                    "estimation, limit-law fits, operator diagnostics.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default ${_parallel.ENV_THREADS} or 1)")
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE", help="dotted-key config override")
    args = parser.parse_args(argv)
    try:
        return run(args.command, args.config, args.seed, args.out, args.threads, args.override)
    except (ConfigError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KestenEvtError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
