#!/usr/bin/env python3
"""Benchmark the jit kernels against the pure-NumPy fallback.

The kernel build is fixed at import time by KESTEN_EVT_PURE_NUMPY, so this
script re-executes itself once with the flag set and compares wall times:

    python benchmarks/bench_kernels.py

Expect the path scans to gain the most from the jit build; the batch
kernels (backward series, walks, first passage) are vectorized across
replicas in the fallback and gain less.
"""

import json
import os
import subprocess
import sys
import time

import numpy as np

BENCH_SIZES = {
    "affine_path_1d (n=2e6)": None,
    "backward_1e5": None,
    "walk_1e5": None,
    "hitting_2e3": None,
}


def run_benchmarks():
    from kesten_evt import _kernels
    from kesten_evt.model import AffineLawSpec, ConstantB, ScalarTwoPoint
    from kesten_evt.recursion import sample_stationary, simulate_path
    from kesten_evt.rng import RngStream
    from kesten_evt.ruin import TargetSet, hitting_times
    from kesten_evt.tail import TailFit
    from kesten_evt.extremal import theta_theory

    spec = AffineLawSpec(1, ScalarTwoPoint(2.0, 0.5, 1.0 / 3.0), ConstantB([1.0]))
    fit = TailFit(alpha=1.0, c=4.33, dimension=1)
    out = {"backend": _kernels.BACKEND}

    # warm up the jit cache before timing
    simulate_path(spec, [0.0], 1000, RngStream(0))
    sample_stationary(spec, 1000, 1e-6, RngStream(0))
    theta_theory(spec, fit, 1000, rng=RngStream(0))
    hitting_times(spec, [0.0], TargetSet("annulus", 1.0), 50.0, 64, 10**5, RngStream(0))

    t0 = time.perf_counter()
    simulate_path(spec, [0.0], 2 * 10**6, RngStream(1))
    out["affine_path_1d (n=2e6)"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sample_stationary(spec, 10**5, 1e-6, RngStream(2))
    out["backward_1e5"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    theta_theory(spec, fit, 10**5, rng=RngStream(3))
    out["walk_1e5"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    hitting_times(spec, [0.0], TargetSet("annulus", 1.0), 2000.0, 2000, 10**6, RngStream(4))
    out["hitting_2e3"] = time.perf_counter() - t0
    return out


def main():
    if os.environ.get("_BENCH_CHILD"):
        print(json.dumps(run_benchmarks()))
        return
    here = run_benchmarks()
    env = dict(os.environ, _BENCH_CHILD="1", KESTEN_EVT_PURE_NUMPY="1")
    child = subprocess.run([sys.executable, __file__], env=env, capture_output=True, text=True)
    if child.returncode != 0:
        print(child.stderr, file=sys.stderr)
        raise SystemExit("fallback benchmark failed")
    other = json.loads(child.stdout.strip().splitlines()[-1])
    print(f"{'kernel':28s} {here['backend']:>10s} {other['backend']:>10s} {'speedup':>9s}")
    for name in here:
        if name == "backend":
            continue
        a, b = here[name], other[name]
        print(f"{name:28s} {a:9.3f}s {b:9.3f}s {b / a:8.1f}x")


if __name__ == "__main__":
    main()
