"""Compare the compiled and pure-NumPy Sinkhorn backends.

Runs the same batch of divergence computations through both cores, checks
that results agree to near machine precision, and reports wall-clock timings.

Usage:
    python3 scripts/benchmark_backends.py [--pairs 200] [--points 12] [--reps 3]
"""

import argparse
import importlib
import os
import sys
import time

import numpy as np


def load_core(force_pure: bool):
    os.environ.pop("SETBO_FORCE_PURE", None)
    if force_pure:
        os.environ["SETBO_FORCE_PURE"] = "1"
    for name in list(sys.modules):
        if name.startswith("setbo"):
            del sys.modules[name]
    backend = importlib.import_module("setbo._backend")
    sinkhorn = importlib.import_module("setbo.sinkhorn")
    return backend.BACKEND_NAME, sinkhorn


def make_pairs(rng, n_pairs, n_points):
    return [
        (rng.random((n_points, 2)), rng.random((n_points, 2)))
        for _ in range(n_pairs)
    ]


def run_backend(sinkhorn, pairs, eps, reps):
    cfg = sinkhorn.SinkhornConfig(epsilon=eps)
    best = np.inf
    values = None
    for _ in range(reps):
        t0 = time.perf_counter()
        values = np.array([
            sinkhorn.sinkhorn_divergence(a, b, cfg) for a, b in pairs
        ])
        best = min(best, time.perf_counter() - t0)
    return values, best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pairs", type=int, default=200)
    parser.add_argument("--points", type=int, default=12)
    parser.add_argument("--reps", type=int, default=3)
    parser.add_argument("--eps", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    pairs = make_pairs(rng, args.pairs, args.points)

    results = {}
    for force_pure in (False, True):
        name, sinkhorn = load_core(force_pure)
        if force_pure and name != "numpy":
            raise RuntimeError("SETBO_FORCE_PURE did not select the fallback")
        values, elapsed = run_backend(sinkhorn, pairs, args.eps, args.reps)
        results[name] = (values, elapsed)
        print(f"{name:>8}: {elapsed * 1e3:8.1f} ms "
              f"({args.pairs} pairs of {args.points} points, "
              f"best of {args.reps})")

    names = list(results)
    if len(names) == 2:
        va, vb = results[names[0]][0], results[names[1]][0]
        max_diff = float(np.max(np.abs(va - vb)))
        speedup = results["numpy"][1] / results[names[0]][1]
        print(f"max |difference| = {max_diff:.3e}")
        print(f"speedup ({names[0]} vs numpy) = {speedup:.2f}x")
        if max_diff > 1e-10:
            raise SystemExit("backends disagree beyond 1e-10")
    else:
        print("compiled backend unavailable; only the numpy core was timed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
