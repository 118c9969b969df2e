#!/usr/bin/env python3
"""Numba kernels against the numpy fallback.

Kernel timings call each backend explicitly; the end-to-end rows run the
counterexample scenario in a fresh interpreter under GEOMONGE_BACKEND.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from geomonge import _kernels
from geomonge.space import build_counterexample_space, build_segment


def best_of(fn, repeat):
    fn()  # warm-up (numba compiles here)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(quick):
    rng = np.random.default_rng(0)
    sizes = (60, 120) if quick else (60, 120, 240)
    for n in sizes:
        W = rng.random((n, n))
        np.fill_diagonal(W, 0.0)
        yield f"min_plus_closure n={n}", lambda b, W=W: _kernels.min_plus_closure(W, backend=b, tol=1e-9)
    for m in ((16, 24) if quick else (16, 24, 32)):
        # cost matrix of a monotone support on a segment: every cycle is checked
        x = np.sort(rng.random(m))
        y = x + 0.5
        C = np.abs(x[:, None] - y[None, :])
        yield f"first_violating_cycle pairs={m} L<=4", lambda b, C=C: _kernels.first_violating_cycle(C, 4, 1e-9, backend=b)
    for n in ((80,) if quick else (80, 160)):
        D = build_segment(n).d
        yield f"branching_witnesses segment n={n}", lambda b, D=D: _kernels.branching_witnesses(D, 1e-9, backend=b)
    D = build_counterexample_space(q_denom=16 if quick else 32).d
    yield f"branching_witnesses counterexample n={D.shape[0]}", lambda b, D=D: _kernels.branching_witnesses(D, 1e-6, backend=b)


def end_to_end(backend):
    env = dict(os.environ, GEOMONGE_BACKEND=backend)
    t0 = time.perf_counter()
    subprocess.run([sys.executable, "-m", "geomonge.cli", "run", "counterexample", "--stages", "certify,rays,monge"],
                   env=env, check=False, capture_output=True)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller sizes")
    ap.add_argument("--no-e2e", action="store_true", help="skip the end-to-end rows")
    args = ap.parse_args()
    if not _kernels.HAS_NUMBA:
        sys.exit("numba is not importable; nothing to compare")

    print(f"{'case':<46}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, fn in cases(args.quick):
        tn = best_of(lambda: fn("numba"), args.repeat)
        tp = best_of(lambda: fn("numpy"), args.repeat)
        print(f"{name:<46}{tn * 1e3:>12.3f}{tp * 1e3:>12.3f}{tp / tn:>9.1f}x")
    if not args.no_e2e:
        tn, tp = end_to_end("numba"), end_to_end("numpy")
        print(f"{'counterexample scenario (fresh process)':<46}{tn * 1e3:>12.0f}{tp * 1e3:>12.0f}{tp / tn:>9.1f}x")
        print("end-to-end numba time includes JIT compilation")


if __name__ == "__main__":
    main()
