#!/usr/bin/env python3
"""Compare the compiled solver kernels against their pure-NumPy twins.

Runs the projected-gradient and accelerated kernels on the shipped
benchmark problems (Jacobi-preconditioned, matching the certification
hot path) and reports per-iteration timings for both backends plus the
speedup.  The final iterates of the two backends are checked against
each other first, so the script doubles as a backend sanity check.

Usage:
    python3 benchmarks/kernel_benchmark.py [--iters N] [--repeats K]
"""

import argparse
import importlib
import math
import sys
import time

import numpy as np

from tdompc import bench
from tdompc.ocp import condense, jacobi_precondition


def _load_backends():
    python = importlib.import_module("tdompc._kernels_py")
    try:
        compiled = importlib.import_module("tdompc._kernels")
    except ImportError:
        compiled = None
    return compiled, python


def _kernel_calls(case, horizon=None):
    spec = case.spec if horizon is None else case.spec.with_horizon(horizon)
    qp, _ = jacobi_precondition(condense(case.plant, spec))
    q = np.ascontiguousarray(qp.g @ np.asarray(case.x0, dtype=float))
    z0 = np.zeros(len(qp.box))
    root = math.sqrt(qp.kappa)
    momentum = (root - 1.0) / (root + 1.0)
    box = (qp.box.lower, qp.box.upper)
    return len(qp.box), {
        "pgm": ("pgm", (qp.h, q, *box, 2.0 * qp.step_size, z0)),
        "apgm": ("apgm", (qp.h, q, *box, 1.0 / qp.lam_max, momentum, z0)),
    }


def _best_time(module, name, args, iters, repeats):
    fn = getattr(module, name)
    fn(*args, iters)  # warm up (JIT-free, but page in the code path)
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args, iters)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--iters", type=int, default=2000,
                        help="solver iterations per timed call")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timed calls per cell; the minimum is kept")
    args = parser.parse_args(argv)

    compiled, python = _load_backends()
    if compiled is None:
        print("compiled backend unavailable; rebuild with "
              "`pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1

    problems = [
        ("jones", bench.jones_system(), None),
        ("pendulum", bench.pendulum_case(), None),
        ("jones N=25", bench.jones_system(), 25),
    ]

    rows = []
    for label, case, horizon in problems:
        size, calls = _kernel_calls(case, horizon)
        for kernel, (name, call_args) in calls.items():
            ref = python.__dict__[name](*call_args, args.iters)
            out = np.asarray(compiled.__dict__[name](*call_args, args.iters))
            drift = float(np.max(np.abs(out - ref)))
            if drift > 1e-10:
                print(f"backend mismatch on {label}/{kernel}: {drift:.2e}",
                      file=sys.stderr)
                return 1
            t_py = _best_time(python, name, call_args, args.iters,
                              args.repeats)
            t_c = _best_time(compiled, name, call_args, args.iters,
                             args.repeats)
            rows.append((f"{label} ({size} vars)", kernel,
                         1e6 * t_py / args.iters, 1e6 * t_c / args.iters,
                         t_py / t_c))

    width = max(len(row[0]) for row in rows)
    print(f"{'problem':<{width}}  kernel  python us/it  compiled us/it  "
          f"speedup")
    for label, kernel, t_py, t_c, speedup in rows:
        print(f"{label:<{width}}  {kernel:<6}  {t_py:12.3f}  {t_c:14.3f}  "
              f"{speedup:6.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
