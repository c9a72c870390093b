"""Timing comparison of the compiled and pure-Python kernels.

Runs each builtin scenario on both backends, reports wall time and the
speedup, and asserts bitwise agreement of the sampled state while at
it (the parity tests do this more carefully; here it is a tripwire).

Usage:
    python benchmarks/backend_bench.py [--repeat 3] [--scenario NAME]
"""

import argparse
import time

import numpy as np

from crmsim import backend, studies
from crmsim.sim import integrate


def best_time(scn, backend_name, repeat):
    best = float("inf")
    trace = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        trace = integrate(scn, backend_name=backend_name)
        best = min(best, time.perf_counter() - t0)
    return best, trace


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--scenario", default=None,
                        help="single builtin name (default: all)")
    args = parser.parse_args()

    avail = backend.available_backends()
    if "compiled" not in avail:
        raise SystemExit("compiled backend not built; run "
                         "pip install -e . --no-build-isolation")
    names = [args.scenario] if args.scenario else sorted(studies.BUILTINS)
    print("%-18s %10s %10s %8s" % ("scenario", "compiled", "python",
                                   "speedup"))
    for name in names:
        scn = studies.get_builtin(name)
        tc, trace_c = best_time(scn, "compiled", args.repeat)
        tp, trace_p = best_time(scn, "python", args.repeat)
        if not (np.array_equal(trace_c.x_true, trace_p.x_true)
                and np.array_equal(trace_c.theta, trace_p.theta)):
            raise SystemExit("backend mismatch on %s" % name)
        print("%-18s %9.4fs %9.4fs %7.1fx" % (name, tc, tp, tp / tc))


if __name__ == "__main__":
    main()
