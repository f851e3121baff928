"""Compiled versus pure-Python kernels.

Times each hot kernel under both backends, checks their outputs agree bit
for bit, then times a full Table-2 run in two subprocesses (one with
``HYBRIDCR_PURE=1``) and compares the trajectory hashes.

    python benchmarks/bench_kernels.py [--steps 20000] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from hybridcr import _kernels_py as py

try:
    from hybridcr import _kernels as cy
except ImportError:
    cy = None

END_TO_END = r"""
import hashlib, json, sys, time
from hybridcr import kernels
from hybridcr.scenario_io import builtin_scenario
scen = builtin_scenario("table2")
t0 = time.perf_counter()
tr = scen.run(int(sys.argv[1]))
dt = time.perf_counter() - t0
h = hashlib.sha256()
for arr in (tr.x, tr.y, tr.theta, tr.v, tr.omega):
    h.update(arr.tobytes())
print(json.dumps({"backend": kernels.BACKEND, "seconds": dt, "sha256": h.hexdigest()}))
"""


def kernel_cases(rng):
    n = 10
    x, y = rng.uniform(-5, 5, n), rng.uniform(-5, 5, n)
    th, v, w = rng.uniform(-3, 3, n), rng.uniform(1.2, 1.8, n), rng.uniform(-0.5, 0.5, n)
    X, Y = rng.normal(size=(2000, n)), rng.normal(size=(2000, n))
    return {
        "rk4_unicycle": lambda k: k.rk4_unicycle(0.3, -0.2, 1.1, 1.5, 0.3, 0.01),
        "rk4_batch": lambda k: k.rk4_batch(x.copy(), y.copy(), th.copy(), v, w, 0.01),
        "close_pairs": lambda k: k.close_pairs(x, y, 1.64),
        "limit_cycle_terms": lambda k: k.limit_cycle_terms(0.7, -1.3, 2.0, 0.4),
        "goal_terms": lambda k: k.goal_terms(0.7, -1.3, 4.0, 5.0, 0.4),
        "min_distance_series": lambda k: k.min_distance_series(X, Y),
    }


def _same(a, b):
    if isinstance(a, np.ndarray):
        return a.dtype == np.asarray(b).dtype and np.array_equal(a, b)
    if isinstance(a, (tuple, list)):
        return len(a) == len(b) and all(_same(p, q) for p, q in zip(a, b))
    return a == b


def run_end_to_end(steps, pure):
    env = dict(os.environ)
    env.pop("HYBRIDCR_PURE", None)
    if pure:
        env["HYBRIDCR_PURE"] = "1"
    out = subprocess.run([sys.executable, "-c", END_TO_END, str(steps)], env=env,
                         check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--number", type=int, default=2000)
    args = ap.parse_args(argv)

    if cy is None:
        print("compiled extension not built; only the pure-Python backend is available")
    cases = kernel_cases(np.random.default_rng(0))
    print(f"{'kernel':<22} {'python us':>10} {'cython us':>10} {'speedup':>8} {'identical':>9}")
    for name, call in cases.items():
        number = max(1, args.number // (100 if name == "min_distance_series" else 1))
        t_py = min(timeit.repeat(lambda: call(py), number=number, repeat=args.repeat)) / number
        if cy is None:
            print(f"{name:<22} {t_py * 1e6:>10.2f} {'-':>10} {'-':>8} {'-':>9}")
            continue
        t_cy = min(timeit.repeat(lambda: call(cy), number=number, repeat=args.repeat)) / number
        same = _same(call(py), call(cy))
        print(f"{name:<22} {t_py * 1e6:>10.2f} {t_cy * 1e6:>10.2f} "
              f"{t_py / t_cy:>8.2f} {str(same):>9}")

    print(f"\nTable 2, {args.steps} steps")
    results = [run_end_to_end(args.steps, pure=True)]
    if cy is not None:
        results.append(run_end_to_end(args.steps, pure=False))
    for r in results:
        print(f"  {r['backend']:<7} {r['seconds']:8.2f} s  sha256 {r['sha256'][:16]}")
    if len(results) == 2:
        print(f"  speedup {results[0]['seconds'] / results[1]['seconds']:.2f}x, "
              f"identical trajectories: {results[0]['sha256'] == results[1]['sha256']}")
        if results[0]["sha256"] != results[1]["sha256"]:
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
