"""Compare the numba kernels with the pure-numpy fallback.

Kernel timings call both implementations directly in this process. The
whole-step timing runs a fresh interpreter per backend, because the backend
is fixed at import time by ``FGD_PURE_NUMPY``.

    python3 benchmarks/bench_backends.py [--repeats 7] [--n 1024] [--p 32]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from fgd import kernels

STEP_SNIPPET = """
import json, sys
from fgd import _backend
from fgd.harness.experiments import time_steps
n, p, repeats = map(int, sys.argv[1:4])
print(json.dumps({"backend": _backend.BACKEND,
                  "neumann": time_steps(n, p, "neumann", repeats),
                  "exact": time_steps(n, p, "exact", repeats)}))
"""


def median_ns(fn, make_args, repeats):
    fn(*make_args())   # warm-up, triggers compilation
    times = []
    for _ in range(repeats):
        args = make_args()
        t0 = time.perf_counter_ns()
        fn(*args)
        times.append(time.perf_counter_ns() - t0)
    return float(np.median(times))


def kernel_rows(n, p, repeats):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((n, p))
    b = rng.standard_normal((p, p))
    s = rng.standard_normal((p, p))
    s = s + s.T
    cases = [
        ("matmul", f"{n}x{p} @ {p}x{p}", kernels._matmul_numba, kernels._matmul_numpy, lambda: (a, b)),
        ("jacobi", f"{p}x{p}", kernels._jacobi_numba, kernels._jacobi_numpy,
         lambda: (s.copy(), np.eye(p), 1e-14 * np.linalg.norm(s), 100)),
        ("mgs", f"{n}x{p}", kernels._mgs_numba, kernels._mgs_numpy, lambda: (a.copy(), 1e-12)),
    ]
    rows = []
    for name, size, fast, slow, make_args in cases:
        t_fast = median_ns(fast, make_args, repeats)
        t_slow = median_ns(slow, make_args, repeats)
        rows.append((name, size, t_fast, t_slow))
    return rows


def step_timing(n, p, repeats, pure_numpy):
    env = dict(os.environ, FGD_PURE_NUMPY="1" if pure_numpy else "0")
    out = subprocess.run([sys.executable, "-c", STEP_SNIPPET, str(n), str(p), str(repeats)],
                         env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--p", type=int, default=32)
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args(argv)

    print(f"{'kernel':<8} {'size':<22} {'numba ms':>10} {'numpy ms':>10} {'speed-up':>9}")
    for name, size, t_fast, t_slow in kernel_rows(args.n, args.p, args.repeats):
        print(f"{name:<8} {size:<22} {t_fast / 1e6:10.3f} {t_slow / 1e6:10.3f} {t_slow / t_fast:9.1f}")

    print(f"\none FGD step at {args.n}x{args.p} (median of {args.repeats})")
    results = [step_timing(args.n, args.p, args.repeats, flag) for flag in (False, True)]
    for r in results:
        print(f"  {r['backend']:<6} neumann {r['neumann'] / 1e6:9.3f} ms   exact {r['exact'] / 1e6:9.3f} ms")
    if results[0]["backend"] != results[1]["backend"]:
        print(f"  numba speed-up (neumann): {results[1]['neumann'] / results[0]['neumann']:.1f}x")


if __name__ == "__main__":
    main()
