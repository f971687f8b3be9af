"""Compare the compiled integrator kernel against the pure-Python fallback.

Two measurements: the raw advance_held micro-benchmark on the order-2
benchmark plant, and (with --full) a complete 12 s benchmark run per
backend through a subprocess so the import-time backend switch applies.
The full runs also cross-check that both backends produce byte-identical
reports.

Usage:
    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --calls 20000 --full
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time
from array import array

from qapm import _pykernel

try:
    from qapm import _native
except ImportError:
    _native = None

# loop 2 of the benchmark set, controllable canonical form
A = array("d", [0.0, 1.0, -20.0, -10.0])
B = array("d", [0.0, 1.0])
C = array("d", [1.0, 0.0])


def bench_kernel(impl, calls, span_us, micro_us):
    x = array("d", [0.0, 0.0])
    fn = impl.advance_held
    t0 = time.perf_counter()
    for _ in range(calls):
        fn(A, B, C, x, 1.0, 1.0, span_us, micro_us)
    return time.perf_counter() - t0


def bench_full_run(pure: bool):
    env = dict(os.environ)
    env.pop("QAPM_PURE_KERNEL", None)
    if pure:
        env["QAPM_PURE_KERNEL"] = "1"
    with tempfile.TemporaryDirectory() as d:
        t0 = time.perf_counter()
        subprocess.run(
            [sys.executable, "-m", "qapm", "run", "--builtin", "table1",
             "--cpu", "cpu-2", "--out", d],
            env=env, check=True, capture_output=True,
        )
        elapsed = time.perf_counter() - t0
        with open(os.path.join(d, "report.json")) as fh:
            rep = json.load(fh)
    return elapsed, rep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--calls", type=int, default=10_000,
                    help="advance_held invocations per backend")
    ap.add_argument("--span-us", type=int, default=10_000,
                    help="integration span per call")
    ap.add_argument("--micro-step", type=int, default=100,
                    help="RK4 micro step in microseconds")
    ap.add_argument("--full", action="store_true",
                    help="also time a complete 12 s benchmark run per backend")
    args = ap.parse_args()

    if _native is None:
        print("compiled kernel not built; only the fallback is available")
        return 1

    steps = args.calls * max(1, args.span_us // args.micro_step)
    t_nat = bench_kernel(_native, args.calls, args.span_us, args.micro_step)
    t_pure = bench_kernel(_pykernel, args.calls, args.span_us, args.micro_step)
    print(f"advance_held, {args.calls} calls x {args.span_us} us span "
          f"({steps} RK4 steps):")
    print(f"  compiled     {t_nat:8.3f} s  ({t_nat / steps * 1e9:8.1f} ns/step)")
    print(f"  pure-python  {t_pure:8.3f} s  ({t_pure / steps * 1e9:8.1f} ns/step)")
    print(f"  speedup      {t_pure / t_nat:8.1f} x")

    if args.full:
        t_fast, rep_fast = bench_full_run(pure=False)
        t_slow, rep_slow = bench_full_run(pure=True)
        match = {k: v for k, v in rep_fast.items() if k != "backend"} == \
                {k: v for k, v in rep_slow.items() if k != "backend"}
        print(f"\nfull 12 s run (table1, cpu-2):")
        print(f"  compiled     {t_fast:8.3f} s")
        print(f"  pure-python  {t_slow:8.3f} s")
        print(f"  speedup      {t_slow / t_fast:8.1f} x")
        print(f"  reports identical (minus backend tag): {match}")
        if not match:
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
