"""Benchmark the compiled and pure-numpy integration backends.

Runs the sleigh scenario for a fixed number of RK4 steps on each
backend, reporting compile time (numba only, first call) separately
from steady-state throughput. Usage:

    python3 benchmarks/bench_backends.py [--steps 5000] [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from projmech import chaplygin_sleigh, integrate, sleigh_initial_state
from projmech.kernels import HAVE_NUMBA


def _run(system, init, t_end, h, backend):
    return integrate(system, init, t_end=t_end, h=h, backend=backend)


def time_backend(backend: str, steps: int, repeats: int):
    """Return (compile_seconds or None, [run_seconds, ...], final_state)."""
    system = chaplygin_sleigh(r=1.0, J=2.0)
    init = sleigh_initial_state(r=1.0, theta=0.3, u=1.0, omega=0.7)
    h = 1e-3
    t_end = steps * h

    start = time.perf_counter()
    traj = _run(system, init, t_end, h, backend)
    first = time.perf_counter() - start

    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        traj = _run(system, init, t_end, h, backend)
        times.append(time.perf_counter() - start)

    warm = min(times)
    compile_time = first - warm if backend == "numba" else None
    return compile_time, times, traj


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=5000, help="RK4 steps per run")
    parser.add_argument("--repeats", type=int, default=5, help="timed repetitions")
    args = parser.parse_args()

    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    if not HAVE_NUMBA:
        print("numba not installed; benchmarking the numpy backend only\n")

    results = {}
    for backend in backends:
        compile_time, times, traj = time_backend(backend, args.steps, args.repeats)
        results[backend] = (min(times), traj)
        per_step = min(times) / args.steps
        print(f"backend {backend}")
        if compile_time is not None:
            print(f"  first call (incl. compile): {compile_time + min(times):8.3f} s")
            print(f"  compile overhead:           {compile_time:8.3f} s")
        print(f"  best of {args.repeats} warm runs:       {min(times):8.4f} s")
        print(f"  per RK4 step:               {per_step * 1e6:8.2f} us")
        print()

    if len(results) == 2:
        t_np, traj_np = results["numpy"]
        t_nb, traj_nb = results["numba"]
        agree = max(
            float(np.abs(traj_np.z - traj_nb.z).max()),
            float(np.abs(traj_np.v - traj_nb.v).max()),
        )
        print(f"speedup (numpy/numba): {t_np / t_nb:.1f}x")
        print(f"trajectory agreement:  {agree:.3e} (max abs difference)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
