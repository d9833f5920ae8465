"""Compare the numba kernels with the pure-numpy fallback.

Kernel timings call both implementations in-process.  The end-to-end timing
runs a short column simulation once per backend in a subprocess, since the
backend is fixed at import by NSSMOL_PURE_NUMPY.

    python3 benchmarks/bench_kernels.py [--sizes 128 1024 16384] [--repeat 20]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from nssmol import _kernels

E2E = """
import time
from nssmol.config import load_preset
from nssmol.problems import build_initial, build_potential
from nssmol.stepper import replace, run
cfg = load_preset("column_1d")
pot = build_potential(cfg.potential, cfg.grid)
s0 = build_initial(cfg.initial, cfg.grid, pot, cfg.physics)
run(s0, pot, cfg.physics, cfg.step, 5 * cfg.step.h)  # warm up
t = time.perf_counter()
run(s0, pot, cfg.physics, cfg.step, {t_end})
print(time.perf_counter() - t)
"""


def kernel_cases(n: int, rng: np.random.Generator):
    x = rng.uniform(0.1, 2.0, n)
    y = x * (1.0 + rng.uniform(-0.1, 0.1, n))
    a = rng.uniform(-0.5, 0.5, n)
    s = rng.uniform(0.5, 2.0, n)
    d = 4.0 + rng.uniform(0, 1, n)
    lo = -np.ones(n)  # lower[i] couples i to i-1; lower[0] unused
    up = -np.ones(n)  # upper[i] couples i to i+1; upper[-1] unused
    return {
        "bernoulli": (a,),
        "sg_weights": (s, a),
        "rho_face_means": (x, y, 1.0, 2.0, 1e-3),
        "log_mean": (x, y),
        "tridiag_solve": (lo, d, up, x),
    }


def bench(fn, args, repeat: int) -> float:
    fn(*args)  # compile / warm up
    t = timeit.repeat(lambda: fn(*args), number=1, repeat=repeat)
    return min(t)


def end_to_end(pure: bool, t_end: float) -> float:
    env = dict(os.environ)
    if pure:
        env["NSSMOL_PURE_NUMPY"] = "1"
    else:
        env.pop("NSSMOL_PURE_NUMPY", None)
    out = subprocess.run([sys.executable, "-c", E2E.format(t_end=t_end)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 1024, 16384])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--t-end", type=float, default=1.0, help="simulated time for the end-to-end run")
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    print(f"{'kernel':<16s} {'n':>7s} {'numpy [us]':>12s} {'numba [us]':>12s} {'speedup':>8s}")
    for n in args.sizes:
        for name, case in kernel_cases(n, rng).items():
            t_np = bench(_kernels.NUMPY_KERNELS[name], case, args.repeat)
            t_nb = bench(_kernels.NUMBA_KERNELS[name], case, args.repeat)
            print(f"{name:<16s} {n:7d} {1e6 * t_np:12.1f} {1e6 * t_nb:12.1f} {t_np / t_nb:8.2f}")
    if not args.skip_e2e:
        t_np = end_to_end(True, args.t_end)
        t_nb = end_to_end(False, args.t_end)
        print(f"\ncolumn_1d to t = {args.t_end:g}: numpy {t_np:.2f} s, numba {t_nb:.2f} s, "
              f"speedup {t_np / t_nb:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
