"""Time the leapfrog update with the numba and numpy backends.

    python benchmarks/bench_kernels.py [--n 4000] [--steps 2000]
"""
import argparse
import time

import numpy as np

from blowave import _kernels


def bench(backend: str, n: int, steps: int, lagged: bool) -> float:
    rng = np.random.default_rng(0)
    r = np.linspace(0.0, 50.0, n)
    kappa = np.zeros(n)
    kappa[1:] = 1.0 / r[1:]
    a = 1e-3 * rng.standard_normal(n)
    b = 1e-3 * rng.standard_normal(n)
    w_old = 1e-2 * np.sin(r)
    w_cur = w_old.copy()
    w_new, z = np.empty(n), np.empty(n)
    tau = 0.5 * (r[1] - r[0])
    lam2 = 0.25
    _kernels.leapfrog_step(w_old, w_cur, lam2, tau, kappa, a, b, lagged, w_new, z, backend)  # warm-up / jit
    t0 = time.perf_counter()
    for _ in range(steps):
        _kernels.leapfrog_step(w_old, w_cur, lam2, tau, kappa, a, b, lagged, w_new, z, backend)
        w_old, w_cur, w_new = w_cur, w_new, w_old
    return time.perf_counter() - t0


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, default=4000)
    p.add_argument("--steps", type=int, default=2000)
    args = p.parse_args()
    backends = ["numpy"] + (["numba"] if _kernels._step_jit is not None else [])
    print(f"n={args.n} steps={args.steps}")
    for lagged in (False, True):
        times = {be: bench(be, args.n, args.steps, lagged) for be in backends}
        label = "lagged" if lagged else "centered"
        for be, t in times.items():
            print(f"{label:9s} {be:6s} {t * 1e6 / args.steps:9.1f} us/step")
        if "numba" in times:
            print(f"{label:9s} speedup numba/numpy: {times['numpy'] / times['numba']:.1f}x")


if __name__ == "__main__":
    main()
