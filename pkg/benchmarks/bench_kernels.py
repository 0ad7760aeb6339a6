"""Compare the compiled kernels against the numpy fallback.

Usage: ``python3 benchmarks/bench_kernels.py [--intervals N] [--repeat R]``
"""
import argparse
import time

import numpy as np

from cabinet60._backend import compiled_kernels, python_kernels


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--intervals", type=int, default=1_200_000, help="pooled inter-arrival count")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    n = args.intervals
    slow = rng.random(n) < 0.015
    x = rng.standard_exponential(n) / np.where(slow, 0.083, 1.18)
    power = rng.standard_exponential(12001) * np.exp(-np.arange(12001) / 875.0)
    idx = rng.integers(0, 12001, 6000)
    vals = rng.standard_normal(6000) + 1j * rng.standard_normal(6000)

    cases = {
        "em_exp_mixture_step": lambda k: k.em_exp_mixture_step(x, 0.02, 0.08, 1.2),
        "strict_local_maxima": lambda k: k.strict_local_maxima(power, 1e-3 * power.max()),
        "accumulate_bins": lambda k: k.accumulate_bins(idx, vals, 12001),
    }
    backends = {"python": python_kernels}
    if compiled_kernels is not None:
        backends["cython"] = compiled_kernels
    else:
        print("compiled extension not built; timing the fallback only")

    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, call in cases.items():
        times = {b: best_of(lambda k=k: call(k), args.repeat) for b, k in backends.items()}
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<22}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times.values()) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
