"""Compare the numba kernels with their pure-numpy fallbacks.

Run ``python benchmarks/bench_kernels.py [--repeat R]``. Each row reports the
best wall-clock time of R runs for both paths (after one warm-up call so
JIT compilation is excluded) and checks that the two results agree.
"""
import argparse
import time

import numpy as np

from qnoiselab import matrix as mx
from qnoiselab import sampling as sp
from qnoiselab.rng import make_rng


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(rng):
    a = mx.gaussian_matrix(4, 20, rng)
    cols = sp.boson_outcomes(4, 20)
    yield "ryser batch, 8855 4x4 multisets", lambda u: mx.permanents_of_columns(a, cols, use_numba=u)

    b = mx.gaussian_matrix(12, 12, rng)
    yield "ryser single, 12x12", lambda u: mx.permanents_of_columns(b, np.arange(12)[None, :], use_numba=u)

    c = mx.gaussian_matrix(5, 30, rng)
    yield "multiset tree, n=5 m=30", lambda u: sp.multiset_permanents(c, use_numba=u)

    d = mx.gaussian_matrix(3, 12, rng)
    noise = mx.gaussian_matrix(3 * 2000, 12, rng).reshape(2000, 3, 12)
    yield "noisy accumulate, n=3 m=12 mc=2000", lambda u: sp.noisy_boson_moments(d, noise, 0.9, 0.45, use_numba=u)[0]

    f = rng.integers(0, 2, 1 << 20).astype(float)
    yield "walsh-hadamard, 2^20", lambda u: sp.fwht(f, use_numba=u)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    print(f"{'kernel':40s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}  agree")
    for name, fn in cases(make_rng(args.seed)):
        t_nb, x = best_of(lambda: fn(True), args.repeat)
        t_np, y = best_of(lambda: fn(False), args.repeat)
        agree = np.allclose(x, y, rtol=1e-9, atol=1e-12)
        print(f"{name:40s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}x  {agree}")


if __name__ == "__main__":
    main()
