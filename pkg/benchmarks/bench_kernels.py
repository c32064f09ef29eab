"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel and problem size with the best time of each
backend, the speedup and the largest absolute difference of the outputs.
"""

import argparse
import timeit

import numpy as np

from pcfilter import _kernels_py

try:
    from pcfilter import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _cases(rng):
    def cplx(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    for K, L, n in ((1, 2, 512), (2, 8, 256), (4, 8, 1024)):
        d = cplx(L + 1, K, K) * 0.3 ** np.arange(L + 1)[:, None, None]
        d[0] = np.tril(d[0]) + 3 * np.eye(K)
        b0 = np.linalg.inv(d[0])
        a = cplx(n, K)
        eps = cplx(64, n + L, K)
        label = f"K={K} L={L} n={n}"
        yield "causal_apply", label, (d, a)
        yield "adjoint_apply", label, (d, a)
        yield "inverse_recursion", label, (d, b0, n)
        yield "ma_filter", f"{label} paths=64", (d, eps, n)


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    if _ckernels is None:
        print("compiled extension not available; only the numpy fallback can be timed")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<18} {'case':<26} {'numpy [ms]':>11} {'cython [ms]':>12} {'speedup':>8} {'max diff':>9}")
    for name, label, call_args in _cases(rng):
        py = getattr(_kernels_py, name)
        t_py = min(timeit.repeat(lambda: py(*call_args), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:<18} {label:<26} {t_py:11.3f}")
            continue
        cy = getattr(_ckernels, name)
        t_cy = min(timeit.repeat(lambda: cy(*call_args), number=1, repeat=args.repeat)) * 1e3
        diff = float(np.abs(np.asarray(py(*call_args)) - np.asarray(cy(*call_args))).max())
        print(f"{name:<18} {label:<26} {t_py:11.3f} {t_cy:12.3f} {t_py / t_cy:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
