"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Inputs are sized like a desk training step (conv patches) and a PSDS sweep
(median filter, runs, intersections). Both backends are checked for equal
output before timing.
"""
import argparse
import timeit

import numpy as np

from sedpool import _kernels_py

try:
    from sedpool import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    x = rng.standard_normal((4, 183, 128, 8))
    dcols = rng.standard_normal((4 * 183 * 128, 72))
    sig = (rng.random(100_000) < 0.5).astype(np.uint8)
    a = np.sort(rng.uniform(0, 100, (2, 400)), axis=0)
    b = np.sort(rng.uniform(0, 100, (2, 300)), axis=0)
    return {
        "im2col3x3 [4,183,128,8]": lambda k: k.im2col3x3(x),
        "col2im3x3 [4,183,128,8]": lambda k: k.col2im3x3(dcols, x.shape),
        "median_filter_binary n=1e5 w=7": lambda k: k.median_filter_binary(sig, 7),
        "binary_runs n=1e5": lambda k: k.binary_runs(sig),
        "intersection_matrix 400x300": lambda k: k.intersection_matrix(a[0], a[1], b[0], b[1]),
    }


def _same(u, v):
    if isinstance(u, tuple):
        return all(_same(p, q) for p, q in zip(u, v))
    return np.array_equal(u, v) or np.allclose(u, v, rtol=0, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        if not _same(fn(_kernels_py), fn(_kernels)):
            raise SystemExit(f"backends disagree on {name}")
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat))
        print(f"{name:34s} {1e3 * t_py:10.2f} {1e3 * t_cy:10.2f} {t_py / t_cy:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
