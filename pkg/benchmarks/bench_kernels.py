"""Compare the compiled kernels with the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from twoweight import _pykernels as pure

try:
    from twoweight import _ckernels as compiled
except ImportError:
    compiled = None


def cases(rng):
    k, q, n = 128, 256, 2
    rel = rng.random((k, n))
    centers = rng.random((q, n))
    sides = 2.0 ** -rng.integers(0, 8, q).astype(float)
    inlo, inhi = np.full((q, n), -np.inf), np.full((q, n), np.inf)
    exlo, exhi = centers - sides[:, None], centers + sides[:, None]
    w = rng.lognormal(size=k)
    Y, X = rng.random((256, n)), rng.random((256, n))
    r = rng.random(100_000) * 4
    return {
        "dyadic_index": (lambda m: m.dyadic_index(rel, 12)),
        "poisson_boxes": (lambda m: m.poisson_boxes(rel, rel, w, centers, sides, 1.0, 3.0,
                                                     inlo, inhi, exlo, exhi)),
        "profile": (lambda m: m.profile(r, 1.5, 0.1, 2.0, "tangent")),
        "riesz_matrix": (lambda m: m.riesz_matrix(Y, X, 0, 1.5, 0.01, 2.0, "tangent")),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(pure), number=1, repeat=args.repeat)) * 1e3
        if compiled is None:
            print(f"{name:<16}{t_py:>12.3f}{'n/a':>12}{'':>10}")
            continue
        np.testing.assert_allclose(fn(compiled), fn(pure), rtol=1e-12)
        t_c = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<16}{t_py:>12.3f}{t_c:>12.3f}{t_py / t_c:>10.1f}")


if __name__ == "__main__":
    main()
