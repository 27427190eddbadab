"""Time the compiled scan kernels against the pure-numpy fallback.

Runs every kernel both ways on the same synthetic embedding pack and prints
a per-op table plus the end-to-end screened top-k cost. Useful when deciding
whether a platform without the compiled extension is fast enough.

    python3 benchmarks/compare_backends.py --rows 100000 --dim 512
"""

import argparse
import time

import numpy as np

from noiselib import _kernels_py
from noiselib.query import _screen_bound

try:
    from noiselib import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def build_pack(rows, dim, seed):
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((rows, dim)).astype(np.float32)
    mat /= np.linalg.norm(mat, axis=1, keepdims=True)
    mat = np.ascontiguousarray(mat)
    q = rng.standard_normal(dim).astype(np.float32)
    return mat, mat.astype(np.float16), q


def bench_backend(backend, mat, mat16, q, k, repeats):
    q64 = q.astype(np.float64)
    bound = _screen_bound(q64, 1.0, mat.shape[1])
    shadow = backend.screen_scores(mat16, q)
    kth = backend.kth_largest(shadow, k)
    idx = backend.gather_ge(shadow, float(kth) - 2.0 * bound)
    scores = backend.dist_scan(mat, q64, 0)

    timings = {
        "screen_scores": best_of(lambda: backend.screen_scores(mat16, q), repeats),
        "kth_largest": best_of(lambda: backend.kth_largest(shadow, k), repeats),
        "gather_ge": best_of(
            lambda: backend.gather_ge(shadow, float(kth) - 2.0 * bound), repeats),
        "rescore_dot": best_of(lambda: backend.rescore_dot(mat, q64, idx), repeats),
        "dist_scan(dot)": best_of(lambda: backend.dist_scan(mat, q64, 0), repeats),
        "dist_scan(mse)": best_of(lambda: backend.dist_scan(mat, q64, 1), repeats),
        "argmax": best_of(lambda: backend.argmax(scores), repeats),
    }

    def pipeline():
        s = backend.screen_scores(mat16, q)
        t = backend.kth_largest(s, k)
        cand = backend.gather_ge(s, float(t) - 2.0 * bound)
        exact = backend.rescore_dot(mat, q64, cand)
        return cand[np.lexsort((cand, -exact))[:k]]

    timings["screened top-k"] = best_of(pipeline, repeats)
    return timings


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=100_000)
    parser.add_argument("--dim", type=int, default=512)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--repeats", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    mat, mat16, q = build_pack(args.rows, args.dim, args.seed)
    print(f"rows={args.rows} dim={args.dim} k={args.k} "
          f"(best of {args.repeats})")

    results = {"python": bench_backend(_kernels_py, mat, mat16, q,
                                       args.k, args.repeats)}
    if _kernels is not None:
        results["c"] = bench_backend(_kernels, mat, mat16, q,
                                     args.k, args.repeats)
    else:
        print("compiled kernels not available; showing the fallback only")

    ops = list(results["python"])
    width = max(len(op) for op in ops)
    header = f"{'op':<{width}}  " + "".join(f"{name:>12}" for name in results)
    if len(results) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for op in ops:
        row = f"{op:<{width}}  "
        for name in results:
            row += f"{results[name][op] * 1e3:>10.3f}ms"
        if len(results) == 2:
            row += f"{results['python'][op] / results['c'][op]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
