"""Timing comparison of the two kernel backends.

Runs the leave-one-out estimator on synthetic score sets of growing size,
once through the compiled extension (if built) and once through the NumPy
fallback, in sequential and threaded mode, and reports wall times plus the
largest numeric difference between the backends.

    python3 benchmarks/bench_backends.py --sizes 2000,8000,20000 --threads 4
"""

import argparse
import time

import numpy as np

from detcal import _kernels_py, kde


def _parse_sizes(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _dataset(w: int, seed: int = 0):
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    scores = rng.uniform(0.02, 0.98, size=w)
    z = (rng.uniform(size=w) < scores).astype(np.float64)
    return scores, z


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=_parse_sizes, default=[2000, 8000, 20000],
                        help="comma-separated sample counts (default 2000,8000,20000)")
    parser.add_argument("--bandwidth", type=float, default=0.05,
                        help="kernel bandwidth (default 0.05)")
    parser.add_argument("--threads", type=int, default=4,
                        help="thread count for the parallel column (default 4)")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repeats, best-of (default 3)")
    args = parser.parse_args()

    backends = {"python": _kernels_py}
    try:
        from detcal import _kernels

        backends["compiled"] = _kernels
    except ImportError:
        print("compiled extension not available; timing the fallback only")

    print(f"active backend at import: {kde.backend_name()}")
    print(f"bandwidth={args.bandwidth}  threads={args.threads}  best of {args.repeats}")
    header = f"{'w':>8}  {'backend':>8}  {'seq (s)':>9}  {'par (s)':>9}  {'speedup':>7}"
    print(header)
    print("-" * len(header))

    worst_diff = 0.0
    for w in args.sizes:
        scores, z = _dataset(w)
        residuals = {}
        for name, module in sorted(backends.items()):
            t_seq = _time(lambda: module.loo_residuals(scores, z, args.bandwidth, 1),
                          args.repeats)
            t_par = _time(lambda: module.loo_residuals(scores, z, args.bandwidth,
                                                       args.threads),
                          args.repeats)
            residuals[name] = module.loo_residuals(scores, z, args.bandwidth, 1)
            print(f"{w:>8}  {name:>8}  {t_seq:>9.4f}  {t_par:>9.4f}  "
                  f"{t_seq / t_par:>7.2f}x")
        if len(residuals) == 2:
            diff = float(np.max(np.abs(residuals["compiled"] - residuals["python"])))
            worst_diff = max(worst_diff, diff)
            print(f"{'':>8}  max |compiled - python| residual gap: {diff:.3e}")

    if len(backends) == 2:
        print(f"\nlargest cross-backend residual difference: {worst_diff:.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
