"""Timing comparison of the compiled kernels against the numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeat 7]

Each kernel is timed on a workload shaped like real use (rejection batches
of 65536 uniforms, million-point window counts, cluster sums over a few
hundred terms) and the best-of-N wall time per call is reported for both
backends together with the speedup.
"""

import argparse
import time

import numpy as np

from trafficgas import rigidity
from trafficgas.kernels import _py

try:
    from trafficgas.kernels import _ext
except ImportError:
    _ext = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads():
    rng = np.random.Generator(np.random.PCG64(0))
    u = rng.random((3, 65536))
    beta, B = 1.0, 2.3160602794142786

    positions = np.concatenate([[0.0], np.cumsum(rng.exponential(size=1_000_000))])
    n_windows = int(positions[-1] // 15.0)

    gaps = rng.exponential(size=1_000_000)

    fam = rigidity._family(2.0)
    fam.ensure(300)
    r = np.linspace(0.05, 25.0, 2000)
    scales, log_norms = fam.scales[:300], fam.log_norms[:300]

    return [
        ("rejection_step (64k uniforms)",
         lambda impl: impl.rejection_step(u[0], u[1], u[2], beta, B)),
        ("window_counts (1e6 positions)",
         lambda impl: impl.window_counts(positions, 15.0, n_windows)),
        ("moving_average_variance (1e6 gaps, N=64)",
         lambda impl: impl.moving_average_variance(gaps, 64)),
        ("cluster_sum (2000 pts x 300 terms)",
         lambda impl: impl.cluster_sum(r, scales, log_norms, 2.0, fam.B)),
    ]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=7,
                        help="timing repeats per kernel (best is kept)")
    args = parser.parse_args()

    if _ext is None:
        print("compiled backend not built; showing the numpy fallback only")

    width = max(len(name) for name, _ in workloads())
    header = f"{'kernel':<{width}}  {'numpy':>10}  {'compiled':>10}  {'speedup':>7}"
    print(header)
    print("-" * len(header))
    for name, call in workloads():
        t_py = best_of(lambda: call(_py), args.repeat)
        if _ext is None:
            print(f"{name:<{width}}  {t_py * 1e3:>8.3f}ms  {'-':>10}  {'-':>7}")
            continue
        t_ext = best_of(lambda: call(_ext), args.repeat)
        print(f"{name:<{width}}  {t_py * 1e3:>8.3f}ms  {t_ext * 1e3:>8.3f}ms "
              f" {t_py / t_ext:>6.2f}x")


if __name__ == "__main__":
    main()
