"""Compare the compiled and numpy covariance kernels.

Usage: python3 benchmarks/bench_kernels.py [n ...]
"""
import sys

from pargp.benchmark import benchmark_kernels
from pargp.covariance import available_backends


def main(argv):
    sizes = tuple(int(a) for a in argv) or (500, 1000, 2000, 4000)
    rows = benchmark_kernels(sizes=sizes, repeats=3)
    print(f"backends: {', '.join(available_backends())}")
    print(f"{'backend':<10}{'n':>7}{'matrix s':>12}{'cross s':>12}{'max diff':>11}")
    for r in rows:
        print(f"{r['backend']:<10}{r['n']:>7}{r['cov_matrix_seconds']:>12.4f}"
              f"{r['cross_cov_seconds']:>12.4f}{r['max_abs_diff']:>11.1e}")
    by = {(r["backend"], r["n"]): r["cov_matrix_seconds"] for r in rows}
    for n in sizes:
        if ("compiled", n) in by and ("python", n) in by:
            print(f"n={n}: compiled is {by['python', n] / by['compiled', n]:.1f}x faster")


if __name__ == "__main__":
    main(sys.argv[1:])
