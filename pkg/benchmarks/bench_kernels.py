"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--json]

Both backends are imported side by side from ``ctp_bench._kernels``; the
numba path is warmed up once so compile time is reported separately.
"""

import argparse
import json
import time

import numpy as np

from ctp_bench import _kernels
from ctp_bench.energy.measure import t_quantile_table


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(rng):
    curves = []
    for _ in range(2000):
        x = np.sort(rng.uniform(30, 45, 6))
        y = np.cumsum(rng.uniform(0.05, 0.4, 6))
        curves.append((x, y, x[1], x[-2]))
    xs, ys = rng.random(3000), rng.random(3000)
    samples = 1.0 + 0.005 * rng.standard_normal((10_000, 100))
    tq = np.asarray(t_quantile_table(0.99, 100))

    def integrals(k):
        f = k["pchip_integral"]
        return lambda: [f(x, y, a, b) for x, y, a, b in curves]

    return {
        "pchip_integral x2000": integrals,
        "nondominated_ranks n=3000": lambda k: lambda: k["nondominated_ranks"](xs, ys),
        "simulate_stopping 10^4 series": lambda k: lambda: k["simulate_stopping"](samples, tq, 0.01, 5, 100),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    rows = []
    for name, make in workloads(rng).items():
        np_t = _best(make(_kernels.NUMPY_KERNELS), args.repeat)
        row = {"kernel": name, "numpy_s": np_t, "numba_s": None, "compile_s": None, "speedup": None}
        if _kernels.HAVE_NUMBA:
            fn = make(_kernels.NUMBA_KERNELS)
            t0 = time.perf_counter()
            fn()
            row["compile_s"] = time.perf_counter() - t0
            row["numba_s"] = _best(fn, args.repeat)
            row["speedup"] = np_t / row["numba_s"]
        rows.append(row)

    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"{'kernel':<32} {'numpy [s]':>10} {'numba [s]':>10} {'first [s]':>10} {'speedup':>8}")
    for r in rows:
        nb = "-" if r["numba_s"] is None else f"{r['numba_s']:.4f}"
        first = "-" if r["compile_s"] is None else f"{r['compile_s']:.3f}"
        sp = "-" if r["speedup"] is None else f"{r['speedup']:.1f}x"
        print(f"{r['kernel']:<32} {r['numpy_s']:>10.4f} {nb:>10} {first:>10} {sp:>8}")


if __name__ == "__main__":
    main()
