"""Independent reference computations used only by the tests."""

import numpy as np
from scipy.interpolate import PchipInterpolator


def bd_dense(q_test, c_test, q_ref, c_ref, n=100_000):
    """BD percent via scipy PCHIP and trapezoidal quadrature on n subintervals."""
    lo = max(min(q_test), min(q_ref))
    hi = min(max(q_test), max(q_ref))
    grid = np.linspace(lo, hi, n + 1)
    it = np.trapezoid(_interp(q_test, c_test)(grid), grid)
    ir = np.trapezoid(_interp(q_ref, c_ref)(grid), grid)
    return (10 ** ((it - ir) / (hi - lo)) - 1) * 100


def _interp(q, c):
    order = np.argsort(q)
    return PchipInterpolator(np.asarray(q)[order], np.log10(np.asarray(c))[order])


def dominated_bruteforce(points):
    """Names not dominated by any other point (minimise both coordinates)."""
    keep = set()
    for i, (n, x, y) in enumerate(points):
        if not any((x2 <= x and y2 <= y) and (x2 < x or y2 < y) for j, (_, x2, y2) in enumerate(points) if j != i):
            keep.add(n)
    return keep


def random_curve_pair(rng, n_points=None):
    """Two monotone rate curves over overlapping PSNR ranges (qualities, costs)."""
    out = []
    for _ in range(2):
        k = n_points or int(rng.integers(4, 7))
        q = np.sort(30 + 15 * rng.random(k))
        while np.min(np.diff(q)) < 0.05:
            q = np.sort(30 + 15 * rng.random(k))
        steps = rng.uniform(0.02, 0.4, k)
        logc = 2.5 + np.cumsum(steps)
        out.append((q, 10 ** logc))
    (q1, c1), (q2, c2) = out
    # force overlap
    q2 = q2 - q2.mean() + q1.mean() + rng.uniform(-1, 1)
    return (q1, c1), (q2, c2)


def make_curve(q, cost, label=("t", "p")):
    """RdCurve whose PSNR_YUV equals ``q`` and whose bitrate and energy equal ``cost``."""
    from ctp_bench.metrics import RatePoint, RdCurve

    order = np.argsort(q)
    pts = [RatePoint(60 - i, float(cost[j]), float(q[j]), float(q[j]), float(q[j]), float(cost[j]))
           for i, j in enumerate(order)]
    return RdCurve(label, pts)
