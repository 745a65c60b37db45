"""Numeric kernels with a numba path and a pure-numpy path.

``CTP_BENCH_NUMBA=0`` forces the numpy implementations; otherwise numba is
used when importable. Both paths are always importable by name
(``NUMPY_KERNELS`` / ``NUMBA_KERNELS``) so tests and the benchmark can compare
them directly.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("CTP_BENCH_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


# ---------------------------------------------------------------------------
# PCHIP (Fritsch-Carlson slopes, three-point shape-preserving end slopes)
# ---------------------------------------------------------------------------

def _np_pchip_slopes(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    h = np.diff(x)
    m = np.diff(y) / h
    n = x.size
    if n == 2:
        return np.array([m[0], m[0]])
    d = np.zeros(n)
    w1 = 2.0 * h[1:] + h[:-1]
    w2 = h[1:] + 2.0 * h[:-1]
    same = (m[:-1] * m[1:]) > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        harm = (w1 + w2) / (w1 / m[:-1] + w2 / m[1:])
    d[1:-1] = np.where(same, harm, 0.0)
    d[0] = _np_edge(h[0], h[1], m[0], m[1])
    d[-1] = _np_edge(h[-1], h[-2], m[-1], m[-2])
    return d


def _np_edge(h0, h1, m0, m1):
    d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1)
    if np.sign(d) != np.sign(m0):
        return 0.0
    if np.sign(m0) != np.sign(m1) and abs(d) > 3.0 * abs(m0):
        return 3.0 * m0
    return d


def _np_hermite_integral(x, y, d, a, b):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    h = np.diff(x)
    ta = np.clip((a - x[:-1]) / h, 0.0, 1.0)
    tb = np.clip((b - x[:-1]) / h, 0.0, 1.0)
    return float(np.sum(h * (_np_antideriv(tb, y, d, h) - _np_antideriv(ta, y, d, h))))


def _np_antideriv(t, y, d, h):
    # antiderivatives of the cubic Hermite basis on the unit interval
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    h00 = t - t3 + 0.5 * t4
    h10 = 0.25 * t4 - 2.0 * t3 / 3.0 + 0.5 * t2
    h01 = t3 - 0.5 * t4
    h11 = 0.25 * t4 - t3 / 3.0
    return h00 * y[:-1] + h10 * h * d[:-1] + h01 * y[1:] + h11 * h * d[1:]


def _np_pchip_integral(x, y, a, b):
    return _np_hermite_integral(x, y, _np_pchip_slopes(x, y), a, b)


# ---------------------------------------------------------------------------
# Pareto dominance (minimisation in both objectives)
# ---------------------------------------------------------------------------

def _np_nondominated_mask(xs, ys):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    le = (xs[:, None] <= xs[None, :]) & (ys[:, None] <= ys[None, :])
    lt = (xs[:, None] < xs[None, :]) | (ys[:, None] < ys[None, :])
    dominated = np.any(le & lt, axis=0)
    return ~dominated


def _np_nondominated_ranks(xs, ys):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ranks = np.full(xs.size, -1, dtype=np.int64)
    remaining = np.arange(xs.size)
    rank = 0
    while remaining.size:
        mask = _np_nondominated_mask(xs[remaining], ys[remaining])
        ranks[remaining[mask]] = rank
        remaining = remaining[~mask]
        rank += 1
    return ranks


# ---------------------------------------------------------------------------
# Sequential confidence-interval stopping rule
# ---------------------------------------------------------------------------

def _np_simulate_stopping(samples, tq, beta, n_min, n_max):
    """Apply the stopping rule to each row of ``samples``.

    Non-positive samples are skipped, mirroring the measurement loop.
    ``tq[n]`` is the two-sided t quantile for ``n`` valid samples.
    Returns (n_used, converged, mean, half_width) per row.
    """
    samples = np.asarray(samples, dtype=np.float64)
    rows, cols = samples.shape
    valid = samples > 0.0
    # compact valid samples to the left, padding with NaN
    order = np.argsort(~valid, axis=1, kind="stable")
    packed = np.take_along_axis(samples, order, axis=1)
    nvalid = valid.sum(axis=1)
    packed[np.arange(cols)[None, :] >= nvalid[:, None]] = np.nan
    width = min(cols, n_max)
    packed = packed[:, :width]

    shift = packed[:, :1]
    z = packed - shift
    n = np.arange(1, width + 1, dtype=np.float64)
    s1 = np.cumsum(z, axis=1)
    s2 = np.cumsum(z * z, axis=1)
    zbar = s1 / n
    with np.errstate(invalid="ignore", divide="ignore"):
        var = np.maximum(s2 - n * zbar * zbar, 0.0) / (n - 1.0)
        hw = tq[1: width + 1][None, :] * np.sqrt(var) / np.sqrt(n)
    mean = zbar + shift
    hw[:, 0] = np.inf
    ok = (n[None, :] >= n_min) & (hw <= beta * mean)
    ok &= ~np.isnan(mean)

    converged = ok.any(axis=1)
    first = np.argmax(ok, axis=1)
    last = np.clip(np.minimum(nvalid, width) - 1, 0, None)
    idx = np.where(converged, first, last)
    r = np.arange(rows)
    n_used = np.where(converged, idx + 1, np.minimum(nvalid, width))
    out_mean = mean[r, idx]
    out_hw = hw[r, idx]
    out_mean[n_used == 0] = np.nan
    out_hw[n_used < 2] = np.inf
    return n_used.astype(np.int64), converged, out_mean, out_hw


NUMPY_KERNELS = {
    "pchip_slopes": _np_pchip_slopes,
    "hermite_integral": _np_hermite_integral,
    "pchip_integral": _np_pchip_integral,
    "nondominated_mask": _np_nondominated_mask,
    "nondominated_ranks": _np_nondominated_ranks,
    "simulate_stopping": _np_simulate_stopping,
}


# ---------------------------------------------------------------------------
# numba versions
# ---------------------------------------------------------------------------

NUMBA_KERNELS: dict = {}

if HAVE_NUMBA:
    njit = numba.njit(cache=True)

    @njit
    def _nb_sign(v):
        if v > 0.0:
            return 1.0
        if v < 0.0:
            return -1.0
        return 0.0

    @njit
    def _nb_edge(h0, h1, m0, m1):
        d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1)
        if _nb_sign(d) != _nb_sign(m0):
            return 0.0
        if _nb_sign(m0) != _nb_sign(m1) and abs(d) > 3.0 * abs(m0):
            return 3.0 * m0
        return d

    @njit
    def _nb_pchip_slopes_impl(x, y):
        n = x.size
        d = np.zeros(n)
        h = np.empty(n - 1)
        m = np.empty(n - 1)
        for k in range(n - 1):
            h[k] = x[k + 1] - x[k]
            m[k] = (y[k + 1] - y[k]) / h[k]
        if n == 2:
            d[0] = m[0]
            d[1] = m[0]
            return d
        for k in range(1, n - 1):
            if m[k - 1] * m[k] > 0.0:
                w1 = 2.0 * h[k] + h[k - 1]
                w2 = h[k] + 2.0 * h[k - 1]
                d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k])
        d[0] = _nb_edge(h[0], h[1], m[0], m[1])
        d[n - 1] = _nb_edge(h[n - 2], h[n - 3], m[n - 2], m[n - 3])
        return d

    @njit
    def _nb_hermite_integral_impl(x, y, d, a, b):
        total = 0.0
        for k in range(x.size - 1):
            h = x[k + 1] - x[k]
            ta = min(max((a - x[k]) / h, 0.0), 1.0)
            tb = min(max((b - x[k]) / h, 0.0), 1.0)
            if tb <= ta:
                continue
            seg = 0.0
            for t, sgn in ((tb, 1.0), (ta, -1.0)):
                t2 = t * t
                t3 = t2 * t
                t4 = t3 * t
                h00 = t - t3 + 0.5 * t4
                h10 = 0.25 * t4 - 2.0 * t3 / 3.0 + 0.5 * t2
                h01 = t3 - 0.5 * t4
                h11 = 0.25 * t4 - t3 / 3.0
                seg += sgn * (h00 * y[k] + h10 * h * d[k] + h01 * y[k + 1] + h11 * h * d[k + 1])
            total += h * seg
        return total

    @njit
    def _nb_nondominated_mask_impl(xs, ys):
        n = xs.size
        keep = np.ones(n, dtype=np.bool_)
        for j in range(n):
            for i in range(n):
                if i == j:
                    continue
                if xs[i] <= xs[j] and ys[i] <= ys[j] and (xs[i] < xs[j] or ys[i] < ys[j]):
                    keep[j] = False
                    break
        return keep

    @njit
    def _nb_nondominated_ranks_impl(xs, ys):
        n = xs.size
        ranks = np.full(n, -1, dtype=np.int64)
        assigned = 0
        rank = 0
        while assigned < n:
            current = np.zeros(n, dtype=np.bool_)
            for j in range(n):
                if ranks[j] >= 0:
                    continue
                dominated = False
                for i in range(n):
                    if i == j or ranks[i] >= 0:
                        continue
                    if xs[i] <= xs[j] and ys[i] <= ys[j] and (xs[i] < xs[j] or ys[i] < ys[j]):
                        dominated = True
                        break
                current[j] = not dominated
            for j in range(n):
                if current[j]:
                    ranks[j] = rank
                    assigned += 1
            rank += 1
        return ranks

    @njit
    def _nb_simulate_stopping_impl(samples, tq, beta, n_min, n_max):
        rows, cols = samples.shape
        n_used = np.zeros(rows, dtype=np.int64)
        converged = np.zeros(rows, dtype=np.bool_)
        means = np.full(rows, np.nan)
        hws = np.full(rows, np.inf)
        for r in range(rows):
            n = 0
            shift = 0.0
            s1 = 0.0
            s2 = 0.0
            for c in range(cols):
                v = samples[r, c]
                if not v > 0.0:
                    continue
                if n == 0:
                    shift = v
                z = v - shift
                n += 1
                s1 += z
                s2 += z * z
                zbar = s1 / n
                mean = zbar + shift
                if n >= 2:
                    var = max(s2 - n * zbar * zbar, 0.0) / (n - 1.0)
                    hw = tq[n] * np.sqrt(var) / np.sqrt(float(n))
                else:
                    hw = np.inf
                means[r] = mean
                hws[r] = hw
                n_used[r] = n
                if n >= n_min and hw <= beta * mean:
                    converged[r] = True
                    break
                if n >= n_max:
                    break
        return n_used, converged, means, hws

    def _nb_pchip_slopes(x, y):
        return _nb_pchip_slopes_impl(np.ascontiguousarray(x, dtype=np.float64), np.ascontiguousarray(y, dtype=np.float64))

    def _nb_hermite_integral(x, y, d, a, b):
        return float(_nb_hermite_integral_impl(
            np.ascontiguousarray(x, dtype=np.float64), np.ascontiguousarray(y, dtype=np.float64),
            np.ascontiguousarray(d, dtype=np.float64), float(a), float(b)))

    def _nb_pchip_integral(x, y, a, b):
        x = np.ascontiguousarray(x, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        return float(_nb_hermite_integral_impl(x, y, _nb_pchip_slopes_impl(x, y), float(a), float(b)))

    def _nb_nondominated_mask(xs, ys):
        return _nb_nondominated_mask_impl(np.ascontiguousarray(xs, dtype=np.float64), np.ascontiguousarray(ys, dtype=np.float64))

    def _nb_nondominated_ranks(xs, ys):
        return _nb_nondominated_ranks_impl(np.ascontiguousarray(xs, dtype=np.float64), np.ascontiguousarray(ys, dtype=np.float64))

    def _nb_simulate_stopping(samples, tq, beta, n_min, n_max):
        return _nb_simulate_stopping_impl(
            np.ascontiguousarray(samples, dtype=np.float64), np.ascontiguousarray(tq, dtype=np.float64),
            float(beta), int(n_min), int(n_max))

    NUMBA_KERNELS = {
        "pchip_slopes": _nb_pchip_slopes,
        "hermite_integral": _nb_hermite_integral,
        "pchip_integral": _nb_pchip_integral,
        "nondominated_mask": _nb_nondominated_mask,
        "nondominated_ranks": _nb_nondominated_ranks,
        "simulate_stopping": _nb_simulate_stopping,
    }


KERNELS = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS
BACKEND = "numba" if USE_NUMBA else "numpy"

pchip_slopes = KERNELS["pchip_slopes"]
hermite_integral = KERNELS["hermite_integral"]
pchip_integral = KERNELS["pchip_integral"]
nondominated_mask = KERNELS["nondominated_mask"]
nondominated_ranks = KERNELS["nondominated_ranks"]
simulate_stopping = KERNELS["simulate_stopping"]
