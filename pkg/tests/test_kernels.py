import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.interpolate import PchipInterpolator

from ctp_bench import _kernels

pytestmark = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def _xy(rng, k):
    x = np.sort(rng.random(k)) * 10 + np.arange(k) * 0.1
    y = np.cumsum(rng.uniform(0.01, 1.0, k))
    return x, y


def test_slopes_match_scipy_and_each_other():
    rng = np.random.default_rng(0)
    for k in (2, 3, 4, 5, 6, 9):
        x, y = _xy(rng, k)
        ref = PchipInterpolator(x, y).derivative()(x)
        for kern in (_kernels.NUMPY_KERNELS, _kernels.NUMBA_KERNELS):
            np.testing.assert_allclose(kern["pchip_slopes"](x, y), ref, rtol=1e-12, atol=1e-12)


def test_integral_matches_scipy():
    rng = np.random.default_rng(1)
    for _ in range(50):
        x, y = _xy(rng, int(rng.integers(2, 7)))
        a, b = np.sort(rng.uniform(x[0], x[-1], 2))
        ref = PchipInterpolator(x, y).integrate(a, b)
        for kern in (_kernels.NUMPY_KERNELS, _kernels.NUMBA_KERNELS):
            assert kern["pchip_integral"](x, y, a, b) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_dominance_backends_agree():
    rng = np.random.default_rng(2)
    for _ in range(30):
        xs = rng.integers(0, 6, 40).astype(float)
        ys = rng.integers(0, 6, 40).astype(float)
        np.testing.assert_array_equal(_kernels.NUMPY_KERNELS["nondominated_mask"](xs, ys),
                                      _kernels.NUMBA_KERNELS["nondominated_mask"](xs, ys))
        np.testing.assert_array_equal(_kernels.NUMPY_KERNELS["nondominated_ranks"](xs, ys),
                                      _kernels.NUMBA_KERNELS["nondominated_ranks"](xs, ys))


def test_stopping_backends_agree():
    from ctp_bench.energy.measure import t_quantile_table

    rng = np.random.default_rng(3)
    samples = 1 + 0.01 * rng.standard_normal((200, 60))
    samples[5, :3] = -1.0
    tq = np.asarray(t_quantile_table(0.99, 60))
    a = _kernels.NUMPY_KERNELS["simulate_stopping"](samples, tq, 0.01, 5, 60)
    b = _kernels.NUMBA_KERNELS["simulate_stopping"](samples, tq, 0.01, 5, 60)
    for u, v in zip(a, b):
        np.testing.assert_allclose(np.asarray(u, dtype=float), np.asarray(v, dtype=float), rtol=1e-12)


def test_env_flag_selects_numpy():
    env = {**os.environ, "CTP_BENCH_NUMBA": "0"}
    out = subprocess.run([sys.executable, "-c", "from ctp_bench import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
