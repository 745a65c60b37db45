"""Monte-Carlo simulation of the stopping rule on Gaussian measurement noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from .measure import DEFAULT_N_MAX, DEFAULT_N_MIN, t_quantile_table


@dataclass
class SimulationResult:
    n_used: np.ndarray
    converged: np.ndarray
    mean: np.ndarray
    half_width: np.ndarray
    true_mean: float

    @property
    def relative_half_width(self):
        return self.half_width / self.mean

    def within(self, rel: float) -> np.ndarray:
        return np.abs(self.mean - self.true_mean) <= rel * self.true_mean


def gaussian_series(rel_sigma: float, n_series: int, n_max: int = DEFAULT_N_MAX,
                    true_mean: float = 1.0, seed=0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return true_mean * (1.0 + rel_sigma * rng.standard_normal((n_series, n_max)))


def simulate_stopping_rule(samples: np.ndarray, alpha: float, beta: float,
                           n_min: int = DEFAULT_N_MIN, n_max: int = DEFAULT_N_MAX,
                           true_mean: float = 1.0) -> SimulationResult:
    """Run the stopping rule over each row of pre-drawn samples."""
    tq = np.asarray(t_quantile_table(alpha, max(n_max, samples.shape[1])), dtype=np.float64)
    n_used, conv, mean, hw = _kernels.simulate_stopping(samples, tq, beta, n_min, n_max)
    return SimulationResult(np.asarray(n_used), np.asarray(conv, dtype=bool), np.asarray(mean),
                            np.asarray(hw), true_mean)
