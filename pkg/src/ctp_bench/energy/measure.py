"""Paired decode/idle energy measurement under a confidence-interval stopping rule."""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

from scipy import stats

from ..errors import DecoderFailed, ExecutionError, NonPositiveEnergy, Unconverged, ValidationError
from .meters import EnergyMeter

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.99
DEFAULT_BETA = 0.01
DEFAULT_N_MIN = 5
DEFAULT_N_MAX = 100


class MeasurementLock:
    """Re-entrant process-wide lock that also counts concurrent holders.

    With ``path`` set, a file lock additionally excludes other processes.
    """

    def __init__(self, path=None):
        self._lock = threading.RLock()
        self._owner = None
        self._depth = 0
        self._guard = threading.Lock()
        self.active = 0
        self.max_active = 0
        self.acquisitions = 0
        self._file_lock = None
        if path is not None:
            from filelock import FileLock

            self._file_lock = FileLock(str(path))

    def __enter__(self):
        self._lock.acquire()
        if self._depth == 0:
            if self._file_lock is not None:
                self._file_lock.acquire()
            with self._guard:
                self.active += 1
                self.acquisitions += 1
                self.max_active = max(self.max_active, self.active)
        self._depth += 1
        return self

    def __exit__(self, *exc):
        self._depth -= 1
        if self._depth == 0:
            with self._guard:
                self.active -= 1
            if self._file_lock is not None:
                self._file_lock.release()
        self._lock.release()
        return False


MEASUREMENT_LOCK = MeasurementLock()


@lru_cache(maxsize=4096)
def t_quantile(alpha: float, df: int) -> float:
    """Two-sided Student-t critical value at confidence ``alpha``."""
    return float(stats.t.ppf(0.5 * (1.0 + alpha), df))


def t_quantile_table(alpha: float, n_max: int):
    """``table[n]`` = critical value for ``n`` samples (inf for n < 2)."""
    return [math.inf, math.inf] + [t_quantile(alpha, n - 1) for n in range(2, n_max + 1)]


@dataclass
class PairedSample:
    e_total: float
    e_idle: float
    duration: float

    @property
    def e_dec(self) -> float:
        return self.e_total - self.e_idle

    @property
    def valid(self) -> bool:
        return self.e_dec > 0

    def to_dict(self) -> dict:
        return {"e_total": self.e_total, "e_idle": self.e_idle, "duration": self.duration, "e_dec": self.e_dec}


@dataclass
class MeasurementSeries:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    n_min: int = DEFAULT_N_MIN
    n_max: int = DEFAULT_N_MAX
    samples: list = field(default_factory=list)
    discarded: int = 0

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def values(self) -> list:
        return [s.e_dec for s in self.samples]

    @property
    def mean(self) -> float:
        return math.fsum(self.values) / self.n if self.samples else math.nan

    @property
    def std(self) -> float:
        if self.n < 2:
            return math.nan
        m = self.mean
        return math.sqrt(math.fsum((v - m) ** 2 for v in self.values) / (self.n - 1))

    @property
    def half_width(self) -> float:
        if self.n < 2:
            return math.inf
        return t_quantile(self.alpha, self.n - 1) * self.std / math.sqrt(self.n)

    @property
    def relative_half_width(self) -> float:
        return self.half_width / self.mean if self.samples and self.mean > 0 else math.inf

    @property
    def converged(self) -> bool:
        return self.n >= self.n_min and self.half_width <= self.beta * self.mean

    @property
    def mean_duration(self) -> float:
        return math.fsum(s.duration for s in self.samples) / self.n if self.samples else math.nan

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha, "beta": self.beta, "n_min": self.n_min, "n_max": self.n_max,
            "n": self.n, "discarded": self.discarded, "converged": self.converged,
            "mean_j": self.mean, "std_j": self.std if self.n >= 2 else None,
            "half_width_j": self.half_width if self.n >= 2 else None,
            "relative_half_width": self.relative_half_width if self.n >= 2 else None,
            "samples": [s.to_dict() for s in self.samples],
        }


def measure_pair(decode_command: Sequence[str], meter: EnergyMeter, lock: MeasurementLock = MEASUREMENT_LOCK) -> PairedSample:
    """One decode run followed by an idle interval of the same length."""
    with lock:
        e0 = meter.read()
        t0 = meter.clock()
        outcome = meter.run_decoder(decode_command)
        t1 = meter.clock()
        e1 = meter.read()
        if outcome.returncode != 0:
            raise DecoderFailed(
                f"decoder exited with status {outcome.returncode}: {outcome.stderr.strip()[:500]}",
                outcome.returncode, outcome.stderr)
        duration = t1 - t0
        if not duration > 0:
            raise ExecutionError(f"decode duration {duration} s is not positive")
        i0 = meter.read()
        meter.idle(duration)
        i1 = meter.read()
    sample = PairedSample(e_total=e1 - e0, e_idle=i1 - i0, duration=duration)
    if not sample.valid:
        raise NonPositiveEnergy(sample)
    return sample


def measure_until_confident(
    decode_command: Sequence[str],
    meter: EnergyMeter,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    n_min: int = DEFAULT_N_MIN,
    n_max: int = DEFAULT_N_MAX,
    retries: int = 2,
    max_discards: Optional[int] = None,
    raise_unconverged: bool = True,
    lock: MeasurementLock = MEASUREMENT_LOCK,
    on_sample: Optional[Callable[[PairedSample], None]] = None,
) -> MeasurementSeries:
    """Repeat paired measurements until the t-interval half-width is within ``beta`` of the mean.

    Non-positive samples are discarded and counted. Raises ``Unconverged``
    (carrying the series) when ``n_max`` valid samples do not converge.
    """
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValidationError(f"alpha and beta must lie in (0, 1), got alpha={alpha}, beta={beta}")
    if not (2 <= n_min <= n_max):
        raise ValidationError(f"need 2 <= n_min <= n_max, got n_min={n_min}, n_max={n_max}")
    max_discards = n_max if max_discards is None else max_discards
    series = MeasurementSeries(alpha, beta, n_min, n_max)
    failures = 0
    with lock:
        while series.n < n_max:
            try:
                sample = measure_pair(decode_command, meter, lock)
            except NonPositiveEnergy as exc:
                series.discarded += 1
                log.warning("discarding sample: %s", exc)
                if series.discarded > max_discards:
                    raise
                continue
            except ExecutionError:
                failures += 1
                if failures > retries:
                    raise
                log.warning("measurement attempt failed, retrying (%d/%d)", failures, retries)
                continue
            series.samples.append(sample)
            if on_sample is not None:
                on_sample(sample)
            if series.converged:
                break
    if not series.converged and raise_unconverged:
        raise Unconverged(series)
    return series
