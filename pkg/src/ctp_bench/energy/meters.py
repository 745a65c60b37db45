"""Energy meters: RAPL via powercap sysfs, and a simulated meter for tests."""

from __future__ import annotations

import abc
import json
import subprocess
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..errors import MeterUnavailable, ValidationError

DEFAULT_RAPL_PATH = "/sys/class/powercap/intel-rapl:0"


@dataclass
class DecodeOutcome:
    returncode: int
    stderr: str = ""


class EnergyMeter(abc.ABC):
    """Cumulative energy counter plus the clock/idle/run hooks of the measurement loop.

    Real meters use wall-clock time and real subprocesses; the simulated
    meter replaces all three so the protocol runs without hardware.
    """

    resolution: float = 1e-6
    wrap_range: Optional[float] = None
    domain: str = "package"

    @abc.abstractmethod
    def read(self) -> float:
        """Cumulative energy in joules, wraparound already corrected."""

    def clock(self) -> float:
        return time.perf_counter()

    def idle(self, seconds: float) -> None:
        time.sleep(seconds)

    def run_decoder(self, command: Sequence[str]) -> DecodeOutcome:
        try:
            proc = subprocess.run(list(command), stdout=subprocess.DEVNULL, stderr=subprocess.PIPE, text=True)
        except OSError as exc:
            return DecodeOutcome(127, str(exc))
        return DecodeOutcome(proc.returncode, proc.stderr or "")

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "resolution_j": self.resolution,
                "wrap_range_j": self.wrap_range, "domain": self.domain}


class RaplMeter(EnergyMeter):
    """Package energy from ``energy_uj`` / ``max_energy_range_uj`` in a powercap domain."""

    def __init__(self, path: str | Path = DEFAULT_RAPL_PATH):
        self.path = Path(path)
        self.energy_file = self.path / "energy_uj"
        self.range_file = self.path / "max_energy_range_uj"
        self.range_uj = self._read_int(self.range_file)
        self.wrap_range = self.range_uj / 1e6
        self.domain = self._domain_name()
        self._last = self._read_int(self.energy_file)
        self._total_uj = 0
        self.wraps = 0

    def _read_int(self, f: Path) -> int:
        try:
            return int(f.read_text().strip())
        except FileNotFoundError:
            raise MeterUnavailable(f"no RAPL counter at {f} (powercap intel-rapl driver not loaded?)") from None
        except PermissionError:
            raise MeterUnavailable(
                f"permission denied reading {f}; the measuring user needs read access to the "
                f"powercap energy counter (e.g. run as root or chmod a+r {f})") from None
        except ValueError:
            raise MeterUnavailable(f"unexpected content in {f}") from None

    def _domain_name(self) -> str:
        try:
            return (self.path / "name").read_text().strip()
        except OSError:
            return "package"

    def read(self) -> float:
        raw = self._read_int(self.energy_file)
        if raw < self._last:
            self.wraps += 1
            self._total_uj += raw + self.range_uj - self._last
        else:
            self._total_uj += raw - self._last
        self._last = raw
        return self._total_uj / 1e6


def read_rapl(meter: RaplMeter) -> float:
    return meter.read()


@dataclass
class MockScenario:
    """Simulated platform: constant idle draw plus extra draw while decoding."""

    idle_power_w: float = 10.0
    decode_power_w: float = 15.0
    noise_rel: float = 0.0
    seed: int = 0
    decode_seconds: float = 1.0
    resolution_j: float = 1e-6

    def __post_init__(self):
        if self.idle_power_w < 0 or self.decode_power_w < 0:
            raise ValidationError("mock scenario powers must be non-negative")
        if self.noise_rel < 0:
            raise ValidationError("mock scenario noise must be non-negative")
        if not self.decode_seconds > 0 or not self.resolution_j > 0:
            raise ValidationError("mock scenario decode_seconds and resolution_j must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def load_scenario(spec: str | Path) -> MockScenario:
    """Scenario from a JSON file, or by name from the bundled scenarios."""
    path = Path(spec)
    if not path.is_file():
        name = path.name if path.suffix else path.name + ".json"
        bundled = resources.files("ctp_bench.data").joinpath("scenarios", name)
        if not bundled.is_file():
            raise ValidationError(f"mock scenario {str(spec)!r} not found")
        text = bundled.read_text(encoding="utf-8")
    else:
        text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"mock scenario {str(spec)!r}: {exc}") from None
    known = MockScenario.__dataclass_fields__
    unknown = set(data) - set(known)
    if unknown:
        raise ValidationError(f"mock scenario {str(spec)!r}: unknown fields {sorted(unknown)}")
    return MockScenario(**data)


def read_mock_bitstream(path) -> Optional[dict]:
    try:
        with open(path, "rb") as fh:
            head = fh.readline()
        data = json.loads(head)
    except (OSError, ValueError):
        return None
    return data if isinstance(data, dict) and data.get("mock_bitstream") else None


class MockMeter(EnergyMeter):
    """Simulated meter on a virtual clock.

    Cumulative energy integrates ``idle_power_w`` over all elapsed time plus
    ``decode_power_w`` while a decode is active; each decode's extra energy
    is perturbed by a Gaussian factor ``1 + noise_rel * z``.
    """

    def __init__(self, scenario: MockScenario | None = None, seed: Optional[int] = None):
        self.scenario = scenario or MockScenario()
        self.resolution = self.scenario.resolution_j
        self.domain = "mock"
        self._units = round(1.0 / self.resolution)
        self._rng = np.random.default_rng(self.scenario.seed if seed is None else seed)
        self._now = 0.0
        self._energy = 0.0
        self.decodes = 0

    def read(self) -> float:
        return round(self._energy * self._units) / self._units

    def clock(self) -> float:
        return self._now

    def idle(self, seconds: float) -> None:
        self._advance(seconds, 0.0)

    def _advance(self, seconds, extra_power):
        self._now += seconds
        self._energy += self.scenario.idle_power_w * seconds + extra_power * seconds

    def decode_seconds_for(self, command: Sequence[str]) -> tuple[float, bool]:
        args = list(command)
        header = None
        if "-b" in args and args.index("-b") + 1 < len(args):
            header = read_mock_bitstream(args[args.index("-b") + 1])
        if header is None:
            return self.scenario.decode_seconds, False
        return float(header.get("decode_s", self.scenario.decode_seconds)), bool(header.get("fail_decode"))

    def run_decoder(self, command: Sequence[str]) -> DecodeOutcome:
        seconds, fail = self.decode_seconds_for(command)
        if fail:
            return DecodeOutcome(1, "mock decoder: corrupt bitstream")
        factor = 1.0
        if self.scenario.noise_rel > 0:
            factor = max(0.0, 1.0 + self.scenario.noise_rel * self._rng.standard_normal())
        self._advance(seconds, self.scenario.decode_power_w * factor)
        self.decodes += 1
        return DecodeOutcome(0)

    def describe(self) -> dict:
        d = super().describe()
        d["scenario"] = self.scenario.to_dict()
        return d


@dataclass
class ScriptedMeter(EnergyMeter):
    """Replays a fixed list of cumulative readings; the clock advances one second per call."""

    readings: list = field(default_factory=list)
    wall: list = field(default_factory=list)

    def __post_init__(self):
        self._i = 0
        self._t = 0

    def read(self) -> float:
        value = self.readings[self._i]
        self._i += 1
        return value

    def clock(self) -> float:
        if self.wall:
            value = self.wall[self._t]
            self._t += 1
            return value
        return super().clock()

    def idle(self, seconds: float) -> None:
        pass

    def run_decoder(self, command):
        return DecodeOutcome(0)
