"""Executes an experiment plan: parallel encodes, then strictly serial measurements."""

from __future__ import annotations

import hashlib
import logging
import os
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Optional

from ..energy import MEASUREMENT_LOCK, MeasurementLock, MockMeter, RaplMeter, load_scenario, measure_until_confident
from ..energy.meters import DEFAULT_RAPL_PATH, EnergyMeter
from ..errors import CtpBenchError, EncoderFailed, MissingCell, PlanInvalid, Unconverged
from ..profiles import ProfileRegistry, serialize_args
from .logs import parse_encoder_log
from .plan import ExperimentPlan
from .store import JobRecord, ResultsStore

log = logging.getLogger(__name__)

STORE_NAME = "results.jsonl"


def default_jobs() -> int:
    return max(1, (os.cpu_count() or 1) - 2)


def cell_seed(seed: int, key) -> int:
    digest = hashlib.sha256(f"{seed}|{key[0]}|{key[1]}|{key[2]}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def meter_factory(spec: Optional[str], seed: int = 0) -> Callable[[tuple], EnergyMeter]:
    """Per-cell meter constructor for a ``rapl[:path]`` or ``mock[:scenario]`` spec.

    Mock meters get a seed derived from (seed, cell), so results do not
    depend on execution order or on resumption.
    """
    spec = spec or os.environ.get("CTP_BENCH_METER") or "rapl"
    kind, _, arg = spec.partition(":")
    if kind == "mock":
        scenario = load_scenario(arg or "default")
        return lambda key: MockMeter(scenario, seed=cell_seed(seed, key))
    if kind == "rapl":
        meter = RaplMeter(arg or DEFAULT_RAPL_PATH)
        return lambda key: meter
    raise PlanInvalid(f"unknown meter {spec!r} (expected rapl[:path] or mock[:scenario])")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fill(template, values: Mapping[str, object]) -> list:
    return [str(t).format(**values) for t in template]


@dataclass
class RunSummary:
    store: str
    cells: int
    executed: list = field(default_factory=list)
    encoded: list = field(default_factory=list)
    measured: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    skipped: int = 0

    def to_dict(self) -> dict:
        keys = lambda ks: [list(k) for k in ks]  # noqa: E731
        return {"store": self.store, "cells": self.cells, "skipped": self.skipped,
                "executed": keys(self.executed), "encoded": keys(self.encoded),
                "measured": keys(self.measured), "failed": keys(self.failed)}


class PlanRunner:
    def __init__(self, plan: ExperimentPlan, registry: ProfileRegistry, *, jobs: Optional[int] = None,
                 meters: Optional[Callable[[tuple], EnergyMeter]] = None,
                 lock: MeasurementLock = MEASUREMENT_LOCK, stop_after: Optional[int] = None,
                 on_measured: Optional[Callable[[JobRecord], None]] = None):
        plan.validate(registry)
        self.plan = plan
        self.registry = registry
        self.jobs = jobs or plan.jobs or default_jobs()
        self.meters = meters or meter_factory(plan.meter, plan.seed)
        self.lock = lock
        self.workspace = Path(plan.workspace).resolve()
        self.store = ResultsStore(self.workspace / STORE_NAME)
        self.stop_after = stop_after
        self.on_measured = on_measured
        self._claimed: set = set()
        self._claim_lock = threading.Lock()
        self._encodes_running = 0
        self.encode_overlap_violations = 0

    def _claim(self, key) -> bool:
        with self._claim_lock:
            if key in self._claimed:
                return False
            self._claimed.add(key)
            return True

    def cell_dir(self, key) -> Path:
        seq, prof, qp = key
        return self.workspace / "jobs" / seq / prof / f"qp{qp}"

    def encoder_command(self, key, bitstream: Path) -> list:
        seq, prof, qp = key
        s = self.plan.sequence(seq)
        args = serialize_args(self.registry.resolve(prof), self.registry.base_of(prof), self.plan.extra_options)
        values = {"qp": qp, "input": s.path, "bitstream": str(bitstream), "frames": s.frames,
                  "fps": f"{s.fps:g}", "sequence": seq, "profile": prof}
        return list(self.plan.encoder.command) + args + _fill(self.plan.encoder.args, values)

    def decoder_command(self, bitstream: str) -> list:
        return list(self.plan.decoder.command) + _fill(self.plan.decoder.args, {"bitstream": bitstream})

    def _needs_encode(self, rec: Optional[JobRecord]) -> bool:
        if rec is None or rec.status in ("pending", "failed"):
            return True
        if rec.status == "encoded":
            return not (rec.bitstream and Path(rec.bitstream).exists())
        return False

    # -- encode phase --------------------------------------------------------

    def encode(self, key) -> JobRecord:
        prev = self.store.get(key)
        rec = JobRecord(*key, cls=self.plan.sequence(key[0]).cls, attempt=(prev.attempt + 1) if prev else 1)
        rec.timestamps = {"started": _now()}
        self.store.append(rec)
        workdir = self.cell_dir(key)
        workdir.mkdir(parents=True, exist_ok=True)
        bitstream = workdir / "out.bit"
        log_path = workdir / "encoder.log"
        cmd = self.encoder_command(key, bitstream)
        t0 = time.perf_counter()
        try:
            with open(log_path, "w", encoding="utf-8") as fh:
                proc = subprocess.run(cmd, stdout=fh, stderr=subprocess.STDOUT, cwd=workdir)
            wall = time.perf_counter() - t0
            if proc.returncode != 0:
                raise EncoderFailed(f"encoder exited with status {proc.returncode} (log: {log_path})")
            summary = parse_encoder_log(log_path.read_text(encoding="utf-8", errors="replace"), log_path)
        except (CtpBenchError, OSError) as exc:
            rec.advance("failed")
            rec.error = f"{type(exc).__name__}: {exc}"
            rec.encoder_log = str(log_path)
            rec.timestamps["failed"] = _now()
            self.store.append(rec)
            return rec
        rec.bitrate_kbps = summary.bitrate_kbps
        rec.psnr_y, rec.psnr_u, rec.psnr_v = summary.psnr_y, summary.psnr_u, summary.psnr_v
        rec.encode_s = summary.encode_s if summary.encode_s is not None else round(wall, 3)
        rec.bitstream = str(bitstream)
        rec.encoder_log = str(log_path)
        rec.advance("encoded")
        rec.timestamps["encoded"] = _now()
        self.store.append(rec)
        return rec

    def _encode_tracked(self, key):
        with self._claim_lock:
            self._encodes_running += 1
            if self.lock.active:
                self.encode_overlap_violations += 1
        try:
            return self.encode(key)
        finally:
            with self._claim_lock:
                self._encodes_running -= 1

    # -- measurement phase ---------------------------------------------------

    def measure(self, rec: JobRecord) -> JobRecord:
        m = self.plan.measurement
        meter = self.meters(rec.key)
        cmd = self.decoder_command(rec.bitstream)
        if self._encodes_running:
            self.encode_overlap_violations += 1
        try:
            series = measure_until_confident(cmd, meter, m.alpha, m.beta, m.n_min, m.n_max,
                                             retries=m.retries, lock=self.lock)
        except Unconverged as exc:
            rec.advance("failed")
            rec.error = f"Unconverged: {exc}"
            rec.measurement = _series_summary(exc.series)
            rec.timestamps["failed"] = _now()
            self.store.append(rec)
            return rec
        except CtpBenchError as exc:
            rec.advance("failed")
            rec.error = f"{type(exc).__name__}: {exc}"
            rec.timestamps["failed"] = _now()
            self.store.append(rec)
            return rec
        rec.energy_j = series.mean
        rec.decode_s = series.mean_duration
        rec.measurement = _series_summary(series)
        rec.error = None
        rec.advance("measured")
        rec.timestamps["measured"] = _now()
        self.store.append(rec)
        return rec

    # -- driver --------------------------------------------------------------

    def run(self) -> RunSummary:
        cells = self.plan.cells()
        summary = RunSummary(str(self.store.path), len(cells))
        to_encode, to_measure = [], []
        for key in cells:
            rec = self.store.get(key)
            if rec is not None and rec.status == "measured":
                summary.skipped += 1
                continue
            if not self._claim(key):
                continue
            summary.executed.append(key)
            (to_encode if self._needs_encode(rec) else to_measure).append(key)

        if to_encode:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                for rec in pool.map(self._encode_tracked, to_encode):
                    (summary.encoded if rec.status == "encoded" else summary.failed).append(rec.key)

        pending = sorted(set(to_measure) | set(summary.encoded))
        for n, key in enumerate(pending):
            if self.stop_after is not None and n >= self.stop_after:
                break
            rec = self.measure(self.store.get(key))
            (summary.measured if rec.status == "measured" else summary.failed).append(key)
            if self.on_measured is not None:
                self.on_measured(rec)
        return summary


def _series_summary(series) -> dict:
    d = series.to_dict()
    d.pop("samples")
    d["e_dec_j"] = [s.e_dec for s in series.samples]
    return d


def run_plan(plan: ExperimentPlan, registry: ProfileRegistry, **kwargs) -> RunSummary:
    """Run every matrix cell not yet measured; returns what was executed."""
    return PlanRunner(plan, registry, **kwargs).run()


def encoding_time_ratio(profile_times: Mapping, reference_times: Mapping) -> float:
    """100 x total profile encode time / total reference encode time over matching cells."""
    missing = [k for k in reference_times if k not in profile_times]
    missing += [k for k in profile_times if k not in reference_times]
    if missing:
        raise MissingCell(f"encode time missing for cell {missing[0]!r}")
    if not reference_times:
        raise MissingCell("no cells to compare")
    ref = sum(reference_times[k] for k in sorted(reference_times))
    prof = sum(profile_times[k] for k in sorted(reference_times))
    return 100.0 * prof / ref
