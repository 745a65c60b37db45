"""Append-only JSON-lines results store.

Every state change of a job appends a full snapshot of its record; loading
keeps the last snapshot per (sequence, profile, qp). A torn final line left
by a killed writer is ignored on load and cut off before the next append.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional

from ..errors import ValidationError
from ..metrics import RatePoint, RdCurve

STATUSES = ("pending", "encoded", "measured", "failed")
_ORDER = {"pending": 0, "encoded": 1, "measured": 2}


@dataclass
class JobRecord:
    sequence: str
    profile: str
    qp: int
    cls: str = ""
    status: str = "pending"
    bitrate_kbps: Optional[float] = None
    psnr_y: Optional[float] = None
    psnr_u: Optional[float] = None
    psnr_v: Optional[float] = None
    energy_j: Optional[float] = None
    encode_s: Optional[float] = None
    decode_s: Optional[float] = None
    bitstream: Optional[str] = None
    encoder_log: Optional[str] = None
    measurement: Optional[dict] = None
    error: Optional[str] = None
    attempt: int = 0
    timestamps: dict = field(default_factory=dict)

    @property
    def key(self):
        return (self.sequence, self.profile, self.qp)

    def advance(self, status: str) -> None:
        if status not in STATUSES:
            raise ValueError(status)
        if status != "failed" and self.status != "failed" and _ORDER[status] < _ORDER[self.status]:
            raise ValueError(f"{self.key}: status cannot go back from {self.status} to {status}")
        self.status = status

    def rate_point(self) -> RatePoint:
        return RatePoint(self.qp, self.bitrate_kbps, self.psnr_y, self.psnr_u, self.psnr_v,
                         self.energy_j, self.encode_s or 0.0, self.decode_s or 0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class"] = d.pop("cls")
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "JobRecord":
        data = dict(data)
        if "class" in data:
            data["cls"] = data.pop("class")
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValidationError(f"store record has unknown fields {sorted(unknown)}")
        rec = cls(**data)
        rec.qp = int(rec.qp)
        if rec.status not in STATUSES:
            raise ValidationError(f"store record {rec.key} has invalid status {rec.status!r}")
        return rec


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


class ResultsStore:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict = {}
        if self.path.exists():
            self._records = self._load()

    def _load(self) -> dict:
        records = {}
        data = self.path.read_bytes()
        lines = data.split(b"\n")
        complete = data.endswith(b"\n")
        for i, raw in enumerate(lines):
            if not raw.strip():
                continue
            last = i == len(lines) - 1
            try:
                rec = JobRecord.from_dict(json.loads(raw))
            except (ValueError, TypeError) as exc:
                if last and not complete:
                    break
                raise ValidationError(f"{self.path}:{i + 1}: corrupt store record ({exc})") from None
            records[rec.key] = rec
        return records

    def _repair_tail(self) -> None:
        if not self.path.exists():
            return
        with open(self.path, "rb+") as fh:
            data = fh.read()
            if data and not data.endswith(b"\n"):
                fh.truncate(data.rfind(b"\n") + 1)

    def append(self, record: JobRecord) -> None:
        """Persist a snapshot; one writer at a time, flushed to disk before returning."""
        line = _dumps(record.to_dict()) + "\n"
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._repair_tail()
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            self._records[record.key] = JobRecord.from_dict(json.loads(line))

    def get(self, key) -> Optional[JobRecord]:
        rec = self._records.get(key)
        return None if rec is None else JobRecord.from_dict(rec.to_dict())

    def __len__(self):
        return len(self._records)

    def records(self) -> list:
        return [self._records[k] for k in sorted(self._records, key=_sort_key)]

    def export(self) -> str:
        """Canonical form: one line per job in key order."""
        return "".join(_dumps(r.to_dict()) + "\n" for r in self.records())

    @classmethod
    def import_text(cls, text: str, path: str | Path) -> "ResultsStore":
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return cls(path)

    def curves(self, statuses: Iterable[str] = ("measured",)) -> dict:
        """(sequence, profile) -> RdCurve over records in the given statuses."""
        statuses = set(statuses)
        grouped: dict = {}
        for rec in self.records():
            if rec.status in statuses:
                grouped.setdefault((rec.sequence, rec.profile), []).append(rec.rate_point())
        return {k: RdCurve(k, pts) for k, pts in grouped.items()}


def _sort_key(key):
    seq, prof, qp = key
    return (seq, prof, qp)
