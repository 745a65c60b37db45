"""Rate-quality metrics: PSNR_YUV, Bjontegaard deltas and Pareto fronts."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import EmptyGroup, NonMonotoneCurve, NoOverlap, TooFewPoints, ValidationError

COST_KINDS = ("bitrate", "energy")
CURVE_COLUMNS = ("qp", "bitrate_kbps", "psnr_y", "psnr_u", "psnr_v", "energy_j", "encode_s", "decode_s")


def psnr_yuv(psnr_y: float, psnr_u: float, psnr_v: float) -> float:
    """Luma-weighted PSNR with 6:1:1 component weights."""
    return (6.0 * psnr_y + psnr_u + psnr_v) / 8.0


@dataclass(frozen=True)
class RatePoint:
    qp: int
    bitrate: float
    psnr_y: float
    psnr_u: float
    psnr_v: float
    energy: Optional[float] = None
    encode_time: float = 0.0
    decode_time: float = 0.0

    def __post_init__(self):
        if not self.bitrate > 0:
            raise ValidationError(f"qp {self.qp}: bitrate must be positive, got {self.bitrate}")
        if self.energy is not None and not self.energy > 0:
            raise ValidationError(f"qp {self.qp}: energy must be positive, got {self.energy}")

    @property
    def psnr_yuv(self) -> float:
        return psnr_yuv(self.psnr_y, self.psnr_u, self.psnr_v)

    def cost(self, kind: str) -> float:
        if kind == "bitrate":
            return self.bitrate
        if kind == "energy":
            if self.energy is None:
                raise ValidationError(f"qp {self.qp}: no energy measurement")
            return self.energy
        raise ValueError(f"unknown cost kind {kind!r}")


@dataclass
class RdCurve:
    label: tuple = ("", "")
    points: list = field(default_factory=list)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.qp)

    def __len__(self):
        return len(self.points)

    def scaled(self, factor: float, kind: str = "bitrate") -> "RdCurve":
        attr = "bitrate" if kind == "bitrate" else "energy"
        pts = [replace(p, **{attr: getattr(p, attr) * factor}) for p in self.points]
        return RdCurve(self.label, pts)

    def log_cost_samples(self, kind: str, min_points: int = 4):
        """Sorted (quality, log10 cost) arrays after validating monotonicity."""
        if len(self.points) < min_points:
            raise TooFewPoints(f"curve {self.label}: {len(self.points)} points, need at least {min_points}")
        pts = sorted(self.points, key=lambda p: p.psnr_yuv)
        q = np.array([p.psnr_yuv for p in pts])
        c = np.array([p.cost(kind) for p in pts], dtype=np.float64)
        for a, b, qa, qb, ca, cb in zip(pts, pts[1:], q, q[1:], c, c[1:]):
            if not qb > qa:
                raise NonMonotoneCurve(
                    f"curve {self.label}: qp {a.qp} and qp {b.qp} have equal quality {qa:.4f} dB", (a.qp, b.qp))
            if not cb > ca:
                raise NonMonotoneCurve(
                    f"curve {self.label}: {kind} does not increase with quality between "
                    f"qp {a.qp} ({ca:g}) and qp {b.qp} ({cb:g})", (a.qp, b.qp))
        return q, np.log10(c)


@dataclass(frozen=True)
class BdResult:
    value: float
    overlap: tuple
    cost_kind: str


@dataclass(frozen=True)
class ParetoPoint:
    name: str
    bdr: float
    bdde: float

    def __post_init__(self):
        if not (math.isfinite(self.bdr) and math.isfinite(self.bdde)):
            raise ValidationError(f"{self.name}: non-finite Pareto coordinates")


def pchip_eval(x, y, xq):
    """Evaluate the monotone cubic Hermite interpolant through (x, y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = _kernels.pchip_slopes(x, y)
    xq = np.atleast_1d(np.asarray(xq, dtype=np.float64))
    k = np.clip(np.searchsorted(x, xq, side="right") - 1, 0, x.size - 2)
    h = x[k + 1] - x[k]
    t = (xq - x[k]) / h
    t2, t3 = t * t, t * t * t
    return ((2 * t3 - 3 * t2 + 1) * y[k] + (t3 - 2 * t2 + t) * h * d[k]
            + (-2 * t3 + 3 * t2) * y[k + 1] + (t3 - t2) * h * d[k + 1])


def _integrate(q, logc, lo, hi, method):
    if method == "pchip":
        return _kernels.pchip_integral(q, logc, lo, hi)
    if method == "cubic":
        poly = np.polynomial.Polynomial.fit(q, logc, 3).convert().integ()
        return float(poly(hi) - poly(lo))
    raise ValueError(f"unknown interpolation method {method!r}")


def bd_metric(test: RdCurve, reference: RdCurve, cost_kind: str = "bitrate",
              method: str = "pchip", min_points: int = 4) -> BdResult:
    """Average log-domain cost difference of ``test`` vs ``reference`` at equal PSNR_YUV.

    Positive values mean the test curve needs more of the cost (bitrate or
    decoding energy) for the same quality.
    """
    if cost_kind not in COST_KINDS:
        raise ValueError(f"unknown cost kind {cost_kind!r}")
    qt, lt = test.log_cost_samples(cost_kind, min_points)
    qr, lr = reference.log_cost_samples(cost_kind, min_points)
    lo = max(qt[0], qr[0])
    hi = min(qt[-1], qr[-1])
    if not hi > lo:
        raise NoOverlap(
            f"quality ranges do not overlap: test [{qt[0]:.3f}, {qt[-1]:.3f}] dB, "
            f"reference [{qr[0]:.3f}, {qr[-1]:.3f}] dB")
    it = _integrate(qt, lt, lo, hi, method)
    ir = _integrate(qr, lr, lo, hi, method)
    value = (10.0 ** ((it - ir) / (hi - lo)) - 1.0) * 100.0
    return BdResult(value, (float(lo), float(hi)), cost_kind)


def pareto_front(points: Sequence[ParetoPoint], anchor: Optional[ParetoPoint] = None) -> list[ParetoPoint]:
    """Non-dominated subset (minimising both BDR and BDDE), sorted by BDR.

    Equal points do not dominate each other, so duplicates are all kept.
    """
    pts = list(points)
    if anchor is not None and all(p.name != anchor.name for p in pts):
        pts.append(anchor)
    if not pts:
        return []
    mask = _kernels.nondominated_mask([p.bdr for p in pts], [p.bdde for p in pts])
    front = [p for p, keep in zip(pts, mask) if keep]
    return sorted(front, key=lambda p: (p.bdr, p.bdde, p.name))


def front_ranks(points: Sequence[ParetoPoint]) -> list[int]:
    """Non-dominated sorting rank per point (0 is the Pareto front)."""
    if not points:
        return []
    return [int(r) for r in _kernels.nondominated_ranks([p.bdr for p in points], [p.bdde for p in points])]


@dataclass(frozen=True)
class BdAggregate:
    per_class: dict
    counts: dict
    overall: float


def bd_aggregate(per_sequence: Mapping[str, Iterable]) -> BdAggregate:
    """Class means plus the overall mean over all sequences (not over class means)."""
    per_class, counts, everything = {}, {}, []
    for cls, values in per_sequence.items():
        vals = [v.value if isinstance(v, BdResult) else float(v) for v in values]
        if not vals:
            raise EmptyGroup(f"class {cls!r} has no sequences")
        per_class[cls] = math.fsum(vals) / len(vals)
        counts[cls] = len(vals)
        everything.extend(vals)
    if not everything:
        raise EmptyGroup("no sequences to aggregate")
    return BdAggregate(per_class, counts, math.fsum(everything) / len(everything))


# --- curve CSV --------------------------------------------------------------

def _opt_float(text):
    text = (text or "").strip()
    return float(text) if text else None


def _is_path(source) -> bool:
    if isinstance(source, Path):
        return True
    return isinstance(source, str) and "\n" not in source and Path(source).is_file()


def read_curve_csv(source, label=("", "")) -> RdCurve:
    """Parse a curve from a CSV path or CSV text."""
    if _is_path(source):
        text = Path(source).read_text(encoding="utf-8")
        label = label if label != ("", "") else (Path(source).stem, "")
    else:
        text = str(source)
    reader = csv.DictReader(io.StringIO(text))
    missing = {"qp", "bitrate_kbps", "psnr_y", "psnr_u", "psnr_v"} - set(reader.fieldnames or ())
    if missing:
        raise ValidationError(f"curve CSV missing columns: {', '.join(sorted(missing))}")
    points = []
    for row in reader:
        points.append(RatePoint(
            qp=int(row["qp"]),
            bitrate=float(row["bitrate_kbps"]),
            psnr_y=float(row["psnr_y"]),
            psnr_u=float(row["psnr_u"]),
            psnr_v=float(row["psnr_v"]),
            energy=_opt_float(row.get("energy_j")),
            encode_time=_opt_float(row.get("encode_s")) or 0.0,
            decode_time=_opt_float(row.get("decode_s")) or 0.0,
        ))
    return RdCurve(label, points)


def write_curve_csv(curve: RdCurve) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for p in curve.points:
        w.writerow([p.qp, repr(p.bitrate), repr(p.psnr_y), repr(p.psnr_u), repr(p.psnr_v),
                    "" if p.energy is None else repr(p.energy), repr(p.encode_time), repr(p.decode_time)])
    return out.getvalue()


def read_points_csv(source) -> list[ParetoPoint]:
    """Pareto input: columns ``name``, ``bdr`` (or ``bdr_pct``), ``bdde`` (or ``bdde_pct``)."""
    text = Path(source).read_text(encoding="utf-8") if _is_path(source) else str(source)
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for row in reader:
        bdr = row.get("bdr", row.get("bdr_pct"))
        bdde = row.get("bdde", row.get("bdde_pct"))
        if row.get("name") is None or bdr is None or bdde is None:
            raise ValidationError("points CSV needs columns name, bdr, bdde")
        out.append(ParetoPoint(row["name"].strip(), float(bdr), float(bdde)))
    return out
