"""BD tables, encoding-time ratios and Pareto listings from a results store."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Optional

from .errors import IncompleteCurve, ValidationError
from .metrics import ParetoPoint, bd_aggregate, bd_metric, front_ranks, pareto_front
from .orchestrator.runner import encoding_time_ratio
from .orchestrator.store import ResultsStore
from .profiles import BUILTIN_PROFILES

AVG = "Avg"
LITERATURE = ("medium", "EE")
PLOT_HEADER = ("name", "bdr_pct", "bdde_pct", "on_front", "front_id")
FIXTURE_TOLERANCE = 0.01


@dataclass
class ReportSpec:
    store: str = ""
    reference: str = "medium"
    profiles: Optional[list] = None
    by_class: bool = True
    method: str = "pchip"
    min_points: int = 4
    pareto: bool = False
    fixture_check: Optional[str] = None


@dataclass
class BdTable:
    reference: str
    profiles: list
    rows: list                      # class names followed by Avg
    counts: dict                    # row -> number of sequences
    bdr: dict                       # (row, profile) -> percent
    bdde: dict
    enc_time: dict                  # profile -> percent of reference
    per_sequence: dict = field(default_factory=dict)  # (sequence, profile) -> (bdr, bdde)

    def avg(self, profile: str) -> tuple:
        return self.bdr[(AVG, profile)], self.bdde[(AVG, profile)]


def fmt2(x: float) -> str:
    """Two decimals, half away from zero, never ``-0.00``."""
    s = str(Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))
    return "0.00" if s == "-0.00" else s


def _profile_order(names, reference: str) -> list:
    builtin = [p.name for p in BUILTIN_PROFILES]
    rank = lambda n: (n != reference, builtin.index(n) if n in builtin else len(builtin), n)  # noqa: E731
    return sorted(set(names), key=rank)


def open_store(source) -> ResultsStore:
    """Store from a path, or a bundled fixture as ``fixture:table3`` / ``fixture:table2``."""
    text = str(source)
    if text.startswith("fixture:"):
        from .fixtures import fixture_path

        source = fixture_path(text.split(":", 1)[1])
    path = Path(str(source))
    if not path.exists():
        raise ValidationError(f"store not found: {path}")
    return ResultsStore(path)


def build_tables(store: ResultsStore, spec: Optional[ReportSpec] = None) -> BdTable:
    spec = spec or ReportSpec()
    ref = spec.reference
    records = store.records()
    cls_of = {}
    cells: dict = {}
    for r in records:
        cls_of.setdefault(r.sequence, r.cls or "-")
        cells.setdefault((r.sequence, r.profile), {})[r.qp] = r
    sequences = sorted(cls_of)
    present = {p for _, p in cells}
    if ref not in present:
        raise ValidationError(f"reference profile {ref!r} not in store")
    profiles = _profile_order(spec.profiles or present, ref)
    unknown = [p for p in profiles if p not in present]
    if unknown:
        raise ValidationError(f"profile {unknown[0]!r} not in store")
    qps = sorted({r.qp for r in records})

    for prof in profiles:
        for seq in sequences:
            got = cells.get((seq, prof), {})
            for qp in qps:
                if qp not in got:
                    raise IncompleteCurve(seq, prof, f"missing qp {qp}")
                if got[qp].status != "measured":
                    raise IncompleteCurve(seq, prof, f"qp {qp} is {got[qp].status}")
    curves = store.curves()

    per_sequence = {}
    groups_r: dict = {}
    groups_e: dict = {}
    enc_time = {}
    for prof in profiles:
        gr: dict = {}
        ge: dict = {}
        times, ref_times = {}, {}
        for seq in sequences:
            test, base = curves[(seq, prof)], curves[(seq, ref)]
            if len(test) < spec.min_points:
                raise IncompleteCurve(seq, prof, f"{len(test)} points, need {spec.min_points}")
            if prof == ref:
                r = e = 0.0
            else:
                r = bd_metric(test, base, "bitrate", spec.method, spec.min_points).value
                e = bd_metric(test, base, "energy", spec.method, spec.min_points).value
            per_sequence[(seq, prof)] = (r, e)
            key = cls_of[seq] if spec.by_class else AVG
            gr.setdefault(key, []).append(r)
            ge.setdefault(key, []).append(e)
            for qp in qps:
                times[(seq, qp)] = cells[(seq, prof)][qp].encode_s
                ref_times[(seq, qp)] = cells[(seq, ref)][qp].encode_s
        groups_r[prof], groups_e[prof] = bd_aggregate(gr), bd_aggregate(ge)
        if all(v is not None for v in times.values()) and all(v is not None for v in ref_times.values()):
            enc_time[prof] = 100.0 if prof == ref else encoding_time_ratio(times, ref_times)

    classes = sorted(groups_r[ref].per_class) if spec.by_class else []
    rows = classes + [AVG]
    counts = {c: groups_r[ref].counts[c] for c in classes}
    counts[AVG] = len(sequences)
    bdr, bdde = {}, {}
    for prof in profiles:
        for c in classes:
            bdr[(c, prof)] = groups_r[prof].per_class[c]
            bdde[(c, prof)] = groups_e[prof].per_class[c]
        bdr[(AVG, prof)] = groups_r[prof].overall
        bdde[(AVG, prof)] = groups_e[prof].overall
    return BdTable(ref, profiles, rows, counts, bdr, bdde, enc_time, per_sequence)


# -- presentation --------------------------------------------------------------

def table_rows(table: BdTable) -> list:
    """Long-format rows shared by the text and CSV renderers."""
    out = []
    for row in table.rows:
        for prof in table.profiles:
            enc = table.enc_time.get(prof) if row == AVG else None
            out.append((row, prof, fmt2(table.bdr[(row, prof)]), fmt2(table.bdde[(row, prof)]),
                        fmt2(enc) if enc is not None else ""))
    return out


def format_text(table: BdTable) -> str:
    width = max(8, *(len(p) for p in table.profiles))
    head1 = f"{'class':<6} {'n':>3} " + " ".join(f"{p:^{2 * width + 1}}" for p in table.profiles)
    head2 = f"{'':<6} {'':>3} " + " ".join(f"{'BDR':>{width}} {'BDDE':>{width}}" for _ in table.profiles)
    lines = [f"BD values in % relative to {table.reference} (PCHIP, PSNR_YUV 6:1:1)", head1, head2]
    for row in table.rows:
        cells = " ".join(f"{fmt2(table.bdr[(row, p)]):>{width}} {fmt2(table.bdde[(row, p)]):>{width}}"
                         for p in table.profiles)
        lines.append(f"{row:<6} {table.counts[row]:>3} {cells}")
    if table.enc_time:
        cells = " ".join(f"{(fmt2(table.enc_time[p]) if p in table.enc_time else '-'):>{2 * width + 1}}"
                         for p in table.profiles)
        lines.append(f"{'EncT%':<6} {'':>3} {cells}")
    return "\n".join(lines) + "\n"


def format_csv(table: BdTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("row", "profile", "bdr_pct", "bdde_pct", "enc_time_pct"))
    w.writerows(table_rows(table))
    return buf.getvalue()


def table_to_dict(table: BdTable) -> dict:
    return {
        "reference": table.reference,
        "profiles": list(table.profiles),
        "rows": [{"row": row, "count": table.counts[row],
                  "values": {p: {"bdr_pct": table.bdr[(row, p)], "bdde_pct": table.bdde[(row, p)]}
                             for p in table.profiles}}
                 for row in table.rows],
        "enc_time_pct": {p: table.enc_time[p] for p in table.profiles if p in table.enc_time},
    }


# -- Pareto --------------------------------------------------------------------

@dataclass
class ParetoReport:
    points: list
    front: list
    literature: list
    ranks: dict

    def names(self, which: str = "front") -> set:
        return {p.name for p in getattr(self, which)}

    def plot_rows(self) -> list:
        on = self.names("front")
        return [(p.name, p.bdr, p.bdde, int(p.name in on), self.ranks[p.name])
                for p in sorted(self.points, key=lambda p: (p.bdr, p.bdde, p.name))]

    def plot_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PLOT_HEADER)
        for name, r, e, on, fid in self.plot_rows():
            w.writerow((name, fmt2(r), fmt2(e), on, fid))
        return buf.getvalue()

    def front_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("name", "bdr_pct", "bdde_pct"))
        for p in self.front:
            w.writerow((p.name, fmt2(p.bdr), fmt2(p.bdde)))
        return buf.getvalue()

    def to_dict(self) -> dict:
        pt = lambda p: {"name": p.name, "bdr_pct": p.bdr, "bdde_pct": p.bdde}  # noqa: E731
        return {"front": [pt(p) for p in self.front],
                "literature_front": [pt(p) for p in self.literature],
                "points": [dict(zip(PLOT_HEADER, row)) for row in self.plot_rows()]}


def pareto_report(points, literature=LITERATURE) -> ParetoReport:
    points = list(points)
    ranks = front_ranks(points)
    lit = [p for p in points if p.name in literature]
    return ParetoReport(points, pareto_front(points), pareto_front(lit) if lit else [],
                        {p.name: r for p, r in zip(points, ranks)})


def build_pareto_report(source, spec: Optional[ReportSpec] = None) -> ParetoReport:
    """Front over all profiles plus the literature front over {medium, EE}."""
    table = source if isinstance(source, BdTable) else build_tables(source, spec)
    points = [ParetoPoint(p, *table.avg(p)) for p in table.profiles]
    return pareto_report(points, (table.reference, "EE"))


# -- fixture regression --------------------------------------------------------

@dataclass
class CheckLine:
    profile: str
    metric: str
    got: float
    expected: float

    @property
    def ok(self) -> bool:
        return abs(self.got - self.expected) <= FIXTURE_TOLERANCE + 1e-12

    def __str__(self):
        return (f"{'ok  ' if self.ok else 'FAIL'} {self.profile:<8} {self.metric:<4} "
                f"got {fmt2(self.got):>7} expected {fmt2(self.expected):>7}")


def fixture_check(table: BdTable, name: str = "table3") -> list:
    from .fixtures import expected_avg

    expected = expected_avg(name)
    lines = []
    for prof, (r, e) in expected.items():
        if prof not in table.profiles:
            raise IncompleteCurve("*", prof, "profile absent from store")
        lines.append(CheckLine(prof, "BDR", table.bdr[(AVG, prof)], r))
        lines.append(CheckLine(prof, "BDDE", table.bdde[(AVG, prof)], e))
    return lines


def render_report(table: BdTable, fmt: str = "text", pareto: Optional[ParetoReport] = None,
                  check: Optional[list] = None) -> str:
    if fmt == "json":
        doc = {"table": table_to_dict(table)}
        if pareto is not None:
            doc["pareto"] = pareto.to_dict()
        if check is not None:
            doc["fixture_check"] = [{"profile": c.profile, "metric": c.metric, "got": c.got,
                                     "expected": c.expected, "ok": c.ok} for c in check]
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        out = format_csv(table)
        if pareto is not None:
            out += "\n" + pareto.plot_csv()
        return out
    out = format_text(table)
    if pareto is not None:
        out += "\nPareto front: " + ", ".join(p.name for p in pareto.front) + "\n"
        out += "Literature front: " + ", ".join(p.name for p in pareto.literature) + "\n\n"
        out += pareto.plot_csv()
    if check is not None:
        out += "\n" + "\n".join(map(str, check)) + "\n"
        bad = sum(not c.ok for c in check)
        out += f"fixture check: {'PASS' if not bad else f'FAIL ({bad} mismatches)'}\n"
    return out
