import json
import random

import pytest

from ctp_bench import fixtures
from ctp_bench.errors import IncompleteCurve
from ctp_bench.metrics import ParetoPoint
from ctp_bench.orchestrator import JobRecord, ResultsStore
from ctp_bench.report import (
    build_pareto_report,
    build_tables,
    fixture_check,
    fmt2,
    format_csv,
    format_text,
    open_store,
    pareto_report,
    table_rows,
)

from oracles import dominated_bruteforce


@pytest.fixture(scope="module")
def table3():
    return build_tables(open_store("fixture:table3"))


def test_fmt2_half_away_from_zero():
    assert fmt2(0.125) == "0.13"
    assert fmt2(-0.125) == "-0.13"
    assert fmt2(2.675) == "2.68"
    assert fmt2(-0.004) == "0.00"
    assert fmt2(22.905) == "22.91"


def test_bundled_fixtures_match_generator():
    for name, (_, build) in fixtures.FIXTURES.items():
        assert fixtures.fixture_path(name).read_text() == fixtures.render(build()), name


def test_derived_class_closes_average():
    sizes = {c: len(s) for c, s in fixtures.CTC_SEQUENCES.items()}
    for prof in fixtures.TABLE3_PROFILES:
        targets = fixtures.class_targets(prof)
        for i in (0, 1):
            avg = sum(sizes[c] * targets[c][i] for c in sizes) / sum(sizes.values())
            assert avg == pytest.approx(fixtures.TABLE3[prof]["Avg"][i], abs=1e-9)


def test_table3_avg_and_classes(table3):
    for prof in fixtures.TABLE3_PROFILES:
        for cls in ("A1", "A2", "B", "C", "D", "F"):
            exp = fixtures.TABLE3[prof][cls]
            assert table3.bdr[(cls, prof)] == pytest.approx(exp[0], abs=1e-6)
            assert table3.bdde[(cls, prof)] == pytest.approx(exp[1], abs=1e-6)
    assert all(c.ok for c in fixture_check(table3, "table3"))
    assert table3.avg("medium") == (0.0, 0.0)
    assert table3.counts["Avg"] == 26


def test_enc_time_column(table3):
    for prof in fixtures.TABLE3_PROFILES:
        assert table3.enc_time[prof] == pytest.approx(fixtures.TABLE2[prof][0], abs=1e-9)
    assert table3.enc_time["medium"] == 100.0


def test_table2_fixture():
    t = build_tables(open_store("fixture:table2"))
    assert all(c.ok for c in fixture_check(t, "table2"))
    assert t.rows == ["HHI", "Avg"]


def test_text_and_csv_agree(table3):
    text = format_text(table3)
    rows = list(table_rows(table3))
    csv_lines = format_csv(table3).splitlines()[1:]
    assert len(csv_lines) == len(rows)
    for row, prof, r, e, _ in rows:
        line = next(line for line in text.splitlines() if line.startswith(f"{row} ") or line.startswith(f"{row}\t"))
        assert r in line.split() and e in line.split()
    assert "-0.00" not in text and "-0.00" not in "\n".join(csv_lines)


def test_identity_store_all_zero(tmp_path):
    src = ResultsStore(fixtures.fixture_path("table2"))
    store = ResultsStore(tmp_path / "s.jsonl")
    for rec in src.records():
        if rec.profile == "medium":
            store.append(rec)
            for prof in ("EE", "v2"):
                d = rec.to_dict()
                d["profile"] = prof
                store.append(JobRecord.from_dict(d))
    t = build_tables(store)
    assert all(v == 0.0 for v in t.bdr.values()) and all(v == 0.0 for v in t.bdde.values())
    assert set(format_csv(t).splitlines()[1:]) == {f"{r},{p},0.00,0.00,{'100.00' if r == 'Avg' else ''}"
                                                  for r in t.rows for p in t.profiles}


def test_missing_qp_names_the_cell(tmp_path):
    src = fixtures.fixture_path("table2").read_text().splitlines(keepends=True)
    keys = [(d["sequence"], d["profile"], d["qp"]) for d in map(json.loads, src)]
    drop = keys.index(("HHI-03", "v5", 32))
    p = tmp_path / "s.jsonl"
    p.write_text("".join(src[:drop] + src[drop + 1:]))
    with pytest.raises(IncompleteCurve) as exc:
        build_tables(ResultsStore(p))
    assert exc.value.sequence == "HHI-03" and exc.value.profile == "v5"


def test_failed_cell_is_incomplete(tmp_path):
    recs = ResultsStore(fixtures.fixture_path("table2")).records()
    store = ResultsStore(tmp_path / "s.jsonl")
    for r in recs:
        if r.key == ("HHI-01", "EE", 27):
            r.status, r.error = "failed", "Unconverged: x"
        store.append(r)
    with pytest.raises(IncompleteCurve, match="HHI-01"):
        build_tables(store)


def test_invariant_under_record_order(tmp_path):
    lines = fixtures.fixture_path("table2").read_text().splitlines(keepends=True)
    random.Random(3).shuffle(lines)
    p = tmp_path / "shuffled.jsonl"
    p.write_text("".join(lines))
    a = build_tables(open_store("fixture:table2"))
    b = build_tables(ResultsStore(p))
    assert format_text(a) == format_text(b) and a.bdr == b.bdr


def test_pareto_report_on_fixture(table3):
    rep = build_pareto_report(table3)
    assert rep.names("front") == {"medium", "v2568", "v258", "v58", "v5"}
    assert rep.names("literature") == {"medium", "EE"}
    lines = rep.plot_csv().splitlines()
    assert lines[0] == "name,bdr_pct,bdde_pct,on_front,front_id"
    assert len(lines) == 10 and "v5,18.26,-34.77,1,0" in lines


def test_pareto_report_random_vs_bruteforce():
    rng = random.Random(8)
    for _ in range(50):
        pts = [ParetoPoint(f"p{i}", rng.randint(-4, 4), rng.randint(-4, 4)) for i in range(rng.randint(1, 15))]
        rep = pareto_report(pts, ("p0",))
        assert rep.names("front") == dominated_bruteforce([(p.name, p.bdr, p.bdde) for p in pts])
