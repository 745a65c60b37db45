import json
import math
import os
import subprocess
import sys
from pathlib import Path

import pytest

from ctp_bench.cli import main

from conftest import DATA, GOLDEN, write_plan

UPDATE = os.environ.get("CTP_BENCH_UPDATE_GOLDEN") == "1"

TABLE3_POINTS = """name,bdr,bdde
medium,0,0
EE,22.91,-34.63
v2,14.67,-26.58
v5,18.26,-34.77
v6,20.38,-34.17
v8,18.91,-34.13
v58,14.39,-34.07
v258,7.16,-26.31
v2568,4.84,-25.84
"""


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _close(a, b):
    if isinstance(a, float) or isinstance(b, float):
        return isinstance(a, (int, float)) and isinstance(b, (int, float)) and math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(_close(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return isinstance(b, list) and len(a) == len(b) and all(map(_close, a, b))
    return a == b


def check_golden(name, text):
    path = GOLDEN / name
    doc = json.loads(text)
    if UPDATE or not path.exists():
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    assert _close(doc, json.loads(path.read_text())), f"{name} differs from golden"


def test_profiles_show(capsys):
    code, out, _ = run_cli(capsys, "profiles", "show", "v2568")
    assert code == 0 and "ALF=1" in out and "Affine=2" in out and "LoopFilterDisable=flag" in out


def test_profiles_json_golden(capsys):
    for action, name in (("list", None), ("show", "v258"), ("args", "EE")):
        argv = ["--format", "json", "profiles", action] + ([name] if name else [])
        code, out, _ = run_cli(capsys, *argv)
        assert code == 0
        check_golden(f"profiles_{action}.json", out)


def test_global_options_after_subcommand(capsys):
    code, out, _ = run_cli(capsys, "profiles", "args", "v8", "--format", "json")
    assert code == 0 and "--LMChroma=1" in json.loads(out)["args"]


def test_bd_identity_text(capsys):
    code, out, _ = run_cli(capsys, "bd", "--test", str(DATA / "curve_ref.csv"), "--ref", str(DATA / "curve_ref.csv"),
                           "--cost", "bitrate")
    assert code == 0 and out.strip() == "0.00 %"


def test_bd_json_golden(capsys):
    for cost in ("bitrate", "energy"):
        code, out, _ = run_cli(capsys, "--format", "json", "bd", "--test", str(DATA / "curve_test.csv"),
                               "--ref", str(DATA / "curve_ref.csv"), "--cost", cost)
        assert code == 0
        check_golden(f"bd_{cost}.json", out)


def test_pareto_cli(capsys, tmp_path):
    pts = tmp_path / "p.csv"
    pts.write_text(TABLE3_POINTS)
    plot = tmp_path / "plot.csv"
    code, out, _ = run_cli(capsys, "pareto", "--points", str(pts), "--plot", str(plot))
    assert code == 0
    assert [line.split(",")[0] for line in out.splitlines()[1:]] == ["medium", "v2568", "v258", "v58", "v5"]
    assert plot.read_text().splitlines()[0] == "name,bdr_pct,bdde_pct,on_front,front_id"
    code, out, _ = run_cli(capsys, "--format", "json", "pareto", "--points", str(pts))
    check_golden("pareto.json", out)


def test_report_fixture_check(capsys):
    code, out, _ = run_cli(capsys, "report", "--store", "fixture:table3", "--fixture-check", "--pareto")
    assert code == 0 and "fixture check: PASS" in out
    assert "Pareto front: medium, v2568, v258, v58, v5" in out
    code, out, _ = run_cli(capsys, "--format", "json", "report", "--store", "fixture:table3", "--pareto")
    check_golden("report_table3.json", out)


def test_report_fixture_check_mismatch_fails(capsys):
    code, _, err = run_cli(capsys, "report", "--store", "fixture:table2", "--fixture-check", "table3")
    assert code == 3 and err.startswith("error[3]:")


def test_measure_unconverged_exit_5(capsys):
    code, out, err = run_cli(capsys, "measure", "--meter", "mock:high_noise.json", "--beta", "0.01", "--max-n", "5")
    assert code == 5
    assert len([line for line in out.splitlines() if line.strip()[:1].isdigit()]) == 5
    assert "verdict: unconverged" in out and err.startswith("error[5]:")


def test_measure_json_golden(capsys):
    code, out, _ = run_cli(capsys, "--format", "json", "--seed", "1", "--meter", "mock:default", "measure")
    assert code == 0 and json.loads(out)["verdict"] == "converged"
    check_golden("measure_mock.json", out.replace(json.dumps(sys.executable)[1:-1], "<python>"))


def test_measure_seed_reproducible(capsys):
    outs = [run_cli(capsys, "--format", "json", "--seed", "5", "--meter", "mock:high_noise", "measure",
                    "--max-n", "20")[1] for _ in range(2)]
    assert outs[0] == outs[1]


def test_meter_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("CTP_BENCH_METER", "mock:quiet")
    code, out, _ = run_cli(capsys, "--format", "json", "measure")
    assert code == 0 and json.loads(out)["n"] == 5


def test_usage_and_validation_codes(capsys):
    code, _, err = run_cli(capsys, "nosuch")
    assert code == 2 and "error[2]:" in err
    code, _, err = run_cli(capsys, "bd", "--test", "x.csv")
    assert code == 2
    code, _, err = run_cli(capsys, "profiles", "show", "nope")
    assert code == 3 and err.startswith("error[3]: UnknownProfile")
    code, _, err = run_cli(capsys, "bd", "--test", "missing.csv", "--ref", "missing.csv")
    assert code == 3
    code, _, err = run_cli(capsys, "--meter", "rapl:/nonexistent", "measure", "--decoder", "true",
                           "--bitstream", "x")
    assert code == 4 and err.startswith("error[4]: MeterUnavailable")


def test_run_json_and_resume_guard(capsys, tmp_path):
    plan = write_plan(tmp_path, profiles=("medium", "EE"), sequences=("S1",))
    code, out, _ = run_cli(capsys, "--format", "json", "run", "--plan", str(plan), "--mock")
    assert code == 0
    doc = json.loads(out.replace(str(tmp_path), "<tmp>"))
    check_golden("run_summary.json", json.dumps(doc))
    code, _, err = run_cli(capsys, "run", "--plan", str(plan), "--mock")
    assert code == 3 and "--resume" in err
    code, out, _ = run_cli(capsys, "--format", "json", "run", "--plan", str(plan), "--mock", "--resume")
    assert code == 0 and json.loads(out)["skipped"] == 8


def test_run_with_failures_exits_4(capsys, tmp_path):
    reg = tmp_path / "extra.ctp"
    reg.write_text("broken = EE & {MockFailQP = 27}\n")
    plan = write_plan(tmp_path, profiles=("medium", "broken"), sequences=("S1",))
    code, out, err = run_cli(capsys, "--registry", str(reg), "run", "--plan", str(plan), "--mock")
    assert code == 4 and "failed S1/broken/qp27" in out and err.startswith("error[4]:")


def test_console_script_entry():
    out = subprocess.run([sys.executable, "-m", "ctp_bench.cli", "profiles", "list"], capture_output=True, text=True)
    assert out.returncode == 0 and "v2568" in out.stdout
