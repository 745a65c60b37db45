"""Exit criteria, one test per numbered criterion.

Each test records a PASS/FAIL line (printed in pytest's terminal summary and
to stdout) with the measured quantity, the tolerance and the runtime.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import json
import math
import os
import signal
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from ctp_bench.energy import RaplMeter
from ctp_bench.energy.simulate import gaussian_series, simulate_stopping_rule
from ctp_bench.metrics import ParetoPoint, bd_metric
from ctp_bench.orchestrator import ResultsStore
from ctp_bench.profiles import ProfileRegistry, canonical_key
from ctp_bench.report import build_tables, open_store, pareto_report

from conftest import write_plan
from oracles import bd_dense, make_curve, random_curve_pair
from test_profiles import EE_TABLE1

pytestmark = pytest.mark.acceptance

RESULTS = []


def record(n, title, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed < budget
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {title} | {detail} | {elapsed:.2f}s (limit {budget:g}s)"
    RESULTS.append(line)
    print(line)
    assert ok, line


# 1 ---------------------------------------------------------------------------

TABLE3_AVG = {"EE": (22.91, -34.63), "v2": (14.67, -26.58), "v5": (18.26, -34.77), "v6": (20.38, -34.17),
              "v8": (18.91, -34.13), "v58": (14.39, -34.07), "v258": (7.16, -26.31), "v2568": (4.84, -25.84),
              "medium": (0.0, 0.0)}


def test_criterion_1_pareto_reproduction():
    t0 = time.perf_counter()
    rep = pareto_report([ParetoPoint(n, *v) for n, v in TABLE3_AVG.items()], ("medium", "EE"))
    front, lit = rep.names("front"), rep.names("literature")
    ok = front == {"medium", "v2568", "v258", "v58", "v5"} and lit == {"medium", "EE"}
    record(1, "Pareto reproduction", ok, f"front={sorted(front)} literature={sorted(lit)}",
           time.perf_counter() - t0, 1)


# 2 ---------------------------------------------------------------------------

def test_criterion_2_bd_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(1000):
        (q1, c1), (q2, c2) = random_curve_pair(rng)
        got = bd_metric(make_curve(q1, c1), make_curve(q2, c2)).value
        worst = max(worst, abs(got - bd_dense(q1, c1, q2, c2, n=100_000)))
    record(2, "BD closed form vs dense trapezoid", worst <= 1e-6, f"max |diff| = {worst:.2e} (tol 1e-6)",
           time.perf_counter() - t0, 30)


# 3 ---------------------------------------------------------------------------

def test_criterion_3_bd_analytic_cases():
    t0 = time.perf_counter()
    q = np.array([33.1, 35.4, 37.9, 40.2, 42.0])
    base = make_curve(q, np.array([820.0, 1500.0, 2900.0, 5200.0, 8100.0]))
    ident = [float(bd_metric(base, base, kind).value) for kind in ("bitrate", "energy")]
    errs = [abs(bd_metric(base.scaled(k, kind), base, kind).value - (k - 1) * 100)
            for k in (0.5, 1.25, 2.0) for kind in ("bitrate", "energy")]
    ok = all(v == 0.0 for v in ident) and max(errs) <= 1e-9
    record(3, "BD analytic cases", ok, f"identity={ident} max scaling err={max(errs):.1e} (tol 1e-9)",
           time.perf_counter() - t0, 1)


# 4 ---------------------------------------------------------------------------

def test_criterion_4_table_regression():
    t0 = time.perf_counter()
    table = build_tables(open_store("fixture:table3"))
    devs = {p: max(abs(table.bdr[("Avg", p)] - r), abs(table.bdde[("Avg", p)] - e))
            for p, (r, e) in TABLE3_AVG.items()}
    ref_zero = all(table.bdr[(row, "medium")] == 0.0 and table.bdde[(row, "medium")] == 0.0 for row in table.rows)
    ok = max(devs.values()) <= 0.01 and ref_zero and set(devs) <= set(table.profiles)
    record(4, "Table 3 Avg row from fixture store", ok,
           f"max deviation {max(devs.values()):.2e} pp over {len(devs)} profiles, medium row zero={ref_zero}",
           time.perf_counter() - t0, 5)


# 5 ---------------------------------------------------------------------------

def test_criterion_5_stopping_rule_soundness():
    t0 = time.perf_counter()
    parts, ok = [], True
    for i, sigma in enumerate((0.002, 0.005, 0.01)):
        sim = simulate_stopping_rule(gaussian_series(sigma, 10_000, 100, seed=100 + i), 0.99, 0.01, 5, 100, 1.0)
        conv = sim.converged
        max_rel = float(np.max(sim.relative_half_width[conv])) if conv.any() else math.nan
        frac = float(np.mean(sim.within(0.01)[conv]))
        se = math.sqrt(0.99 * 0.01 / conv.sum())
        ok &= bool(max_rel <= 0.01) and frac >= 0.99 - 3 * se
        parts.append(f"sigma={sigma}: converged={conv.mean():.4f} max rel hw={max_rel:.5f} "
                     f"within1%={frac:.4f} (>= {0.99 - 3 * se:.4f})")
    record(5, "stopping rule Monte-Carlo", ok, "; ".join(parts), time.perf_counter() - t0, 60)


# 6 ---------------------------------------------------------------------------

def test_criterion_6_profile_fidelity():
    t0 = time.perf_counter()
    reg = ProfileRegistry.builtin()
    checks = {"EE == Table 1": reg.resolve("EE") == EE_TABLE1}
    for name, parents in (("v58", ("v5", "v8")), ("v258", ("v2", "v5", "v8")), ("v2568", ("v2", "v5", "v6", "v8"))):
        expected = dict(EE_TABLE1)
        for p in parents:
            for opt in reg[p].overlays:
                key = canonical_key(opt.key)
                # a bare flag over an existing numeric value is written as =1
                expected[key] = 1 if opt.value is True and key in EE_TABLE1 else opt.value
        checks[f"{name} == ordered overlay"] = reg.resolve(name) == expected
    checks["LMChroma EE=0"] = reg.resolve("EE")["LMChroma"] == 0
    checks["LMChroma v8=1"] = reg.resolve("v8")["LMChroma"] == 1
    bad = [k for k, v in checks.items() if not v]
    record(6, "profile fidelity", not bad, f"{len(checks) - len(bad)}/{len(checks)} checks exact",
           time.perf_counter() - t0, 1)


# 7 ---------------------------------------------------------------------------

def _cli(args, env=None, cwd=None):
    return subprocess.run([sys.executable, "-m", "ctp_bench.cli", *args], capture_output=True, text=True,
                          env={**os.environ, **(env or {})}, cwd=cwd)


def _statuses(store_path):
    return {r.key: r.status for r in ResultsStore(store_path).records()}


def test_criterion_7_hermetic_end_to_end(tmp_path):
    t0 = time.perf_counter()
    notes, ok = [], True

    run1 = tmp_path / "run1"
    run1.mkdir()
    plan1 = write_plan(run1)
    store1 = run1 / "ws" / "results.jsonl"
    # hard kill after 9 measured cells
    p = _cli(["run", "--plan", str(plan1), "--mock"], env={"CTP_BENCH_KILL_AFTER": "9"})
    st = _statuses(store1)
    interrupted = sorted(k for k, s in st.items() if s != "measured")
    ok &= p.returncode == -signal.SIGKILL and len(st) == 24 and len(interrupted) == 15
    notes.append(f"killed rc={p.returncode} measured={24 - len(interrupted)}")
    p = _cli(["--format", "json", "run", "--plan", str(plan1), "--mock", "--resume"])
    summary = json.loads(p.stdout)
    executed = sorted(tuple(k) for k in summary["executed"])
    ok &= p.returncode == 0 and executed == interrupted and summary["encoded"] == []
    ok &= all(s == "measured" for s in _statuses(store1).values()) and len(_statuses(store1)) == 24
    notes.append(f"resume re-executed {len(executed)} == interrupted {len(interrupted)}")

    # kill at an arbitrary moment, possibly mid-encode
    run3 = tmp_path / "run3"
    run3.mkdir()
    plan3 = write_plan(run3)
    proc = subprocess.Popen([sys.executable, "-m", "ctp_bench.cli", "run", "--plan", str(plan3), "--mock"],
                            stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    time.sleep(0.8)
    proc.kill()
    proc.wait()
    store3 = run3 / "ws" / "results.jsonl"
    before = _statuses(store3) if store3.exists() else {}
    todo = sorted(k for k in write_plan_cells() if before.get(k) != "measured")
    p = _cli(["--format", "json", "run", "--plan", str(plan3), "--mock", "--resume"])
    executed3 = sorted(tuple(k) for k in json.loads(p.stdout)["executed"]) if p.returncode == 0 else None
    ok &= executed3 == todo
    notes.append(f"timed kill: {24 - len(todo)} measured before, {len(todo)} re-executed")

    run2 = tmp_path / "run2"
    run2.mkdir()
    plan2 = write_plan(run2)
    p = _cli(["run", "--plan", str(plan2), "--mock"])
    ok &= p.returncode == 0
    reports = [_cli(["report", "--store", str(d / "ws" / "results.jsonl"), "--pareto"]).stdout
               for d in (run1, run2, run3)]
    identical = reports[0] == reports[1] == reports[2] and reports[0].startswith("BD values")
    ok &= identical
    notes.append(f"reports byte-identical={identical}")
    record(7, "hermetic end-to-end with kill/resume", ok, "; ".join(notes), time.perf_counter() - t0, 120)


def write_plan_cells():
    return [(s, p, q) for s in ("S1", "S2") for p in ("medium", "EE", "v2568") for q in (22, 27, 32, 37)]


# 8 ---------------------------------------------------------------------------

def test_criterion_8_rapl_wraparound(tmp_path):
    t0 = time.perf_counter()
    range_uj = 262_144_000_000
    traces = {
        0: [5_000_000, 105_000_000, 250_500_000],
        1: [262_143_900_000, 400_000, 1_400_000],
        2: [200_000_000_000, 100_000_000_000, 262_000_000_000, 10_000_000, 50_000_000],
    }
    parts, ok = [], True
    for wraps, trace in traces.items():
        d = tmp_path / f"w{wraps}"
        d.mkdir()
        (d / "max_energy_range_uj").write_text(str(range_uj))
        (d / "energy_uj").write_text(str(trace[0]))
        meter = RaplMeter(d)
        for raw in trace[1:]:
            (d / "energy_uj").write_text(str(raw))
            got = meter.read()
        # closed form: unwrapped counter difference
        expected = (trace[-1] + wraps * range_uj - trace[0]) / 1e6
        ok &= abs(got - expected) <= meter.resolution and meter.wraps == wraps
        parts.append(f"{wraps} wraps: {got:.6f} J vs {expected:.6f} J")
    record(8, "RAPL wraparound", ok, "; ".join(parts), time.perf_counter() - t0, 1)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
