"""``ctp-bench`` command line.

Exit codes: 0 success, 2 usage error, 3 validation error, 4 execution
failure, 5 unconverged measurement. Errors go to stderr as one line
prefixed ``error[<code>]:``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import signal
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import CtpBenchError, Unconverged, ValidationError

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_EXECUTION, EXIT_UNCONVERGED = 0, 2, 3, 4, 5

# test hook: SIGKILL the process after this many measured cells
KILL_AFTER_ENV = "CTP_BENCH_KILL_AFTER"
LOCK_ENV = "CTP_BENCH_LOCK"


def measurement_lock():
    """Lock shared by every ctp-bench process on this machine; the meter is machine-wide."""
    import tempfile

    from .energy import MeasurementLock

    path = os.environ.get(LOCK_ENV) or os.path.join(tempfile.gettempdir(), "ctp-bench-measure.lock")
    return MeasurementLock(path)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class GlobalConfig:
    registry_files: list = field(default_factory=list)
    meter: Optional[str] = None
    verbosity: int = 0
    fmt: str = "text"
    seed: Optional[int] = None

    @classmethod
    def from_args(cls, args) -> "GlobalConfig":
        meter = getattr(args, "meter", None) or os.environ.get("CTP_BENCH_METER") or None
        return cls(list(getattr(args, "registry", None) or []), meter, getattr(args, "verbose", 0) or 0,
                   getattr(args, "format", None) or "text", getattr(args, "seed", None))

    def registry(self):
        from .profiles import load_registry_files

        return load_registry_files(self.registry_files)


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") or not text else text + "\n")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _opt_value(v):
    return "flag" if v is True else v


# -- profiles --------------------------------------------------------------------

def cmd_profiles(args, cfg: GlobalConfig) -> int:
    from .profiles import serialize_args

    reg = cfg.registry()
    if args.action == "list":
        items = [{"name": p.name, "base": p.base, "parents": list(p.parents), "description": p.description}
                 for p in reg]
        if cfg.fmt == "json":
            _emit(_json(items))
        elif cfg.fmt == "csv":
            _emit("name,base,parents\n" + "".join(f"{i['name']},{i['base']},{'&'.join(i['parents'])}\n"
                                                 for i in items))
        else:
            width = max(len(i["name"]) for i in items)
            for i in items:
                parents = " & ".join(i["parents"]) or "-"
                _emit(f"{i['name']:<{width}}  base={i['base']:<7} parents={parents}  {i['description']}")
        return EXIT_OK
    if not args.name:
        raise UsageError(f"profiles {args.action}: profile name required")
    resolved = reg.resolve(args.name)
    base = reg.base_of(args.name)
    if args.action == "show":
        if cfg.fmt == "json":
            _emit(_json({"name": args.name, "base": base, "applied": reg.linearize(args.name),
                         "options": {k: _opt_value(v) for k, v in resolved.items()}}))
        elif cfg.fmt == "csv":
            _emit("key,value\n" + "".join(f"{k},{_opt_value(v)}\n" for k, v in resolved.items()))
        else:
            _emit(f"# {args.name}: preset {base}, overlays {' -> '.join(reg.linearize(args.name))}")
            for k, v in resolved.items():
                _emit(f"{k}={_opt_value(v)}")
        return EXIT_OK
    argv = serialize_args(resolved, base)
    _emit(_json({"name": args.name, "args": argv}) if cfg.fmt == "json" else shlex.join(argv))
    return EXIT_OK


# -- measure ---------------------------------------------------------------------

def cmd_measure(args, cfg: GlobalConfig) -> int:
    from .energy import MockMeter, RaplMeter, load_scenario, measure_until_confident
    from .orchestrator.plan import mock_decoder

    spec = cfg.meter or "rapl"
    kind, _, arg = spec.partition(":")
    if kind == "mock":
        meter = MockMeter(load_scenario(arg or "default"), seed=cfg.seed)
    elif kind == "rapl":
        meter = RaplMeter(arg) if arg else RaplMeter()
    else:
        raise ValidationError(f"unknown meter {spec!r} (expected rapl[:path] or mock[:scenario])")
    if args.decoder:
        decoder = shlex.split(args.decoder)
    elif kind == "mock":
        decoder = list(mock_decoder().command)
    else:
        raise UsageError("measure: --decoder is required with a real meter")
    if args.bitstream:
        cmd = decoder + [a.format(bitstream=args.bitstream) for a in shlex.split(args.decoder_args)]
    elif kind == "mock":
        cmd = decoder
    else:
        raise UsageError("measure: --bitstream is required with a real meter")

    series = measure_until_confident(cmd, meter, args.alpha, args.beta, args.min_n, args.max_n,
                                     retries=args.retries, raise_unconverged=False, lock=measurement_lock())
    verdict = "converged" if series.converged else "unconverged"
    if cfg.fmt == "json":
        doc = series.to_dict()
        doc["verdict"] = verdict
        doc["meter"] = meter.describe()
        doc["command"] = cmd
        _emit(_json(doc))
    else:
        _emit(f"{'i':>3} {'e_total_j':>14} {'e_idle_j':>14} {'e_dec_j':>14} {'decode_s':>10}")
        for i, s in enumerate(series.samples, 1):
            _emit(f"{i:>3} {s.e_total:>14.6f} {s.e_idle:>14.6f} {s.e_dec:>14.6f} {s.duration:>10.4f}")
        if series.discarded:
            _emit(f"discarded {series.discarded} non-positive samples")
        if series.n >= 2:
            _emit(f"verdict: {verdict} (n={series.n}, relative half-width {series.relative_half_width:.5f}, "
                  f"beta {series.beta})")
            _emit(f"E_dec = {series.mean:.6f} J +/- {series.half_width:.6f} J ({series.alpha:.0%} t-interval)")
        else:
            _emit(f"verdict: {verdict} (n={series.n})")
    if not series.converged:
        raise Unconverged(series)
    return EXIT_OK


# -- run -------------------------------------------------------------------------

def cmd_run(args, cfg: GlobalConfig) -> int:
    from dataclasses import replace

    from .orchestrator import PlanRunner, load_plan
    from .orchestrator.runner import STORE_NAME
    from .profiles import load_registry_files

    plan = load_plan(args.plan)
    if args.mock:
        plan = plan.with_mock_tools()
    if cfg.meter:
        plan = replace(plan, meter=cfg.meter)
    if cfg.seed is not None:
        plan = replace(plan, seed=cfg.seed)
    if args.workspace:
        plan = replace(plan, workspace=str(Path(args.workspace).resolve()))
    store_path = Path(plan.workspace) / STORE_NAME
    if store_path.exists() and store_path.stat().st_size and not args.resume:
        raise ValidationError(f"results store {store_path} exists; pass --resume to continue it")
    registry = load_registry_files(list(plan.registry_files) + cfg.registry_files)

    hook = None
    kill_after = int(os.environ.get(KILL_AFTER_ENV, "0") or 0)
    if kill_after > 0:
        done = []

        def hook(rec):
            done.append(rec.key)
            if len(done) >= kill_after:
                os.kill(os.getpid(), signal.SIGKILL)

    runner = PlanRunner(plan, registry, jobs=args.jobs, on_measured=hook, lock=measurement_lock())
    summary = runner.run()
    doc = summary.to_dict()
    if cfg.fmt == "json":
        _emit(_json(doc))
    else:
        _emit(f"store: {summary.store}")
        _emit(f"cells: {summary.cells}  skipped (already measured): {summary.skipped}  "
              f"executed: {len(summary.executed)}  measured: {len(summary.measured)}  failed: {len(summary.failed)}")
        for key in summary.failed:
            rec = runner.store.get(key)
            _emit(f"failed {key[0]}/{key[1]}/qp{key[2]}: {rec.error if rec else '?'}")
    if summary.failed:
        errors = [runner.store.get(k).error or "" for k in summary.failed]
        code = EXIT_UNCONVERGED if all(e.startswith("Unconverged") for e in errors) else EXIT_EXECUTION
        print(f"error[{code}]: {len(summary.failed)} of {summary.cells} cells failed", file=sys.stderr)
        return code
    return EXIT_OK


# -- bd / pareto -----------------------------------------------------------------

def cmd_bd(args, cfg: GlobalConfig) -> int:
    from .metrics import bd_metric, read_curve_csv
    from .report import fmt2

    test = read_curve_csv(_readable(args.test), ("test", ""))
    ref = read_curve_csv(_readable(args.ref), ("reference", ""))
    res = bd_metric(test, ref, args.cost, args.method, args.min_points)
    if cfg.fmt == "json":
        _emit(_json({"value_pct": res.value, "cost": res.cost_kind, "method": args.method,
                     "overlap": list(res.overlap)}))
    elif cfg.fmt == "csv":
        _emit(f"cost,method,value_pct\n{res.cost_kind},{args.method},{fmt2(res.value)}\n")
    else:
        _emit(f"{fmt2(res.value)} %")
    return EXIT_OK


def _readable(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"file not found: {p}")
    return p


def cmd_pareto(args, cfg: GlobalConfig) -> int:
    from .metrics import read_points_csv
    from .report import pareto_report

    points = read_points_csv(_readable(args.points))
    literature = tuple(n.strip() for n in args.literature.split(",") if n.strip())
    rep = pareto_report(points, literature)
    if args.plot:
        Path(args.plot).write_text(rep.plot_csv(), encoding="utf-8")
    _emit(_json(rep.to_dict()) if cfg.fmt == "json" else rep.front_csv())
    return EXIT_OK


# -- report ----------------------------------------------------------------------

def cmd_report(args, cfg: GlobalConfig) -> int:
    from .report import ReportSpec, build_pareto_report, build_tables, fixture_check, open_store, render_report

    spec = ReportSpec(store=args.store, reference=args.reference, method=args.method,
                      pareto=args.pareto, fixture_check=args.fixture_check)
    table = build_tables(open_store(args.store), spec)
    pareto = build_pareto_report(table) if args.pareto or args.plot else None
    check = fixture_check(table, args.fixture_check) if args.fixture_check else None
    if args.plot:
        Path(args.plot).write_text(pareto.plot_csv(), encoding="utf-8")
    _emit(render_report(table, cfg.fmt, pareto if args.pareto else None, check))
    if check is not None and not all(c.ok for c in check):
        bad = [f"{c.profile}/{c.metric}" for c in check if not c.ok]
        raise ValidationError(f"fixture check failed for {', '.join(bad)}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = parser.add_argument_group("global options")
    g.add_argument("--format", choices=("text", "json", "csv"), default=d(None), help="output format")
    g.add_argument("--seed", type=int, default=d(None), help="seed for mock-backed runs")
    g.add_argument("--registry", action="append", default=d(None), metavar="FILE",
                   help="extra profile definition file (repeatable)")
    g.add_argument("--meter", default=d(None), help="rapl[:path] or mock[:scenario] (env CTP_BENCH_METER)")
    g.add_argument("-v", "--verbose", action="count", default=d(0))


def build_parser() -> argparse.ArgumentParser:
    from .energy.measure import DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_N_MAX, DEFAULT_N_MIN

    p = _Parser(prog="ctp-bench", description="Decoder-energy benchmarking for VVC coding-tool profiles.")
    _global_options(p, suppress=False)
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    def command(name, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        _global_options(sp, suppress=True)
        return sp

    sp = command("profiles", "inspect the coding-tool profile registry")
    sp.add_argument("action", choices=("list", "show", "args"))
    sp.add_argument("name", nargs="?")
    sp.set_defaults(func=cmd_profiles)

    sp = command("measure", "measure decoding energy of one bitstream until the t-interval is tight")
    sp.add_argument("--decoder", help="decoder command (default: mock decoder with a mock meter)")
    sp.add_argument("--bitstream")
    sp.add_argument("--decoder-args", default="-b {bitstream}", help="argument template (default: %(default)s)")
    sp.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    sp.add_argument("--beta", type=float, default=DEFAULT_BETA)
    sp.add_argument("--min-n", type=int, default=DEFAULT_N_MIN)
    sp.add_argument("--max-n", type=int, default=DEFAULT_N_MAX)
    sp.add_argument("--retries", type=int, default=2)
    sp.set_defaults(func=cmd_measure)

    sp = command("run", "execute an experiment plan (JSON)")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--resume", action="store_true", help="continue an existing results store")
    sp.add_argument("--jobs", type=int, help="parallel encodes (default: cores - 2)")
    sp.add_argument("--mock", action="store_true", help="use the bundled mock encoder/decoder/meter")
    sp.add_argument("--workspace", default=None, help="override the plan workspace")
    sp.set_defaults(func=cmd_run)

    sp = command("bd", "Bjontegaard delta between two curve CSV files")
    sp.add_argument("--test", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--cost", choices=("bitrate", "energy"), default="bitrate")
    sp.add_argument("--method", choices=("pchip", "cubic"), default="pchip")
    sp.add_argument("--min-points", type=int, default=4)
    sp.set_defaults(func=cmd_bd)

    sp = command("pareto", "Pareto front over (BDR, BDDE) points")
    sp.add_argument("--points", required=True, help="CSV with name,bdr,bdde columns")
    sp.add_argument("--literature", default="medium,EE", help="names forming the literature front")
    sp.add_argument("--plot", help="write plot data CSV here")
    sp.set_defaults(func=cmd_pareto)

    sp = command("report", "BD tables and Pareto listing from a results store")
    sp.add_argument("--store", required=True, help="results JSONL, or fixture:table3 / fixture:table2")
    sp.add_argument("--reference", default="medium")
    sp.add_argument("--method", choices=("pchip", "cubic"), default="pchip")
    sp.add_argument("--pareto", action="store_true")
    sp.add_argument("--plot", help="write plot data CSV here")
    sp.add_argument("--fixture-check", nargs="?", const="table3", choices=("table3", "table2"),
                    help="compare the Avg row with a published table (default table3)")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(f"error[{EXIT_USAGE}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    cfg = GlobalConfig.from_args(args)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(cfg.verbosity, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error[{EXIT_USAGE}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CtpBenchError as exc:
        print(f"error[{exc.exit_code}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        print("error[4]: interrupted", file=sys.stderr)
        return EXIT_EXECUTION


if __name__ == "__main__":
    sys.exit(main())
