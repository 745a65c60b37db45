"""Experiment plan: sequences x profiles x QPs plus tool and measurement settings."""

from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import PlanInvalid
from ..profiles import OptionAssignment, ProfileRegistry

DEFAULT_QPS = (22, 27, 32, 37)
DEFAULT_ENCODER_ARGS = ("--qp", "{qp}", "-i", "{input}", "-b", "{bitstream}")
DEFAULT_DECODER_ARGS = ("-b", "{bitstream}")


@dataclass(frozen=True)
class SequenceSpec:
    name: str
    cls: str
    path: str
    frames: int = 0
    fps: float = 0.0


@dataclass(frozen=True)
class ToolSpec:
    command: tuple
    version: str = ""
    args: tuple = ()


@dataclass(frozen=True)
class MeasurementSpec:
    alpha: float = 0.99
    beta: float = 0.01
    n_min: int = 5
    n_max: int = 100
    retries: int = 2


def mock_encoder() -> ToolSpec:
    return ToolSpec((sys.executable, "-m", "ctp_bench.mockcodec", "encode"), "mock-1", DEFAULT_ENCODER_ARGS)


def mock_decoder() -> ToolSpec:
    return ToolSpec((sys.executable, "-m", "ctp_bench.mockcodec", "decode"), "mock-1", DEFAULT_DECODER_ARGS)


@dataclass
class ExperimentPlan:
    sequences: list
    profiles: list
    qps: list = field(default_factory=lambda: list(DEFAULT_QPS))
    reference_profile: str = "medium"
    encoder: ToolSpec = field(default_factory=mock_encoder)
    decoder: ToolSpec = field(default_factory=mock_decoder)
    measurement: MeasurementSpec = field(default_factory=MeasurementSpec)
    extra_options: list = field(default_factory=lambda: [OptionAssignment("PerceptQPA", 1)])
    workspace: str = "workspace"
    registry_files: list = field(default_factory=list)
    meter: Optional[str] = None
    jobs: Optional[int] = None
    seed: int = 0

    def cells(self):
        """Matrix cells in canonical (sequence, profile, qp) order."""
        return [(s.name, p, q) for s in self.sequences for p in self.profiles for q in self.qps]

    def sequence(self, name) -> SequenceSpec:
        for s in self.sequences:
            if s.name == name:
                return s
        raise KeyError(name)

    def validate(self, registry: ProfileRegistry) -> None:
        if not self.sequences:
            raise PlanInvalid("plan has no sequences")
        names = [s.name for s in self.sequences]
        if len(set(names)) != len(names):
            raise PlanInvalid("duplicate sequence names in plan")
        if not self.profiles:
            raise PlanInvalid("plan has no profiles")
        if len(set(self.profiles)) != len(self.profiles):
            raise PlanInvalid("duplicate profiles in plan")
        if self.reference_profile not in self.profiles:
            raise PlanInvalid(f"reference profile {self.reference_profile!r} is not in the plan's profiles")
        unknown = [p for p in self.profiles if p not in registry]
        if unknown:
            raise PlanInvalid(f"profiles not in registry: {', '.join(unknown)}")
        if not self.qps:
            raise PlanInvalid("plan has no QPs")
        if any(b <= a for a, b in zip(self.qps, self.qps[1:])):
            raise PlanInvalid(f"QPs must be strictly increasing, got {self.qps}")
        m = self.measurement
        if not (0 < m.alpha < 1 and 0 < m.beta < 1 and 2 <= m.n_min <= m.n_max):
            raise PlanInvalid(f"invalid measurement parameters {m}")
        if not self.encoder.command or not self.decoder.command:
            raise PlanInvalid("encoder and decoder commands must be set")

    def with_mock_tools(self) -> "ExperimentPlan":
        from dataclasses import replace

        return replace(self, encoder=mock_encoder(), decoder=mock_decoder(),
                       meter=self.meter if (self.meter or "").startswith("mock") else "mock:default")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["extra_options"] = {o.key: o.value for o in self.extra_options}
        return d


def _tool(data, default: ToolSpec, base_dir: Path) -> ToolSpec:
    if data is None:
        return default
    if isinstance(data, str):
        data = {"command": [data]}
    cmd = data.get("command")
    if isinstance(cmd, str):
        cmd = [cmd]
    if not cmd:
        raise PlanInvalid("tool entry needs a command")
    return ToolSpec(tuple(str(c) for c in cmd), str(data.get("version", "")),
                    tuple(data.get("args", default.args)))


def plan_from_dict(data: dict, base_dir: str | Path = ".") -> ExperimentPlan:
    base_dir = Path(base_dir).resolve()
    try:
        seqs = []
        for s in data["sequences"]:
            path = Path(s.get("path", s["name"]))
            if not path.is_absolute():
                path = base_dir / path
            seqs.append(SequenceSpec(str(s["name"]), str(s.get("class", "")), str(path),
                                     int(s.get("frames", 0)), float(s.get("fps", 0.0))))
        extra = data.get("extra_options", {"PerceptQPA": 1})
        extra_opts = [OptionAssignment(k, True if v is True or v == "flag" else v) for k, v in extra.items()]
        meas = MeasurementSpec(**data.get("measurement", {}))
        workspace = Path(data.get("workspace", os.environ.get("CTP_BENCH_WORKSPACE", "workspace")))
        if not workspace.is_absolute():
            workspace = base_dir / workspace
        registry_files = [str(p if Path(p).is_absolute() else base_dir / p) for p in data.get("registry", [])]
        return ExperimentPlan(
            sequences=seqs,
            profiles=list(data["profiles"]),
            qps=[int(q) for q in data.get("qps", DEFAULT_QPS)],
            reference_profile=data.get("reference", data.get("reference_profile", "medium")),
            encoder=_tool(data.get("encoder"), mock_encoder(), base_dir),
            decoder=_tool(data.get("decoder"), mock_decoder(), base_dir),
            measurement=meas,
            extra_options=extra_opts,
            workspace=str(workspace),
            registry_files=registry_files,
            meter=data.get("meter"),
            jobs=data.get("jobs"),
            seed=int(data.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PlanInvalid(f"malformed plan: {exc!r}") from None


def load_plan(path: str | Path) -> ExperimentPlan:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise PlanInvalid(f"cannot read plan {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise PlanInvalid(f"plan {path} is not valid JSON: {exc}") from None
    return plan_from_dict(data, path.parent)
