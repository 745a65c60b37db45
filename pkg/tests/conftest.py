import json
import sys
from pathlib import Path

import pytest

from ctp_bench.orchestrator import load_plan
from ctp_bench.profiles import ProfileRegistry

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def write_plan(directory: Path, profiles=("medium", "EE", "v2568"), sequences=("S1", "S2"),
               extra=None, **kw) -> Path:
    doc = {
        "sequences": [{"name": s, "class": "B" if i % 2 == 0 else "C"} for i, s in enumerate(sequences)],
        "profiles": list(profiles),
        "qps": [22, 27, 32, 37],
        "meter": "mock:default",
        "seed": 7,
        "workspace": "ws",
    }
    if extra is not None:
        doc["extra_options"] = extra
    doc.update(kw)
    path = directory / "plan.json"
    path.write_text(json.dumps(doc, indent=1))
    return path


@pytest.fixture
def registry():
    return ProfileRegistry.builtin()


@pytest.fixture
def mock_plan(tmp_path):
    return load_plan(write_plan(tmp_path))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
