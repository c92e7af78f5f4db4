from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cablewatch.ingest import Frame
from cablewatch.synth import scenario_suite, write_scene

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE_RESULTS.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_RESULTS:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, outcome in _ACCEPTANCE_RESULTS:
            label = "PASS" if outcome == "passed" else "FAIL"
            terminalreporter.write_line(f"{label}  {name}")


@pytest.fixture(scope="session")
def scene_files(tmp_path_factory):
    """Render standard scenarios to disk on first use, once per session."""
    root = tmp_path_factory.mktemp("scenes")
    cache: dict[str, dict[str, Path]] = {}

    def get(name: str) -> dict[str, Path]:
        if name not in cache:
            cache[name] = write_scene(scenario_suite()[name], root / name.lower())
        return cache[name]

    return get


def make_frame(pixels: np.ndarray, index: int = 0, timestamp_ms: int = 0) -> Frame:
    return Frame(index=index, timestamp_ms=timestamp_ms, pixels=np.asarray(pixels, dtype=np.uint8))


@pytest.fixture
def frame_factory():
    return make_frame
