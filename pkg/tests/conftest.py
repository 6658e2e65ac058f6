from __future__ import annotations

import json
from pathlib import Path

import pytest

from autoran.gateway import Gateway, MockScriptBackend
from autoran.pipeline import RunConfig, fixture_path
from autoran.requirements import StructuredRequirement


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and report.when == "call":
        num, name = marker.args
        status = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE] criterion {num} ({name}): {status}")


@pytest.fixture
def workspace(tmp_path) -> Path:
    ws = tmp_path / "workspace"
    ws.mkdir()
    return ws


@pytest.fixture
def anomaly_requirement() -> StructuredRequirement:
    return StructuredRequirement.load(fixture_path("requirements/anomaly_requirement.json"))


@pytest.fixture
def golden_config(workspace) -> RunConfig:
    return RunConfig.from_file(
        fixture_path("configs/golden_anomaly.json"), workspace=str(workspace)
    )


def scripted_gateway(*entries: dict) -> Gateway:
    return Gateway(MockScriptBackend(list(entries)))


def load_fixture_json(relative: str):
    return json.loads(fixture_path(relative).read_text())
