import json
import re
import subprocess
import sys

import pytest
from click.testing import CliRunner

from autoran.cli import main
from autoran.pipeline import fixture_path


@pytest.fixture
def runner():
    return CliRunner()


def _ws_args(tmp_path):
    return ["--workspace", str(tmp_path / "ws")]


def test_run_verb_golden(runner, tmp_path):
    result = runner.invoke(
        main,
        _ws_args(tmp_path)
        + [
            "run",
            "--requirement", str(fixture_path("requirements/anomaly_requirement.json")),
            "--config", str(fixture_path("configs/golden_anomaly.json")),
            "--run-id", "cli-run",
        ],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["metrics"]["one_shot"] is True


def test_run_verb_exit_code_backend_error(runner, tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text("[]")
    result = runner.invoke(
        main,
        _ws_args(tmp_path)
        + [
            "run",
            "--requirement", str(fixture_path("requirements/anomaly_requirement.json")),
            "--config", str(fixture_path("configs/golden_anomaly.json")),
            "--script", str(empty),
        ],
    )
    assert result.exit_code == 3


def test_run_verb_exit_code_validation(runner, tmp_path):
    result = runner.invoke(
        main,
        _ws_args(tmp_path)
        + [
            "run",
            "--requirement", str(fixture_path("requirements/per_ue_requirement.json")),
            "--config", str(fixture_path("configs/mismatch_per_ue.json")),
        ],
    )
    assert result.exit_code == 2


def test_elicit_interactive(runner, tmp_path):
    out = tmp_path / "req.json"
    answers = "\n".join(
        ["kpm", "prb_util, dl_throughput", "100 ms", "per_cell", "anomaly_flags", "javascript"]
    )
    result = runner.invoke(
        main,
        _ws_args(tmp_path) + ["elicit", "Detect anomalies in the radio cells", "--out", str(out)],
        input=answers + "\n",
    )
    assert result.exit_code == 0, result.output
    saved = json.loads(out.read_text())
    assert saved["task_kind"] == "anomaly_detection"
    assert saved["answers"]["temporal_resolution"] == "100 ms"


def test_deploy_score_and_report_verbs(runner, tmp_path):
    args = _ws_args(tmp_path)
    ok = runner.invoke(
        main,
        args
        + [
            "run",
            "--requirement", str(fixture_path("requirements/anomaly_requirement.json")),
            "--config", str(fixture_path("configs/golden_anomaly.json")),
            "--run-id", "d1",
        ],
    )
    assert ok.exit_code == 0, ok.output
    deployed = runner.invoke(main, args + ["deploy", "--run-id", "d1"])
    assert deployed.exit_code == 0, deployed.output
    assert json.loads(deployed.output)["latency"]["count"] == 100
    scored = runner.invoke(main, args + ["score", "--run-id", "d1"])
    assert scored.exit_code == 0
    report = runner.invoke(main, args + ["report"])
    assert report.exit_code == 0
    assert "d1" in report.output


def test_suite_and_ablate_verbs(runner, tmp_path):
    from autoran.suitegen import build_reference_suite

    suite_path = build_reference_suite(tmp_path / "suite", trials=3)
    config = {
        "backend": "mock",
        "script": str(fixture_path("scripts/golden_anomaly.json")),
        "capability": str(fixture_path("capabilities/cell_node.json")),
        "search_results": str(fixture_path("search/golden_results.json")),
        "url_map": str(fixture_path("search/url_map.json")),
        "docs_dir": str(fixture_path("docs")),
        "allowlist": str(fixture_path("search/allowlist.txt")),
        "dataset": {"kind": "synthetic_anomaly", "samples": 200, "seed": 7},
        "variants": 1,
        "suite": str(suite_path),
    }
    config_path = tmp_path / "suite_config.json"
    config_path.write_text(json.dumps(config))
    result = runner.invoke(
        main, _ws_args(tmp_path) + ["suite", "--config", str(config_path), "--label", "cli"]
    )
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["trials"] == 3

    ablate = runner.invoke(
        main,
        _ws_args(tmp_path)
        + ["ablate", "--config", str(config_path), "--set", "validation", "--trials", "2"],
    )
    assert ablate.exit_code == 0, ablate.output
    assert "one_shot_rate" in ablate.output


def test_sim_serve_with_node_skeleton_unavailable_is_not_required(runner, tmp_path):
    # `sim serve` is exercised end-to-end in test_protocol via the library;
    # here only the announce line format is checked with a fast python peer.
    import socket

    scenario = fixture_path("scenarios/echo_10s.json")
    proc = subprocess.Popen(
        [
            sys.executable, "-m", "autoran.cli", "sim", "serve",
            "--scenario", str(scenario), "--wait", "10",
        ],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    try:
        line = proc.stdout.readline().strip()
        match = re.match(r"LISTENING (\S+):(\d+)", line)
        assert match, line
        host, port = match.group(1), int(match.group(2))

        from autoran.ricsim import E2Message, encode, decode

        sock = socket.create_connection((host, port), timeout=10)
        sock.sendall(encode(E2Message(type="REGISTER", seq=1, ts_ms=0, payload={"xapp": "p"})))
        sock.sendall(
            encode(
                E2Message(
                    type="SUBSCRIPTION_REQ",
                    seq=2,
                    ts_ms=0,
                    payload={"metrics": ["prb_util"], "granularity": "per_cell", "period_ms": 100},
                )
            )
        )
        received = 0
        buffer = b""
        sock.settimeout(15)
        while True:
            try:
                chunk = sock.recv(65536)
            except OSError:
                break
            if not chunk:
                break
            buffer += chunk
            while b"\n" in buffer:
                raw, buffer = buffer.split(b"\n", 1)
                if raw.strip() and decode(raw).type == "RIC_INDICATION":
                    received += 1
        sock.close()
        out, err = proc.communicate(timeout=30)
        assert proc.returncode == 0, err
        assert received == 100
        summary = json.loads(out[out.index("{"):])
        assert summary["indications"] == 100
    finally:
        if proc.poll() is None:
            proc.kill()
