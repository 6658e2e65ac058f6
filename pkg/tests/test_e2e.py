"""Whole-stack integration: the generated xApp process drives the socket sim."""

import subprocess
import threading

from autoran.pipeline import RunConfig, fixture_path, run_pipeline
from autoran.ricsim import Scenario, score_scenario
from autoran.ricsim.server import SocketSimServer

REQUIREMENT = fixture_path("requirements/anomaly_requirement.json")


def test_generated_xapp_runs_online_and_detects_windows(workspace):
    cfg = RunConfig.from_file(
        fixture_path("configs/golden_anomaly.json"), workspace=str(workspace), run_id="e2e"
    )
    cfg.dataset = {"kind": "synthetic_anomaly", "samples": 400, "seed": 7}
    result = run_pipeline(REQUIREMENT, cfg)
    xapp_js = result.package_path / "xapp.js"

    scenario = Scenario.load(fixture_path("scenarios/golden_anomaly.json"))
    server = SocketSimServer(scenario, wait_s=30.0)
    host, port = server.start()
    box = {}

    def serve():
        box["result"] = server.run()

    thread = threading.Thread(target=serve, daemon=True)
    thread.start()
    proc = subprocess.Popen(
        ["node", str(xapp_js), "--endpoint", f"{host}:{port}"],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    try:
        thread.join(timeout=60)
        assert not thread.is_alive(), "scenario did not finish"
        _, stderr = proc.communicate(timeout=30)
        assert proc.returncode == 0, stderr
    finally:
        if proc.poll() is None:
            proc.kill()

    scenario_result = box["result"]
    assert scenario_result.indications == 100
    scores = score_scenario(scenario_result, scenario)
    # both injected windows detected, nothing flagged outside them
    assert scores["eval"]["precision"] == 1.0
    assert scores["eval"]["recall"] == 1.0
    assert scores["near_rt_compliant"] is True
