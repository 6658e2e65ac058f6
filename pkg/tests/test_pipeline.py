import json

import pytest

from autoran import pipeline as pl
from autoran.errors import GranularityMismatch, PipelineError
from autoran.pipeline import RunConfig, fixture_path, run_pipeline, run_suite
from autoran.suitegen import build_reference_suite


def _golden_cfg(workspace, run_id="run", samples=300, **overrides):
    cfg = RunConfig.from_file(
        fixture_path("configs/golden_anomaly.json"), workspace=str(workspace), run_id=run_id
    )
    cfg.dataset = {"kind": "synthetic_anomaly", "samples": samples, "seed": 7}
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


REQUIREMENT = fixture_path("requirements/anomaly_requirement.json")


def test_run_pipeline_golden(workspace):
    result = run_pipeline(REQUIREMENT, _golden_cfg(workspace))
    m = result.metrics
    assert m.one_shot and m.iterations_to_success == 1 and m.bugs_total == 0
    assert m.eval.precision >= 0.95
    assert m.package_digest
    assert m.synthesis_ms >= max(
        v for k, v in m.stage_ms.items() if k not in ("requirement",)
    )
    run_dir = result.run_dir
    for name in ("requirement.json", "keywords.json", "retrieval.json", "metrics.json"):
        assert (run_dir / name).exists()
    assert (run_dir / "variants" / "v1" / "trace.json").exists()
    assert (run_dir / "variants" / "v1" / "program.js").exists()
    assert (run_dir / "dist" / "anomaly-detection-xapp" / "xapp.js").exists()


def test_run_pipeline_from_raw_text_with_answers(workspace):
    cfg = _golden_cfg(workspace)
    answers = {
        "input_modality": "kpm",
        "metrics": "prb_util, dl_throughput",
        "temporal_resolution": "100 ms",
        "granularity": "per_cell",
        "output_format": "anomaly_flags",
        "target_language": "javascript",
    }
    result = run_pipeline(
        "Detect anomalies in O-RAN KPM telemetry per cell", cfg, answers
    )
    assert result.metrics.one_shot


def test_failed_run_leaves_no_dist(workspace):
    cfg = _golden_cfg(workspace, run_id="fails")
    cfg.script = fixture_path("scripts/mismatch_per_ue.json")
    with pytest.raises(PipelineError) as err:
        run_pipeline(fixture_path("requirements/per_ue_requirement.json"), cfg)
    assert err.value.stage == "synthesis"
    assert isinstance(err.value.cause, GranularityMismatch)
    run_dir = workspace / "runs" / "fails"
    assert not (run_dir / "dist").exists()
    # earlier stage artifacts remain for diagnosis
    assert (run_dir / "requirement.json").exists()
    assert (run_dir / "retrieval.json").exists()


def test_transcript_record_then_replay(workspace):
    transcript = workspace / "golden.transcript.json"
    cfg = _golden_cfg(workspace, run_id="rec", transcript=transcript)
    first = run_pipeline(REQUIREMENT, cfg)
    assert transcript.exists()
    replay_cfg = _golden_cfg(workspace, run_id="rep", transcript=transcript)
    replay_cfg.script = None
    replay_cfg.backend = "http"  # replay must not touch any network backend
    second = run_pipeline(REQUIREMENT, replay_cfg)
    assert second.metrics.package_digest == first.metrics.package_digest


def test_multi_variant_selection(workspace):
    # three variants, scripted so v2 has the leanest resource profile at equal f1
    entries = json.loads(fixture_path("scripts/golden_anomaly.json").read_text())
    by_stage = {e["stage"]: e for e in entries}
    script = [
        by_stage["keywords"],
        by_stage["outline"],
        by_stage["design"],
        by_stage["code"],
        by_stage["code"],
        by_stage["code"],
        by_stage["interface_match"],
        by_stage["integrate"],
    ]
    script_path = workspace / "variants.json"
    script_path.write_text(json.dumps(script))
    cfg = _golden_cfg(workspace, run_id="mv", variants=3)
    cfg.script = script_path
    result = run_pipeline(REQUIREMENT, cfg)
    reports = json.loads((result.run_dir / "variants" / "reports.json").read_text())
    assert len(reports) == 3
    assert sum(1 for r in reports if r["selected"]) == 1
    assert result.metrics.one_shot  # all variants clean


def test_ablation_empty_set_matches_full_run(workspace):
    base = run_pipeline(REQUIREMENT, _golden_cfg(workspace, run_id="full"))
    ablated = run_pipeline(
        REQUIREMENT, _golden_cfg(workspace, run_id="empty-ablation", ablations=frozenset())
    )
    assert (
        json.dumps(base.metrics.deterministic_dict(), sort_keys=True)
        == json.dumps(ablated.metrics.deterministic_dict(), sort_keys=True)
    )


def test_without_validation_budget_forced_to_one(workspace):
    cfg = _golden_cfg(workspace, run_id="wov")
    cfg.script = fixture_path("scripts/three_fault.json")
    cfg.ablations = frozenset({"validation"})
    with pytest.raises(PipelineError) as err:
        run_pipeline(REQUIREMENT, cfg)
    assert err.value.stage == "validate"
    trace = json.loads((workspace / "runs" / "wov" / "variants" / "v1" / "trace.json").read_text())
    assert len(trace["entries"]) == 1


def test_without_function_design_skips_outline(workspace):
    entries = json.loads(fixture_path("scripts/golden_anomaly.json").read_text())
    script = [e for e in entries if e["stage"] not in ("outline", "design")]
    script_path = workspace / "wof.json"
    script_path.write_text(json.dumps(script))
    cfg = _golden_cfg(workspace, run_id="wof")
    cfg.script = script_path
    cfg.ablations = frozenset({"function_design"})
    result = run_pipeline(REQUIREMENT, cfg)
    assert result.metrics.one_shot


def test_suite_summary_is_pure_fold(workspace):
    suite_path = build_reference_suite(workspace / "suite", trials=6)
    cfg = _golden_cfg(workspace, samples=200)
    cfg.suite = suite_path
    summary = run_suite(cfg, label="mini")
    assert summary.trials == 6
    recomputed = pl.SuiteSummary.from_records(summary.records)
    assert recomputed.to_dict() == summary.to_dict()
    persisted = json.loads((workspace / "suites" / "mini.json").read_text())
    assert persisted["one_shot_rate"] == summary.one_shot_rate


def test_suite_single_oneshot_trial(workspace):
    suite_path = build_reference_suite(workspace / "suite", trials=1)
    cfg = _golden_cfg(workspace, samples=200)
    cfg.suite = suite_path
    summary = run_suite(cfg, trials=1, label="one")
    assert summary.trials == 1
    assert summary.one_shot_rate == 1.0


def test_suite_parallel_matches_sequential(workspace):
    suite_path = build_reference_suite(workspace / "suite", trials=6)
    sequential_cfg = _golden_cfg(workspace / "seq", samples=200)
    sequential_cfg.suite = suite_path
    sequential = run_suite(sequential_cfg, label="seq")
    parallel_cfg = _golden_cfg(workspace / "par", samples=200)
    parallel_cfg.suite = suite_path
    parallel = run_suite(parallel_cfg, label="par", parallel=3)
    assert parallel.trials == sequential.trials
    assert parallel.one_shot_count == sequential.one_shot_count
    assert parallel.success_count == sequential.success_count
    # parallel trials land in isolated workspaces
    assert (workspace / "par" / "trials" / "par-000" / "runs" / "par-000").exists()
