import itertools

import pytest

from autoran import codegen
from autoran.errors import (
    BudgetExhausted,
    ChainViolation,
    MissingExpansion,
    NoSuccessfulVariant,
    OutlineParseError,
    PlaceholderDetected,
    UnknownMetric,
)
from autoran.pipeline import fixture_path
from autoran.sandbox import Limits, Sandbox
from conftest import scripted_gateway

OUTLINE_TEXT = fixture_path("snippets/outline.txt").read_text()
DESIGN_TEXT = fixture_path("snippets/design.txt").read_text()
CLEAN_JS = fixture_path("snippets/program_clean.js").read_text()


def _outline_gateway(*responses):
    return scripted_gateway(
        *[{"stage": "outline", "match_key": "*", "response": r} for r in responses]
    )


def test_generate_outline_golden(anomaly_requirement):
    outline = codegen.generate_outline(anomaly_requirement, [], _outline_gateway(OUTLINE_TEXT))
    assert len(outline.steps) == 4
    assert outline.steps[0].title == "Load and validate telemetry"
    assert "rows" in outline.steps[0].outputs
    # dataset handling first, evaluation last
    assert "load" in outline.steps[0].title.lower()
    assert "evaluate" in outline.steps[-1].title.lower()


def test_outline_two_steps_reprompted_then_fails(anomaly_requirement):
    two_steps = (
        "Step 1: [Load] read. Inputs: path. Outputs: rows. ; "
        "Step 2: [Score] score. Inputs: rows. Outputs: metrics."
    )
    gateway = _outline_gateway(two_steps, two_steps)
    with pytest.raises(ChainViolation):
        codegen.generate_outline(anomaly_requirement, [], gateway)
    assert len(gateway.transcript) == 2  # exactly one re-prompt


def test_outline_reprompt_recovers(anomaly_requirement):
    bad = "Step 1: [Load] read. ; Step 2: [Score] score."
    gateway = _outline_gateway(bad, OUTLINE_TEXT)
    outline = codegen.generate_outline(anomaly_requirement, [], gateway)
    assert len(outline.steps) == 4


def test_outline_missing_delimiters(anomaly_requirement):
    gateway = _outline_gateway("here is an essay with no steps", "still no steps")
    with pytest.raises(OutlineParseError):
        codegen.generate_outline(anomaly_requirement, [], gateway)


def test_outline_chain_violation_detected(anomaly_requirement):
    broken = (
        "Step 1: [Load] read. Inputs: path. Outputs: rows. ; "
        "Step 2: [Other] unrelated. Inputs: nothing_produced. Outputs: stuff. ; "
        "Step 3: [Score] score. Inputs: stuff. Outputs: metrics."
    )
    gateway = _outline_gateway(broken, broken)
    with pytest.raises(ChainViolation):
        codegen.generate_outline(anomaly_requirement, [], gateway)


def _golden_outline(anomaly_requirement):
    return codegen.generate_outline(anomaly_requirement, [], _outline_gateway(OUTLINE_TEXT))


def test_expand_design_golden(anomaly_requirement):
    outline = _golden_outline(anomaly_requirement)
    gateway = scripted_gateway({"stage": "design", "match_key": "*", "response": DESIGN_TEXT})
    design = codegen.expand_design(outline, [], anomaly_requirement, gateway)
    assert len(design.expansions) == len(outline.steps)
    features = design.expansions[1].feature_selection
    assert features == ("prb_util", "dl_throughput")


def test_expand_design_missing_expansion(anomaly_requirement):
    outline = _golden_outline(anomaly_requirement)
    partial = "Step 1:\nOperations: read\nData processing: none\nDecision criteria: none"
    gateway = scripted_gateway({"stage": "design", "match_key": "*", "response": partial})
    with pytest.raises(MissingExpansion) as err:
        codegen.expand_design(outline, [], anomaly_requirement, gateway)
    assert err.value.step_index == 2


def test_expand_design_unknown_metric(anomaly_requirement):
    outline = _golden_outline(anomaly_requirement)
    bad = DESIGN_TEXT.replace("Features: prb_util, dl_throughput", "Features: secret_metric")
    gateway = scripted_gateway({"stage": "design", "match_key": "*", "response": bad})
    with pytest.raises(UnknownMetric):
        codegen.expand_design(outline, [], anomaly_requirement, gateway)


def _golden_design(anomaly_requirement):
    outline = _golden_outline(anomaly_requirement)
    gateway = scripted_gateway({"stage": "design", "match_key": "*", "response": DESIGN_TEXT})
    return codegen.expand_design(outline, [], anomaly_requirement, gateway)


def test_generate_code_placeholder_rejected(anomaly_requirement):
    design = _golden_design(anomaly_requirement)
    gateway = scripted_gateway(
        {
            "stage": "code",
            "match_key": "*",
            "response": "function f() {}\n// ... (same as before)\n",
        }
    )
    with pytest.raises(PlaceholderDetected):
        codegen.generate_code(design, anomaly_requirement, gateway)


def test_generate_code_strips_fences_and_hashes_deterministically(anomaly_requirement):
    design = _golden_design(anomaly_requirement)
    entry = {"stage": "code", "match_key": "*", "response": f"```javascript\n{CLEAN_JS}```"}
    prog_a = codegen.generate_code(design, anomaly_requirement, scripted_gateway(entry))
    prog_b = codegen.generate_code(design, anomaly_requirement, scripted_gateway(dict(entry)))
    assert prog_a.source_text == prog_b.source_text
    assert prog_a.language == "javascript"
    assert prog_a.lineage == ()
    assert "```" not in prog_a.source_text


def _make_sandbox(tmp_path):
    return Sandbox(tmp_path / "sb", Limits(timeout_s=30.0, memory_mb=512))


def _make_dataset(tmp_path):
    from autoran.datasets import synth_anomaly_csv

    path = tmp_path / "ds.csv"
    synth_anomaly_csv(path, samples=300, seed=7)
    return path


def test_validate_loop_one_shot(tmp_path, anomaly_requirement):
    prog = codegen.CandidateProgram(CLEAN_JS, "javascript", "v1")
    final, trace = codegen.validate_loop(
        prog, _make_dataset(tmp_path), _make_sandbox(tmp_path), scripted_gateway(),
        budget=5, req=anomaly_requirement,
    )
    assert trace.success
    assert trace.iterations == 1
    assert trace.bugs_total == 0
    assert final.source_text == prog.source_text


def test_validate_loop_three_faults(tmp_path, anomaly_requirement):
    faults = [
        fixture_path("snippets/program_fault_syntax.js").read_text(),
        fixture_path("snippets/program_fault_reference.js").read_text(),
        fixture_path("snippets/program_fault_type.js").read_text(),
    ]
    gateway = scripted_gateway(
        {"stage": "repair", "match_key": "*", "response": faults[1]},
        {"stage": "repair", "match_key": "*", "response": faults[2]},
        {"stage": "repair", "match_key": "*", "response": CLEAN_JS},
    )
    prog = codegen.CandidateProgram(faults[0], "javascript", "v1")
    final, trace = codegen.validate_loop(
        prog, _make_dataset(tmp_path), _make_sandbox(tmp_path), gateway,
        budget=10, req=anomaly_requirement,
    )
    assert trace.success
    assert trace.iterations == 4
    assert trace.bugs_total == 3
    assert final.lineage == (1, 2, 3)


def test_validate_loop_budget_exhausted(tmp_path, anomaly_requirement):
    failing = "process.exit(3);\n"
    prog = codegen.CandidateProgram(failing, "javascript", "v1")
    with pytest.raises(BudgetExhausted) as err:
        codegen.validate_loop(
            prog, _make_dataset(tmp_path), _make_sandbox(tmp_path), scripted_gateway(),
            budget=1, req=anomaly_requirement,
        )
    assert err.value.trace.iterations == 1
    assert not err.value.trace.success


def test_validate_loop_trace_bounded_and_dichotomous(tmp_path, anomaly_requirement):
    # final entry is a success or the loop raised; never anything else
    prog = codegen.CandidateProgram(CLEAN_JS, "javascript", "v1")
    _, trace = codegen.validate_loop(
        prog, _make_dataset(tmp_path), _make_sandbox(tmp_path), scripted_gateway(),
        budget=3, req=anomaly_requirement,
    )
    assert trace.iterations <= 3
    assert trace.entries[-1].bug is None and trace.success


def test_validate_loop_replay_stability(tmp_path, anomaly_requirement):
    dataset = _make_dataset(tmp_path)
    sandbox = _make_sandbox(tmp_path)
    prog = codegen.CandidateProgram(CLEAN_JS, "javascript", "v1")
    final, first = codegen.validate_loop(
        prog, dataset, sandbox, scripted_gateway(), budget=2, req=anomaly_requirement
    )
    _, second = codegen.validate_loop(
        final, dataset, sandbox, scripted_gateway(), budget=2, req=anomaly_requirement
    )
    assert second.success and second.iterations == 1
    assert first.entries[-1].metrics == second.entries[-1].metrics


def _report(variant_id, f1, memory, wall):
    from autoran.sandbox import EvalMetrics

    return codegen.VariantReport(
        variant_id=variant_id,
        eval=EvalMetrics(f1=f1),
        resource={"peak_memory_mb": memory, "wall_ms": wall},
    )


def test_select_best_lexicographic():
    reports = [
        _report("v1", 0.97, 800.0, 10.0),
        _report("v2", 0.97, 400.0, 50.0),
        _report("v3", 0.91, 100.0, 5.0),
    ]
    assert codegen.select_best(reports) == "v2"
    assert [r.selected for r in reports] == [False, True, False]


def test_select_best_single():
    reports = [_report("only", 0.5, 10.0, 10.0)]
    assert codegen.select_best(reports) == "only"


def test_select_best_accuracy_primary_ignores_memory():
    # accuracy-vs-memory trade-off: highest accuracy wins whatever the cost
    from autoran.sandbox import EvalMetrics

    reports = [
        codegen.VariantReport("v1", EvalMetrics(accuracy=0.99), {"peak_memory_mb": 4000.0, "wall_ms": 100.0}),
        codegen.VariantReport("v2", EvalMetrics(accuracy=0.95), {"peak_memory_mb": 400.0, "wall_ms": 10.0}),
        codegen.VariantReport("v3", EvalMetrics(accuracy=0.90), {"peak_memory_mb": 40.0, "wall_ms": 1.0}),
    ]
    assert codegen.select_best(reports, codegen.SelectionPolicy("accuracy")) == "v1"


def test_select_best_permutation_invariant():
    reports = [
        _report("v1", 0.97, 800.0, 10.0),
        _report("v2", 0.97, 400.0, 50.0),
        _report("v3", 0.97, 400.0, 50.0),
        _report("v4", 0.91, 100.0, 5.0),
    ]
    winners = set()
    for perm in itertools.permutations(reports):
        winners.add(codegen.select_best(list(perm)))
    assert winners == {"v2"}


def test_select_best_no_successful_variant():
    reports = [codegen.VariantReport("v1", None, {"peak_memory_mb": 1.0, "wall_ms": 1.0})]
    with pytest.raises(NoSuccessfulVariant):
        codegen.select_best(reports)


def test_candidate_program_rejects_slot_marker():
    with pytest.raises(PlaceholderDetected):
        codegen.CandidateProgram("@@SLOT:init@@", "javascript", "v1")
