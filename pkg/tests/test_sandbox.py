import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autoran.errors import InterpreterMissing, MetricsInconsistent, MetricsMissing
from autoran.sandbox import (
    ExecutionLog,
    Limits,
    Sandbox,
    TIMEOUT_GRACE_MS,
    derive_from_confusion,
    extract_bug,
    parse_metrics,
)


@pytest.fixture
def sandbox(tmp_path):
    return Sandbox(tmp_path / "sandbox", Limits(timeout_s=30.0, memory_mb=512))


def _dataset(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("prb_util,label\n1.0,0\n2.0,1\n")
    return path


def test_run_success(sandbox, tmp_path):
    log = sandbox.run(
        'import json; print(json.dumps({"precision": 1.0, "recall": 1.0}))',
        "python",
        _dataset(tmp_path),
    )
    assert log.exit_code == 0
    assert not log.timed_out
    metrics = parse_metrics(log)
    assert metrics.precision == 1.0 and metrics.f1 == 1.0


def test_run_persists_artifacts(sandbox, tmp_path):
    sandbox.run("print('hello')", "python", _dataset(tmp_path))
    scratch = sandbox.root / "1"
    assert (scratch / "stdout.txt").read_text().strip() == "hello"
    assert (scratch / "stderr.txt").exists()
    assert json.loads((scratch / "result.json").read_text())["exit_code"] == 0


def test_timeout_contract(sandbox, tmp_path):
    log = sandbox.run(
        "while True:\n    pass\n",
        "python",
        _dataset(tmp_path),
        limits=Limits(timeout_s=2.0, memory_mb=512),
    )
    assert log.timed_out
    assert log.exit_code != 0
    assert 2000.0 <= log.wall_ms <= 2000.0 + TIMEOUT_GRACE_MS


def test_division_error_stderr(sandbox, tmp_path):
    log = sandbox.run("x = 1 / 0", "python", _dataset(tmp_path))
    assert log.exit_code != 0
    assert "ZeroDivisionError" in log.stderr_tail


def test_memory_limit_enforced(sandbox, tmp_path):
    # allocates 2x the cap; must be terminated and reported, never succeed
    log = sandbox.run(
        "blob = bytearray(256 * 1024 * 1024)\nprint('{}')",
        "python",
        _dataset(tmp_path),
        limits=Limits(timeout_s=30.0, memory_mb=128),
    )
    assert log.exit_code != 0
    bug = extract_bug(log)
    assert bug is not None
    assert bug.error_class in ("MemoryError", "unknown")


def test_unknown_language(sandbox):
    with pytest.raises(InterpreterMissing):
        sandbox.run("print(1)", "cobol", None)


def test_extract_bug_value_error_location(sandbox, tmp_path):
    # pad so the raise sits on line 42 of the real diagnostic text
    source = "\n" * 40 + "def go():\n    raise ValueError('shapes mismatch')\ngo()\n"
    assert source.splitlines()[41] == "    raise ValueError('shapes mismatch')"
    log = sandbox.run(source, "python", _dataset(tmp_path))
    bug = extract_bug(log)
    assert bug.error_class == "ValueError"
    assert bug.location == "program.py:42"
    assert "shapes mismatch" in bug.message


def test_extract_bug_node_reference_error(sandbox, tmp_path):
    log = sandbox.run("frobnicate();\n", "javascript", _dataset(tmp_path))
    bug = extract_bug(log)
    assert bug.error_class == "ReferenceError"
    assert bug.location.startswith("program.js:")


def test_extract_bug_clean_run(sandbox, tmp_path):
    log = sandbox.run('print(\'{"accuracy": 0.5}\')', "python", _dataset(tmp_path))
    assert extract_bug(log) is None


def test_extract_bug_empty_stderr_nonzero():
    log = ExecutionLog(
        exit_code=3, stdout_tail="", stderr_tail="", wall_ms=1.0, peak_memory_mb=1.0, timed_out=False
    )
    bug = extract_bug(log)
    assert bug.error_class == "unknown"
    assert bug.message == "exit 3"


def _log_for(stdout: str) -> ExecutionLog:
    return ExecutionLog(
        exit_code=0, stdout_tail=stdout, stderr_tail="", wall_ms=1.0, peak_memory_mb=1.0,
        timed_out=False,
    )


def test_parse_metrics_derives_f1_from_precision_recall():
    metrics = parse_metrics(_log_for('{"precision": 0.973, "recall": 0.975}'))
    assert metrics.f1 == pytest.approx(0.973999, abs=1e-6)


def test_parse_metrics_perfect_confusion():
    metrics = parse_metrics(_log_for('{"tp": 10, "fp": 0, "tn": 10, "fn": 0}'))
    assert metrics.precision == 1.0
    assert metrics.recall == 1.0
    assert metrics.f1 == 1.0


def test_parse_metrics_missing():
    with pytest.raises(MetricsMissing):
        parse_metrics(_log_for("no json here"))


def test_parse_metrics_takes_last_line():
    metrics = parse_metrics(_log_for('progress 1\nprogress 2\n{"accuracy": 0.25}'))
    assert metrics.accuracy == 0.25


def test_parse_metrics_inconsistent():
    with pytest.raises(MetricsInconsistent):
        parse_metrics(_log_for('{"tp": 10, "fp": 10, "tn": 0, "fn": 0, "precision": 0.9}'))


def test_parse_metrics_extras():
    metrics = parse_metrics(_log_for('{"accuracy": 0.9, "auc": 0.95}'))
    assert metrics.extras["auc"] == 0.95
    assert metrics.primary("auc") == 0.95


@given(
    tp=st.integers(min_value=0, max_value=10**6),
    fp=st.integers(min_value=0, max_value=10**6),
    tn=st.integers(min_value=0, max_value=10**6),
    fn=st.integers(min_value=0, max_value=10**6),
)
@settings(max_examples=300, deadline=None)
def test_confusion_matches_exact_fraction_oracle(tp, fp, tn, fn):
    derived = derive_from_confusion(tp, fp, tn, fn)
    if tp + fp > 0:
        assert abs(derived["precision"] - Fraction(tp, tp + fp)) <= 1e-12
    if tp + fn > 0:
        assert abs(derived["recall"] - Fraction(tp, tp + fn)) <= 1e-12
    if "f1" in derived:
        assert abs(derived["f1"] - Fraction(2 * tp, 2 * tp + fp + fn)) <= 1e-12
    if tp + fp + tn + fn > 0:
        assert abs(derived["accuracy"] - Fraction(tp + tn, tp + fp + tn + fn)) <= 1e-12


def test_parse_only_python(sandbox):
    ok = sandbox.parse_only("x = 1\n", "python")
    assert ok.exit_code == 0
    bad = sandbox.parse_only("def broken(:\n", "python")
    assert bad.exit_code != 0


def test_parse_only_javascript(sandbox):
    ok = sandbox.parse_only("const x = 1;\n", "javascript")
    assert ok.exit_code == 0
    bad = sandbox.parse_only("const x = ;\n", "javascript")
    assert bad.exit_code != 0
    assert "SyntaxError" in bad.stderr_tail
