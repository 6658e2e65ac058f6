"""Isolated execution of candidate programs with diagnostics extraction.

Programs follow the language-neutral contract: invoked as
``<interpreter> program <dataset_path>`` inside a private scratch directory,
printing one JSON object of evaluation metrics as the final stdout line.
"""

from __future__ import annotations

import json
import os
import re
import resource
import shutil
import signal
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    InterpreterMissing,
    MetricsInconsistent,
    MetricsMissing,
    ScratchSetupFailed,
)

TAIL_BYTES = 64 * 1024
DEFAULT_TIMEOUT_S = 300.0
ONLINE_TIMEOUT_S = 1.0  # per-message budget once deployed
DEFAULT_MEMORY_MB = 2048
TIMEOUT_GRACE_MS = 5000.0
CONSISTENCY_TOL = 1e-12

LANGUAGES = {
    "python": {"ext": "py", "argv": [sys.executable]},
    "javascript": {"ext": "js", "argv": ["node"]},
}

_PY_FRAME = re.compile(r'File "([^"]+)", line (\d+)')
_PY_DIAG = re.compile(r"^([A-Za-z_][A-Za-z0-9_.]*):\s?(.*)$")
_NODE_DIAG = re.compile(r"^([A-Z][A-Za-z]*Error):\s?(.*)$", re.MULTILINE)
_NODE_LOC = re.compile(r"^(.*?[^:]+\.(?:js|mjs|cjs)):(\d+)", re.MULTILINE)


@dataclass(frozen=True)
class Limits:
    timeout_s: float = DEFAULT_TIMEOUT_S
    memory_mb: int = DEFAULT_MEMORY_MB


@dataclass(frozen=True)
class ExecutionLog:
    exit_code: int
    stdout_tail: str
    stderr_tail: str
    wall_ms: float
    peak_memory_mb: float
    timed_out: bool

    def to_dict(self) -> dict:
        return {
            "exit_code": self.exit_code,
            "wall_ms": self.wall_ms,
            "peak_memory_mb": self.peak_memory_mb,
            "timed_out": self.timed_out,
        }


@dataclass(frozen=True)
class BugRecord:
    error_class: str
    location: str | None
    message: str
    iteration: int = 0

    def to_dict(self) -> dict:
        return {
            "error_class": self.error_class,
            "location": self.location,
            "message": self.message,
            "iteration": self.iteration,
        }


@dataclass
class EvalMetrics:
    accuracy: float | None = None
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    confusion: dict | None = None
    extras: dict = field(default_factory=dict)

    def primary(self, name: str) -> float | None:
        value = getattr(self, name, None)
        if value is None:
            value = self.extras.get(name)
        return value

    def to_dict(self) -> dict:
        out = {}
        for key in ("accuracy", "precision", "recall", "f1"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.confusion is not None:
            out["confusion"] = dict(self.confusion)
        if self.extras:
            out["extras"] = dict(self.extras)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "EvalMetrics":
        return cls(
            accuracy=raw.get("accuracy"),
            precision=raw.get("precision"),
            recall=raw.get("recall"),
            f1=raw.get("f1"),
            confusion=raw.get("confusion"),
            extras=dict(raw.get("extras", {})),
        )


def derive_from_confusion(tp: int, fp: int, tn: int, fn: int) -> dict:
    """P/R/F1/accuracy from counts; undefined ratios are simply absent."""
    out: dict = {}
    if tp + fp > 0:
        out["precision"] = tp / (tp + fp)
    if tp + fn > 0:
        out["recall"] = tp / (tp + fn)
    p, r = out.get("precision"), out.get("recall")
    if p is not None and r is not None and p + r > 0:
        out["f1"] = 2 * p * r / (p + r)
    total = tp + fp + tn + fn
    if total > 0:
        out["accuracy"] = (tp + tn) / total
    return out


class Sandbox:
    """Immutable launcher configuration; every run owns a fresh scratch dir."""

    def __init__(self, root: Path | str, limits: Limits = Limits()):
        # programs run with cwd=scratch, so every path handed to the
        # interpreter must be absolute
        self.root = Path(root).resolve()
        self.limits = limits
        self._counter = 0

    def _interpreter(self, language: str) -> list[str]:
        spec = LANGUAGES.get(language)
        if spec is None:
            raise InterpreterMissing(f"unsupported language {language!r}")
        argv = list(spec["argv"])
        if shutil.which(argv[0]) is None:
            raise InterpreterMissing(f"interpreter {argv[0]!r} not found on PATH")
        return argv

    def _new_scratch(self) -> Path:
        while True:
            self._counter += 1
            scratch = self.root / str(self._counter)
            if scratch.exists():  # stale dirs from an earlier run with this id
                continue
            try:
                scratch.mkdir(parents=True, exist_ok=False)
            except FileExistsError:
                continue
            except OSError as exc:
                raise ScratchSetupFailed(str(exc)) from exc
            return scratch

    def run(
        self,
        source_text: str,
        language: str,
        dataset_path: Path | str | None,
        limits: Limits | None = None,
        extra_args: list[str] | None = None,
    ) -> ExecutionLog:
        limits = limits or self.limits
        argv = self._interpreter(language)
        if dataset_path is not None and not Path(dataset_path).exists():
            raise ScratchSetupFailed(f"dataset {dataset_path} does not exist")
        scratch = self._new_scratch()
        prog = scratch / f"program.{LANGUAGES[language]['ext']}"
        prog.write_text(source_text)
        cmd = argv + [str(prog)]
        if dataset_path is not None:
            cmd.append(str(Path(dataset_path).resolve()))
        if extra_args:
            cmd.extend(extra_args)
        log = _execute(cmd, scratch, limits, language)
        (scratch / "result.json").write_text(json.dumps(log.to_dict(), indent=2) + "\n")
        return log

    def parse_only(self, source_text: str, language: str) -> ExecutionLog:
        """Syntax-check without executing the program body."""
        argv = self._interpreter(language)
        scratch = self._new_scratch()
        prog = scratch / f"program.{LANGUAGES[language]['ext']}"
        prog.write_text(source_text)
        if language == "python":
            cmd = argv + [
                "-c",
                "import sys, py_compile; py_compile.compile(sys.argv[1], doraise=True)",
                str(prog),
            ]
        else:
            cmd = argv + ["--check", str(prog)]
        return _execute(cmd, scratch, Limits(timeout_s=30.0, memory_mb=self.limits.memory_mb), language)


def _execute(cmd: list[str], scratch: Path, limits: Limits, language: str) -> ExecutionLog:
    env = {
        "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
        "HOME": str(scratch),
        "LANG": "C.UTF-8",
        "PYTHONDONTWRITEBYTECODE": "1",
    }
    if language == "javascript":
        # V8 reserves large virtual ranges, so the memory governor for node is
        # its own heap cap rather than RLIMIT_AS.
        env["NODE_OPTIONS"] = f"--max-old-space-size={limits.memory_mb}"

    def _set_limits():
        resource.setrlimit(resource.RLIMIT_CORE, (0, 0))
        if language != "javascript":
            cap = limits.memory_mb * 1024 * 1024
            resource.setrlimit(resource.RLIMIT_AS, (cap, cap))

    stdout_path = scratch / "stdout.txt"
    stderr_path = scratch / "stderr.txt"
    started = time.perf_counter()
    with stdout_path.open("wb") as out, stderr_path.open("wb") as err:
        proc = subprocess.Popen(
            cmd,
            cwd=scratch,
            stdout=out,
            stderr=err,
            stdin=subprocess.DEVNULL,
            env=env,
            start_new_session=True,
            preexec_fn=_set_limits,
        )
        timed_out = False
        deadline = started + limits.timeout_s
        delay = 0.001
        while True:
            pid, status, rusage = os.wait4(proc.pid, os.WNOHANG)
            if pid == proc.pid:
                break
            now = time.perf_counter()
            if now >= deadline and not timed_out:
                timed_out = True
                try:
                    os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
                except (ProcessLookupError, PermissionError):
                    pass
            time.sleep(delay)
            delay = min(delay * 2, 0.05)
        proc.returncode = os.waitstatus_to_exitcode(status)
    wall_ms = (time.perf_counter() - started) * 1000.0
    peak_mb = rusage.ru_maxrss / 1024.0  # Linux reports KiB
    return ExecutionLog(
        exit_code=proc.returncode,
        stdout_tail=_tail(stdout_path),
        stderr_tail=_tail(stderr_path),
        wall_ms=wall_ms,
        peak_memory_mb=peak_mb,
        timed_out=timed_out,
    )


def _tail(path: Path) -> str:
    data = path.read_bytes()
    return data[-TAIL_BYTES:].decode("utf-8", errors="replace")


def parse_metrics(log: ExecutionLog) -> EvalMetrics:
    """Decode the final-stdout-line JSON object and cross-check derived values."""
    lines = [line for line in log.stdout_tail.splitlines() if line.strip()]
    if not lines:
        raise MetricsMissing("program produced no stdout")
    try:
        raw = json.loads(lines[-1])
    except json.JSONDecodeError as exc:
        raise MetricsMissing(f"final stdout line is not JSON: {lines[-1][:120]!r}") from exc
    if not isinstance(raw, dict):
        raise MetricsMissing("final stdout line is not a JSON object")
    metrics = EvalMetrics()
    counts = {}
    for key, value in raw.items():
        if value is None:
            continue
        if key in ("accuracy", "precision", "recall", "f1"):
            setattr(metrics, key, float(value))
        elif key in ("tp", "fp", "tn", "fn"):
            counts[key] = int(value)
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            metrics.extras[key] = float(value)
    if len(counts) == 4:
        metrics.confusion = counts
        derived = derive_from_confusion(**counts)
        for key, value in derived.items():
            provided = getattr(metrics, key)
            if provided is None:
                setattr(metrics, key, value)
            elif abs(provided - value) > CONSISTENCY_TOL:
                raise MetricsInconsistent(
                    f"{key}={provided} disagrees with confusion-derived {value}"
                )
    elif counts:
        metrics.extras.update({k: float(v) for k, v in counts.items()})
    if metrics.f1 is None and metrics.precision is not None and metrics.recall is not None:
        if metrics.precision + metrics.recall > 0:
            metrics.f1 = (
                2 * metrics.precision * metrics.recall / (metrics.precision + metrics.recall)
            )
    return metrics


def extract_bug(log: ExecutionLog, iteration: int = 0) -> BugRecord | None:
    """First diagnostic of a failed run; None when the run succeeded."""
    if log.exit_code == 0 and not log.timed_out:
        try:
            parse_metrics(log)
            return None
        except (MetricsMissing, MetricsInconsistent) as exc:
            return BugRecord(
                error_class=type(exc).__name__,
                location=None,
                message=str(exc),
                iteration=iteration,
            )
    if log.timed_out:
        return BugRecord(
            error_class="Timeout",
            location=None,
            message=f"terminated after exceeding the time limit (exit {log.exit_code})",
            iteration=iteration,
        )
    stderr = log.stderr_tail
    if "Traceback (most recent call last" in stderr:
        frames = _PY_FRAME.findall(stderr)
        location = None
        if frames:
            path, line = frames[-1]
            location = f"{Path(path).name}:{line}"
        for line_text in reversed(stderr.splitlines()):
            match = _PY_DIAG.match(line_text.strip())
            if not match:
                continue
            name = match.group(1)
            leaf = name.split(".")[-1]
            if name[0].isupper() or leaf.endswith(("Error", "Exception", "Interrupt", "Exit")):
                return BugRecord(
                    error_class=name,
                    location=location,
                    message=line_text.strip(),
                    iteration=iteration,
                )
    node_match = _NODE_DIAG.search(stderr)
    if node_match:
        loc_match = _NODE_LOC.search(stderr)
        location = None
        if loc_match:
            location = f"{Path(loc_match.group(1)).name}:{loc_match.group(2)}"
        return BugRecord(
            error_class=node_match.group(1),
            location=location,
            message=node_match.group(0).strip().splitlines()[0],
            iteration=iteration,
        )
    first = next((line for line in stderr.splitlines() if line.strip()), "")
    if first:
        return BugRecord(
            error_class="unknown", location=None, message=first.strip(), iteration=iteration
        )
    return BugRecord(
        error_class="unknown",
        location=None,
        message=f"exit {log.exit_code}",
        iteration=iteration,
    )
