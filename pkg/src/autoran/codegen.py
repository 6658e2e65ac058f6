"""Three-stage algorithm synthesis: outline, detailed design, validated code."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    AutoranError,
    BudgetExhausted,
    ChainViolation,
    EmptyResponse,
    MissingExpansion,
    NoSuccessfulVariant,
    OutlineParseError,
    PlaceholderDetected,
    UnknownMetric,
)
from .prompts import render_prompt
from .sandbox import EvalMetrics, Sandbox, extract_bug, parse_metrics

DEFAULT_ITERATION_BUDGET = 10
DEFAULT_VARIANT_COUNT = 3
MIN_OUTLINE_STEPS = 3

_STEP_HEAD = re.compile(r"Step\s+(\d+)\s*:\s*\[([^\]]*)\]")
_LIST_CLAUSE = re.compile(r"(Inputs|Outputs)\s*:\s*([^.;\n]*)", re.IGNORECASE)
_FENCE = re.compile(r"```[a-zA-Z0-9_+-]*\n(.*?)```", re.DOTALL)
# Comment placeholders of the form "# ... (same as before)" in any comment
# style, plus unfilled template slots.
_PLACEHOLDER = re.compile(r"(?:#|//)\s*\.\.\.\s*\(")
SLOT_MARKER = "@@SLOT:"


@dataclass(frozen=True)
class OutlineStep:
    title: str
    description: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]


@dataclass(frozen=True)
class AlgorithmOutline:
    steps: tuple[OutlineStep, ...]

    def render(self) -> str:
        lines = []
        for i, step in enumerate(self.steps, start=1):
            lines.append(f"Step {i}: [{step.title}] {step.description}")
        return "\n".join(lines)


@dataclass(frozen=True)
class StepExpansion:
    step_index: int
    operations: str
    data_processing: str
    feature_selection: tuple[str, ...] | None
    decision_criteria: str


@dataclass(frozen=True)
class DetailedDesign:
    expansions: tuple[StepExpansion, ...]

    def render(self) -> str:
        lines = []
        for exp in self.expansions:
            lines.append(f"Step {exp.step_index}:")
            lines.append(f"Operations: {exp.operations}")
            lines.append(f"Data processing: {exp.data_processing}")
            if exp.feature_selection:
                lines.append("Features: " + ", ".join(exp.feature_selection))
            lines.append(f"Decision criteria: {exp.decision_criteria}")
        return "\n".join(lines)


@dataclass(frozen=True)
class CandidateProgram:
    source_text: str
    language: str
    variant_id: str
    lineage: tuple[int, ...] = ()

    def __post_init__(self):
        scan_placeholders(self.source_text)


@dataclass
class IterationEntry:
    index: int
    exit_code: int
    timed_out: bool
    wall_ms: float
    peak_memory_mb: float
    bug: dict | None
    metrics: dict | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class IterationTrace:
    entries: list[IterationEntry] = field(default_factory=list)
    success: bool = False

    @property
    def bugs_total(self) -> int:
        return sum(1 for e in self.entries if e.bug is not None)

    @property
    def iterations(self) -> int:
        return len(self.entries)

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "bugs_total": self.bugs_total,
            "entries": [e.to_dict() for e in self.entries],
        }

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass
class VariantReport:
    variant_id: str
    eval: EvalMetrics | None
    resource: dict
    selected: bool = False

    def to_dict(self) -> dict:
        return {
            "variant_id": self.variant_id,
            "eval": self.eval.to_dict() if self.eval else None,
            "resource": dict(self.resource),
            "selected": self.selected,
        }


@dataclass(frozen=True)
class SelectionPolicy:
    """Lexicographic: primary metric desc, then memory asc, wall asc, id asc."""

    primary_metric: str = "f1"


def scan_placeholders(source: str) -> None:
    if _PLACEHOLDER.search(source) or SLOT_MARKER in source:
        raise PlaceholderDetected("source contains a banned placeholder marker")


def extract_code(response: str) -> str:
    """Pull the program text out of a completion, dropping markdown fences."""
    if not response.strip():
        raise EmptyResponse("model returned an empty program")
    match = _FENCE.search(response)
    text = match.group(1) if match else response
    text = text.strip("\n") + "\n"
    return text


def _parse_name_list(text: str) -> tuple[str, ...]:
    return tuple(n.strip().lower() for n in text.split(",") if n.strip())


def parse_outline(response: str) -> AlgorithmOutline:
    heads = list(_STEP_HEAD.finditer(response))
    if not heads:
        raise OutlineParseError("response has no 'Step N: [Title]' delimiters")
    steps = []
    for i, head in enumerate(heads):
        end = heads[i + 1].start() if i + 1 < len(heads) else len(response)
        body = response[head.end() : end].strip().strip(";").strip()
        inputs: tuple[str, ...] = ()
        outputs: tuple[str, ...] = ()
        for clause in _LIST_CLAUSE.finditer(body):
            names = _parse_name_list(clause.group(2))
            if clause.group(1).lower() == "inputs":
                inputs = inputs + names
            else:
                outputs = outputs + names
        steps.append(
            OutlineStep(title=head.group(2).strip(), description=body, inputs=inputs, outputs=outputs)
        )
    return AlgorithmOutline(steps=tuple(steps))


def check_outline(outline: AlgorithmOutline) -> None:
    if len(outline.steps) < MIN_OUTLINE_STEPS:
        raise ChainViolation(
            f"outline has {len(outline.steps)} steps; at least {MIN_OUTLINE_STEPS} required"
        )
    produced: set[str] = set(outline.steps[0].outputs)
    for i, step in enumerate(outline.steps[1:], start=2):
        if not set(step.inputs) & produced:
            raise ChainViolation(
                f"step {i} consumes no output of an earlier step (inputs: {list(step.inputs)})"
            )
        produced.update(step.outputs)


def generate_outline(req, knowledge_ctx, gateway) -> AlgorithmOutline:
    """One generation attempt plus a single re-prompt on invariant violation."""
    env = render_prompt("outline", req, context=knowledge_ctx)
    response = gateway.complete(env).text
    try:
        outline = parse_outline(response)
        check_outline(outline)
        return outline
    except (OutlineParseError, ChainViolation) as first_error:
        env = render_prompt(
            "outline", req, {"violation": str(first_error)}, context=knowledge_ctx
        )
        response = gateway.complete(env).text
        outline = parse_outline(response)
        check_outline(outline)
        return outline


_DESIGN_LABELS = {
    "operations": "operations",
    "data processing": "data_processing",
    "features": "features",
    "decision criteria": "decision_criteria",
}
_DESIGN_STEP = re.compile(r"^Step\s+(\d+)\s*:\s*$")


def parse_design(response: str, outline: AlgorithmOutline) -> DetailedDesign:
    blocks: dict[int, dict] = {}
    current: dict | None = None
    for line in response.splitlines():
        line = line.strip()
        if not line:
            continue
        step_match = _DESIGN_STEP.match(line)
        if step_match:
            current = blocks.setdefault(int(step_match.group(1)), {})
            continue
        if current is None:
            continue
        label, _, value = line.partition(":")
        key = _DESIGN_LABELS.get(label.strip().lower())
        if key:
            current[key] = value.strip()
    expansions = []
    for index in range(1, len(outline.steps) + 1):
        block = blocks.get(index)
        if block is None:
            raise MissingExpansion(index)
        features = None
        if "features" in block:
            features = _parse_name_list(block["features"])
        expansions.append(
            StepExpansion(
                step_index=index,
                operations=block.get("operations", ""),
                data_processing=block.get("data_processing", ""),
                feature_selection=features,
                decision_criteria=block.get("decision_criteria", ""),
            )
        )
    extras = set(blocks) - set(range(1, len(outline.steps) + 1))
    if extras:
        raise AutoranError(f"design has expansions for nonexistent steps {sorted(extras)}")
    return DetailedDesign(expansions=tuple(expansions))


def expand_design(outline: AlgorithmOutline, knowledge_ctx, req, gateway) -> DetailedDesign:
    env = render_prompt("design", req, {"outline": outline.render()}, context=knowledge_ctx)
    response = gateway.complete(env).text
    design = parse_design(response, outline)
    vocabulary = set(req.metric_vocabulary()) if hasattr(req, "metric_vocabulary") else set()
    for exp in design.expansions:
        for name in exp.feature_selection or ():
            if vocabulary and name not in vocabulary:
                raise UnknownMetric(name)
    return design


def generate_code(design: DetailedDesign, req, gateway, variant_id: str = "v1") -> CandidateProgram:
    language = req.target_language if hasattr(req, "target_language") else "python"
    env = render_prompt("code", req, {"design": design.render()})
    response = gateway.complete(env).text
    source = extract_code(response)
    return CandidateProgram(
        source_text=source, language=language, variant_id=variant_id, lineage=()
    )


def validate_loop(
    prog: CandidateProgram,
    dataset_path,
    sandbox: Sandbox,
    gateway,
    budget: int = DEFAULT_ITERATION_BUDGET,
    req=None,
) -> tuple[CandidateProgram, IterationTrace]:
    """Run, repair on failure, stop at first success or budget exhaustion."""
    if budget < 1:
        raise AutoranError("iteration budget must be >= 1")
    trace = IterationTrace()
    current = prog
    for iteration in range(1, budget + 1):
        log = sandbox.run(current.source_text, current.language, dataset_path)
        bug = extract_bug(log, iteration=iteration)
        metrics = parse_metrics(log) if bug is None else None
        trace.entries.append(
            IterationEntry(
                index=iteration,
                exit_code=log.exit_code,
                timed_out=log.timed_out,
                wall_ms=log.wall_ms,
                peak_memory_mb=log.peak_memory_mb,
                bug=bug.to_dict() if bug else None,
                metrics=metrics.to_dict() if metrics else None,
            )
        )
        if bug is None:
            trace.success = True
            return current, trace
        if iteration == budget:
            break
        logs_text = (
            f"exit code: {log.exit_code}\n"
            f"--- stderr ---\n{log.stderr_tail}\n"
            f"--- stdout ---\n{log.stdout_tail}"
        )
        env = render_prompt(
            "repair",
            req if req is not None else "repair the failing program",
            {"code": current.source_text, "logs": logs_text},
        )
        response = gateway.complete(env).text
        source = extract_code(response)
        current = CandidateProgram(
            source_text=source,
            language=current.language,
            variant_id=current.variant_id,
            lineage=current.lineage + (iteration,),
        )
    raise BudgetExhausted(trace)


def select_best(variants: list[VariantReport], policy: SelectionPolicy = SelectionPolicy()) -> str:
    """Deterministic lexicographic winner; marks exactly one report selected."""
    scored = []
    for report in variants:
        if report.eval is None:
            continue
        value = report.eval.primary(policy.primary_metric)
        if value is None:
            continue
        scored.append(
            (
                -value,
                report.resource.get("peak_memory_mb", float("inf")),
                report.resource.get("wall_ms", float("inf")),
                report.variant_id,
            )
        )
    if not scored:
        raise NoSuccessfulVariant("no variant produced a usable evaluation")
    winner_id = min(scored)[3]
    for report in variants:
        report.selected = report.variant_id == winner_id
    return winner_id
