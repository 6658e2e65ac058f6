"""Intent elicitation: per-task templates, draft refinement, finalization."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from . import jsoncanon
from .errors import (
    AutoranError,
    EmptyInput,
    FieldAlreadyResolved,
    UnknownField,
    UnrecognizedTask,
    Unresolved,
    ValidationFailed,
)

TASK_KINDS = (
    "anomaly_detection",
    "interference_classification",
    "traffic_classification",
    "slice_scheduling",
)

MANDATORY_FIELDS = ("objective", "input_modality", "temporal_resolution", "output_format")

VALUE_KINDS = ("free_text", "metric_list", "enum_choice", "numeric_with_unit")

# Deterministic fast path for task classification; ties and misses fall back
# to one LLM call.
_TASK_KEYWORDS = (
    ("anomal", "anomaly_detection"),
    ("interfer", "interference_classification"),
    ("jam", "interference_classification"),
    ("slice", "slice_scheduling"),
    ("prb", "slice_scheduling"),
    ("traffic class", "traffic_classification"),
)

# Field values recognizable straight from the utterance.
_FIELD_KEYWORDS = (
    ("spectrogram", "input_modality", "spectrogram"),
    (" kpm", "input_modality", "kpm"),
    ("kpms", "input_modality", "kpm"),
    ("signaling", "input_modality", "signaling"),
    ("python", "target_language", "python"),
    ("javascript", "target_language", "javascript"),
    ("node.js", "target_language", "javascript"),
    ("per-ue", "granularity", "per_ue"),
    ("per ue", "granularity", "per_ue"),
    ("per-cell", "granularity", "per_cell"),
    ("per cell", "granularity", "per_cell"),
    ("per-slice", "granularity", "per_slice"),
    ("per slice", "granularity", "per_slice"),
)

_NUMERIC_WITH_UNIT = re.compile(r"^\s*\d+(\.\d+)?\s*[a-zA-Zμµ%][a-zA-Zμµ%/0-9]*\s*$")
_METRIC_NAME = re.compile(r"^[a-z][a-z0-9_]*$")

ELICITATION_ROUND_CAP = 10


@dataclass(frozen=True)
class FieldSpec:
    name: str
    description: str
    required: bool = True
    value_kind: str = "free_text"
    allowed_values: tuple[str, ...] | None = None


@dataclass(frozen=True)
class RequirementTemplate:
    task_kind: str
    fields: tuple[FieldSpec, ...]

    def __post_init__(self):
        names = [f.name for f in self.fields]
        if len(names) != len(set(names)):
            raise AutoranError(f"template {self.task_kind}: duplicate field names")
        missing = [m for m in MANDATORY_FIELDS if m not in names]
        if missing:
            raise AutoranError(
                f"template {self.task_kind}: missing mandatory fields {missing}"
            )
        for f in self.fields:
            if f.value_kind not in VALUE_KINDS:
                raise AutoranError(
                    f"template {self.task_kind}: bad value_kind {f.value_kind!r}"
                )

    def field_spec(self, name: str) -> FieldSpec:
        for f in self.fields:
            if f.name == name:
                return f
        raise UnknownField(f"no field {name!r} in template {self.task_kind}")

    @property
    def required_fields(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.fields if f.required)


def templates_root() -> Path:
    return Path(str(resources.files("autoran").joinpath("data/templates/requirements")))


def load_template(task_kind: str, templates_dir: Path | str | None = None) -> RequirementTemplate:
    root = Path(templates_dir) if templates_dir else templates_root()
    path = root / f"{task_kind}.json"
    if not path.exists():
        raise UnrecognizedTask(f"no requirement template for task kind {task_kind!r}")
    raw = json.loads(path.read_text())
    fields = tuple(
        FieldSpec(
            name=f["name"],
            description=f["description"],
            required=bool(f.get("required", True)),
            value_kind=f.get("value_kind", "free_text"),
            allowed_values=tuple(f["allowed_values"]) if f.get("allowed_values") else None,
        )
        for f in raw["fields"]
    )
    return RequirementTemplate(task_kind=raw["task_kind"], fields=fields)


@dataclass
class DraftRequirement:
    task_kind: str
    template: RequirementTemplate
    answers: dict[str, str] = field(default_factory=dict)
    raw_user_text: str = ""
    created_at: str = ""

    @property
    def unresolved(self) -> set[str]:
        return {name for name in self.template.required_fields if name not in self.answers}


@dataclass(frozen=True)
class StructuredRequirement:
    task_kind: str
    answers: dict[str, str]
    raw_user_text: str
    created_at: str

    @property
    def digest(self) -> str:
        return jsoncanon.digest(self.to_dict())

    @property
    def target_language(self) -> str:
        return self.answers.get("target_language", "python")

    def metric_vocabulary(self) -> list[str]:
        raw = self.answers.get("metrics", "")
        return [m.strip() for m in raw.split(",") if m.strip()]

    def render_text(self, template: RequirementTemplate | None = None) -> str:
        """Structured block interpolated into prompts."""
        order = (
            [f.name for f in template.fields]
            if template
            else sorted(self.answers)
        )
        lines = [f"Task: {self.task_kind}"]
        for name in order:
            if name in self.answers:
                label = name.replace("_", " ").capitalize()
                lines.append(f"{label}: {self.answers[name]}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "task_kind": self.task_kind,
            "answers": dict(self.answers),
            "raw_user_text": self.raw_user_text,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "StructuredRequirement":
        return cls(
            task_kind=raw["task_kind"],
            answers=dict(raw["answers"]),
            raw_user_text=raw.get("raw_user_text", ""),
            created_at=raw.get("created_at", ""),
        )

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: Path) -> "StructuredRequirement":
        return cls.from_dict(json.loads(Path(path).read_text()))


def classify_task(text: str, gateway=None) -> str:
    lowered = text.lower()
    hits = {kind for token, kind in _TASK_KEYWORDS if token in lowered}
    if len(hits) == 1:
        return hits.pop()
    if gateway is None:
        raise UnrecognizedTask(f"cannot classify task from: {text[:80]!r}")
    from .prompts import render_prompt  # local import; avoids a module cycle

    env = render_prompt("classify", text, {"choices": ", ".join(TASK_KINDS)})
    answer = gateway.complete(env).text.strip().lower()
    for kind in TASK_KINDS:
        if kind in answer:
            return kind
    raise UnrecognizedTask(f"classifier abstained on: {text[:80]!r}")


def parse_intent(
    text: str,
    gateway=None,
    templates_dir: Path | str | None = None,
) -> DraftRequirement:
    """Extract task kind and any recognizable field answers from free text."""
    if not text or not text.strip():
        raise EmptyInput("requirement text is empty")
    text = text.strip()
    task_kind = classify_task(text, gateway)
    template = load_template(task_kind, templates_dir)
    draft = DraftRequirement(
        task_kind=task_kind,
        template=template,
        raw_user_text=text,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    draft.answers["objective"] = text
    lowered = " " + text.lower()
    field_names = {f.name for f in template.fields}
    for token, name, value in _FIELD_KEYWORDS:
        if name in field_names and name not in draft.answers and token in lowered:
            spec = template.field_spec(name)
            if spec.allowed_values is None or value in spec.allowed_values:
                draft.answers[name] = value
    return draft


def _validate_answer(spec: FieldSpec, answer: str) -> str:
    answer = answer.strip()
    if not answer:
        raise ValidationFailed(spec.name, "empty answer")
    if spec.value_kind == "enum_choice":
        if spec.allowed_values and answer not in spec.allowed_values:
            raise ValidationFailed(
                spec.name, f"{answer!r} not in {list(spec.allowed_values)}"
            )
    elif spec.value_kind == "numeric_with_unit":
        if not _NUMERIC_WITH_UNIT.match(answer):
            raise ValidationFailed(spec.name, f"{answer!r} is not '<number> <unit>'")
    elif spec.value_kind == "metric_list":
        names = [m.strip() for m in answer.split(",") if m.strip()]
        if not names:
            raise ValidationFailed(spec.name, "no metric names given")
        for name in names:
            if not _METRIC_NAME.match(name):
                raise ValidationFailed(spec.name, f"bad metric name {name!r}")
        answer = ", ".join(names)
    return answer


def apply_answer(draft: DraftRequirement, field_name: str, answer: str) -> DraftRequirement:
    spec = draft.template.field_spec(field_name)  # raises UnknownField
    draft.answers[field_name] = _validate_answer(spec, answer)
    return draft


def generate_followup(draft: DraftRequirement, field_name: str, gateway) -> str:
    """Targeted question for one unresolved field."""
    if field_name not in draft.unresolved:
        raise FieldAlreadyResolved(f"field {field_name!r} is already answered")
    spec = draft.template.field_spec(field_name)
    from .prompts import render_prompt

    env = render_prompt(
        "followup",
        draft.raw_user_text,
        {"field": spec.name, "description": spec.description},
    )
    question = gateway.complete(env).text.strip()
    if spec.description.lower() not in question.lower():
        # The question must surface what is being asked for, whatever the
        # model said; append the canonical phrasing.
        question = f"{question} Please specify the {spec.description}."
    return question


def finalize(draft: DraftRequirement) -> StructuredRequirement:
    missing = draft.unresolved
    if missing:
        raise Unresolved(missing)
    return StructuredRequirement(
        task_kind=draft.task_kind,
        answers=dict(draft.answers),
        raw_user_text=draft.raw_user_text,
        created_at=draft.created_at,
    )


class ElicitationSession:
    """Multi-round elicitation with a hard follow-up cap."""

    def __init__(self, text: str, gateway=None, templates_dir=None):
        self.gateway = gateway
        self.draft = parse_intent(text, gateway, templates_dir)
        self.rounds = 0

    def next_field(self) -> str | None:
        pending = self.draft.unresolved
        if not pending:
            return None
        for spec in self.draft.template.fields:  # stable template order
            if spec.name in pending:
                return spec.name
        return None

    def ask(self, field_name: str) -> str:
        if self.rounds >= ELICITATION_ROUND_CAP:
            raise Unresolved(self.draft.unresolved)
        self.rounds += 1
        return generate_followup(self.draft, field_name, self.gateway)

    def answer(self, field_name: str, value: str) -> None:
        apply_answer(self.draft, field_name, value)

    def finalize(self) -> StructuredRequirement:
        return finalize(self.draft)
