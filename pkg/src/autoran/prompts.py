"""Stage prompt templates and envelope rendering.

Each pipeline stage has a fixed instruction block (Target / Rules / Response
Format); the user text interpolates the structured problem statement plus
stage-specific slots. Rendering is pure: identical inputs produce identical
envelopes and digests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import jsoncanon
from .errors import MissingSlot

STAGES = (
    "classify",
    "followup",
    "keywords",
    "search_plan",
    "outline",
    "design",
    "code",
    "repair",
    "interface_match",
    "integrate",
)

DEFAULT_BUDGET = 4096

_SYSTEM_TEXT = {
    "classify": (
        "*Target*\n"
        "Classify the user problem into exactly one supported xApp task kind.\n"
        "*Rules*\n"
        "Answer with a single task kind name from the provided list. "
        "Answer 'unknown' if none fits.\n"
        "*Response Format*\n"
        "task_kind"
    ),
    "followup": (
        "*Target*\n"
        "Ask the user one targeted question that elicits the missing detail "
        "named below.\n"
        "*Rules*\n"
        "Ask a single short question. Mention exactly what is being asked for. "
        "Do not ask about anything else.\n"
        "*Response Format*\n"
        "One question."
    ),
    "keywords": (
        "*Target*\n"
        "To effectively understand the user problem, please identify key "
        "concepts that provide essential background knowledge.\n"
        "*Rules*\n"
        "Extract task-related and domain-related keyword phrases from the user "
        "problem. The keyword should contain two parts: the core task or "
        "function, and the domain context. Avoid generic or overly specific "
        "expressions.\n"
        "*Response Format*\n"
        "Term1, Term2, ..."
    ),
    "search_plan": (
        "*Target*\n"
        "To enrich domain knowledge, please search for the fundamental "
        "definitions or background of given terms {...}.\n"
        "*Rules*\n"
        "Prioritize Wikipedia or official sites. Exclude implementation "
        "details. Filter out irrelevant content.\n"
        "*Response Format*\n"
        "URL1, URL2, ..."
    ),
    "outline": (
        "*Target*\n"
        "To address the user problem effectively, please provide an algorithm "
        "outline step by step to solve the user problem based on the "
        "background information.\n"
        "*Rules*\n"
        "Provide a step-by-step algorithm design. Each step should have a "
        "clear goal and describe what actions will be performed. Focus on "
        "input/output relationship between steps.\n"
        "*Response Format*\n"
        "Step 1: [Title] ... ; Step 2: [Title] ... ; ..."
    ),
    "design": (
        "*Target*\n"
        "Expand every outline step with concrete operations, data processing "
        "methods, feature selection strategies, and decision criteria.\n"
        "*Rules*\n"
        "Produce exactly one expansion per outline step. Name features only "
        "from the metrics listed in the user problem. Keep each expansion "
        "implementable without further clarification.\n"
        "*Response Format*\n"
        "Step 1:\nOperations: ...\nData processing: ...\nFeatures: a, b\n"
        "Decision criteria: ...\nStep 2: ..."
    ),
    "code": (
        "*Target*\n"
        "Translate the detailed design into one complete, executable program "
        "that loads the dataset given as its only argument and prints a "
        "single JSON object of evaluation metrics as the final stdout line.\n"
        "*Rules*\n"
        "All code must be complete and self-contained with no placeholders. "
        "Use only the standard runtime of the target language. The final "
        "stdout line must be one JSON object.\n"
        "*Response Format*\n"
        "The full program source."
    ),
    "repair": (
        "*Target*\n"
        "To ensure the generated code is executable and robust, please "
        "analyze the provided output logs {...}, identify the problem, and "
        "modify the code to fix the errors if the compiler or interpreter "
        "cannot successfully run the code.\n"
        "*Rules*\n"
        "The following case is not allowed:\n"
        "# ... (other functions remain unchanged)\n"
        "# ... (same as before)\n"
        "*Response Format*\n"
        "The full corrected program source."
    ),
    "interface_match": (
        "*Target*\n"
        "To ensure the xApp communicates correctly with O-RAN components, "
        "please generate complete and specification-aligned interface "
        "functions by filling in the placeholder sections of the template "
        "code, based on the retrieved domain knowledge and user "
        "requirements.\n"
        "*Rules*\n"
        "- Refer to the knowledge base.\n"
        "- The generated functions should follow the data formats and message "
        "structures defined in O-RAN specifications.\n"
        "- All code must be complete and self-contained.\n"
        "*Examples*\n"
        "A detector over per-cell prb_util and dl_throughput binds "
        "E2SM-KPM subscriptions for exactly those metrics; a scheduler that "
        "reallocates PRBs additionally binds an E2SM-RC prb_realloc action.\n"
        "*Response Format*\n"
        "One JSON object: {\"service_models\": [...], \"subscribed_metrics\": "
        "[{\"name\": ..., \"granularity\": ..., \"period_ms\": ...}], "
        "\"control_actions\": [{\"name\": ..., \"target\": ..., \"params\": "
        "{...}}], \"a1_policies\": [...]}"
    ),
    "integrate": (
        "*Target*\n"
        "To transform the algorithm into a deployable xApp component, please "
        "adapt the code to read real-time E2 KPM inputs, process them with "
        "the existing algorithm logic, and output actionable results to the "
        "RIC system using standardized control message formats.\n"
        "*Rules*\n"
        "- Refer to the knowledge base.\n"
        "- Follow the previous code template {...}.\n"
        "- Avoid any blocking operations.\n"
        "- All code must be complete with no placeholders.\n"
        "*Response Format*\n"
        "The full xApp source with every template slot filled."
    ),
}

# user_text slots each stage requires beyond the problem statement
_REQUIRED_SLOTS = {
    "classify": ("choices",),
    "followup": ("field", "description"),
    "keywords": (),
    "search_plan": ("terms",),
    "outline": (),
    "design": ("outline",),
    "code": ("design",),
    "repair": ("code", "logs"),
    "interface_match": ("capabilities",),
    "integrate": ("template", "code", "bindings"),
}

_SECTION_LABELS = {
    "choices": "Supported task kinds",
    "field": "Missing field",
    "description": "Field description",
    "terms": "Terms",
    "outline": "Algorithm outline",
    "design": "Detailed design",
    "code": "Current program",
    "logs": "Output logs",
    "capabilities": "E2 node capabilities",
    "template": "Code template",
    "bindings": "Interface bindings",
    "violation": "Previous attempt was rejected because",
}


@dataclass(frozen=True)
class PromptEnvelope:
    stage: str
    system_text: str
    user_text: str
    context_items: tuple[str, ...] = ()
    budget: int = DEFAULT_BUDGET

    @property
    def digest(self) -> str:
        return jsoncanon.digest(
            {
                "stage": self.stage,
                "system_text": self.system_text,
                "user_text": self.user_text,
                "context_items": list(self.context_items),
                "budget": self.budget,
            }
        )


@dataclass(frozen=True)
class Completion:
    text: str
    backend_id: str
    latency_ms: float
    stage: str

    def __post_init__(self):
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be >= 0")


def render_prompt(
    stage: str,
    problem,
    extras: dict | None = None,
    context: list | None = None,
    budget: int = DEFAULT_BUDGET,
) -> PromptEnvelope:
    """Build the stage envelope from the problem statement and slot values.

    `problem` is a StructuredRequirement or plain text; `context` is a list of
    knowledge items inlined into the user text.
    """
    if stage not in STAGES:
        raise MissingSlot(f"unknown stage {stage!r}")
    extras = dict(extras or {})
    problem_text = problem if isinstance(problem, str) else problem.render_text()
    parts = [f"*User Problem*\n<user input>{problem_text}</user input>"]
    context_ids: tuple[str, ...] = ()
    if context:
        context_ids = tuple(item.id for item in context)
        blocks = "\n\n".join(item.markdown for item in context)
        parts.append(f"*Background Knowledge*\n{blocks}")
    for name in _REQUIRED_SLOTS[stage]:
        if name not in extras:
            raise MissingSlot(name)
    for name, value in extras.items():
        label = _SECTION_LABELS.get(name, name.replace("_", " ").capitalize())
        parts.append(f"*{label}*\n{value}")
    user_text = "\n\n".join(parts)
    return PromptEnvelope(
        stage=stage,
        system_text=_SYSTEM_TEXT[stage],
        user_text=user_text,
        context_items=context_ids,
        budget=budget,
    )
