"""Exception hierarchy shared by every pipeline stage.

Exit-code contract: 0 success, 2 validation failure, 3 backend error,
4 deployment rejection. Each class carries its default code; the CLI maps
stage-tagged errors raised during deployment to 4 regardless of class.
"""

from __future__ import annotations


class AutoranError(Exception):
    exit_code = 2


# --- requirements ---

class EmptyInput(AutoranError):
    pass


class UnrecognizedTask(AutoranError):
    pass


class FieldAlreadyResolved(AutoranError):
    pass


class UnknownField(AutoranError):
    pass


class ValidationFailed(AutoranError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"invalid answer for {field!r}: {reason}")
        self.field = field
        self.reason = reason


class Unresolved(AutoranError):
    def __init__(self, fields):
        self.fields = sorted(fields)
        super().__init__("unresolved required fields: " + ", ".join(self.fields))


# --- knowledge ---

class KeywordParseError(AutoranError):
    pass


# --- llm gateway ---

class BackendError(AutoranError):
    exit_code = 3


class ScriptExhausted(BackendError):
    def __init__(self, stage: str):
        super().__init__(f"mock script has no more responses for stage {stage!r}")
        self.stage = stage


class ScriptMismatch(BackendError):
    def __init__(self, stage: str, expected_key: str):
        super().__init__(
            f"mock script entry for stage {stage!r} requires {expected_key!r} in the prompt"
        )
        self.stage = stage
        self.expected_key = expected_key


class HttpError(BackendError):
    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"chat backend returned HTTP {status}: {detail}")
        self.status = status


class BackendTimeout(BackendError):
    pass


class TranscriptMismatch(BackendError):
    pass


class MissingSlot(AutoranError):
    def __init__(self, name: str):
        super().__init__(f"prompt template slot {name!r} was not provided")
        self.name = name


# --- codegen ---

class OutlineParseError(AutoranError):
    pass


class ChainViolation(AutoranError):
    pass


class MissingExpansion(AutoranError):
    def __init__(self, step_index: int):
        super().__init__(f"design has no expansion for outline step {step_index}")
        self.step_index = step_index


class UnknownMetric(AutoranError):
    def __init__(self, name: str):
        super().__init__(f"metric {name!r} is not in the requirement's input vocabulary")
        self.name = name


class PlaceholderDetected(AutoranError):
    pass


class EmptyResponse(AutoranError):
    pass


class BudgetExhausted(AutoranError):
    def __init__(self, trace):
        super().__init__(f"repair budget exhausted after {len(trace.entries)} iterations")
        self.trace = trace


class NoSuccessfulVariant(AutoranError):
    pass


# --- sandbox ---

class InterpreterMissing(AutoranError):
    pass


class ScratchSetupFailed(AutoranError):
    pass


class SandboxUnavailable(AutoranError):
    pass


class MetricsMissing(AutoranError):
    pass


class MetricsInconsistent(AutoranError):
    pass


# --- synthesis ---

class SlotUnfilled(AutoranError):
    def __init__(self, name: str):
        super().__init__(f"template slot {name!r} was left unfilled")
        self.name = name


class MetricUnconsumed(AutoranError):
    def __init__(self, name: str):
        super().__init__(f"subscribed metric {name!r} is never referenced by the xApp source")
        self.name = name


class GranularityMismatch(AutoranError):
    def __init__(self, metric: str, wanted: str, available):
        avail = ", ".join(sorted(available)) if available else "none"
        super().__init__(
            f"metric {metric!r}: wanted granularity {wanted!r}, node exposes {avail}"
        )
        self.metric = metric
        self.wanted = wanted
        self.available = set(available)


class CheckerCrashed(AutoranError):
    pass


# --- ric sim / deployment ---

class DeploymentRejected(AutoranError):
    exit_code = 4


class StaticCheckFailed(DeploymentRejected):
    pass


class DuplicateName(DeploymentRejected):
    pass


class PeriodOutOfRange(DeploymentRejected):
    pass


class UnknownAction(DeploymentRejected):
    pass


class InvalidParams(DeploymentRejected):
    pass


class BudgetViolation(DeploymentRejected):
    pass


class ProtocolError(AutoranError):
    pass


class ProtocolVersionMismatch(ProtocolError):
    pass


class StreamClosed(AutoranError):
    pass


# --- pipeline ---

class PipelineError(AutoranError):
    """Wraps a stage failure so reports and exit codes can name the stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause

    @property
    def exit_code(self):  # type: ignore[override]
        if self.stage in ("deploy", "register", "subscribe"):
            return 4
        if isinstance(self.cause, (BackendError, DeploymentRejected, PipelineError)):
            return self.cause.exit_code
        return 2
