"""xApp synthesis: interface matching, template filling, static validation."""

from __future__ import annotations

import json
import re
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import jsoncanon
from .codegen import CandidateProgram, extract_code, scan_placeholders
from .errors import (
    AutoranError,
    CheckerCrashed,
    GranularityMismatch,
    MetricUnconsumed,
    PlaceholderDetected,
    SlotUnfilled,
    UnknownMetric,
)
from .prompts import render_prompt
from .sandbox import LANGUAGES, Sandbox

SLOT_NAMES = (
    "init",
    "config_parser",
    "event_processing",
    "decision_logic",
    "policy_interpretation",
    "control_dispatch",
)

SLOT_RE = re.compile(r"@@SLOT:([a-z_]+)@@")

GRANULARITIES = ("per_ue", "per_cell", "per_slice")
SERVICE_MODELS = ("E2SM-KPM", "E2SM-RC")

PACKAGE_VERSION = "0.1.0"


@dataclass(frozen=True)
class XAppTemplate:
    text: str
    language: str

    def __post_init__(self):
        found = SLOT_RE.findall(self.text)
        if sorted(found) != sorted(SLOT_NAMES):
            raise AutoranError(
                f"template must contain each of {SLOT_NAMES} exactly once; found {found}"
            )

    @classmethod
    def load(cls, language: str, templates_dir: Path | str | None = None) -> "XAppTemplate":
        if templates_dir:
            path = Path(templates_dir) / f"{language}.tmpl"
        else:
            path = Path(str(resources.files("autoran").joinpath(f"data/templates/xapp/{language}.tmpl")))
        if not path.exists():
            raise AutoranError(f"no xApp template for language {language!r}")
        return cls(text=path.read_text(), language=language)


@dataclass(frozen=True)
class MetricSubscription:
    name: str
    granularity: str
    period_ms: int

    def to_dict(self) -> dict:
        return {"name": self.name, "granularity": self.granularity, "period_ms": self.period_ms}


@dataclass(frozen=True)
class ControlActionSpec:
    name: str
    target: str
    params: dict

    def to_dict(self) -> dict:
        return {"name": self.name, "target": self.target, "params": dict(self.params)}


@dataclass(frozen=True)
class InterfaceBindings:
    service_models: tuple[str, ...]
    subscribed_metrics: tuple[MetricSubscription, ...]
    control_actions: tuple[ControlActionSpec, ...]
    a1_policies: tuple[dict, ...] = ()

    def to_dict(self) -> dict:
        return {
            "service_models": list(self.service_models),
            "subscribed_metrics": [m.to_dict() for m in self.subscribed_metrics],
            "control_actions": [a.to_dict() for a in self.control_actions],
            "a1_policies": [dict(p) for p in self.a1_policies],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "InterfaceBindings":
        subs = tuple(
            MetricSubscription(
                name=m["name"],
                granularity=m["granularity"],
                period_ms=int(m["period_ms"]),
            )
            for m in raw.get("subscribed_metrics", [])
        )
        actions = tuple(
            ControlActionSpec(
                name=a["name"], target=a.get("target", ""), params=dict(a.get("params", {}))
            )
            for a in raw.get("control_actions", [])
        )
        # Service models are derivable data: recompute so the invariants hold
        # by construction whatever the model emitted.
        models = []
        if subs:
            models.append("E2SM-KPM")
        if actions:
            models.append("E2SM-RC")
        return cls(
            service_models=tuple(models),
            subscribed_metrics=subs,
            control_actions=actions,
            a1_policies=tuple(dict(p) for p in raw.get("a1_policies", [])),
        )


@dataclass(frozen=True)
class Finding:
    severity: str
    rule: str
    location: str
    message: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class StaticReport:
    findings: tuple[Finding, ...]

    @property
    def passed(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "findings": [f.to_dict() for f in self.findings]}

    @classmethod
    def from_dict(cls, raw: dict) -> "StaticReport":
        return cls(findings=tuple(Finding(**f) for f in raw.get("findings", [])))


@dataclass(frozen=True)
class XAppPackage:
    name: str
    filled_source: str
    bindings: InterfaceBindings
    manifest: dict
    language: str

    def __post_init__(self):
        residual = SLOT_RE.findall(self.filled_source)
        if residual:
            raise SlotUnfilled(residual[0])
        for sub in self.bindings.subscribed_metrics:
            if sub.name not in self.filled_source:
                raise MetricUnconsumed(sub.name)


def match_interfaces(req, knowledge_ctx, node_capabilities, gateway) -> InterfaceBindings:
    """Bind subscriptions/actions consistent with both the requirement and node.

    A granularity the node does not expose is a hard error, never a silent
    downgrade.
    """
    env = render_prompt(
        "interface_match",
        req,
        {"capabilities": node_capabilities.render()},
        context=knowledge_ctx,
    )
    response = gateway.complete(env).text
    raw = _parse_json_response(response)
    bindings = InterfaceBindings.from_dict(raw)
    vocabulary = set(req.metric_vocabulary())
    wanted = req.answers.get("granularity")
    for sub in bindings.subscribed_metrics:
        if vocabulary and sub.name not in vocabulary:
            raise UnknownMetric(sub.name)
        available = node_capabilities.available_granularities(sub.name)
        if not available:
            raise UnknownMetric(sub.name)
        effective = wanted or sub.granularity
        if sub.granularity != effective:
            raise GranularityMismatch(sub.name, effective, {sub.granularity})
        if effective not in available:
            raise GranularityMismatch(sub.name, effective, available)
    for action in bindings.control_actions:
        if action.name not in node_capabilities.control_points:
            raise AutoranError(
                f"control action {action.name!r} is not exposed by the target node"
            )
    return bindings


def _parse_json_response(response: str) -> dict:
    text = extract_code(response).strip()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AutoranError(f"interface bindings are not valid JSON: {text[:120]!r}") from exc
    if not isinstance(raw, dict):
        raise AutoranError("interface bindings must be a JSON object")
    return raw


def integrate(
    prog: CandidateProgram,
    bindings: InterfaceBindings,
    template: XAppTemplate,
    gateway,
    req,
    name: str | None = None,
    created_at: str = "",
) -> XAppPackage:
    """Fill the template with the validated algorithm and interface bindings."""
    env = render_prompt(
        "integrate",
        req,
        {
            "template": template.text,
            "code": prog.source_text,
            "bindings": jsoncanon.dumps(bindings.to_dict()),
        },
    )
    response = gateway.complete(env).text
    filled = extract_code(response)
    residual = SLOT_RE.findall(filled)
    if residual:
        raise SlotUnfilled(residual[0])
    scan_placeholders(filled)
    package_name = name or f"{req.task_kind.replace('_', '-')}-xapp"
    manifest = {
        "version": PACKAGE_VERSION,
        "requirement": req.digest,
        "variant_id": prog.variant_id,
        "created_at": created_at or req.created_at,
    }
    return XAppPackage(
        name=package_name,
        filled_source=filled,
        bindings=bindings,
        manifest=manifest,
        language=template.language,
    )


def load_static_rules(path: Path | str | None = None) -> list[dict]:
    if path is None:
        path = Path(str(resources.files("autoran").joinpath("data/static_rules.json")))
    return json.loads(Path(path).read_text())


def static_check(
    pkg: XAppPackage,
    sandbox: Sandbox,
    hook_cmd: str | None = None,
    rules: list[dict] | None = None,
) -> StaticReport:
    """Built-in rules always run; an external checker hook merges its findings."""
    findings: list[Finding] = []
    parse_log = sandbox.parse_only(pkg.filled_source, pkg.language)
    if parse_log.exit_code != 0:
        first = next(
            (line for line in parse_log.stderr_tail.splitlines() if line.strip()),
            "syntax check failed",
        )
        findings.append(Finding("error", "SYN001", "", first.strip()))
    if SLOT_RE.search(pkg.filled_source):
        findings.append(Finding("error", "TPL001", "", "unfilled template slot"))
    try:
        scan_placeholders(pkg.filled_source)
    except PlaceholderDetected as exc:
        findings.append(Finding("error", "TPL002", "", str(exc)))
    for sub in pkg.bindings.subscribed_metrics:
        if sub.name not in pkg.filled_source:
            findings.append(
                Finding("error", "SUB001", "", f"subscribed metric {sub.name!r} never read")
            )
    for rule in rules if rules is not None else load_static_rules():
        for match in re.finditer(rule["pattern"], pkg.filled_source):
            line = pkg.filled_source.count("\n", 0, match.start()) + 1
            findings.append(
                Finding(rule["severity"], rule["id"], f"xapp:{line}", rule["message"])
            )
    if hook_cmd:
        findings.extend(_run_hook(hook_cmd, pkg))
    return StaticReport(findings=tuple(findings))


def _run_hook(hook_cmd: str, pkg: XAppPackage) -> list[Finding]:
    ext = LANGUAGES[pkg.language]["ext"]
    with tempfile.TemporaryDirectory() as tmp:
        source = Path(tmp) / f"xapp.{ext}"
        source.write_text(pkg.filled_source)
        argv = [part.format(source=str(source)) for part in shlex.split(hook_cmd)]
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=120)
    findings = []
    for line in proc.stdout.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError:
            continue
        findings.append(
            Finding(
                severity=raw.get("severity", "warning"),
                rule=raw.get("rule", "EXT000"),
                location=raw.get("location", ""),
                message=raw.get("message", ""),
            )
        )
    if proc.returncode != 0 and not findings:
        raise CheckerCrashed(
            f"external checker exited {proc.returncode} without parseable findings"
        )
    return findings


def write_package(pkg: XAppPackage, report: StaticReport, dist_root: Path | str) -> Path:
    """Materialize dist/<name>/ atomically (staging dir + rename)."""
    dist_root = Path(dist_root)
    dist_root.mkdir(parents=True, exist_ok=True)
    target = dist_root / pkg.name
    staging = dist_root / f".{pkg.name}.staging"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir()
    ext = LANGUAGES[pkg.language]["ext"]
    (staging / f"xapp.{ext}").write_text(pkg.filled_source)
    (staging / "manifest.json").write_text(jsoncanon.dumps(pkg.manifest) + "\n")
    (staging / "bindings.json").write_text(jsoncanon.dumps(pkg.bindings.to_dict()) + "\n")
    (staging / "static_report.json").write_text(jsoncanon.dumps(report.to_dict()) + "\n")
    if target.exists():
        shutil.rmtree(target)
    staging.rename(target)
    return target


def package_digest(dist_dir: Path | str) -> str:
    """Content hash over the packaged files (names and bytes, sorted)."""
    import hashlib

    dist_dir = Path(dist_dir)
    digest = hashlib.sha256()
    for path in sorted(p for p in dist_dir.rglob("*") if p.is_file()):
        digest.update(path.relative_to(dist_dir).as_posix().encode())
        digest.update(b"\x00")
        digest.update(path.read_bytes())
        digest.update(b"\x01")
    return digest.hexdigest()


def load_package(dist_dir: Path | str) -> tuple[XAppPackage, StaticReport]:
    dist_dir = Path(dist_dir)
    manifest = json.loads((dist_dir / "manifest.json").read_text())
    bindings = InterfaceBindings.from_dict(json.loads((dist_dir / "bindings.json").read_text()))
    report = StaticReport.from_dict(json.loads((dist_dir / "static_report.json").read_text()))
    source_path = next(dist_dir.glob("xapp.*"))
    language = {"py": "python", "js": "javascript"}[source_path.suffix[1:]]
    pkg = XAppPackage(
        name=dist_dir.name,
        filled_source=source_path.read_text(),
        bindings=bindings,
        manifest=manifest,
        language=language,
    )
    return pkg, report
