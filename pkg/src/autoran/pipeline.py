"""Full-run orchestration, process metrics, suites and ablation experiments.

Workspace contract: ``runs/<id>/{requirement.json, keywords.json,
retrieval.json, variants/, dist/, scenario/, metrics.json}``. A failed run
never leaves a dist/ package; earlier stage artifacts stay for diagnosis.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from . import codegen, jsoncanon, knowledge, requirements, synthesis
from .codegen import SelectionPolicy, VariantReport
from .errors import (
    AutoranError,
    BudgetExhausted,
    PipelineError,
    StaticCheckFailed,
)
from .gateway import (
    Gateway,
    HttpChatBackend,
    MockScriptBackend,
    Transcript,
    TranscriptReplayBackend,
)
from .knowledge import FixtureFetcher, FixtureSearchClient, HashingEmbedder, KnowledgeStore
from .ricsim import EchoResponder, RicSim, Scenario, score_scenario
from .sandbox import EvalMetrics, Limits, Sandbox

ABLATABLE = ("requirement_refinement", "knowledge_retrieval", "function_design", "validation")

EPOCH_TS = "1970-01-01T00:00:00+00:00"


def fixture_path(relative: str) -> Path:
    return Path(str(resources.files("autoran").joinpath(f"data/fixtures/{relative}")))


@dataclass(frozen=True)
class RawProblem:
    """Unstructured stand-in used when requirement refinement is disabled."""

    text: str
    target_language: str = "javascript"
    task_kind: str = "unstructured"
    answers: dict = field(default_factory=dict)
    created_at: str = EPOCH_TS

    def render_text(self, template=None) -> str:
        return self.text

    def metric_vocabulary(self) -> list[str]:
        return []

    @property
    def digest(self) -> str:
        return jsoncanon.digest_text(self.text)

    def to_dict(self) -> dict:
        return {"task_kind": self.task_kind, "raw_user_text": self.text, "structured": False}

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass
class RunConfig:
    workspace: Path = Path("workspace")
    backend: str = "mock"
    script: Path | None = None
    transcript: Path | None = None
    seed: int = 7
    budget: int = codegen.DEFAULT_ITERATION_BUDGET
    variants: int = codegen.DEFAULT_VARIANT_COUNT
    deploy: bool = False
    scenario: Path | None = None
    capability: Path | None = None
    allowlist: Path | None = None
    search_results: Path | None = None
    docs_dir: Path | None = None
    url_map: Path | None = None
    dataset: dict | None = None
    retrieval_k: int = 4
    primary_metric: str = "f1"
    ablations: frozenset = frozenset()
    templates_dir: Path | None = None
    xapp_templates_dir: Path | None = None
    xapp_name: str | None = None
    run_id: str | None = None
    static_hook: str | None = None
    timeout_s: float = 60.0
    memory_mb: int = 1024
    default_language: str = "javascript"
    suite: Path | None = None

    _PATH_FIELDS = (
        "workspace",
        "script",
        "transcript",
        "scenario",
        "capability",
        "allowlist",
        "search_results",
        "docs_dir",
        "url_map",
        "templates_dir",
        "xapp_templates_dir",
        "suite",
    )

    def __post_init__(self):
        for name in self._PATH_FIELDS:
            value = getattr(self, name)
            if value is not None and not isinstance(value, Path):
                setattr(self, name, Path(value))
        bad = set(self.ablations) - set(ABLATABLE)
        if bad:
            raise AutoranError(f"unknown ablation modules: {sorted(bad)}")
        self.ablations = frozenset(self.ablations)

    @classmethod
    def from_file(cls, path: Path | str, **overrides) -> "RunConfig":
        raw = json.loads(Path(path).read_text())
        base = Path(path).resolve().parent
        for name in cls._PATH_FIELDS:
            if raw.get(name):
                candidate = Path(raw[name])
                raw[name] = candidate if candidate.is_absolute() else base / candidate
        raw.update({k: v for k, v in overrides.items() if v is not None})
        if "ablations" in raw and raw["ablations"] is not None:
            raw["ablations"] = frozenset(raw["ablations"])
        return cls(**raw)

    def with_overrides(self, **overrides) -> "RunConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean)


@dataclass
class RunMetrics:
    synthesis_ms: float
    bugs_total: int
    iterations_to_success: int
    one_shot: bool
    eval: EvalMetrics | None
    latency: dict | None
    package_digest: str | None
    variant_id: str | None
    stage_ms: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = self.iterations_to_success == 1 and self.bugs_total == 0
        if self.one_shot != expected:
            raise AutoranError(
                "one_shot must hold exactly when iterations_to_success == 1 and bugs_total == 0"
            )

    def deterministic_dict(self) -> dict:
        """Everything that is a pure function of (requirement, script, seed)."""
        return {
            "bugs_total": self.bugs_total,
            "iterations_to_success": self.iterations_to_success,
            "one_shot": self.one_shot,
            "eval": self.eval.to_dict() if self.eval else None,
            "package_digest": self.package_digest,
            "variant_id": self.variant_id,
        }

    def to_dict(self) -> dict:
        out = self.deterministic_dict()
        out["synthesis_ms"] = self.synthesis_ms
        out["latency"] = self.latency
        out["stage_ms"] = dict(self.stage_ms)
        return out


@dataclass
class RunResult:
    run_id: str
    run_dir: Path
    metrics: RunMetrics
    package_path: Path | None


def build_gateway(config: RunConfig) -> Gateway:
    if config.transcript and Path(config.transcript).exists():
        backend = TranscriptReplayBackend.from_file(config.transcript)
    elif config.backend == "mock":
        if not config.script:
            raise AutoranError("mock backend requires a script file")
        backend = MockScriptBackend.from_file(config.script)
    elif config.backend == "http":
        backend = HttpChatBackend()
    else:
        raise AutoranError(f"unknown backend {config.backend!r}")
    return Gateway(backend, Transcript())


def _deterministic_clock(config: RunConfig) -> bool:
    return config.backend != "http" or (
        config.transcript is not None and Path(config.transcript).exists()
    )


def ensure_dataset(config: RunConfig, run_dir: Path) -> Path:
    from . import datasets

    spec = config.dataset or {
        "kind": "synthetic_anomaly",
        "samples": 5000,
        "anomaly_rate": 0.05,
        "offset_sigma": 6.0,
    }
    if "path" in spec:
        return Path(spec["path"])
    path = run_dir / "dataset.csv"
    if spec.get("kind", "synthetic_anomaly") == "toy_separable":
        datasets.toy_separable_csv(path)
    else:
        datasets.synth_anomaly_csv(
            path,
            samples=int(spec.get("samples", 5000)),
            anomaly_rate=float(spec.get("anomaly_rate", 0.05)),
            offset_sigma=float(spec.get("offset_sigma", 6.0)),
            seed=int(spec.get("seed", config.seed)),
        )
    return path


class _StageTimer:
    def __init__(self):
        self.stage_ms: dict[str, float] = {}

    def run(self, stage: str, fn):
        started = time.perf_counter()
        try:
            return fn()
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(stage, exc) from exc
        finally:
            self.stage_ms[stage] = self.stage_ms.get(stage, 0.0) + (
                (time.perf_counter() - started) * 1000.0
            )


def _resolve_requirement(source, config: RunConfig, gateway, answers: dict | None):
    if isinstance(source, (requirements.StructuredRequirement, RawProblem)):
        return source
    if isinstance(source, Path):
        return requirements.StructuredRequirement.load(source)
    text = str(source)
    if "requirement_refinement" in config.ablations:
        return RawProblem(text=text, target_language=config.default_language)
    draft = requirements.parse_intent(text, gateway, config.templates_dir)
    for name, value in (answers or {}).items():
        requirements.apply_answer(draft, name, value)
    return requirements.finalize(draft)


def _knowledge_stage(req, config: RunConfig, gateway, run_dir: Path):
    embedder = HashingEmbedder()
    store = KnowledgeStore(config.workspace / "kb")
    keywords = knowledge.extract_keywords(req, gateway)
    (run_dir / "keywords.json").write_text(
        json.dumps([{"task": k.task, "domain": k.domain} for k in keywords], indent=2) + "\n"
    )
    if config.search_results and config.url_map and config.docs_dir:
        client = FixtureSearchClient.from_file(config.search_results)
        url_map = json.loads(Path(config.url_map).read_text())
        fetcher = FixtureFetcher(config.docs_dir, {u: m["file"] for u, m in url_map.items()})
        allowlist = knowledge.load_allowlist(
            config.allowlist or fixture_path("search/allowlist.txt")
        )
        for kw in keywords:
            for url in knowledge.search(kw, allowlist, client):
                meta = url_map.get(url)
                if not meta:
                    continue
                knowledge.ingest(
                    fetcher.fetch(url), url, meta.get("category", "oran_background"), store, embedder
                )
    query = " ".join(k.rendered() for k in keywords)
    results = knowledge.retrieve(store, embedder, query, config.retrieval_k)
    (run_dir / "retrieval.json").write_text(
        json.dumps(
            {
                "query": query,
                "results": [
                    {"item_id": r.item_id, "score": r.score, "rank": r.rank} for r in results
                ],
            },
            indent=2,
        )
        + "\n"
    )
    return [store.get(r.item_id) for r in results]


def run_pipeline(source, config: RunConfig, answers: dict | None = None) -> RunResult:
    """Elicit -> retrieve -> generate -> synthesize (-> deploy -> score)."""
    run_id = config.run_id or f"run-{uuid.uuid4().hex[:8]}"
    run_dir = config.workspace / "runs" / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    gateway = build_gateway(config)
    timer = _StageTimer()

    req = timer.run(
        "requirement", lambda: _resolve_requirement(source, config, gateway, answers)
    )
    req.save(run_dir / "requirement.json")
    synthesis_started = time.perf_counter()

    if "knowledge_retrieval" in config.ablations:
        context = []
    else:
        context = timer.run("knowledge", lambda: _knowledge_stage(req, config, gateway, run_dir))

    if "function_design" in config.ablations:
        outline = None
        design = None
    else:
        outline = timer.run(
            "outline", lambda: codegen.generate_outline(req, context, gateway)
        )
        design = timer.run(
            "design", lambda: codegen.expand_design(outline, context, req, gateway)
        )

    sandbox = Sandbox(
        run_dir / "sandbox", Limits(timeout_s=config.timeout_s, memory_mb=config.memory_mb)
    )
    dataset_path = timer.run("dataset", lambda: ensure_dataset(config, run_dir))

    budget = 1 if "validation" in config.ablations else config.budget
    reports: list[VariantReport] = []
    traces: dict[str, codegen.IterationTrace] = {}
    programs: dict[str, codegen.CandidateProgram] = {}

    def _variants_stage():
        for v in range(1, config.variants + 1):
            variant_id = f"v{v}"
            if design is not None:
                prog = codegen.generate_code(design, req, gateway, variant_id)
            else:
                prog = codegen.generate_code(
                    codegen.DetailedDesign(expansions=()), req, gateway, variant_id
                )
            variant_dir = run_dir / "variants" / variant_id
            variant_dir.mkdir(parents=True, exist_ok=True)
            try:
                final_prog, trace = codegen.validate_loop(
                    prog, dataset_path, sandbox, gateway, budget, req
                )
                last = trace.entries[-1]
                reports.append(
                    VariantReport(
                        variant_id=variant_id,
                        eval=EvalMetrics.from_dict(last.metrics or {}),
                        resource={
                            "peak_memory_mb": last.peak_memory_mb,
                            "wall_ms": last.wall_ms,
                        },
                    )
                )
                programs[variant_id] = final_prog
                traces[variant_id] = trace
                source_name = f"program.{'js' if final_prog.language == 'javascript' else 'py'}"
                (variant_dir / source_name).write_text(final_prog.source_text)
            except BudgetExhausted as exc:
                traces[variant_id] = exc.trace
                last = exc.trace.entries[-1]
                reports.append(
                    VariantReport(
                        variant_id=variant_id,
                        eval=None,
                        resource={
                            "peak_memory_mb": last.peak_memory_mb,
                            "wall_ms": last.wall_ms,
                        },
                    )
                )
            traces[variant_id].save(variant_dir / "trace.json")
        winner = codegen.select_best(reports, SelectionPolicy(config.primary_metric))
        (run_dir / "variants" / "reports.json").write_text(
            json.dumps([r.to_dict() for r in reports], indent=2) + "\n"
        )
        return winner

    winner_id = timer.run("validate", _variants_stage)
    winner_prog = programs[winner_id]
    winner_trace = traces[winner_id]
    bugs_total = sum(t.bugs_total for t in traces.values())
    iterations = winner_trace.iterations
    one_shot = iterations == 1 and bugs_total == 0

    def _synthesis_stage():
        capability_path = config.capability or fixture_path("capabilities/cell_node.json")
        from .ricsim.scenario import NodeCapability

        caps = NodeCapability.load(capability_path)
        template = synthesis.XAppTemplate.load(
            getattr(req, "target_language", config.default_language), config.xapp_templates_dir
        )
        bindings = synthesis.match_interfaces(req, context, caps, gateway)
        created_at = req.created_at if _deterministic_clock(config) else ""
        pkg = synthesis.integrate(
            winner_prog,
            bindings,
            template,
            gateway,
            req,
            name=config.xapp_name,
            created_at=created_at,
        )
        report = synthesis.static_check(pkg, sandbox, hook_cmd=config.static_hook)
        if not report.passed:
            (run_dir / "static_report.json").write_text(
                json.dumps(report.to_dict(), indent=2) + "\n"
            )
            raise StaticCheckFailed(
                "package failed static validation: "
                + "; ".join(f.message for f in report.findings if f.severity == "error")
            )
        dist_path = synthesis.write_package(pkg, report, run_dir / "dist")
        return pkg, report, dist_path

    pkg, static_report, dist_path = timer.run("synthesis", _synthesis_stage)
    synthesis_ms = (time.perf_counter() - synthesis_started) * 1000.0
    digest = synthesis.package_digest(dist_path)

    latency_summary = None
    eval_metrics = EvalMetrics.from_dict(winner_trace.entries[-1].metrics or {})
    if config.deploy:
        def _deploy_stage():
            scenario_path = config.scenario or fixture_path("scenarios/golden_anomaly.json")
            scenario = Scenario.load(scenario_path)
            sim = RicSim(scenario)
            handle = sim.register_xapp(pkg, static_report, responder=EchoResponder())
            subs = pkg.bindings.subscribed_metrics
            if subs:
                sim.subscribe(
                    handle,
                    [s.name for s in subs],
                    subs[0].granularity,
                    subs[0].period_ms,
                )
            result = sim.run_scenario([handle])
            result.save(run_dir / "scenario")
            scores = score_scenario(result, scenario)
            (run_dir / "scenario" / "scores.json").write_text(
                json.dumps(scores, indent=2) + "\n"
            )
            return scores

        scores = timer.run("deploy", _deploy_stage)
        latency_summary = scores.get("latency")

    metrics = RunMetrics(
        synthesis_ms=synthesis_ms,
        bugs_total=bugs_total,
        iterations_to_success=iterations,
        one_shot=one_shot,
        eval=eval_metrics,
        latency=latency_summary,
        package_digest=digest,
        variant_id=winner_id,
        stage_ms=timer.stage_ms,
    )
    (run_dir / "metrics.json").write_text(json.dumps(metrics.to_dict(), indent=2) + "\n")
    if config.transcript and not Path(config.transcript).exists():
        gateway.transcript.save(config.transcript)
    return RunResult(run_id=run_id, run_dir=run_dir, metrics=metrics, package_path=dist_path)


# --- suites and ablations ---

@dataclass
class TrialRecord:
    trial_id: str
    ok: bool
    one_shot: bool
    iterations: int | None
    bugs: int | None
    error_stage: str | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SuiteSummary:
    trials: int
    one_shot_count: int
    success_count: int
    mean_iterations: float | None
    records: list[TrialRecord]

    @property
    def one_shot_rate(self) -> float:
        return self.one_shot_count / self.trials if self.trials else 0.0

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "one_shot_count": self.one_shot_count,
            "one_shot_rate": self.one_shot_rate,
            "success_count": self.success_count,
            "mean_iterations": self.mean_iterations,
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_records(cls, records: list[TrialRecord]) -> "SuiteSummary":
        successes = [r for r in records if r.ok]
        iterations = [r.iterations for r in successes if r.iterations is not None]
        return cls(
            trials=len(records),
            one_shot_count=sum(1 for r in records if r.one_shot),
            success_count=len(successes),
            mean_iterations=(sum(iterations) / len(iterations)) if iterations else None,
            records=records,
        )


def load_suite_spec(path: Path | str) -> list[dict]:
    path = Path(path)
    raw = json.loads(path.read_text())
    trials = []
    for trial in raw["trials"]:
        trial = dict(trial)
        script = Path(trial["script"])
        trial["script"] = script if script.is_absolute() else path.parent / script
        trials.append(trial)
    return trials


def _run_trial(config: RunConfig, label: str, index: int, trial: dict, isolated: bool) -> TrialRecord:
    trial_id = f"{label}-{index:03d}"
    cfg = config.with_overrides(
        script=trial["script"],
        run_id=trial_id,
        seed=config.seed + index,
    )
    if isolated:
        cfg = replace(cfg, workspace=config.workspace / "trials" / trial_id)
    cfg = replace(cfg, suite=None, deploy=False)
    try:
        result = run_pipeline(trial["text"], cfg, trial.get("answers"))
        return TrialRecord(
            trial_id=trial_id,
            ok=True,
            one_shot=result.metrics.one_shot,
            iterations=result.metrics.iterations_to_success,
            bugs=result.metrics.bugs_total,
        )
    except PipelineError as exc:
        return TrialRecord(
            trial_id=trial_id,
            ok=False,
            one_shot=False,
            iterations=None,
            bugs=None,
            error_stage=exc.stage,
        )


def run_suite(
    config: RunConfig,
    trials: int | None = None,
    label: str = "suite",
    parallel: int = 1,
) -> SuiteSummary:
    """n independent pipeline runs with isolated run dirs and script cursors.

    `parallel` > 1 fans trials out over threads, each in its own workspace so
    knowledge-base writers never contend; aggregation is order-independent.
    """
    if not config.suite:
        raise AutoranError("suite config requires a suite file")
    spec = load_suite_spec(config.suite)
    if trials is not None:
        spec = spec[:trials]
    if not spec:
        raise AutoranError("suite must contain at least one trial")
    if parallel <= 1:
        records = [_run_trial(config, label, i, trial, False) for i, trial in enumerate(spec)]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=parallel) as pool:
            futures = [
                pool.submit(_run_trial, config, label, i, trial, True)
                for i, trial in enumerate(spec)
            ]
            records = sorted(
                (f.result() for f in futures), key=lambda record: record.trial_id
            )
    summary = SuiteSummary.from_records(records)
    out_dir = config.workspace / "suites"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{label}.json").write_text(json.dumps(summary.to_dict(), indent=2) + "\n")
    return summary


def run_ablation(config: RunConfig, ablations: list, trials: int | None = None) -> dict:
    """Per-ablation suites plus the full pipeline row; CSV and Markdown output."""
    rows = []
    full = run_suite(config, trials, label="full")
    rows.append(("full", full))
    for ablation in ablations:
        disabled = frozenset(ablation)
        label = "wo_" + "_".join(sorted(a[:1] for a in disabled)) if disabled else "full"
        cfg = config.with_overrides()
        cfg = replace(cfg, ablations=disabled)
        rows.append((label, run_suite(cfg, trials, label=label)))
    header = ["config", "trials", "one_shot_rate", "mean_iterations", "success_count"]
    csv_lines = [",".join(header)]
    md_lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    table_rows = []
    for label, summary in rows:
        mean_it = "" if summary.mean_iterations is None else f"{summary.mean_iterations:.2f}"
        values = [
            label,
            str(summary.trials),
            f"{summary.one_shot_rate:.4f}",
            mean_it,
            str(summary.success_count),
        ]
        csv_lines.append(",".join(values))
        md_lines.append("| " + " | ".join(values) + " |")
        table_rows.append({"config": label, **summary.to_dict()})
    out_dir = config.workspace / "suites"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ablation.csv").write_text("\n".join(csv_lines) + "\n")
    (out_dir / "ablation.md").write_text("\n".join(md_lines) + "\n")
    return {
        "rows": table_rows,
        "csv": "\n".join(csv_lines) + "\n",
        "markdown": "\n".join(md_lines) + "\n",
    }
