"""HTTP service wrapping the pipeline; the CLI is a thin client of this app."""

from __future__ import annotations

import json
import uuid
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import knowledge, pipeline, requirements, synthesis
from .errors import AutoranError, BackendError, DeploymentRejected, PipelineError
from .knowledge import HashingEmbedder, KnowledgeStore
from .pipeline import RunConfig
from .ricsim import EchoResponder, RicSim, Scenario, score_scenario

SERVICE_VERSION = "0.1.0"


class HealthResponse(BaseModel):
    status: str
    version: str
    workspace: str


class ElicitStartRequest(BaseModel):
    text: str
    templates_dir: str | None = None


class ElicitStateResponse(BaseModel):
    session_id: str
    task_kind: str
    answers: dict[str, str]
    unresolved: list[str]
    next_field: str | None
    next_question: str | None
    rounds: int


class AnswerRequest(BaseModel):
    field: str
    answer: str


class FinalizeResponse(BaseModel):
    requirement: dict
    path: str


class RunRequest(BaseModel):
    text: str | None = None
    requirement: dict | None = None
    requirement_path: str | None = None
    answers: dict[str, str] | None = None
    config_path: str | None = None
    config: dict = Field(default_factory=dict)


class RunResponse(BaseModel):
    run_id: str
    metrics: dict
    package_path: str | None


class SuiteRequest(BaseModel):
    config_path: str
    config: dict = Field(default_factory=dict)
    trials: int | None = None
    label: str = "suite"
    parallel: int = 1


class AblateRequest(BaseModel):
    config_path: str
    config: dict = Field(default_factory=dict)
    ablations: list[list[str]] | None = None
    trials: int | None = None


class RetrieveRequest(BaseModel):
    query: str
    k: int = 5
    category: str | None = None


class DeployRequest(BaseModel):
    run_id: str
    scenario_path: str | None = None
    responder: str = "echo"  # "echo" latency probe, or "process" to run the package


class _Session:
    def __init__(self, text: str, templates_dir=None):
        self.session = requirements.ElicitationSession(text, gateway=None, templates_dir=templates_dir)

    def state(self, session_id: str) -> ElicitStateResponse:
        draft = self.session.draft
        next_field = self.session.next_field()
        question = None
        if next_field is not None and self.session.rounds < requirements.ELICITATION_ROUND_CAP:
            spec = draft.template.field_spec(next_field)
            question = f"Please specify the {spec.description}."
        return ElicitStateResponse(
            session_id=session_id,
            task_kind=draft.task_kind,
            answers=dict(draft.answers),
            unresolved=sorted(draft.unresolved),
            next_field=next_field,
            next_question=question,
            rounds=self.session.rounds,
        )


def _merge_config(workspace: Path, config_path: str | None, overrides: dict) -> RunConfig:
    overrides = dict(overrides)
    overrides.setdefault("workspace", str(workspace))
    if config_path:
        return RunConfig.from_file(config_path, **overrides)
    return RunConfig(**overrides)


def _deploy_as_process(package_dir: Path, pkg, report, scenario: "Scenario"):
    """Run the packaged xApp as its own process against a socket sim."""
    import subprocess
    import threading

    from .ricsim.server import SocketSimServer
    from .sandbox import LANGUAGES

    # the static gate applies to process deployment exactly as it does embedded
    if not report.passed:
        from .errors import StaticCheckFailed

        raise StaticCheckFailed(f"package {pkg.name!r} failed static validation")
    server = SocketSimServer(scenario, wait_s=30.0)
    host, port = server.start()
    box: dict = {}

    def serve():
        box["result"] = server.run()

    thread = threading.Thread(target=serve, daemon=True)
    thread.start()
    source = next(package_dir.glob("xapp.*"))
    argv = list(LANGUAGES[pkg.language]["argv"]) + [str(source), "--endpoint", f"{host}:{port}"]
    proc = subprocess.Popen(
        argv, stdout=subprocess.DEVNULL, stderr=subprocess.PIPE, text=True
    )
    try:
        thread.join(timeout=max(60.0, scenario.duration_ms / 1000.0 + 30.0))
        if thread.is_alive():
            raise AutoranError("scenario did not finish while deploying as a process")
        _, stderr = proc.communicate(timeout=30)
        if proc.returncode != 0:
            raise AutoranError(f"deployed xApp exited {proc.returncode}: {stderr[:300]}")
    finally:
        if proc.poll() is None:
            proc.kill()
        server.close()
    return box["result"]


def create_app(workspace: Path | str = "workspace") -> FastAPI:
    workspace = Path(workspace)
    app = FastAPI(title="autoran", version=SERVICE_VERSION)
    sessions: dict[str, _Session] = {}

    @app.exception_handler(AutoranError)
    async def _autoran_error(request, exc: AutoranError):
        status = 422
        if isinstance(exc, BackendError):
            status = 502
        elif isinstance(exc, DeploymentRejected):
            status = 409
        elif isinstance(exc, PipelineError) and exc.exit_code == 3:
            status = 502
        elif isinstance(exc, PipelineError) and exc.exit_code == 4:
            status = 409
        detail = {
            "error": type(exc).__name__,
            "message": str(exc),
            "exit_code": exc.exit_code,
            "stage": getattr(exc, "stage", None),
        }
        return JSONResponse(status_code=status, content={"detail": detail})

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=SERVICE_VERSION, workspace=str(workspace))

    # --- elicitation ---

    @app.post("/elicit/sessions", response_model=ElicitStateResponse)
    def start_session(req: ElicitStartRequest):
        session_id = uuid.uuid4().hex[:12]
        sessions[session_id] = _Session(req.text, req.templates_dir)
        return sessions[session_id].state(session_id)

    def _session(session_id: str) -> _Session:
        if session_id not in sessions:
            raise HTTPException(status_code=404, detail="no such elicitation session")
        return sessions[session_id]

    @app.get("/elicit/sessions/{session_id}", response_model=ElicitStateResponse)
    def session_state(session_id: str):
        return _session(session_id).state(session_id)

    @app.post("/elicit/sessions/{session_id}/answers", response_model=ElicitStateResponse)
    def answer(session_id: str, req: AnswerRequest):
        holder = _session(session_id)
        holder.session.rounds += 1
        if holder.session.rounds > requirements.ELICITATION_ROUND_CAP:
            raise requirements.Unresolved(holder.session.draft.unresolved)
        holder.session.answer(req.field, req.answer)
        return holder.state(session_id)

    @app.post("/elicit/sessions/{session_id}/finalize", response_model=FinalizeResponse)
    def finalize(session_id: str):
        holder = _session(session_id)
        req = holder.session.finalize()
        out_dir = workspace / "requirements"
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{session_id}.json"
        req.save(path)
        del sessions[session_id]
        return FinalizeResponse(requirement=req.to_dict(), path=str(path))

    # --- pipeline runs ---

    @app.post("/runs", response_model=RunResponse)
    def run(req: RunRequest):
        config = _merge_config(workspace, req.config_path, req.config)
        if req.requirement is not None:
            source = requirements.StructuredRequirement.from_dict(req.requirement)
        elif req.requirement_path:
            source = Path(req.requirement_path)
        elif req.text:
            source = req.text
        else:
            raise HTTPException(status_code=422, detail="provide text, requirement or requirement_path")
        result = pipeline.run_pipeline(source, config, req.answers)
        return RunResponse(
            run_id=result.run_id,
            metrics=result.metrics.to_dict(),
            package_path=str(result.package_path) if result.package_path else None,
        )

    @app.get("/runs")
    def list_runs():
        runs_dir = workspace / "runs"
        out = []
        if runs_dir.exists():
            for run_dir in sorted(runs_dir.iterdir()):
                metrics_path = run_dir / "metrics.json"
                out.append(
                    {
                        "run_id": run_dir.name,
                        "completed": metrics_path.exists(),
                    }
                )
        return {"runs": out}

    @app.get("/runs/{run_id}")
    def run_detail(run_id: str):
        run_dir = workspace / "runs" / run_id
        if not run_dir.exists():
            raise HTTPException(status_code=404, detail="no such run")
        metrics_path = run_dir / "metrics.json"
        metrics = json.loads(metrics_path.read_text()) if metrics_path.exists() else None
        dist = sorted(p.name for p in (run_dir / "dist").glob("*")) if (run_dir / "dist").exists() else []
        return {"run_id": run_id, "metrics": metrics, "packages": dist}

    @app.post("/suite")
    def suite(req: SuiteRequest):
        config = _merge_config(workspace, req.config_path, req.config)
        summary = pipeline.run_suite(config, req.trials, label=req.label, parallel=req.parallel)
        return summary.to_dict()

    @app.post("/ablate")
    def ablate(req: AblateRequest):
        config = _merge_config(workspace, req.config_path, req.config)
        ablations = req.ablations
        if ablations is None:
            ablations = [[module] for module in pipeline.ABLATABLE]
        return pipeline.run_ablation(config, ablations, req.trials)

    # --- knowledge ---

    @app.post("/retrieve")
    def retrieve(req: RetrieveRequest):
        store = KnowledgeStore(workspace / "kb")
        results = knowledge.retrieve(store, HashingEmbedder(), req.query, req.k, req.category)
        return {
            "results": [
                {
                    "item_id": r.item_id,
                    "score": r.score,
                    "rank": r.rank,
                    "category": store.get(r.item_id).category,
                    "source_url": store.get(r.item_id).source_url,
                }
                for r in results
            ]
        }

    # --- deployment & scoring ---

    @app.post("/deploy")
    def deploy(req: DeployRequest):
        run_dir = workspace / "runs" / req.run_id
        dist_root = run_dir / "dist"
        if not dist_root.exists():
            raise HTTPException(status_code=404, detail="run has no dist package")
        package_dir = next(iter(sorted(dist_root.iterdir())), None)
        if package_dir is None:
            raise HTTPException(status_code=404, detail="run has no dist package")
        pkg, report = synthesis.load_package(package_dir)
        scenario_path = req.scenario_path or pipeline.fixture_path("scenarios/golden_anomaly.json")
        scenario = Scenario.load(scenario_path)
        if req.responder == "process":
            result = _deploy_as_process(package_dir, pkg, report, scenario)
        else:
            sim = RicSim(scenario)
            handle = sim.register_xapp(pkg, report, responder=EchoResponder())
            subs = pkg.bindings.subscribed_metrics
            if subs:
                sim.subscribe(
                    handle, [s.name for s in subs], subs[0].granularity, subs[0].period_ms
                )
            result = sim.run_scenario([handle])
        result.save(run_dir / "scenario")
        scores = score_scenario(result, scenario)
        (run_dir / "scenario" / "scores.json").write_text(json.dumps(scores, indent=2) + "\n")
        return scores

    @app.get("/runs/{run_id}/scores")
    def scores(run_id: str):
        path = workspace / "runs" / run_id / "scenario" / "scores.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail="run has no scenario scores; deploy first")
        return json.loads(path.read_text())

    @app.get("/report")
    def report():
        runs_dir = workspace / "runs"
        rows = []
        if runs_dir.exists():
            for run_dir in sorted(runs_dir.iterdir()):
                metrics_path = run_dir / "metrics.json"
                if not metrics_path.exists():
                    continue
                m = json.loads(metrics_path.read_text())
                rows.append(
                    {
                        "run_id": run_dir.name,
                        "one_shot": m.get("one_shot"),
                        "iterations": m.get("iterations_to_success"),
                        "bugs": m.get("bugs_total"),
                        "f1": (m.get("eval") or {}).get("f1"),
                        "synthesis_ms": m.get("synthesis_ms"),
                        "package_digest": (m.get("package_digest") or "")[:12],
                    }
                )
        header = ["run_id", "one_shot", "iterations", "bugs", "f1", "synthesis_ms", "package_digest"]
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        for row in rows:
            lines.append("| " + " | ".join(str(row[h]) for h in header) + " |")
        return {"rows": rows, "markdown": "\n".join(lines) + "\n"}

    return app
