"""Command-line client for the service app.

Without --server (or AUTORAN_SERVER) the CLI mounts the service in-process
through an ASGI transport, so single-shot usage needs no running daemon while
still exercising the exact HTTP surface.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

EXIT_VALIDATION = 2
EXIT_BACKEND = 3
EXIT_DEPLOYMENT = 4

_STATUS_EXIT = {422: EXIT_VALIDATION, 502: EXIT_BACKEND, 409: EXIT_DEPLOYMENT}


def _client(ctx) -> httpx.Client:
    server = ctx.obj["server"]
    if server:
        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service import create_app

    return TestClient(create_app(ctx.obj["workspace"]), raise_server_exceptions=False)


def _check(resp: httpx.Response) -> dict:
    if resp.status_code < 400:
        return resp.json()
    try:
        detail = resp.json().get("detail", {})
    except Exception:
        detail = {}
    if isinstance(detail, str):
        message, code = detail, _STATUS_EXIT.get(resp.status_code, EXIT_VALIDATION)
    else:
        message = detail.get("message", resp.text)
        code = detail.get("exit_code", _STATUS_EXIT.get(resp.status_code, EXIT_VALIDATION))
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.option("--workspace", default="workspace", show_default=True, help="workspace directory")
@click.option("--server", default=None, envvar="AUTORAN_SERVER", help="remote service URL")
@click.pass_context
def main(ctx, workspace, server):
    """Natural-language xApp synthesis pipeline."""
    ctx.ensure_object(dict)
    ctx.obj["workspace"] = Path(workspace)
    ctx.obj["server"] = server


def _config_overrides(backend, script, transcript, seed, budget, variants, deploy, scenario,
                      capability, run_id):
    overrides = {
        "backend": backend,
        "script": str(script) if script else None,
        "transcript": str(transcript) if transcript else None,
        "seed": seed,
        "budget": budget,
        "variants": variants,
        "deploy": deploy if deploy else None,
        "scenario": str(scenario) if scenario else None,
        "capability": str(capability) if capability else None,
        "run_id": run_id,
    }
    return {k: v for k, v in overrides.items() if v is not None}


@main.command()
@click.argument("text")
@click.option("--out", type=click.Path(), default=None, help="write the finalized requirement here")
@click.pass_context
def elicit(ctx, text, out):
    """Interactively refine TEXT into a structured requirement (answers on stdin)."""
    with _client(ctx) as client:
        state = _check(client.post("/elicit/sessions", json={"text": text}))
        session_id = state["session_id"]
        click.echo(f"task kind: {state['task_kind']}")
        while state["unresolved"]:
            if state["next_question"] is None:
                _check(
                    client.post(f"/elicit/sessions/{session_id}/finalize")
                )  # surface Unresolved through the service error path
                break
            click.echo(state["next_question"])
            answer = click.prompt(state["next_field"])
            state = _check(
                client.post(
                    f"/elicit/sessions/{session_id}/answers",
                    json={"field": state["next_field"], "answer": answer},
                )
            )
        final = _check(client.post(f"/elicit/sessions/{session_id}/finalize"))
        if out:
            Path(out).write_text(json.dumps(final["requirement"], indent=2) + "\n")
            click.echo(f"wrote {out}")
        else:
            click.echo(json.dumps(final["requirement"], indent=2))


@main.command()
@click.argument("text", required=False)
@click.option("--requirement", type=click.Path(exists=True), help="finalized requirement JSON")
@click.option("--config", "config_path", type=click.Path(exists=True), help="run config JSON")
@click.option("--backend", type=click.Choice(["mock", "http"]), default=None)
@click.option("--script", type=click.Path(exists=True), help="mock backend script")
@click.option("--transcript", type=click.Path(), help="record to (or replay from) this transcript")
@click.option("--seed", type=int, default=None)
@click.option("--budget", type=int, default=None, help="repair iteration budget")
@click.option("--variants", type=int, default=None)
@click.option("--deploy", is_flag=True, default=False, help="run scenario scoring after packaging")
@click.option("--scenario", type=click.Path(exists=True))
@click.option("--capability", type=click.Path(exists=True))
@click.option("--answer", "answers", multiple=True, help="field=value elicitation answer")
@click.option("--run-id", default=None)
@click.pass_context
def run(ctx, text, requirement, config_path, backend, script, transcript, seed, budget,
        variants, deploy, scenario, capability, answers, run_id):
    """Run the full pipeline for TEXT or a finalized --requirement file."""
    if not text and not requirement:
        click.echo("error: provide TEXT or --requirement", err=True)
        sys.exit(EXIT_VALIDATION)
    answer_map = {}
    for item in answers:
        field, _, value = item.partition("=")
        answer_map[field] = value
    body = {
        "text": text,
        "requirement_path": str(Path(requirement).resolve()) if requirement else None,
        "answers": answer_map or None,
        "config_path": str(Path(config_path).resolve()) if config_path else None,
        "config": _config_overrides(
            backend, script, transcript, seed, budget, variants, deploy, scenario,
            capability, run_id,
        ),
    }
    with _client(ctx) as client:
        result = _check(client.post("/runs", json=body))
    click.echo(json.dumps(result, indent=2))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--trials", type=int, default=None)
@click.option("--label", default="suite", show_default=True)
@click.option("--parallel", type=int, default=1, show_default=True,
              help="fan trials out over this many workers, isolated workspaces")
@click.pass_context
def suite(ctx, config_path, trials, label, parallel):
    """Run the scripted trial suite named by the config."""
    body = {
        "config_path": str(Path(config_path).resolve()),
        "trials": trials,
        "label": label,
        "parallel": parallel,
    }
    with _client(ctx) as client:
        summary = _check(client.post("/suite", json=body))
    click.echo(json.dumps({k: v for k, v in summary.items() if k != "records"}, indent=2))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option(
    "--set",
    "ablation_sets",
    multiple=True,
    help="comma-joined modules to disable for one row; default: each module alone",
)
@click.option("--trials", type=int, default=None)
@click.pass_context
def ablate(ctx, config_path, ablation_sets, trials):
    """Ablation comparison across disabled pipeline modules."""
    ablations = None
    if ablation_sets:
        ablations = [[m.strip() for m in group.split(",") if m.strip()] for group in ablation_sets]
    body = {
        "config_path": str(Path(config_path).resolve()),
        "ablations": ablations,
        "trials": trials,
    }
    with _client(ctx) as client:
        table = _check(client.post("/ablate", json=body))
    click.echo(table["markdown"])


@main.command()
@click.option("--run-id", required=True)
@click.option("--scenario", type=click.Path(exists=True), default=None)
@click.option("--responder", type=click.Choice(["echo", "process"]), default="echo",
              show_default=True, help="echo latency probe, or run the package as a process")
@click.pass_context
def deploy(ctx, run_id, scenario, responder):
    """Deploy a built package against a scenario and score the control loop."""
    body = {
        "run_id": run_id,
        "scenario_path": str(Path(scenario).resolve()) if scenario else None,
        "responder": responder,
    }
    with _client(ctx) as client:
        scores = _check(client.post("/deploy", json=body))
    click.echo(json.dumps(scores, indent=2))


@main.command()
@click.option("--run-id", required=True)
@click.pass_context
def score(ctx, run_id):
    """Show the persisted scenario scores of a deployed run."""
    with _client(ctx) as client:
        scores = _check(client.get(f"/runs/{run_id}/scores"))
    click.echo(json.dumps(scores, indent=2))


@main.command()
@click.pass_context
def report(ctx):
    """Summarize all completed runs in the workspace."""
    with _client(ctx) as client:
        table = _check(client.get("/report"))
    click.echo(table["markdown"])


@main.group()
def sim():
    """Simulator utilities (run directly, not via the service)."""


@sim.command("serve")
@click.option("--scenario", type=click.Path(exists=True), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=0, show_default=True)
@click.option("--realtime", is_flag=True, default=False)
@click.option("--min-xapps", type=int, default=1, show_default=True)
@click.option("--wait", "wait_s", type=float, default=15.0, show_default=True)
def sim_serve(scenario, host, port, realtime, min_xapps, wait_s):
    """Serve one scenario over the wire protocol, then print the scores."""
    from .ricsim.server import serve_scenario

    def announce(bound_host, bound_port):
        click.echo(f"LISTENING {bound_host}:{bound_port}")
        sys.stdout.flush()

    scores = serve_scenario(
        scenario,
        host=host,
        port=port,
        realtime=realtime,
        min_xapps=min_xapps,
        wait_s=wait_s,
        announce=announce,
    )
    click.echo(json.dumps(scores, indent=2))


if __name__ == "__main__":
    main()
