#!/usr/bin/env python3
"""Regenerate derived fixtures (mock scripts, filled xApp, protocol goldens).

Sources of truth are the snippet files under data/fixtures/snippets/ and the
xApp template; run this after editing any of them.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

PKG = Path(__file__).resolve().parents[1] / "src"
sys.path.insert(0, str(PKG))

from autoran.ricsim.messages import E2Message, encode  # noqa: E402

DATA = PKG / "autoran" / "data"
FIXTURES = DATA / "fixtures"
SNIPPETS = FIXTURES / "snippets"


def read(name: str) -> str:
    return (SNIPPETS / name).read_text()


def build_filled_xapp() -> str:
    template = (DATA / "templates" / "xapp" / "javascript.tmpl").read_text()
    for slot in (
        "init",
        "config_parser",
        "event_processing",
        "decision_logic",
        "policy_interpretation",
        "control_dispatch",
    ):
        body = (SNIPPETS / "slots" / f"{slot}.js").read_text().rstrip("\n")
        template = template.replace(f"@@SLOT:{slot}@@", body)
    return template


def write_script(name: str, entries: list[dict]) -> None:
    path = FIXTURES / "scripts" / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(entries, indent=2) + "\n")
    print(f"wrote {path}")


def gen_scripts() -> None:
    outline = read("outline.txt")
    design = read("design.txt")
    clean = read("program_clean.js")
    filled = build_filled_xapp()
    bindings = read("bindings.json")
    common_head = [
        {
            "stage": "keywords",
            "match_key": "*",
            "response": "anomaly detection in O-RAN, KPMs in O-RAN",
        },
        {"stage": "outline", "match_key": "*", "response": outline},
        {"stage": "design", "match_key": "*", "response": design},
    ]
    write_script(
        "golden_anomaly.json",
        common_head
        + [
            {
                "stage": "code",
                "match_key": "*",
                "response": "```javascript\n" + clean + "```",
            },
            {"stage": "interface_match", "match_key": "*", "response": bindings},
            {"stage": "integrate", "match_key": "*", "response": filled},
        ],
    )
    write_script(
        "three_fault.json",
        common_head
        + [
            {"stage": "code", "match_key": "*", "response": read("program_fault_syntax.js")},
            {"stage": "repair", "match_key": "*", "response": read("program_fault_reference.js")},
            {"stage": "repair", "match_key": "*", "response": read("program_fault_type.js")},
            {"stage": "repair", "match_key": "*", "response": clean},
            {"stage": "interface_match", "match_key": "*", "response": bindings},
            {"stage": "integrate", "match_key": "*", "response": filled},
        ],
    )
    per_ue_design = design.replace("Features: prb_util, dl_throughput", "Features: dl_throughput")
    write_script(
        "mismatch_per_ue.json",
        [
            common_head[0],
            common_head[1],
            {"stage": "design", "match_key": "*", "response": per_ue_design},
            {"stage": "code", "match_key": "*", "response": clean},
            {
                "stage": "interface_match",
                "match_key": "*",
                "response": read("bindings_per_ue.json"),
            },
        ],
    )
    (FIXTURES / "snippets" / "xapp_filled.js").write_text(filled)
    print("wrote xapp_filled.js")


def gen_protocol() -> None:
    out_dir = FIXTURES / "protocol"
    out_dir.mkdir(parents=True, exist_ok=True)
    handshake = [
        E2Message(
            type="E2_SETUP",
            seq=1,
            ts_ms=0,
            payload={
                "node": "gnb-sim-1",
                "cells": ["cell-1"],
                "metrics": [{"name": "prb_util", "granularity": "per_cell", "unit": "%"}],
            },
        ),
        E2Message(type="REGISTER", seq=1, ts_ms=0, payload={"xapp": "noop-skeleton", "version": "0.1.0"}),
        E2Message(type="REGISTER", seq=2, ts_ms=0, payload={"xapp": "noop-skeleton", "status": "ok"}),
        E2Message(
            type="SUBSCRIPTION_REQ",
            seq=2,
            ts_ms=0,
            payload={"metrics": ["prb_util"], "granularity": "per_cell", "period_ms": 100},
        ),
        E2Message(
            type="SUBSCRIPTION_RESP",
            seq=3,
            ts_ms=0,
            payload={"subscription_id": "sub-1", "metrics": ["prb_util"], "period_ms": 100},
        ),
    ]
    indications = [
        E2Message(
            type="RIC_INDICATION",
            seq=4,
            ts_ms=100,
            payload={
                "subscription_id": "sub-1",
                "cell_id": "cell-1",
                "metrics": {"prb_util": 49.373246, "dl_throughput": 62.0},
                "report_ts_ms": 100,
            },
        ),
        E2Message(
            type="RIC_INDICATION",
            seq=5,
            ts_ms=200,
            payload={
                "subscription_id": "sub-1",
                "cell_id": "cell-1",
                "slice_id": "URLLC",
                "metrics": {"latency_ms": 0.000123, "packet_loss_rate": 0.010511, "active_ues": 123456.789},
                "report_ts_ms": 200,
            },
        ),
    ]
    control = [
        E2Message(
            type="RIC_CONTROL",
            seq=3,
            ts_ms=200,
            payload={
                "action": "flag_anomaly",
                "params": {"cell_id": "cell-1"},
                "correlation": {"seq": 5, "ts_ms": 200},
            },
        ),
        E2Message(
            type="RIC_CONTROL",
            seq=4,
            ts_ms=300,
            payload={
                "action": "prb_realloc",
                "params": {"allocations": {"URLLC": 0.3, "eMBB": 0.35}},
                "correlation": {"seq": 5, "ts_ms": 200},
            },
        ),
        E2Message(type="CONTROL_ACK", seq=6, ts_ms=300, payload={"action": "prb_realloc", "status": "ok"}),
        E2Message(
            type="ERROR",
            seq=7,
            ts_ms=400,
            payload={"code": 1001, "message": "dl_throughput: wanted per_ue, node exposes ['per_cell']"},
        ),
    ]
    for name, messages in (
        ("handshake.jsonl", handshake),
        ("indications.jsonl", indications),
        ("control.jsonl", control),
    ):
        data = b"".join(encode(m) for m in messages)
        (out_dir / name).write_bytes(data)
        print(f"wrote {out_dir / name}")


if __name__ == "__main__":
    gen_scripts()
    gen_protocol()
