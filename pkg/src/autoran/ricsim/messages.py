"""E2-style message envelopes over newline-delimited JSON.

Envelope fields are exactly {v, type, seq, ts_ms, payload}; the canonical
byte encoding (key order, number formatting) is pinned in docs/protocol.md so
independent implementations round-trip bit-exactly. Unknown payload keys are
preserved; unknown envelope keys are ignored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .. import jsoncanon
from ..errors import ProtocolError, ProtocolVersionMismatch

PROTOCOL_VERSION = 1
MAX_LINE_BYTES = 1024 * 1024

MSG_TYPES = (
    "E2_SETUP",
    "REGISTER",
    "SUBSCRIPTION_REQ",
    "SUBSCRIPTION_RESP",
    "RIC_INDICATION",
    "RIC_CONTROL",
    "CONTROL_ACK",
    "ERROR",
)

ERR_GRANULARITY_MISMATCH = 1001
ERR_UNKNOWN_METRIC = 1002
ERR_PERIOD_OUT_OF_RANGE = 1003
ERR_UNKNOWN_ACTION = 1004
ERR_INVALID_PARAMS = 1005
ERR_BUDGET_VIOLATION = 1006
ERR_CALLBACK_FAILED = 1007


@dataclass(frozen=True)
class E2Message:
    type: str
    seq: int
    ts_ms: int
    payload: dict = field(default_factory=dict)
    v: int = PROTOCOL_VERSION


def encode(msg: E2Message) -> bytes:
    """Canonical single-line encoding, newline terminated."""
    text = (
        '{"v":' + jsoncanon.format_number(msg.v)
        + ',"type":' + json.dumps(msg.type)
        + ',"seq":' + jsoncanon.format_number(msg.seq)
        + ',"ts_ms":' + jsoncanon.format_number(msg.ts_ms)
        + ',"payload":' + jsoncanon.dumps(msg.payload)
        + "}\n"
    )
    data = text.encode("utf-8")
    if len(data) > MAX_LINE_BYTES:
        raise ProtocolError(f"encoded message exceeds {MAX_LINE_BYTES} bytes")
    return data


def decode(line: bytes | str) -> E2Message:
    if isinstance(line, bytes):
        if len(line) > MAX_LINE_BYTES:
            raise ProtocolError(f"line exceeds {MAX_LINE_BYTES} bytes")
        line = line.decode("utf-8")
    line = line.strip()
    if not line:
        raise ProtocolError("empty protocol line")
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed protocol line: {line[:80]!r}") from exc
    if not isinstance(raw, dict):
        raise ProtocolError("protocol line is not a JSON object")
    version = raw.get("v")
    if version != PROTOCOL_VERSION:
        raise ProtocolVersionMismatch(f"unsupported protocol version {version!r}")
    msg_type = raw.get("type")
    if msg_type not in MSG_TYPES:
        raise ProtocolError(f"unknown message type {msg_type!r}")
    payload = raw.get("payload", {})
    if not isinstance(payload, dict):
        raise ProtocolError("payload must be a JSON object")
    return E2Message(
        type=msg_type,
        seq=int(raw.get("seq", 0)),
        ts_ms=int(raw.get("ts_ms", 0)),
        payload=payload,
    )
