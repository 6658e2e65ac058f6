"""Embedded near-RT RIC simulator: routing, subscriptions, control actions.

The clock is logical (tick-driven); message timestamps are sim milliseconds,
while loop latencies are wall-clock deltas between indication delivery and the
control that answered it. Both live in the LoopLatencyRecord so percentiles
are meaningful and streams stay deterministic.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .. import jsoncanon
from ..errors import (
    AutoranError,
    BudgetViolation,
    DuplicateName,
    GranularityMismatch,
    InvalidParams,
    PeriodOutOfRange,
    StaticCheckFailed,
    UnknownAction,
    UnknownMetric,
)
from .messages import (
    E2Message,
    ERR_CALLBACK_FAILED,
    ERR_GRANULARITY_MISMATCH,
    ERR_PERIOD_OUT_OF_RANGE,
    ERR_UNKNOWN_METRIC,
)
from .scenario import Scenario, TelemetryEngine

PERIOD_FLOOR_MS = 10
PERIOD_CEIL_MS = 1000
SHARE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class LoopLatencyRecord:
    indication_seq: int
    indication_ts_ms: int
    control_ts_ms: int
    latency_ms: float

    def __post_init__(self):
        if self.latency_ms < 0:
            raise AutoranError("loop latency cannot be negative")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Subscription:
    id: str
    metrics: tuple[str, ...]
    granularity: str
    period_ms: int


@dataclass
class XappHandle:
    name: str
    responder: object | None
    capabilities: dict
    transport: object | None = None  # callable(E2Message) for socket peers
    subscriptions: list[Subscription] = field(default_factory=list)
    alive: bool = True
    crash: dict | None = None

    def subscribed_to(self, metric: str) -> bool:
        return any(metric in sub.metrics for sub in self.subscriptions)


class EchoResponder:
    """Flags every indication; the canonical near-RT latency probe."""

    def on_indication(self, metrics: dict, meta: dict):
        return ("flag_anomaly", {"cell_id": meta.get("cell_id", "")})


class ThresholdResponder:
    """Flags when a watched metric exceeds an absolute threshold."""

    def __init__(self, metric: str, threshold: float):
        self.metric = metric
        self.threshold = threshold

    def on_indication(self, metrics: dict, meta: dict):
        value = metrics.get(self.metric)
        if value is not None and value > self.threshold:
            return ("flag_anomaly", {"cell_id": meta.get("cell_id", "")})
        return None


@dataclass
class ScenarioResult:
    ticks: int
    indications: int
    ground_truth: list[dict]
    latency_records: list[LoopLatencyRecord]
    flag_events: list[dict]
    qos_series: list[float]
    crashes: list[dict]
    delivered: dict[str, list[tuple[str, dict]]]

    def save(self, directory: Path | str) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with (directory / "ground_truth.jsonl").open("w") as fh:
            for row in self.ground_truth:
                fh.write(jsoncanon.dumps(row) + "\n")
        (directory / "latency.json").write_text(
            json.dumps([r.to_dict() for r in self.latency_records], indent=2) + "\n"
        )
        (directory / "flags.json").write_text(json.dumps(self.flag_events, indent=2) + "\n")
        (directory / "qos.json").write_text(json.dumps(self.qos_series) + "\n")


class RicSim:
    """Message-type-keyed routing, per-sender sequence counters, slice state."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.capability = scenario.capability
        self.handles: dict[str, XappHandle] = {}
        self.route_table: dict[str, set[str]] = {}
        self.message_log: list[tuple[str, E2Message]] = []
        self._seqs: dict[str, int] = {}
        self._sub_counter = 0
        self.sim_ts = 0
        self.slice_shares: dict[str, float] = {
            name: profile.prb_share for name, profile in scenario.slices.items()
        }
        self.latency_records: list[LoopLatencyRecord] = []
        self.flag_events: list[dict] = []
        self._pending_wall: dict[tuple[str, int], float] = {}
        self._lock = threading.RLock()

    # --- message plumbing ---

    def _emit(self, sender: str, msg_type: str, payload: dict) -> E2Message:
        with self._lock:
            seq = self._seqs.get(sender, 0) + 1
            self._seqs[sender] = seq
            msg = E2Message(type=msg_type, seq=seq, ts_ms=self.sim_ts, payload=payload)
            self.message_log.append((sender, msg))
            return msg

    def _route(self, msg_type: str, handle_name: str) -> None:
        self.route_table.setdefault(msg_type, set()).add(handle_name)

    def _send_to(
        self, handle: XappHandle, msg_type: str, payload: dict, track_pending: bool = False
    ) -> E2Message:
        """Emit a ric-originated message and push it to a socket peer if any."""
        with self._lock:
            msg = self._emit("ric", msg_type, payload)
            if track_pending:
                self._pending_wall[(handle.name, msg.seq)] = time.perf_counter()
        if handle.transport is not None:
            handle.transport(msg)
        return msg

    # --- registration ---

    def register_xapp(self, pkg, static_report, responder=None, transport=None) -> XappHandle:
        """Deploy a built package; rejected unless its static report passed."""
        if static_report is None or not static_report.passed:
            raise StaticCheckFailed(f"package {pkg.name!r} failed static validation")
        return self._register(
            pkg.name,
            responder,
            {"bindings": pkg.bindings.to_dict(), "manifest": pkg.manifest},
            transport,
        )

    def register_external(
        self, name: str, responder=None, capabilities: dict | None = None, transport=None
    ) -> XappHandle:
        """Wire-level registration used by socket peers and test harnesses."""
        return self._register(name, responder, capabilities or {}, transport)

    def _register(self, name: str, responder, capabilities: dict, transport=None) -> XappHandle:
        with self._lock:
            if name in self.handles:
                raise DuplicateName(f"xApp {name!r} is already registered")
            handle = XappHandle(
                name=name, responder=responder, capabilities=capabilities, transport=transport
            )
            self.handles[name] = handle
            self._emit(name, "REGISTER", {"xapp": name})
            self._send_to(handle, "REGISTER", {"xapp": name, "status": "ok"})
            for msg_type in ("SUBSCRIPTION_RESP", "CONTROL_ACK", "ERROR"):
                self._route(msg_type, name)
            return handle

    # --- subscriptions ---

    def subscribe(self, handle: XappHandle, metrics, granularity: str, period_ms: int) -> str:
        if handle.name not in self.handles:
            raise AutoranError(f"handle {handle.name!r} is not registered")
        metrics = tuple(metrics)
        self._emit(
            handle.name,
            "SUBSCRIPTION_REQ",
            {"metrics": list(metrics), "granularity": granularity, "period_ms": period_ms},
        )
        if not (PERIOD_FLOOR_MS <= period_ms <= PERIOD_CEIL_MS):
            self._send_to(
                handle,
                "ERROR",
                {"code": ERR_PERIOD_OUT_OF_RANGE, "message": f"period {period_ms} ms out of range"},
            )
            raise PeriodOutOfRange(
                f"period {period_ms} ms outside [{PERIOD_FLOOR_MS}, {PERIOD_CEIL_MS}]"
            )
        for name in metrics:
            available = self.capability.available_granularities(name)
            if not available:
                self._send_to(
                    handle,
                    "ERROR",
                    {"code": ERR_UNKNOWN_METRIC, "message": f"unknown metric {name}"},
                )
                raise UnknownMetric(name)
            if granularity not in available:
                self._send_to(
                    handle,
                    "ERROR",
                    {
                        "code": ERR_GRANULARITY_MISMATCH,
                        "message": f"{name}: wanted {granularity}, node exposes {sorted(available)}",
                    },
                )
                raise GranularityMismatch(name, granularity, available)
        with self._lock:
            self._sub_counter += 1
            sub = Subscription(
                id=f"sub-{self._sub_counter}",
                metrics=metrics,
                granularity=granularity,
                period_ms=period_ms,
            )
            handle.subscriptions.append(sub)
            self._route("RIC_INDICATION", handle.name)
            self._send_to(
                handle,
                "SUBSCRIPTION_RESP",
                {"subscription_id": sub.id, "metrics": list(metrics), "period_ms": period_ms},
            )
            return sub.id

    # --- control actions ---

    def apply_control(self, handle: XappHandle, action: str, params: dict, correlation: dict | None = None) -> E2Message:
        self._emit(
            handle.name,
            "RIC_CONTROL",
            {"action": action, "params": params, "correlation": correlation or {}},
        )
        if action not in self.capability.control_points:
            raise UnknownAction(f"action {action!r} not in node control points")
        if action == "prb_realloc":
            self._apply_prb_realloc(params)
        elif action == "flag_anomaly":
            if "cell_id" not in params:
                raise InvalidParams("flag_anomaly requires cell_id")
            # A flag answers a specific indication; score it at that sim time
            # even when the control arrives after the clock has moved on.
            event_ts = self.sim_ts
            if correlation and "ts_ms" in correlation:
                event_ts = int(correlation["ts_ms"])
            self.flag_events.append(
                {"ts_ms": event_ts, "cell_id": params["cell_id"], "xapp": handle.name}
            )
        else:
            raise UnknownAction(f"no semantics shipped for action {action!r}")
        if correlation and "seq" in correlation:
            key = (handle.name, int(correlation["seq"]))
            started = self._pending_wall.pop(key, None)
            if started is not None:
                self.latency_records.append(
                    LoopLatencyRecord(
                        indication_seq=int(correlation["seq"]),
                        indication_ts_ms=int(correlation.get("ts_ms", self.sim_ts)),
                        control_ts_ms=self.sim_ts,
                        latency_ms=(time.perf_counter() - started) * 1000.0,
                    )
                )
        return self._send_to(handle, "CONTROL_ACK", {"action": action, "status": "ok"})

    def _apply_prb_realloc(self, params: dict) -> None:
        """Set explicit shares; scale untouched slices into the remaining budget."""
        if "allocations" in params:
            allocations = params["allocations"]
        elif "slice_id" in params and "prb_share" in params:
            allocations = {params["slice_id"]: params["prb_share"]}
        else:
            raise InvalidParams("prb_realloc requires allocations or slice_id+prb_share")
        if not isinstance(allocations, dict) or not allocations:
            raise InvalidParams("allocations must be a non-empty map")
        for slice_id, share in allocations.items():
            if slice_id not in self.slice_shares:
                raise InvalidParams(f"unknown slice {slice_id!r}")
            share = float(share)
            if not (0.0 <= share <= 1.0):
                raise InvalidParams(f"share {share} for {slice_id!r} outside [0, 1]")
        requested = sum(float(s) for s in allocations.values())
        if requested > 1.0 + SHARE_TOLERANCE:
            raise BudgetViolation(f"requested shares sum to {requested:.3f} > 1")
        with self._lock:
            others = [s for s in self.slice_shares if s not in allocations]
            others_sum = sum(self.slice_shares[s] for s in others)
            remaining = 1.0 - requested
            scale = 1.0 if others_sum <= remaining + SHARE_TOLERANCE else remaining / others_sum
            for slice_id, share in allocations.items():
                self.slice_shares[slice_id] = float(share)
            for slice_id in others:
                self.slice_shares[slice_id] *= scale

    def slice_throughput_base(self, slice_id: str) -> float:
        from .scenario import throughput_base

        return throughput_base(self.scenario.slices[slice_id], self.slice_shares[slice_id])

    def slice_latency_base(self, slice_id: str) -> float:
        from .scenario import latency_base

        return latency_base(self.scenario.slices[slice_id], self.slice_shares[slice_id])

    # --- scenario execution ---

    def run_scenario(
        self, handles: list[XappHandle] | None = None, pace_s: float = 0.0
    ) -> ScenarioResult:
        scenario = self.scenario
        targets = handles if handles is not None else list(self.handles.values())
        if not any(h.subscriptions for h in targets):
            raise AutoranError("run_scenario requires at least one subscription")
        engine = TelemetryEngine(scenario)
        ground_truth: list[dict] = []
        qos_series: list[float] = []
        crashes: list[dict] = []
        delivered: dict[str, list[tuple[str, dict]]] = {h.name: [] for h in targets}
        indications = 0
        metric_names = sorted(scenario.metrics)
        for k in range(1, scenario.ticks + 1):
            if pace_s > 0:
                time.sleep(pace_s)
            t = k * scenario.tick_ms
            self.sim_ts = t
            values: dict[tuple[str, str], tuple[float, bool]] = {}
            for name in metric_names:
                gen = scenario.metrics[name]
                if gen.scope == "slice":
                    entities = list(scenario.slices)
                else:
                    entities = list(self.capability.cells)
                for entity in entities:
                    share = self.slice_shares.get(entity) if gen.scope == "slice" else None
                    value, anomalous = engine.value(name, entity, t, share)
                    values[(name, entity)] = (value, anomalous)
                    ground_truth.append(
                        {
                            "ts_ms": t,
                            "metric": name,
                            "entity": entity,
                            "value": value,
                            "anomalous": anomalous,
                        }
                    )
            if scenario.qos:
                met = 0
                for slice_id, slice_targets in scenario.qos.items():
                    ok = all(
                        target.met(values[(target.metric, slice_id)][0])
                        for target in slice_targets
                        if (target.metric, slice_id) in values
                    )
                    met += 1 if ok else 0
                qos_series.append(met / len(scenario.qos))
            for handle in targets:
                if not handle.alive:
                    continue
                for sub in handle.subscriptions:
                    if t % sub.period_ms != 0:
                        continue
                    if sub.granularity == "per_slice":
                        entities = [("", s) for s in scenario.slices]
                    else:
                        entities = [(c, None) for c in self.capability.cells]
                    for cell_id, slice_id in entities:
                        metrics_map = {}
                        for name in sub.metrics:
                            entity = slice_id if slice_id is not None else cell_id
                            if (name, entity) in values:
                                metrics_map[name] = values[(name, entity)][0]
                        if not metrics_map:
                            continue
                        payload = {
                            "subscription_id": sub.id,
                            "cell_id": cell_id,
                            "metrics": metrics_map,
                            "report_ts_ms": t,
                        }
                        if slice_id is not None:
                            payload["slice_id"] = slice_id
                        msg = self._send_to(handle, "RIC_INDICATION", payload, track_pending=True)
                        indications += 1
                        delivered[handle.name].append((handle.name, payload))
                        if handle.responder is not None:
                            self._deliver(handle, msg, crashes)
        self.sim_ts = scenario.duration_ms
        return ScenarioResult(
            ticks=scenario.ticks,
            indications=indications,
            ground_truth=ground_truth,
            latency_records=list(self.latency_records),
            flag_events=list(self.flag_events),
            qos_series=qos_series,
            crashes=crashes,
            delivered=delivered,
        )

    def _deliver(self, handle: XappHandle, msg: E2Message, crashes: list[dict]) -> None:
        meta = {
            "cell_id": msg.payload.get("cell_id", ""),
            "slice_id": msg.payload.get("slice_id"),
            "seq": msg.seq,
            "ts_ms": msg.ts_ms,
            "subscription_id": msg.payload.get("subscription_id"),
        }
        try:
            action = handle.responder.on_indication(dict(msg.payload.get("metrics", {})), meta)
        except Exception as exc:  # crash is recorded; scenario continues
            handle.alive = False
            handle.crash = {"ts_ms": msg.ts_ms, "error": repr(exc)}
            crashes.append({"xapp": handle.name, **handle.crash})
            self._pending_wall.pop((handle.name, msg.seq), None)
            self._emit(
                "ric",
                "ERROR",
                {"code": ERR_CALLBACK_FAILED, "message": f"xapp {handle.name} crashed"},
            )
            return
        if action is None:
            self._pending_wall.pop((handle.name, msg.seq), None)
            return
        name, params = action
        self.apply_control(
            handle, name, params, correlation={"seq": msg.seq, "ts_ms": msg.ts_ms}
        )
