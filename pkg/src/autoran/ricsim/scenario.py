"""Scenario definitions: node capabilities, telemetry generators, QoS targets.

Slice response curves (shipped model): throughput_base = thr_coeff * prb_share
and latency_base = max(lat_floor_ms, lat_coeff / prb_share). Telemetry noise
is Gaussian from the pinned SplitMix64 generator, one substream per
(metric, entity), so replays are bit-exact for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import AutoranError
from ..rng import derive

SLICE_CATEGORIES = ("eMBB", "URLLC", "mMTC", "Gaming", "IoT")
GRANULARITIES = ("per_ue", "per_cell", "per_slice")

TICK_FLOOR_MS = 10
TICK_CEIL_MS = 1000


@dataclass(frozen=True)
class MetricCapability:
    name: str
    granularity: str
    unit: str = ""


@dataclass(frozen=True)
class NodeCapability:
    metrics: tuple[MetricCapability, ...]
    control_points: tuple[str, ...] = ()
    cells: tuple[str, ...] = ("cell-1",)
    slices: tuple[str, ...] = ()

    def __post_init__(self):
        names = [m.name for m in self.metrics]
        if len(names) != len(set(names)):
            raise AutoranError("capability metric names must be unique")
        bad = [s for s in self.slices if s not in SLICE_CATEGORIES]
        if bad:
            raise AutoranError(f"unknown slice categories: {bad}")

    def available_granularities(self, name: str) -> set[str]:
        return {m.granularity for m in self.metrics if m.name == name}

    def metric(self, name: str) -> MetricCapability | None:
        for m in self.metrics:
            if m.name == name:
                return m
        return None

    def render(self) -> str:
        lines = ["Metrics:"]
        for m in self.metrics:
            unit = f" [{m.unit}]" if m.unit else ""
            lines.append(f"- {m.name} ({m.granularity}){unit}")
        lines.append("Control points: " + (", ".join(self.control_points) or "none"))
        lines.append("Cells: " + ", ".join(self.cells))
        if self.slices:
            lines.append("Slices: " + ", ".join(self.slices))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "metrics": [
                {"name": m.name, "granularity": m.granularity, "unit": m.unit}
                for m in self.metrics
            ],
            "control_points": list(self.control_points),
            "cells": list(self.cells),
            "slices": list(self.slices),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "NodeCapability":
        return cls(
            metrics=tuple(
                MetricCapability(m["name"], m["granularity"], m.get("unit", ""))
                for m in raw.get("metrics", [])
            ),
            control_points=tuple(raw.get("control_points", [])),
            cells=tuple(raw.get("cells", ["cell-1"])),
            slices=tuple(raw.get("slices", [])),
        )

    @classmethod
    def load(cls, path: Path | str) -> "NodeCapability":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class AnomalyWindow:
    start_ms: int
    end_ms: int
    offset_sigma: float

    def contains(self, t: int) -> bool:
        return self.start_ms <= t < self.end_ms


@dataclass(frozen=True)
class LoadPhase:
    start_ms: int
    end_ms: int
    multiplier: float

    def contains(self, t: int) -> bool:
        return self.start_ms <= t < self.end_ms


@dataclass(frozen=True)
class MetricGen:
    base: float
    noise_std: float
    windows: tuple[AnomalyWindow, ...] = ()
    scope: str = "cell"  # "cell" or "slice"
    kind: str = "generic"  # slice scope: "throughput" | "latency" | "generic"
    unit: str = ""
    load: tuple[LoadPhase, ...] = ()  # optional time-varying base multiplier


@dataclass(frozen=True)
class SliceProfile:
    prb_share: float
    thr_coeff: float = 100.0
    lat_coeff: float = 2.0
    lat_floor_ms: float = 1.0


@dataclass(frozen=True)
class QosTarget:
    metric: str
    op: str  # "<=" or ">="
    value: float

    def met(self, value: float) -> bool:
        return value <= self.value if self.op == "<=" else value >= self.value


def throughput_base(profile: SliceProfile, share: float | None = None) -> float:
    return profile.thr_coeff * (profile.prb_share if share is None else share)


def latency_base(profile: SliceProfile, share: float | None = None) -> float:
    s = profile.prb_share if share is None else share
    return max(profile.lat_floor_ms, profile.lat_coeff / max(s, 1e-6))


@dataclass(frozen=True)
class Scenario:
    duration_ms: int
    tick_ms: int
    seed: int
    metrics: dict[str, MetricGen]
    capability: NodeCapability
    slices: dict[str, SliceProfile] = field(default_factory=dict)
    qos: dict[str, tuple[QosTarget, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not (TICK_FLOOR_MS <= self.tick_ms <= TICK_CEIL_MS):
            raise AutoranError(
                f"tick_ms must be within [{TICK_FLOOR_MS}, {TICK_CEIL_MS}], got {self.tick_ms}"
            )
        for name, gen in self.metrics.items():
            for w in gen.windows:
                if not (0 <= w.start_ms <= w.end_ms <= self.duration_ms):
                    raise AutoranError(
                        f"metric {name!r}: window [{w.start_ms}, {w.end_ms}] outside scenario"
                    )

    @property
    def ticks(self) -> int:
        return self.duration_ms // self.tick_ms

    def to_dict(self) -> dict:
        return {
            "duration_ms": self.duration_ms,
            "tick_ms": self.tick_ms,
            "seed": self.seed,
            "metrics": {
                name: {
                    "base": g.base,
                    "noise_std": g.noise_std,
                    "scope": g.scope,
                    "kind": g.kind,
                    "unit": g.unit,
                    "windows": [
                        {"start_ms": w.start_ms, "end_ms": w.end_ms, "offset_sigma": w.offset_sigma}
                        for w in g.windows
                    ],
                    "load": [
                        {"start_ms": p.start_ms, "end_ms": p.end_ms, "multiplier": p.multiplier}
                        for p in g.load
                    ],
                }
                for name, g in self.metrics.items()
            },
            "capability": self.capability.to_dict(),
            "slices": {
                name: {
                    "prb_share": p.prb_share,
                    "thr_coeff": p.thr_coeff,
                    "lat_coeff": p.lat_coeff,
                    "lat_floor_ms": p.lat_floor_ms,
                }
                for name, p in self.slices.items()
            },
            "qos": {
                name: [{"metric": t.metric, "op": t.op, "value": t.value} for t in targets]
                for name, targets in self.qos.items()
            },
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        metrics = {
            name: MetricGen(
                base=float(g.get("base", 0.0)),
                noise_std=float(g.get("noise_std", 1.0)),
                windows=tuple(
                    AnomalyWindow(int(w["start_ms"]), int(w["end_ms"]), float(w["offset_sigma"]))
                    for w in g.get("windows", [])
                ),
                scope=g.get("scope", "cell"),
                kind=g.get("kind", "generic"),
                unit=g.get("unit", ""),
                load=tuple(
                    LoadPhase(int(p["start_ms"]), int(p["end_ms"]), float(p["multiplier"]))
                    for p in g.get("load", [])
                ),
            )
            for name, g in raw.get("metrics", {}).items()
        }
        slices = {
            name: SliceProfile(
                prb_share=float(p["prb_share"]),
                thr_coeff=float(p.get("thr_coeff", 100.0)),
                lat_coeff=float(p.get("lat_coeff", 2.0)),
                lat_floor_ms=float(p.get("lat_floor_ms", 1.0)),
            )
            for name, p in raw.get("slices", {}).items()
        }
        qos = {
            name: tuple(QosTarget(t["metric"], t["op"], float(t["value"])) for t in targets)
            for name, targets in raw.get("qos", {}).items()
        }
        return cls(
            duration_ms=int(raw["duration_ms"]),
            tick_ms=int(raw["tick_ms"]),
            seed=int(raw.get("seed", 0)),
            metrics=metrics,
            capability=NodeCapability.from_dict(raw.get("capability", {"metrics": []})),
            slices=slices,
            qos=qos,
        )

    @classmethod
    def load(cls, path: Path | str) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


class TelemetryEngine:
    """Per-(metric, entity) value streams; deterministic for a fixed seed."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self._streams: dict[tuple[str, str], object] = {}

    def _stream(self, metric: str, entity: str):
        key = (metric, entity)
        if key not in self._streams:
            self._streams[key] = derive(self.scenario.seed, "scenario", metric, entity)
        return self._streams[key]

    def value(self, metric: str, entity: str, t: int, slice_share: float | None = None):
        """Returns (value, anomalous) for sim time t."""
        gen = self.scenario.metrics[metric]
        base = gen.base
        if gen.scope == "slice" and slice_share is not None:
            profile = self.scenario.slices.get(entity)
            if profile is not None:
                if gen.kind == "throughput":
                    base = throughput_base(profile, slice_share)
                elif gen.kind == "latency":
                    base = latency_base(profile, slice_share)
        for phase in gen.load:
            if phase.contains(t):
                base *= phase.multiplier
                break
        offset = 0.0
        anomalous = False
        for window in gen.windows:
            if window.contains(t):
                offset = window.offset_sigma * gen.noise_std
                anomalous = True
                break
        noise = gen.noise_std * self._stream(metric, entity).next_gauss()
        return round(base + noise + offset, 6), anomalous
