"""Simulated near-RT RIC: wire protocol, scenario engine, routing, scoring."""

from .messages import E2Message, MSG_TYPES, decode, encode
from .scenario import (
    AnomalyWindow,
    MetricCapability,
    MetricGen,
    NodeCapability,
    QosTarget,
    Scenario,
    SliceProfile,
    SLICE_CATEGORIES,
    latency_base,
    throughput_base,
)
from .scoring import score_scenario
from .sim import EchoResponder, LoopLatencyRecord, RicSim, ScenarioResult, ThresholdResponder

__all__ = [
    "E2Message",
    "MSG_TYPES",
    "decode",
    "encode",
    "AnomalyWindow",
    "MetricCapability",
    "MetricGen",
    "NodeCapability",
    "QosTarget",
    "Scenario",
    "SliceProfile",
    "SLICE_CATEGORIES",
    "latency_base",
    "throughput_base",
    "score_scenario",
    "EchoResponder",
    "ThresholdResponder",
    "LoopLatencyRecord",
    "RicSim",
    "ScenarioResult",
]
