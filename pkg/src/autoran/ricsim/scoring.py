"""Scenario scoring: window-level detection confusion, latency percentiles, QoS."""

from __future__ import annotations

import math

from ..sandbox import EvalMetrics, derive_from_confusion
from .scenario import Scenario
from .sim import ScenarioResult

NEAR_RT_BOUND_MS = 1000.0


def _percentile(sorted_values: list[float], q: float) -> float:
    """Nearest-rank percentile over a non-empty pre-sorted list."""
    rank = max(1, math.ceil(q / 100.0 * len(sorted_values)))
    return sorted_values[rank - 1]


def score_scenario(result: ScenarioResult, scenario: Scenario) -> dict:
    """Confusion over anomaly windows vs flag events, plus latency/QoS summaries.

    Window rule: a flag event inside a window marks that window detected (TP);
    undetected windows are FN; events outside every window are FP.
    """
    windows = sorted(
        {(w.start_ms, w.end_ms) for gen in scenario.metrics.values() for w in gen.windows}
    )
    events = [e["ts_ms"] for e in result.flag_events]
    detected = set()
    false_positives = 0
    for ts in events:
        hit = None
        for window in windows:
            if window[0] <= ts < window[1]:
                hit = window
                break
        if hit is None:
            false_positives += 1
        else:
            detected.add(hit)
    tp = len(detected)
    fn = len(windows) - tp
    confusion = {"tp": tp, "fp": false_positives, "tn": 0, "fn": fn}
    derived = derive_from_confusion(**confusion)
    eval_metrics = EvalMetrics(
        precision=derived.get("precision"),
        recall=derived.get("recall"),
        f1=derived.get("f1"),
        confusion=confusion,
    )
    latencies = sorted(r.latency_ms for r in result.latency_records)
    latency_summary = None
    if latencies:
        latency_summary = {
            "min_ms": latencies[0],
            "p50_ms": _percentile(latencies, 50),
            "p99_ms": _percentile(latencies, 99),
            "max_ms": latencies[-1],
            "count": len(latencies),
        }
    qos = result.qos_series
    return {
        "eval": eval_metrics.to_dict(),
        "latency": latency_summary,
        "qos_satisfaction": qos,
        "qos_mean": (sum(qos) / len(qos)) if qos else None,
        "near_rt_compliant": bool(latencies) and latencies[-1] < NEAR_RT_BOUND_MS,
        "windows": len(windows),
        "flag_events": len(events),
    }
