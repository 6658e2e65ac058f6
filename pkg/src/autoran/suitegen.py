"""Builder for the scripted reference suite used by ablation experiments.

Construction (25 trials): trials are one-shot clean generations except where
marked. Dependencies are expressed through mock-script match keys, so
disabling a pipeline module makes exactly the dependent trials fail:

* trial 0 keys its code prompt on the structured-requirement block
  ("Objective:") -> fails without requirement refinement;
* trials 2-5 key their outline prompt on a knowledge-base phrase
  ("PRB utilization measures") -> fail without knowledge retrieval;
* trial 6 keys its code prompt on the detailed-design block
  ("Decision criteria:") -> fails without function design;
* trials 23-24 ship one faulty program plus one scripted repair -> they
  succeed at iteration 2 normally and fail terminally without validation.

Full-pipeline arithmetic: 23/25 one-shot.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

TRIALS = 25
R_DEPENDENT = (0,)
K_DEPENDENT = (2, 3, 4, 5)
F_DEPENDENT = (6,)
FAULTY = (23, 24)

R_MARKER = "Objective:"
K_MARKER = "PRB utilization measures"
F_MARKER = "Decision criteria:"

TRIAL_TEXT = "Detect anomalies in O-RAN KPM telemetry and flag the affected cell"
TRIAL_ANSWERS = {
    "input_modality": "kpm",
    "metrics": "prb_util, dl_throughput",
    "temporal_resolution": "100 ms",
    "granularity": "per_cell",
    "output_format": "anomaly_flags",
    "target_language": "javascript",
}


def _snippet(name: str) -> str:
    return (
        resources.files("autoran")
        .joinpath(f"data/fixtures/snippets/{name}")
        .read_text()
    )


def build_reference_suite(directory: Path | str, trials: int = TRIALS) -> Path:
    """Write suite.json plus per-trial scripts; returns the suite file path."""
    directory = Path(directory)
    scripts_dir = directory / "scripts"
    scripts_dir.mkdir(parents=True, exist_ok=True)
    outline = _snippet("outline.txt")
    design = _snippet("design.txt")
    clean = _snippet("program_clean.js")
    faulty = _snippet("program_fault_reference.js")
    bindings = _snippet("bindings.json")
    filled = _snippet("xapp_filled.js")
    spec = {"trials": []}
    for i in range(trials):
        outline_key = K_MARKER if i in K_DEPENDENT else "*"
        if i in R_DEPENDENT:
            code_key = R_MARKER
        elif i in F_DEPENDENT:
            code_key = F_MARKER
        else:
            code_key = "*"
        entries = [
            {
                "stage": "keywords",
                "match_key": "*",
                "response": "anomaly detection in O-RAN, KPMs in O-RAN",
            },
            {"stage": "outline", "match_key": outline_key, "response": outline},
            {"stage": "design", "match_key": "*", "response": design},
            {
                "stage": "code",
                "match_key": code_key,
                "response": faulty if i in FAULTY else clean,
            },
        ]
        if i in FAULTY:
            entries.append({"stage": "repair", "match_key": "*", "response": clean})
        entries.extend(
            [
                {"stage": "interface_match", "match_key": "*", "response": bindings},
                {"stage": "integrate", "match_key": "*", "response": filled},
            ]
        )
        script_path = scripts_dir / f"trial_{i:03d}.json"
        script_path.write_text(json.dumps(entries, indent=2) + "\n")
        spec["trials"].append(
            {
                "text": TRIAL_TEXT,
                "answers": dict(TRIAL_ANSWERS),
                "script": f"scripts/trial_{i:03d}.json",
            }
        )
    suite_path = directory / "suite.json"
    suite_path.write_text(json.dumps(spec, indent=2) + "\n")
    return suite_path


def expected_one_shot_counts(trials: int = TRIALS) -> dict[str, int]:
    """One-shot counts implied by the construction, per configuration."""
    in_range = lambda ids: [i for i in ids if i < trials]  # noqa: E731
    clean = trials - len(in_range(FAULTY))
    return {
        "full": clean,
        "requirement_refinement": clean - len(in_range(R_DEPENDENT)),
        "knowledge_retrieval": clean - len(in_range(K_DEPENDENT)),
        "function_design": clean - len(in_range(F_DEPENDENT)),
        "validation": clean,
    }
