"""Synthetic labeled KPM datasets honoring the sandbox CSV contract."""

from __future__ import annotations

from pathlib import Path

from .rng import derive

DEFAULT_COLUMNS = ("prb_util", "dl_throughput")
DEFAULT_BASES = {"prb_util": 50.0, "dl_throughput": 120.0}
DEFAULT_NOISE = {"prb_util": 2.0, "dl_throughput": 5.0}


def synth_anomaly_csv(
    path: Path | str,
    samples: int = 5000,
    anomaly_rate: float = 0.05,
    offset_sigma: float = 6.0,
    seed: int = 7,
    columns: tuple[str, ...] = DEFAULT_COLUMNS,
    bases: dict | None = None,
    noise_std: dict | None = None,
) -> list[int]:
    """Gaussian KPM rows with a +offset_sigma shift on anomalous rows.

    Writes header + rows + integer `label` column; returns the label list.
    """
    bases = bases or DEFAULT_BASES
    noise_std = noise_std or DEFAULT_NOISE
    n_anomalies = round(samples * anomaly_rate)
    picker = derive(seed, "dataset", "rows")
    indices = list(range(samples))
    picker.shuffle(indices)
    anomalous = set(indices[:n_anomalies])
    streams = {name: derive(seed, "dataset", "metric", name) for name in columns}
    lines = [",".join(columns) + ",label"]
    labels = []
    for row in range(samples):
        label = 1 if row in anomalous else 0
        labels.append(label)
        cells = []
        for name in columns:
            std = noise_std.get(name, 1.0)
            value = bases.get(name, 0.0) + std * streams[name].next_gauss()
            if label:
                value += offset_sigma * std
            cells.append(f"{round(value, 6)}")
        lines.append(",".join(cells) + f",{label}")
    Path(path).write_text("\n".join(lines) + "\n")
    return labels


def toy_separable_csv(path: Path | str, rows: int = 40, anomalies: int = 8) -> list[int]:
    """Tiny perfectly-separable set: anomalies sit far outside the noise band."""
    stream = derive(1, "dataset", "toy")
    lines = ["prb_util,dl_throughput,label"]
    labels = []
    for i in range(rows):
        label = 1 if i % (rows // anomalies) == 0 else 0
        labels.append(label)
        prb = 50.0 + 0.5 * stream.next_gauss() + (1000.0 if label else 0.0)
        thr = 120.0 + 0.5 * stream.next_gauss() + (1000.0 if label else 0.0)
        lines.append(f"{round(prb, 6)},{round(thr, 6)},{label}")
    Path(path).write_text("\n".join(lines) + "\n")
    return labels
