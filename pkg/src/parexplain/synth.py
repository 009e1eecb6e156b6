"""Synthetic water-tank data with a planted rule and planted violations.

Normal operation follows noise-free relations:

* ``Temperature = 10 + 2 * Heater``
* ``Pump = ON`` iff ``Temperature > 25``
* ``Valve = Open`` iff ``Level > 10`` and ``Pump = ON``; otherwise ``Close``

Anomalies are normal rows that satisfy ``Level > 10`` and ``Pump = ON`` with
the valve forced to ``Close``, violating only the planted rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, Schema, write_csv

WATER_TANK_SCHEMA = Schema.from_pairs(
    [
        ("Level", "numeric"),
        ("Pump", "categorical"),
        ("Valve", "categorical"),
        ("Temperature", "numeric"),
        ("Heater", "numeric"),
    ]
)
LEVEL_CUTOFF = 10.0
SCENARIOS = ("water-tank",)


@dataclass
class SynthData:
    data: Dataset
    labels: np.ndarray
    ground_truth: dict[int, list[str]]

    @property
    def normals(self) -> Dataset:
        return self.data.take(np.flatnonzero(self.labels == 0))

    @property
    def anomalies(self) -> Dataset:
        return self.data.take(np.flatnonzero(self.labels == 1))


def planted_antecedent(level, pump) -> np.ndarray:
    return (np.asarray(level) > LEVEL_CUTOFF) & (np.asarray(pump) == "ON")


def _normal_rows(n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    level = rng.uniform(0.0, 25.0, n)
    heater = rng.uniform(4.0, 14.0, n)
    temperature = 10.0 + 2.0 * heater
    pump = np.where(temperature > 25.0, "ON", "OFF").astype(object)
    valve = np.where(planted_antecedent(level, pump), "Open", "Close").astype(object)
    return {"Level": level, "Pump": pump, "Valve": valve, "Temperature": temperature, "Heater": heater}


def water_tank(rows: int = 1000, anomalies: int = 50, seed: int = 0) -> SynthData:
    """``rows`` total rows, of which ``anomalies`` are planted violations, shuffled."""
    if anomalies < 0 or anomalies > rows:
        raise ValueError(f"anomalies must be in [0, rows], got {anomalies}")
    rng = np.random.default_rng(seed)
    normal = _normal_rows(rows - anomalies, rng)
    # rejection-sample anomaly bases from the planted region
    bad: dict[str, list] = {k: [] for k in normal}
    while len(bad["Level"]) < anomalies:
        batch = _normal_rows(max(4 * anomalies, 16), rng)
        for i in np.flatnonzero(planted_antecedent(batch["Level"], batch["Pump"])):
            if len(bad["Level"]) == anomalies:
                break
            for k in bad:
                bad[k].append(batch[k][i])
    bad["Valve"] = ["Close"] * anomalies
    columns = {
        k: np.concatenate([normal[k], np.array(bad[k], dtype=normal[k].dtype)]) for k in normal
    }
    labels = np.concatenate([np.zeros(rows - anomalies, dtype=np.int64), np.ones(anomalies, dtype=np.int64)])
    order = rng.permutation(rows)
    data = Dataset(WATER_TANK_SCHEMA, {k: v[order] for k, v in columns.items()})
    labels = labels[order]
    truth = {int(i): ["Valve"] for i in np.flatnonzero(labels == 1)}
    return SynthData(data, labels, truth)


def generate(scenario: str, rows: int, anomalies: int, seed: int) -> SynthData:
    if scenario != "water-tank":
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    return water_tank(rows, anomalies, seed)


def write(synth: SynthData, csv_path: str | Path, label_column: str = "label") -> Path:
    """Write the CSV (with a label column) and a ``.truth.json`` sidecar next to it."""
    csv_path = Path(csv_path)
    write_csv(synth.data, csv_path, {label_column: synth.labels})
    sidecar = csv_path.with_suffix(".truth.json")
    payload = {
        "scenario": "water-tank",
        "planted_rule": "Level>10, Pump=ON -> Valve=Open",
        "label_column": label_column,
        "abnormal_features": {str(k): v for k, v in sorted(synth.ground_truth.items())},
    }
    sidecar.write_text(json.dumps(payload, indent=1) + "\n")
    return sidecar
