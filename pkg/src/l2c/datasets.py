"""Bundled datasets: a small synthetic benchmark and the German Credit data."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .tabular import Dataset, DatasetSchema

SYNTHETIC_SCHEMA = {
    "target": "label",
    "features": [
        {"name": "x1", "kind": "continuous", "range": [0.0, 1.0], "bins": [0.0, 0.25, 0.5, 0.75, 1.0]},
        {"name": "x2", "kind": "continuous", "range": [0.0, 1.0], "bins": [0.0, 0.25, 0.5, 0.75, 1.0]},
        {"name": "age", "kind": "continuous", "range": [18.0, 80.0], "monotonic": "non_decreasing",
         "quasi_identifier": True, "bins": [18.0, 30.0, 45.0, 60.0, 80.0]},
        {"name": "group", "kind": "categorical", "levels": ["A", "B", "C"], "mutable": False,
         "quasi_identifier": True},
        {"name": "color", "kind": "categorical", "levels": ["red", "green", "blue", "black"],
         "sensitive": True},
        {"name": "region", "kind": "categorical", "levels": ["north", "south"], "mutable": False,
         "quasi_identifier": True, "sensitive": True},
    ],
}


def synthetic(n: int = 500, seed: int = 0) -> Dataset:
    """Two informative uniform features with label ``x1 + x2 > 1``, plus a
    monotone age, two immutable categoricals and a noise categorical."""
    rng = np.random.default_rng(seed)
    schema = DatasetSchema.from_config(SYNTHETIC_SCHEMA)
    x = rng.uniform(0.0, 1.0, size=(n, 2)).round(4)
    frame = pd.DataFrame({
        "x1": x[:, 0],
        "x2": x[:, 1],
        "age": rng.integers(18, 81, size=n).astype(float),
        "group": rng.choice(["A", "B", "C"], size=n),
        "color": rng.choice(["red", "green", "blue", "black"], size=n),
        "region": rng.choice(["north", "south"], size=n),
    })
    labels = (x[:, 0] + x[:, 1] > 1.0).astype(int)
    return Dataset(schema, frame, labels)


def split(data: Dataset, fractions=(0.64, 0.16, 0.2), seed: int = 0) -> tuple[Dataset, ...]:
    """Shuffle once and cut into consecutive parts with the given fractions."""
    n = len(data)
    order = np.random.default_rng(seed).permutation(n)
    cuts = np.round(np.cumsum(fractions)[:-1] * n).astype(int)
    return tuple(data.subset(np.sort(part)) for part in np.split(order, cuts))


# -- German Credit ---------------------------------------------------------

GERMAN_COLUMNS = [
    "status", "duration", "credit_history", "purpose", "credit_amount", "savings",
    "present_employment", "installment_rate", "personal_status", "other_debtors",
    "present_residence", "property", "age", "installment_plans", "housing",
    "existing_credits", "job", "people_liable", "telephone", "foreign_worker", "credit",
]
GERMAN_NUMERIC = ["duration", "credit_amount", "age"]
GERMAN_ORDINAL = ["installment_rate", "present_residence", "existing_credits", "people_liable"]


def read_german(path: str | Path) -> pd.DataFrame:
    """Raw whitespace-separated file: 20 attributes plus the class (1 good, 2 bad)."""
    df = pd.read_csv(path, sep=r"\s+", header=None, names=GERMAN_COLUMNS, dtype=str)
    if df.shape[1] != 21 or df.isna().any().any():
        raise ValueError(f"{path}: expected 21 whitespace-separated columns")
    return df


def german_schema(frame: pd.DataFrame) -> dict:
    """Schema config for the German Credit frame.

    Ordinal integer attributes are treated as categorical levels in sorted
    order so that monotone constraints compare level indices.
    """
    immutable = {"foreign_worker", "people_liable", "personal_status", "purpose"}
    non_decreasing = {"age", "present_employment", "present_residence", "duration"}
    qi = {"age", "job", "foreign_worker", "personal_status", "present_employment",
          "present_residence", "property", "housing"}
    sensitive = {"credit_amount", "savings"}
    feats = []
    for c in GERMAN_COLUMNS[:-1]:
        f = {"name": c}
        if c in GERMAN_NUMERIC:
            v = frame[c].astype(float)
            f.update(kind="continuous", range=[float(v.min()), float(v.max())])
        else:
            vals = sorted(frame[c].unique(), key=lambda s: (len(s), s))
            f.update(kind="categorical", levels=vals)
        f["mutable"] = c not in immutable
        if c in non_decreasing:
            f["monotonic"] = "non_decreasing"
        f["quasi_identifier"] = c in qi
        f["sensitive"] = c in sensitive
        feats.append(f)
    return {
        "target": "credit",
        "features": feats,
        "correlations": [{"parent": "present_residence", "child": "age"}],
    }


def german_dataset(path: str | Path) -> Dataset:
    """German Credit as a Dataset; label 1 means good credit."""
    raw = read_german(path)
    schema = DatasetSchema.from_config(german_schema(raw))
    frame = raw[GERMAN_COLUMNS[:-1]].copy()
    for c in GERMAN_NUMERIC:
        frame[c] = frame[c].astype(float)
    labels = (raw["credit"] == "1").astype(int).to_numpy()
    return Dataset(schema, frame, labels)


def write_schema(schema_cfg: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(schema_cfg, indent=2) + "\n", encoding="utf-8")
