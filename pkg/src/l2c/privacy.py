"""Linkage-attack risk of released counterfactuals.

Records are grouped into equivalence classes on their quasi-identifiers
(plus the predicted label).  Continuous quasi-identifiers are compared by
bucket, using the schema's edges, and everything else by trimmed string.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .tabular import DatasetSchema, bucketize

LABEL = "predicted_label"
UNVERIFIABLE = "unverifiable"


@dataclass
class EquivalenceClassTable:
    key_features: tuple[str, ...]
    classes: dict[tuple, list[int]]

    @property
    def n_records(self) -> int:
        return sum(len(v) for v in self.classes.values())

    def sizes(self) -> np.ndarray:
        return np.array([len(v) for v in self.classes.values()], dtype=int)

    def size_histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(self.sizes().tolist()).items()))

    def class_of(self) -> np.ndarray:
        """Class number of each record, in class insertion order."""
        out = np.empty(self.n_records, dtype=int)
        for c, idx in enumerate(self.classes.values()):
            out[idx] = c
        return out


def canonical(frame: pd.DataFrame, schema: DatasetSchema, columns) -> pd.DataFrame:
    """Comparable form of ``columns``: bucket labels for continuous features
    with edges, stripped strings otherwise."""
    out = {}
    for c in columns:
        col = frame[c]
        if c in schema.names:
            f = schema.feature(c)
            if f.is_continuous and f.edges is not None:
                idx, _ = bucketize(pd.to_numeric(col).to_numpy(dtype=float), f.edges)
                out[c] = np.asarray(f.level_labels, dtype=object)[idx]
                continue
        out[c] = col.astype(str).str.strip().to_numpy(dtype=object)
    return pd.DataFrame(out, columns=list(columns), index=frame.index)


def _keys(frame: pd.DataFrame, schema: DatasetSchema, columns) -> list[tuple]:
    return list(canonical(frame, schema, columns).itertuples(index=False, name=None))


def key_columns(schema: DatasetSchema, include_label: bool = True) -> tuple[str, ...]:
    qi = schema.quasi_identifiers
    if not qi:
        raise ValueError("schema declares no quasi-identifiers")
    return tuple(qi) + ((LABEL,) if include_label else ())


def build_classes(records: pd.DataFrame, schema: DatasetSchema, include_label: bool = True) -> EquivalenceClassTable:
    cols = key_columns(schema, include_label)
    missing = [c for c in cols if c not in records.columns]
    if missing:
        raise ValueError(f"records lack column(s): {', '.join(missing)}")
    classes: dict[tuple, list[int]] = {}
    for r, key in enumerate(_keys(records, schema, cols)):
        classes.setdefault(key, []).append(r)
    return EquivalenceClassTable(cols, classes)


def one_anonymity(table: EquivalenceClassTable, over: str = "classes") -> float:
    """Share of singleton classes, or with ``over='records'`` the share of
    records that sit alone in their class."""
    sizes = table.sizes()
    if sizes.size == 0:
        return 0.0
    if over == "classes":
        return 100.0 * float((sizes == 1).mean())
    if over == "records":
        return 100.0 * float((sizes == 1).sum()) / float(sizes.sum())
    raise ValueError("over must be 'classes' or 'records'")


def l_diversity_violations(table: EquivalenceClassTable, records: pd.DataFrame, sensitive: str,
                           schema: DatasetSchema) -> float:
    """Share of classes whose records all carry the same sensitive value."""
    if sensitive not in records.columns:
        raise ValueError(f"records lack sensitive column {sensitive!r}")
    vals = canonical(records, schema, [sensitive])[sensitive].to_numpy()
    if not table.classes:
        return 0.0
    bad = sum(len(set(vals[idx])) == 1 for idx in table.classes.values())
    return 100.0 * bad / len(table.classes)


def match_counts(records: pd.DataFrame, attack: pd.DataFrame, schema: DatasetSchema) -> np.ndarray:
    """Number of attack-set records sharing each released record's QI tuple."""
    cols = key_columns(schema, include_label=False)
    for c in cols:
        if c not in attack.columns:
            raise ValueError(f"attack dataset is missing quasi-identifier column {c!r}")
        if c not in records.columns:
            raise ValueError(f"records lack quasi-identifier column {c!r}")
    counts = Counter(_keys(attack, schema, cols))
    return np.array([counts.get(k, 0) for k in _keys(records, schema, cols)], dtype=int)


def one_map(records: pd.DataFrame, attack: pd.DataFrame, schema: DatasetSchema) -> float:
    m = match_counts(records, attack, schema)
    return 100.0 * float((m == 1).mean()) if m.size else 0.0


@dataclass
class FilterResult:
    records: pd.DataFrame
    retention: float
    per_input: dict[int, float]


def k_anonymize_filter(records: pd.DataFrame, table: EquivalenceClassTable, k: int) -> FilterResult:
    """Keep records in classes of size >= k.

    Retention is the share of each input's valid counterfactuals that
    survive, averaged over inputs that had any.  Without ``valid`` or
    ``input_id`` columns every record counts as valid for a single input.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    keep = np.zeros(len(records), dtype=bool)
    for idx in table.classes.values():
        if len(idx) >= k:
            keep[idx] = True
    valid = records["valid"].astype(int).to_numpy() == 1 if "valid" in records else np.ones(len(records), bool)
    ids = records["input_id"].to_numpy() if "input_id" in records else np.zeros(len(records), int)
    per_input = {}
    for i in pd.unique(ids):
        sel = (ids == i) & valid
        if sel.any():
            per_input[int(i)] = 100.0 * float(keep[sel].mean())
    retention = float(np.mean(list(per_input.values()))) if per_input else 0.0
    return FilterResult(records[keep].reset_index(drop=True), retention, per_input)


def privacy_report(records: pd.DataFrame, schema: DatasetSchema, attack: pd.DataFrame | None = None,
                   include_label: bool = True, k: int | None = None, valid_only: bool = False) -> dict:
    """Metrics as a JSON-ready dict.

    1-Map is reported as ``unverifiable`` when no released record matches
    anything in the attack set; that is not the same as zero risk.
    """
    if valid_only and "valid" in records:
        records = records[records["valid"].astype(int) == 1].reset_index(drop=True)
    table = build_classes(records, schema, include_label)
    out = {
        "n_records": int(len(records)),
        "n_classes": len(table.classes),
        "key_features": list(table.key_features),
        "one_anonymity": one_anonymity(table),
        "one_anonymity_records": one_anonymity(table, "records"),
        "class_size_histogram": [[s, n] for s, n in table.size_histogram().items()],
        "one_diversity": {s: l_diversity_violations(table, records, s, schema) for s in schema.sensitive},
    }
    if attack is not None:
        m = match_counts(records, attack, schema)
        if m.size == 0 or not (m > 0).any():
            out["one_map"] = None
            out["one_map_status"] = UNVERIFIABLE
        else:
            out["one_map"] = 100.0 * float((m == 1).mean())
            out["one_map_status"] = "ok"
        out["matched_records"] = int((m > 0).sum())
    if k is not None:
        res = k_anonymize_filter(records, table, k)
        out[f"k{k}_retained_records"] = int(len(res.records))
        out[f"k{k}_validity_retention"] = res.retention
    return out
