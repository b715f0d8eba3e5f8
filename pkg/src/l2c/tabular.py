"""Feature schemas, CSV ingestion and one-hot encoding for mixed tabular data.

Continuous features become ordinal categorical features once bucket edges are
attached to them (see :mod:`l2c.discretize`).  Intervals are right-closed,
``(left, right]``, with the first interval also closed on the left.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"
KINDS = (CATEGORICAL, CONTINUOUS)

NONE = "none"
NON_DECREASING = "non_decreasing"
NON_INCREASING = "non_increasing"
MONOTONIC = (NONE, NON_DECREASING, NON_INCREASING)


class SchemaError(ValueError):
    """Invalid schema configuration."""


class DataError(ValueError):
    """A data file does not conform to its schema."""


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    mutable: bool = True
    monotonic: str = NONE
    levels: tuple[str, ...] = ()
    range: tuple[float, float] | None = None
    edges: tuple[float, ...] | None = None
    quasi_identifier: bool = False
    sensitive: bool = False
    mutation_cost: float = 0.0
    bins: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"{self.name}: unknown kind {self.kind!r}")
        if self.monotonic not in MONOTONIC:
            raise SchemaError(f"{self.name}: unknown monotonic constraint {self.monotonic!r}")
        if not 0.0 <= self.mutation_cost <= 1.0:
            raise SchemaError(f"{self.name}: mutation_cost must lie in [0, 1]")
        if self.kind == CATEGORICAL:
            if len(set(self.levels)) != len(self.levels) or len(self.levels) < 2:
                raise SchemaError(f"{self.name}: categorical features need >= 2 distinct levels")
            return
        if self.range is None or not self.range[0] < self.range[1]:
            raise SchemaError(f"{self.name}: continuous features need a range [a, b] with a < b")
        for label, e in (("edges", self.edges), ("bins", self.bins)):
            if e is not None:
                check_edges(e, self.name, label)

    @property
    def is_continuous(self) -> bool:
        return self.kind == CONTINUOUS

    @property
    def discretized(self) -> bool:
        return self.kind == CATEGORICAL or self.edges is not None

    @property
    def n_levels(self) -> int:
        if self.kind == CATEGORICAL:
            return len(self.levels)
        if self.edges is None:
            raise SchemaError(f"{self.name}: continuous feature has no bucket edges yet")
        return len(self.edges) - 1

    @property
    def level_labels(self) -> tuple[str, ...]:
        if self.kind == CATEGORICAL:
            return self.levels
        e = self.edges
        return tuple(f"({_fmt(e[k])}, {_fmt(e[k + 1])}]" for k in range(self.n_levels))

    def to_config(self) -> dict:
        out: dict[str, Any] = {
            "name": self.name,
            "kind": self.kind,
            "mutable": self.mutable,
            "monotonic": self.monotonic,
            "quasi_identifier": self.quasi_identifier,
            "sensitive": self.sensitive,
            "mutation_cost": self.mutation_cost,
        }
        if self.kind == CATEGORICAL:
            out["levels"] = list(self.levels)
        else:
            out["range"] = list(self.range)
            if self.bins is not None:
                out["bins"] = list(self.bins)
        return out


def _fmt(x: float) -> str:
    return f"{x:g}"


def check_edges(edges: Sequence[float], name: str = "?", label: str = "edges") -> None:
    e = np.asarray(edges, dtype=float)
    if e.ndim != 1 or len(e) < 2:
        raise SchemaError(f"{name}: {label} need at least 2 values")
    if not np.all(np.diff(e) > 0):
        raise SchemaError(f"{name}: {label} must be strictly increasing, got {list(edges)}")


@dataclass(frozen=True)
class CorrelationRule:
    """Increasing ``parent`` must not come with a decreasing ``child``."""

    parent: str
    child: str


@dataclass(frozen=True)
class DatasetSchema:
    features: tuple[FeatureSpec, ...]
    target_name: str = "label"
    correlations: tuple[CorrelationRule, ...] = ()

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if self.target_name in names:
            raise SchemaError("target column cannot also be a feature")
        for rule in self.correlations:
            for n in (rule.parent, rule.child):
                if n not in names:
                    raise SchemaError(f"correlation rule references unknown feature {n!r}")

    # -- lookup ---------------------------------------------------------
    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def __len__(self) -> int:
        return len(self.features)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def feature(self, name: str) -> FeatureSpec:
        return self.features[self.index(name)]

    @property
    def continuous(self) -> list[FeatureSpec]:
        return [f for f in self.features if f.is_continuous]

    @property
    def mutable_indices(self) -> list[int]:
        return [i for i, f in enumerate(self.features) if f.mutable]

    @property
    def quasi_identifiers(self) -> list[str]:
        return [f.name for f in self.features if f.quasi_identifier]

    @property
    def sensitive(self) -> list[str]:
        return [f.name for f in self.features if f.sensitive]

    # -- one-hot layout -------------------------------------------------
    @property
    def discretized(self) -> bool:
        return all(f.discretized for f in self.features)

    @property
    def sizes(self) -> list[int]:
        return [f.n_levels for f in self.features]

    @property
    def one_hot_dim(self) -> int:
        return int(sum(self.sizes))

    @property
    def offsets(self) -> list[int]:
        return [0, *np.cumsum(self.sizes).tolist()]

    def block(self, i: int) -> slice:
        off = self.offsets
        return slice(off[i], off[i + 1])

    def with_edges(self, edges: Mapping[str, Sequence[float]]) -> "DatasetSchema":
        feats = []
        for f in self.features:
            if f.is_continuous:
                if f.name not in edges:
                    raise SchemaError(f"no bucket edges for continuous feature {f.name!r}")
                f = replace(f, edges=tuple(float(e) for e in edges[f.name]))
            feats.append(f)
        return replace(self, features=tuple(feats))

    def fingerprint(self) -> str:
        import hashlib

        blob = json.dumps(self.to_config(include_edges=True), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # -- (de)serialization ---------------------------------------------
    def to_config(self, include_edges: bool = False) -> dict:
        feats = []
        for f in self.features:
            c = f.to_config()
            if include_edges and f.edges is not None:
                c["edges"] = list(f.edges)
            feats.append(c)
        out = {"target": self.target_name, "features": feats}
        if self.correlations:
            out["correlations"] = [{"parent": r.parent, "child": r.child} for r in self.correlations]
        return out

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any]) -> "DatasetSchema":
        try:
            feats = tuple(_feature_from_config(f) for f in cfg["features"])
            rules = tuple(
                CorrelationRule(r["parent"], r["child"]) for r in cfg.get("correlations", ())
            )
            return cls(features=feats, target_name=cfg.get("target", "label"), correlations=rules)
        except KeyError as e:
            raise SchemaError(f"schema config missing key {e}") from None


def _feature_from_config(c: Mapping[str, Any]) -> FeatureSpec:
    kind = c["kind"]
    rng = c.get("range")
    return FeatureSpec(
        name=c["name"],
        kind=kind,
        mutable=bool(c.get("mutable", True)),
        monotonic=c.get("monotonic", NONE),
        levels=tuple(str(v) for v in c.get("levels", ())),
        range=(float(rng[0]), float(rng[1])) if rng is not None else None,
        edges=tuple(float(v) for v in c["edges"]) if c.get("edges") is not None else None,
        quasi_identifier=bool(c.get("quasi_identifier", False)),
        sensitive=bool(c.get("sensitive", False)),
        mutation_cost=float(c.get("mutation_cost", 0.0)),
        bins=tuple(float(v) for v in c["bins"]) if c.get("bins") is not None else None,
    )


def load_schema(path: str | Path) -> DatasetSchema:
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path}: invalid JSON ({e})") from None
    return DatasetSchema.from_config(cfg)


@dataclass(frozen=True)
class Dataset:
    """Rows of a tabular dataset in raw form, or in discretized form when
    ``discretized`` is set (continuous columns then hold bucket indices)."""

    schema: DatasetSchema
    frame: pd.DataFrame
    labels: np.ndarray
    discretized: bool = False
    n_clamped: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.frame) != len(self.labels):
            raise DataError("rows and labels differ in length")

    def __len__(self) -> int:
        return len(self.frame)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return replace(
            self, frame=self.frame.iloc[idx].reset_index(drop=True), labels=self.labels[idx]
        )


def validate_frame(frame: pd.DataFrame, schema: DatasetSchema, source: str = "<frame>") -> pd.DataFrame:
    """Coerce columns to schema types, reporting the first offending cell."""
    out = {}
    for f in schema.features:
        if f.name not in frame.columns:
            raise DataError(f"{source}: missing column {f.name!r}")
        col = frame[f.name]
        if f.is_continuous:
            vals = pd.to_numeric(col, errors="coerce")
            bad = vals.isna() & col.notna()
            if bad.any() or col.isna().any():
                r = int(np.flatnonzero(bad | col.isna())[0])
                raise DataError(f"{source}: row {r + 1}, column {f.name!r}: malformed numeric value {col.iloc[r]!r}")
            a, b = f.range
            out_of = (vals < a) | (vals > b)
            if out_of.any():
                r = int(np.flatnonzero(out_of)[0])
                raise DataError(
                    f"{source}: row {r + 1}, column {f.name!r}: value {vals.iloc[r]} outside range [{a:g}, {b:g}]"
                )
            out[f.name] = vals.astype(float)
        else:
            vals = col.astype(str).str.strip()
            known = vals.isin(f.levels)
            if not known.all():
                r = int(np.flatnonzero(~known)[0])
                raise DataError(f"{source}: row {r + 1}, column {f.name!r}: unknown level {vals.iloc[r]!r}")
            out[f.name] = vals
    return pd.DataFrame(out, columns=schema.names)


def load_csv(path: str | Path, schema_config: str | Path | DatasetSchema) -> Dataset:
    schema = schema_config if isinstance(schema_config, DatasetSchema) else load_schema(schema_config)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    frame.columns = [c.strip() for c in frame.columns]
    if schema.target_name not in frame.columns:
        raise DataError(f"{path}: missing column {schema.target_name!r}")
    feats = validate_frame(frame.replace("", np.nan), schema, str(path))
    y = pd.to_numeric(frame[schema.target_name], errors="coerce")
    bad = ~y.isin([0, 1])
    if bad.any():
        r = int(np.flatnonzero(bad)[0])
        raise DataError(f"{path}: row {r + 1}, column {schema.target_name!r}: label must be 0 or 1")
    return Dataset(schema, feats, y.to_numpy(dtype=int))


def write_csv(data: Dataset, path: str | Path) -> None:
    frame = data.frame.copy()
    frame[data.schema.target_name] = data.labels
    frame.to_csv(path, index=False)


# -- buckets and levels -------------------------------------------------

def bucketize(values, edges: Sequence[float]) -> tuple[np.ndarray, int]:
    """Bucket index per value for right-closed intervals, clamping out-of-span
    values to the edge buckets.  Returns ``(indices, n_clamped)``."""
    v = np.asarray(values, dtype=float)
    e = np.asarray(edges, dtype=float)
    idx = np.searchsorted(e, v, side="left") - 1
    n_clamped = int(np.sum((v < e[0]) | (v > e[-1])))
    return np.clip(idx, 0, len(e) - 2), n_clamped


def bucket_midpoint(feature: FeatureSpec, level: int, n_levels: int | None = None) -> float:
    """Midpoint of bucket ``level`` (0-based).

    With ``n_levels`` given, the feature range is split into that many
    equal-width buckets; otherwise the fitted edges are used.
    """
    if not feature.is_continuous:
        raise SchemaError(f"{feature.name}: midpoints only exist for continuous features")
    if n_levels is not None:
        if not 0 <= level < n_levels:
            raise ValueError(f"{feature.name}: level {level} out of range for {n_levels} levels")
        a, b = feature.range
        return a + (2 * (level + 1) - 1) * (b - a) / (2 * n_levels)
    if feature.edges is None:
        raise SchemaError(f"{feature.name}: no bucket edges")
    if not 0 <= level < feature.n_levels:
        raise ValueError(f"{feature.name}: level {level} out of range for {feature.n_levels} levels")
    return (feature.edges[level] + feature.edges[level + 1]) / 2.0


def midpoints(feature: FeatureSpec) -> np.ndarray:
    e = np.asarray(feature.edges, dtype=float)
    return (e[:-1] + e[1:]) / 2.0


def level_matrix(frame: pd.DataFrame, schema: DatasetSchema, discretized: bool = False) -> tuple[np.ndarray, int]:
    """Level index of every feature for every row, shape (n, N).

    Continuous columns hold raw values unless ``discretized``.  Returns the
    matrix and the number of clamped out-of-span continuous values.
    """
    n = len(frame)
    out = np.empty((n, len(schema)), dtype=np.int64)
    clamped = 0
    for i, f in enumerate(schema.features):
        col = frame[f.name]
        if f.is_continuous:
            if discretized:
                out[:, i] = col.to_numpy(dtype=np.int64)
            else:
                out[:, i], c = bucketize(col.to_numpy(dtype=float), f.edges)
                clamped += c
        else:
            lookup = {v: k for k, v in enumerate(f.levels)}
            try:
                out[:, i] = [lookup[str(v)] for v in col]
            except KeyError as e:
                raise DataError(f"feature {f.name!r}: unknown level {e.args[0]!r}") from None
    return out, clamped


def levels_of(data: Dataset) -> np.ndarray:
    return level_matrix(data.frame, data.schema, data.discretized)[0]


def one_hot_levels(levels: np.ndarray, schema: DatasetSchema) -> np.ndarray:
    """One-hot matrix (n, D) from a level matrix (n, N)."""
    levels = np.atleast_2d(levels)
    z = np.zeros((levels.shape[0], schema.one_hot_dim))
    off = np.asarray(schema.offsets[:-1])
    rows = np.arange(levels.shape[0])[:, None]
    z[rows, off[None, :] + levels] = 1.0
    return z


def one_hot_encode(row: Mapping[str, Any] | Sequence[Any], schema: DatasetSchema) -> np.ndarray:
    """One-hot vector of a single row in discretized form.

    Categorical values are level labels; continuous values are bucket indices.
    """
    values = [row[f.name] for f in schema.features] if isinstance(row, Mapping) else list(row)
    if len(values) != len(schema):
        raise DataError(f"row has {len(values)} values, schema has {len(schema)} features")
    z = np.zeros(schema.one_hot_dim)
    for i, (f, v) in enumerate(zip(schema.features, values)):
        if f.is_continuous:
            k = int(v)
            if not 0 <= k < f.n_levels:
                raise DataError(f"feature {f.name!r}: unknown level {v!r}")
        else:
            try:
                k = f.levels.index(str(v))
            except ValueError:
                raise DataError(f"feature {f.name!r}: unknown level {v!r}") from None
        z[schema.offsets[i] + k] = 1.0
    return z


def decode_levels(levels: np.ndarray, schema: DatasetSchema) -> pd.DataFrame:
    """Human-readable labels for a level matrix (bucket intervals for continuous)."""
    levels = np.atleast_2d(levels)
    cols = {}
    for i, f in enumerate(schema.features):
        labels = np.asarray(f.level_labels, dtype=object)
        cols[f.name] = labels[levels[:, i]]
    return pd.DataFrame(cols, columns=schema.names)
