"""Discretizers for continuous features.

Four univariate strategies are provided: equal-frequency (quantile) buckets,
recursive minimum-entropy partitioning with an MDL stopping rule, an
entropy-driven CART surrogate, and user-supplied (manual) bins.  ``mixed``
assigns one of them at random to each continuous feature.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .tabular import (
    Dataset,
    DatasetSchema,
    SchemaError,
    check_edges,
    level_matrix,
)

log = logging.getLogger(__name__)

EQUAL_FREQUENCY = "equal_frequency"
MDP = "mdp_entropy"
CART = "cart"
MANUAL = "manual"
MIXED = "mixed"
STRATEGIES = (EQUAL_FREQUENCY, MDP, CART, MANUAL, MIXED)


class DiscretizationError(ValueError):
    pass


@dataclass(frozen=True)
class Discretizer:
    strategy: str
    per_feature_edges: Mapping[str, tuple[float, ...]]
    max_buckets: int = 4
    min_split_samples: int = 30
    assignments: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise DiscretizationError(f"unknown strategy {self.strategy!r}")
        for name, e in self.per_feature_edges.items():
            check_edges(e, name)

    def edges(self, name: str) -> tuple[float, ...]:
        return self.per_feature_edges[name]

    def to_json(self) -> str:
        payload = {
            "strategy": self.strategy,
            "max_buckets": self.max_buckets,
            "min_split_samples": self.min_split_samples,
            "edges": {k: list(v) for k, v in self.per_feature_edges.items()},
        }
        if self.assignments:
            payload["assignments"] = dict(self.assignments)
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Discretizer":
        d = json.loads(text)
        return cls(
            strategy=d["strategy"],
            per_feature_edges={k: tuple(float(x) for x in v) for k, v in d["edges"].items()},
            max_buckets=d.get("max_buckets", 4),
            min_split_samples=d.get("min_split_samples", 30),
            assignments=d.get("assignments", {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Discretizer":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


# -- array-level fitters -------------------------------------------------

def _span(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DiscretizationError("cannot discretize an empty column")
    return v


def equal_frequency_edges(values, max_buckets: int = 4) -> list[float]:
    """Quantile edges at ``linspace(0, 1, max_buckets + 1)``; duplicate
    edges are merged, which may reduce the number of buckets."""
    v = _span(values)
    if np.unique(v).size < 2:
        raise DiscretizationError("fewer than 2 distinct values: single bucket, cannot discretize")
    q = np.quantile(v, np.linspace(0.0, 1.0, max_buckets + 1))
    return np.unique(q).tolist()


def _entropy(counts: np.ndarray) -> np.ndarray:
    """Entropy in bits along the last axis of a count array."""
    tot = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(tot > 0, counts / tot, 0.0)
        h = -np.where(p > 0, p * np.log2(p), 0.0).sum(axis=-1)
    return h


def _best_cut(v: np.ndarray, y: np.ndarray, classes: np.ndarray):
    """Cut between consecutive distinct sorted values minimizing the
    weighted class entropy.  ``v`` must be sorted.  Returns
    ``(cut_value, split_index, weighted_entropy)`` or None."""
    boundaries = np.flatnonzero(v[1:] != v[:-1]) + 1  # left part = v[:b]
    if boundaries.size == 0:
        return None
    onehot = (y[:, None] == classes[None, :]).astype(float)
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]
    left = cum[boundaries - 1]
    right = total - left
    n = len(v)
    nl = boundaries.astype(float)
    w = (nl * _entropy(left) + (n - nl) * _entropy(right)) / n
    j = int(np.argmin(w))  # first minimum on ties
    b = int(boundaries[j])
    return (v[b - 1] + v[b]) / 2.0, b, float(w[j])


def _mdl_accepts(y: np.ndarray, b: int, classes: np.ndarray) -> bool:
    n = len(y)
    def stats(part):
        counts = np.array([(part == c).sum() for c in classes], dtype=float)
        return float(_entropy(counts)), int((counts > 0).sum())
    ent, k = stats(y)
    ent1, k1 = stats(y[:b])
    ent2, k2 = stats(y[b:])
    gain = ent - (b * ent1 + (n - b) * ent2) / n
    delta = np.log2(3.0**k - 2.0) - (k * ent - k1 * ent1 - k2 * ent2)
    return gain > (np.log2(n - 1) + delta) / n


def _sorted_pair(values, labels):
    v = _span(values)
    y = np.asarray(labels)
    if len(y) != len(v):
        raise DiscretizationError("values and labels differ in length")
    order = np.argsort(v, kind="stable")
    return v[order], y[order]


def mdlp_edges(values, labels) -> list[float]:
    """Recursive minimum-entropy cuts, stopped by the MDL criterion."""
    v, y = _sorted_pair(values, labels)
    classes = np.unique(y)
    cuts: list[float] = []

    def recurse(lo: int, hi: int):
        vs, ys = v[lo:hi], y[lo:hi]
        if np.unique(ys).size < 2:
            return
        best = _best_cut(vs, ys, classes)
        if best is None:
            return
        cut, b, _ = best
        if not _mdl_accepts(ys, b, classes):
            return
        cuts.append(cut)
        recurse(lo, lo + b)
        recurse(lo + b, hi)

    recurse(0, len(v))
    return _edges_from_cuts(v, cuts)


def cart_edges(values, labels, min_split: int = 30) -> list[float]:
    """Leaf boundaries of a univariate entropy tree; nodes with fewer than
    ``min_split`` samples are not split."""
    if min_split < 2:
        raise DiscretizationError("min_split must be >= 2")
    v, y = _sorted_pair(values, labels)
    classes = np.unique(y)
    cuts: list[float] = []

    def recurse(lo: int, hi: int):
        vs, ys = v[lo:hi], y[lo:hi]
        if hi - lo < min_split or np.unique(ys).size < 2:
            return
        best = _best_cut(vs, ys, classes)
        if best is None:
            return
        cut, b, w = best
        parent = float(_entropy(np.array([(ys == c).sum() for c in classes], dtype=float)))
        if parent - w <= 1e-12:
            return
        cuts.append(cut)
        recurse(lo, lo + b)
        recurse(lo + b, hi)

    recurse(0, len(v))
    return _edges_from_cuts(v, cuts)


def _edges_from_cuts(v: np.ndarray, cuts: list[float]) -> list[float]:
    if v[0] == v[-1]:
        raise DiscretizationError("fewer than 2 distinct values: single bucket, cannot discretize")
    return [float(v[0]), *sorted(float(c) for c in cuts), float(v[-1])]


# -- dataset-level API ---------------------------------------------------

def _column(data: Dataset, feature: str) -> np.ndarray:
    f = data.schema.feature(feature)
    if not f.is_continuous:
        raise DiscretizationError(f"{feature!r} is not continuous")
    if data.discretized:
        raise DiscretizationError("dataset is already discretized")
    return data.frame[feature].to_numpy(dtype=float)


def fit_equal_frequency(data: Dataset, feature: str, max_buckets: int = 4) -> list[float]:
    return equal_frequency_edges(_column(data, feature), max_buckets)


def fit_mdp_entropy(data: Dataset, feature: str, labels) -> list[float]:
    return mdlp_edges(_column(data, feature), labels)


def fit_cart(data: Dataset, feature: str, labels, min_split: int = 30) -> list[float]:
    return cart_edges(_column(data, feature), labels, min_split)


def fit_manual_bins(bins: Mapping[str, Sequence[float]], data: Dataset | None = None) -> Discretizer:
    """Discretizer from user-supplied edges, checked against ``data`` if given."""
    edges = {}
    for name, e in bins.items():
        check_edges(e, name)
        if data is not None:
            col = _column(data, name)
            if e[0] > col.min() or e[-1] < col.max():
                raise DiscretizationError(
                    f"{name}: edges [{e[0]:g}, {e[-1]:g}] do not cover observed range "
                    f"[{col.min():g}, {col.max():g}]"
                )
        edges[name] = tuple(float(x) for x in e)
    return Discretizer(MANUAL, edges)


def fit_discretizer(
    data: Dataset,
    strategy: str = EQUAL_FREQUENCY,
    labels=None,
    max_buckets: int = 4,
    min_split_samples: int = 30,
    seed: int = 0,
) -> Discretizer:
    """Fit edges for every continuous feature of ``data``.

    ``labels`` are the black-box predicted labels, needed by the supervised
    strategies.  Manual bins come from the ``bins`` entries of the schema.
    """
    if strategy not in STRATEGIES:
        raise DiscretizationError(f"unknown strategy {strategy!r}")
    rng = np.random.default_rng(seed)
    edges: dict[str, tuple[float, ...]] = {}
    assignments: dict[str, str] = {}
    for f in data.schema.continuous:
        s = strategy
        if strategy == MIXED:
            options = [EQUAL_FREQUENCY, MDP, CART] + ([MANUAL] if f.bins is not None else [])
            s = options[int(rng.integers(len(options)))]
            assignments[f.name] = s
        if s in (MDP, CART) and labels is None:
            raise DiscretizationError(f"strategy {s!r} needs predicted labels")
        if s == EQUAL_FREQUENCY:
            e = fit_equal_frequency(data, f.name, max_buckets)
        elif s == MDP:
            e = fit_mdp_entropy(data, f.name, labels)
        elif s == CART:
            e = fit_cart(data, f.name, labels, min_split_samples)
        else:
            if f.bins is None:
                raise DiscretizationError(f"{f.name}: manual strategy needs 'bins' in the schema")
            e = fit_manual_bins({f.name: f.bins}, data).edges(f.name)
        edges[f.name] = tuple(float(x) for x in e)
    return Discretizer(strategy, edges, max_buckets, min_split_samples, assignments)


def discretize(data: Dataset, disc: Discretizer) -> Dataset:
    """Replace continuous columns with bucket indices.

    Out-of-span values are clamped to the first/last bucket; their count is
    stored in ``n_clamped`` and logged.
    """
    if data.discretized:
        raise DiscretizationError("dataset is already discretized")
    try:
        schema = data.schema.with_edges(disc.per_feature_edges)
    except SchemaError as e:
        raise DiscretizationError(str(e)) from None
    levels, clamped = level_matrix(data.frame, schema)
    frame = data.frame.copy()
    for i, f in enumerate(schema.features):
        if f.is_continuous:
            frame[f.name] = levels[:, i]
    if clamped:
        log.warning("clamped %d out-of-span continuous values", clamped)
    return replace(data, schema=schema, frame=frame, discretized=True, n_clamped=clamped)


def attach(schema: DatasetSchema, disc: Discretizer) -> DatasetSchema:
    return schema.with_edges(disc.per_feature_edges)
