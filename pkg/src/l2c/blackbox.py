"""Differentiable binary classifiers used as the model being explained.

Two input layouts are supported.  ``mixed``: continuous features in raw
units (standardized inside the model) next to one-hot categorical blocks.
``discretized``: the full one-hot encoding of the discretized schema.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import autodiff as ad
from .tabular import Dataset, DatasetSchema, level_matrix, one_hot_levels

LOGISTIC = "logistic"
MLP = "mlp"
MIXED = "mixed"
DISCRETIZED = "discretized"


@dataclass
class InputLayout:
    schema: DatasetSchema
    mode: str = MIXED
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None

    @property
    def width(self) -> int:
        if self.mode == DISCRETIZED:
            return self.schema.one_hot_dim
        return sum(1 if f.is_continuous else f.n_levels for f in self.schema.features)

    def column_slices(self) -> list[slice]:
        """Columns occupied by each feature in mixed mode."""
        out, start = [], 0
        for f in self.schema.features:
            w = 1 if f.is_continuous else f.n_levels
            out.append(slice(start, start + w))
            start += w
        return out

    def encode(self, frame: pd.DataFrame) -> np.ndarray:
        """Design matrix for raw rows (before standardization)."""
        if self.mode == DISCRETIZED:
            levels, _ = level_matrix(frame, self.schema)
            return one_hot_levels(levels, self.schema)
        X = np.zeros((len(frame), self.width))
        for f, sl in zip(self.schema.features, self.column_slices()):
            if f.is_continuous:
                X[:, sl.start] = frame[f.name].to_numpy(dtype=float)
            else:
                lookup = {v: k for k, v in enumerate(f.levels)}
                idx = np.array([lookup[str(v)] for v in frame[f.name]], dtype=np.int64)
                X[np.arange(len(frame)), sl.start + idx] = 1.0
        return X

    def fit_standardization(self, X: np.ndarray) -> None:
        shift = np.zeros(self.width)
        scale = np.ones(self.width)
        if self.mode == MIXED:
            for f, sl in zip(self.schema.features, self.column_slices()):
                if f.is_continuous:
                    col = X[:, sl.start]
                    sd = col.std()
                    scale[sl.start] = 1.0 / sd if sd > 0 else 1.0
                    shift[sl.start] = -col.mean() * scale[sl.start]
        self.shift, self.scale = shift, scale


@dataclass
class Classifier:
    kind: str
    params: dict[str, ad.Parameter]
    layout: InputLayout
    metrics: dict = field(default_factory=dict)

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    def forward(self, x: ad.Node) -> ad.Node:
        """Class probabilities (batch, 2) for a (batch, width) input node."""
        if x.value.shape[-1] != self.layout.width:
            raise ValueError(f"input has width {x.value.shape[-1]}, classifier expects {self.layout.width}")
        h = ad.add(ad.mul(x, self.layout.scale), self.layout.shift)
        for k in range(self.n_layers):
            h = ad.dense(h, self.params[f"layer{k}.weight"], self.params[f"layer{k}.bias"])
            if k < self.n_layers - 1:
                h = ad.relu(h)
        p1 = ad.sigmoid(h)
        return ad.concat([ad.sub(np.ones(p1.shape), p1), p1])

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.forward(ad.Tape().constant(X)).value

    def predict(self, X) -> np.ndarray:
        # ties go to label 0
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)

    def input_gradient(self, X, target) -> np.ndarray:
        """d CE(f(x), target) / dx for each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        tape = ad.Tape()
        x = tape.variable(X)
        loss = ad.sum_(ad.cross_entropy(self.forward(x), target))
        tape.backward(loss)
        for p in self.params.values():
            p.zero_grad()
        return x.grad

    def accuracy(self, data: Dataset) -> float:
        return float(np.mean(self.predict(self.layout.encode(data.frame)) == data.labels))

    # -- persistence -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "mode": self.layout.mode,
            "schema": self.layout.schema.to_config(include_edges=True),
            "schema_hash": self.layout.schema.fingerprint(),
            "shift": self.layout.shift.tolist(),
            "scale": self.layout.scale.tolist(),
            "params": ad.params_to_dict(self.params),
            "metrics": self.metrics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Classifier":
        layout = InputLayout(
            DatasetSchema.from_config(d["schema"]),
            d["mode"],
            np.asarray(d["shift"], dtype=float),
            np.asarray(d["scale"], dtype=float),
        )
        return cls(d["kind"], ad.params_from_dict(d["params"]), layout, d.get("metrics", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Classifier":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _init_params(rng, widths: list[int]) -> dict[str, ad.Parameter]:
    params = {}
    for k, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        W, b = ad.glorot(rng, fan_out, fan_in, f"layer{k}")
        params[W.name], params[b.name] = W, b
    return params


def train(
    data: Dataset,
    kind: str = LOGISTIC,
    hidden_dims: tuple[int, ...] = (),
    epochs: int | None = None,
    lr: float | None = None,
    seed: int = 0,
    mode: str = MIXED,
    val: Dataset | None = None,
    batch_size: int = 64,
) -> Classifier:
    """Fit a classifier on raw rows of ``data``.

    Logistic models use full-batch gradient descent; MLPs use mini-batch
    Adam.  ``mode='discretized'`` needs bucket edges in ``data.schema``.
    """
    if kind not in (LOGISTIC, MLP):
        raise ValueError(f"unknown classifier kind {kind!r}")
    y = np.asarray(data.labels)
    if not np.isin(y, [0, 1]).all():
        raise ValueError("labels must be binary (0/1)")
    if data.discretized:
        raise ValueError("train on raw rows; pass bucket edges through the schema instead")
    rng = np.random.default_rng(seed)
    layout = InputLayout(data.schema, mode)
    X = layout.encode(data.frame)
    layout.fit_standardization(X)
    dims = list(hidden_dims) if kind == MLP else []
    if kind == MLP and not dims:
        raise ValueError("an MLP needs at least one hidden layer")
    model = Classifier(kind, _init_params(rng, [layout.width, *dims, 1]), layout)
    params = list(model.params.values())

    def step(xb, yb):
        tape = ad.Tape()
        loss = ad.mean(ad.cross_entropy(model.forward(tape.constant(xb)), yb))
        tape.backward(loss)
        return float(loss.value)

    if kind == LOGISTIC:
        epochs = 1000 if epochs is None else epochs
        lr = 0.5 if lr is None else lr
        for _ in range(epochs):
            step(X, y)
            for p in params:
                p.value -= lr * p.grad
                p.zero_grad()
    else:
        epochs = 200 if epochs is None else epochs
        lr = 1e-3 if lr is None else lr
        for _ in range(epochs):
            order = rng.permutation(len(X))
            for start in range(0, len(X), batch_size):
                idx = order[start:start + batch_size]
                step(X[idx], y[idx])
                ad.adam_step(params, lr)

    model.metrics = {"train_accuracy": model.accuracy(data)}
    if val is not None:
        model.metrics["val_accuracy"] = model.accuracy(val)
    model.metrics.update({"epochs": epochs, "lr": lr, "seed": seed, "hidden_dims": dims})
    return model


def predict_proba(model: Classifier, x) -> np.ndarray:
    return model.predict_proba(x)


def input_gradient(model: Classifier, x, target_label) -> np.ndarray:
    return model.input_gradient(x, target_label)
