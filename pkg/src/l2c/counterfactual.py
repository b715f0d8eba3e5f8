"""Amortized counterfactual generation with a per-feature perturbation
generator and a Bernoulli feature selector.

The generator maps the one-hot input ``z`` to logits over the levels of every
mutable feature; the selector maps ``z`` to the probability of changing each
mutable feature.  Training relaxes both samplers (Gumbel-softmax and binary
Concrete) and minimizes the cross-entropy of the black box against the flipped
label plus an L1 penalty on the selection probabilities.  Inference draws hard
samples.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from . import autodiff as ad
from .blackbox import DISCRETIZED, Classifier
from .tabular import (
    NON_DECREASING,
    NON_INCREASING,
    NONE,
    Dataset,
    DatasetSchema,
    FeatureSpec,
    level_matrix,
    midpoints,
    one_hot_levels,
)

DEFAULT_EPSILON = math.exp(-10)


@dataclass
class L2cConfig:
    epochs: int = 200
    lr: float = 1e-4
    tau: float = 0.2
    alpha: float = 1e-4
    batch_size: int = 64
    mc_samples: int = 1
    generator_hidden: tuple[int, int] = (64, 64)
    selector_hidden: int = 64
    epsilon: float = DEFAULT_EPSILON
    selector: bool = True
    seed: int = 0

    def __post_init__(self):
        self.generator_hidden = tuple(int(h) for h in self.generator_hidden)
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")


# -- masking (probability space) ------------------------------------------

def restricted_levels(monotonic: str, current_level: int, n_levels: int) -> np.ndarray:
    """Boolean mask of levels a monotone feature may not move to (0-based)."""
    j = np.arange(n_levels)
    if monotonic == NON_DECREASING:
        return j < current_level
    if monotonic == NON_INCREASING:
        return j > current_level
    return np.zeros(n_levels, dtype=bool)


def apply_unary_mask(p, feature: FeatureSpec, current_level: int, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Scale restricted-level probabilities by ``epsilon`` and renormalize."""
    p = np.asarray(p, dtype=float)
    mask = restricted_levels(feature.monotonic, current_level, len(p))
    q = np.where(mask, epsilon * p, p)
    return q / q.sum()


def apply_binary_mask(p_child, child: FeatureSpec, child_level: int, parent_moved_up: bool,
                      epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Forbid the child from decreasing when its parent feature moved up."""
    p = np.asarray(p_child, dtype=float)
    if not parent_moved_up:
        return p
    mask = restricted_levels(NON_DECREASING, child_level, len(p))
    q = np.where(mask, epsilon * p, p)
    return q / q.sum()


# -- pure helpers on one-hot vectors ---------------------------------------

def compose_counterfactual(z, z_tilde, s, schema: DatasetSchema) -> np.ndarray:
    """Blend each mutable block as ``(1 - s_i) z_i + s_i z~_i``.

    ``z_tilde`` and ``s`` cover mutable features only (in schema order);
    immutable blocks are copied from ``z``.
    """
    z = np.asarray(z, dtype=float)
    out = z.copy()
    pos = 0
    for k, i in enumerate(schema.mutable_indices):
        blk = schema.block(i)
        width = blk.stop - blk.start
        zt = np.asarray(z_tilde)[..., pos:pos + width]
        si = np.asarray(s)[..., k:k + 1]
        out[..., blk] = (1 - si) * z[..., blk] + si * zt
        pos += width
    return out


def one_hot_decode(z_tilde, s, origin_row, schema: DatasetSchema) -> dict:
    """Map a (possibly relaxed) one-hot counterfactual back to raw values.

    ``z_tilde`` is the full-width vector and ``s`` holds one gate per feature
    (immutable features use 0).  Categorical features return their block;
    continuous features return ``(1 - s) x + s * sum_j z~_j mid_j``.
    """
    z_tilde = np.asarray(z_tilde, dtype=float)
    out = {}
    for i, f in enumerate(schema.features):
        blk = z_tilde[schema.block(i)]
        si = float(s[i])
        if f.is_continuous:
            x = float(origin_row[f.name])
            if si == 0.0:
                out[f.name] = x
            else:
                out[f.name] = (1 - si) * x + si * float(blk @ midpoints(f))
        else:
            out[f.name] = blk
    return out


# -- the model -------------------------------------------------------------

class L2cModel:
    """Generator and selector networks bound to a discretized schema."""

    def __init__(self, schema: DatasetSchema, config: L2cConfig | None = None,
                 params: dict[str, ad.Parameter] | None = None):
        if not schema.discretized:
            raise ValueError("L2cModel needs a schema with bucket edges for every continuous feature")
        self.schema = schema
        self.config = config or L2cConfig()
        self.mutable = schema.mutable_indices
        if not self.mutable:
            raise ValueError("schema has no mutable features")
        self.mut_sizes = [schema.features[i].n_levels for i in self.mutable]
        self.mut_cols = np.concatenate([np.arange(schema.block(i).start, schema.block(i).stop)
                                        for i in self.mutable])
        self.mut_offsets = np.concatenate([[0], np.cumsum(self.mut_sizes)])
        self.keep = np.array([1.0 - schema.features[i].mutation_cost for i in self.mutable])
        self.log_eps = math.log(self.config.epsilon)
        self.rules = [(schema.index(r.parent), schema.index(r.child)) for r in schema.correlations]
        for p, c in self.rules:
            if p not in self.mutable or c not in self.mutable:
                raise ValueError("correlation rules must link two mutable features")
        self.params = params if params is not None else self._init_params()

    # parameters ------------------------------------------------------------
    def _init_params(self) -> dict[str, ad.Parameter]:
        rng = np.random.default_rng(self.config.seed)
        D, Dm, K = self.schema.one_hot_dim, len(self.mut_cols), len(self.mutable)
        h1, h2 = self.config.generator_hidden
        hs = self.config.selector_hidden
        params = {}
        for name, (fo, fi) in {
            "gen0": (h1, D), "gen1": (h2, h1), "gen2": (Dm, h2),
            "sel0": (hs, D), "sel1": (K, hs),
        }.items():
            W, b = ad.glorot(rng, fo, fi, name)
            params[W.name], params[b.name] = W, b
        return params

    def trainable(self) -> list[ad.Parameter]:
        names = ["gen0", "gen1", "gen2"] + (["sel0", "sel1"] if self.config.selector else [])
        return [self.params[f"{n}.{k}"] for n in names for k in ("weight", "bias")]

    def _layer(self, x, name):
        return ad.dense(x, self.params[name + ".weight"], self.params[name + ".bias"])

    # network forward passes ---------------------------------------------------
    def generator_logits(self, z: ad.Node) -> ad.Node:
        h = ad.relu(self._layer(z, "gen0"))
        h = ad.relu(self._layer(h, "gen1"))
        return self._layer(h, "gen2")

    def selector_probs(self, z: ad.Node) -> ad.Node:
        h = ad.relu(self._layer(z, "sel0"))
        pi = ad.sigmoid(self._layer(h, "sel1"))
        if np.any(self.keep != 1.0):
            pi = ad.mul(pi, self.keep)
        return pi

    # masks as additive log-shifts --------------------------------------------
    def unary_shift(self, levels: np.ndarray) -> np.ndarray:
        """log(epsilon) on restricted levels of monotone features, else 0."""
        levels = np.atleast_2d(levels)
        shift = np.zeros((levels.shape[0], len(self.mut_cols)))
        for k, i in enumerate(self.mutable):
            f = self.schema.features[i]
            if f.monotonic == NONE:
                continue
            j = np.arange(f.n_levels)[None, :]
            cur = levels[:, i:i + 1]
            bad = j < cur if f.monotonic == NON_DECREASING else j > cur
            shift[:, self.mut_offsets[k]:self.mut_offsets[k + 1]] = np.where(bad, self.log_eps, 0.0)
        return shift

    def _block_argmax(self, scores: np.ndarray, k: int) -> np.ndarray:
        return scores[:, self.mut_offsets[k]:self.mut_offsets[k + 1]].argmax(axis=1)

    def rule_shift(self, scores: np.ndarray, s_hard: np.ndarray, levels: np.ndarray) -> np.ndarray:
        """Extra log-shift for children whose parent was sampled to move up.

        ``scores`` are per-level Gumbel-perturbed log-scores whose per-block
        argmax is the hard perturbation sample.
        """
        shift = np.zeros_like(scores)
        for p, c in self.rules:
            kp, kc = self.mutable.index(p), self.mutable.index(c)
            moved_up = s_hard[:, kp] & (self._block_argmax(scores, kp) > levels[:, p])
            j = np.arange(self.mut_sizes[kc])[None, :]
            bad = (j < levels[:, c:c + 1]) & moved_up[:, None]
            shift[:, self.mut_offsets[kc]:self.mut_offsets[kc + 1]] += np.where(bad, self.log_eps, 0.0)
        return shift

    # distributions -------------------------------------------------------------
    def perturbation_distribution(self, z) -> list[np.ndarray]:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        p = ad.softmax_block(self.generator_logits(ad.Tape().constant(z)), self.mut_sizes).value
        return [p[:, a:b] for a, b in zip(self.mut_offsets[:-1], self.mut_offsets[1:])]

    def selection_distribution(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return self.selector_probs(ad.Tape().constant(z)).value

    # persistence ------------------------------------------------------------
    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["generator_hidden"] = list(cfg["generator_hidden"])
        return {
            "config": cfg,
            "schema": self.schema.to_config(include_edges=True),
            "schema_hash": self.schema.fingerprint(),
            "params": ad.params_to_dict(self.params),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "L2cModel":
        schema = DatasetSchema.from_config(d["schema"])
        if schema.fingerprint() != d["schema_hash"]:
            raise ValueError("checkpoint schema hash mismatch")
        return cls(schema, L2cConfig(**d["config"]), ad.params_from_dict(d["params"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "L2cModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -- wiring between the model and a classifier ------------------------------

class _Wiring:
    """Column bookkeeping to assemble the classifier input from pieces."""

    def __init__(self, model: L2cModel, clf: Classifier):
        schema = model.schema
        layout = clf.layout
        if [f.name for f in layout.schema.features] != schema.names:
            raise ValueError("classifier and L2C schema disagree on features")
        if layout.mode == DISCRETIZED and layout.schema.fingerprint() != schema.fingerprint():
            raise ValueError("discretized classifier was trained with different bucket edges")
        self.mode = layout.mode
        self.width = layout.width
        Dm = len(model.mut_cols)
        self.cont_mut = [i for i in model.mutable if schema.features[i].is_continuous]
        self.cont_mut_k = [model.mutable.index(i) for i in self.cont_mut]
        self.mid_matrix = np.zeros((Dm, len(self.cont_mut)))
        for c, (i, k) in enumerate(zip(self.cont_mut, self.cont_mut_k)):
            self.mid_matrix[model.mut_offsets[k]:model.mut_offsets[k + 1], c] = midpoints(schema.features[i])
        perm = np.arange(self.width)
        if self.mode == DISCRETIZED:
            for j, col in enumerate(model.mut_cols):
                perm[col] = self.width + j
        else:
            slices = layout.column_slices()
            for k, i in enumerate(model.mutable):
                sl = slices[i]
                if schema.features[i].is_continuous:
                    perm[sl.start] = self.width + Dm + self.cont_mut.index(i)
                else:
                    perm[sl] = self.width + model.mut_offsets[k] + np.arange(sl.stop - sl.start)
        self.perm = perm
        self.cont_cols = [layout.column_slices()[i].start for i in self.cont_mut] if self.mode != DISCRETIZED else []


@dataclass
class Batch:
    z: np.ndarray        # (B, D) one-hot inputs
    levels: np.ndarray   # (B, N) level indices
    X: np.ndarray        # (B, width) classifier encoding of the originals
    target: np.ndarray   # (B,) desired labels

    def __len__(self):
        return len(self.target)

    def take(self, idx) -> "Batch":
        return Batch(self.z[idx], self.levels[idx], self.X[idx], self.target[idx])


def prepare(model: L2cModel, clf: Classifier, frame: pd.DataFrame) -> Batch:
    """Encode raw rows; the target flips the classifier's own prediction."""
    levels, _ = level_matrix(frame, model.schema)
    X = clf.layout.encode(frame)
    target = 1 - clf.predict(X)
    return Batch(one_hot_levels(levels, model.schema), levels, X, target)


def relaxed_loss(model: L2cModel, clf: Classifier, batch: Batch, noise: np.ndarray,
                 selector_noise: np.ndarray, tape: ad.Tape | None = None,
                 wiring: _Wiring | None = None) -> tuple[ad.Node, dict]:
    """Relaxed training objective for one batch with fixed noise.

    ``noise`` has shape (B, sum of mutable level counts); ``selector_noise``
    has shape (B, K, 2).  Returns the scalar loss node and its parts.
    """
    cfg = model.config
    tape = tape or ad.Tape()
    wiring = wiring or _Wiring(model, clf)
    zc = tape.constant(batch.z)
    logits = model.generator_logits(zc)
    shift = model.unary_shift(batch.levels)

    if cfg.selector:
        pi = model.selector_probs(zc)
        s = ad.binary_concrete(pi, selector_noise, cfg.tau)
        s_hard = s.value > 0.5
    else:
        pi = None
        s = tape.constant(np.ones((len(batch), len(model.mutable))))
        s_hard = np.ones(s.shape, dtype=bool)
    if model.rules:
        shift = shift + model.rule_shift(logits.value + shift + noise, s_hard, batch.levels)

    p = ad.softmax_block(ad.add(logits, shift), model.mut_sizes)
    zt = ad.gumbel_softmax(ad.log(p), noise, cfg.tau, model.mut_sizes)

    zm = batch.z[:, model.mut_cols]
    s_exp = ad.repeat_blocks(s, model.mut_sizes)
    composed = ad.add(ad.mul(s_exp, ad.sub(zt, zm)), zm)
    pieces = [tape.constant(batch.X), composed]
    if wiring.mode != DISCRETIZED and wiring.cont_mut:
        x_orig = batch.X[:, wiring.cont_cols]
        mids = ad.matmul_const(zt, wiring.mid_matrix)
        s_c = ad.take(s, wiring.cont_mut_k)
        pieces.append(ad.add(ad.mul(s_c, ad.sub(mids, x_orig)), x_orig))
    x_in = ad.take(ad.concat(pieces), wiring.perm)

    ce = ad.mean(ad.cross_entropy(clf.forward(x_in), batch.target))
    loss = ce
    l1 = 0.0
    if pi is not None and cfg.alpha > 0:
        l1_node = ad.mean(ad.l1_norm(pi))
        loss = ad.add(ce, ad.scale(l1_node, cfg.alpha))
        l1 = float(l1_node.value)
    elif pi is not None:
        l1 = float(np.abs(pi.value).sum(axis=1).mean())
    return loss, {"ce": float(ce.value), "l1": l1}


def draw_noise(rng: np.random.Generator, model: L2cModel, n: int) -> tuple[np.ndarray, np.ndarray]:
    return (ad.gumbel_noise(rng, (n, len(model.mut_cols))),
            ad.gumbel_noise(rng, (n, len(model.mutable), 2)))


@dataclass
class TrainHistory:
    epoch: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    ce: list[float] = field(default_factory=list)
    l1: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(asdict(self))


def train(model: L2cModel, data: Dataset, clf: Classifier, config: L2cConfig | None = None,
          callback=None) -> tuple[L2cModel, TrainHistory]:
    """Optimize the generator (and selector) with Adam on the relaxed objective."""
    if config is not None:
        model.config = config
    cfg = model.config
    if data.discretized:
        raise ValueError("pass raw rows; bucket edges come from the model schema")
    wiring = _Wiring(model, clf)
    full = prepare(model, clf, data.frame)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    params = model.trainable()
    hist = TrainHistory()
    t0 = time.perf_counter()
    n = len(full)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        tot = ce_tot = l1_tot = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = full.take(np.repeat(order[start:start + cfg.batch_size], cfg.mc_samples))
            noise, snoise = draw_noise(rng, model, len(batch))
            tape = ad.Tape()
            loss, parts = relaxed_loss(model, clf, batch, noise, snoise, tape, wiring)
            tape.backward(loss)
            for p in clf.params.values():
                p.zero_grad()
            ad.adam_step(params, cfg.lr)
            w = len(batch) / cfg.mc_samples
            tot += float(loss.value) * w
            ce_tot += parts["ce"] * w
            l1_tot += parts["l1"] * w
        hist.epoch.append(epoch)
        hist.loss.append(tot / n)
        hist.ce.append(ce_tot / n)
        hist.l1.append(l1_tot / n)
        hist.seconds.append(time.perf_counter() - t0)
        if callback is not None:
            callback(epoch, hist)
    return model, hist


# -- inference --------------------------------------------------------------

@dataclass
class CounterfactualSet:
    """Counterfactuals for one input.

    The ``levels``/``rows``/``valid`` fields hold the requested set: accepted
    valid draws first (up to ``num_requested``), padded with the remaining
    draws in draw order when too few were found.  ``draw_*`` arrays cover
    every draw made.
    """

    input_id: int
    origin_levels: np.ndarray
    origin_row: dict
    target: int
    seed: int
    levels: np.ndarray
    selected: np.ndarray
    rows: pd.DataFrame
    predicted: np.ndarray
    valid: np.ndarray
    num_requested: int
    draw_levels: np.ndarray
    draw_valid: np.ndarray
    draw_accepted: np.ndarray
    elapsed: float = 0.0

    @property
    def coverage(self) -> bool:
        return bool(self.valid.any())

    @property
    def n_draws(self) -> int:
        return len(self.draw_valid)

    def __len__(self):
        return len(self.valid)

    def to_frame(self) -> pd.DataFrame:
        out = self.rows.copy()
        out["predicted_label"] = self.predicted
        out["valid"] = self.valid.astype(int)
        out["input_id"] = self.input_id
        return out

    def to_dict(self) -> dict:
        return {
            "input_id": self.input_id,
            "target": int(self.target),
            "seed": int(self.seed),
            "origin": {k: _jsonable(v) for k, v in self.origin_row.items()},
            "origin_levels": self.origin_levels.tolist(),
            "coverage": self.coverage,
            "num_requested": self.num_requested,
            "n_draws": self.n_draws,
            "n_valid_draws": int(self.draw_valid.sum()),
            "samples": [
                {"levels": lv.tolist(), "values": {k: _jsonable(v) for k, v in row.items()},
                 "predicted_label": int(pr), "valid": bool(va)}
                for lv, row, pr, va in zip(self.levels, self.rows.to_dict("records"), self.predicted, self.valid)
            ],
        }


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


class Generator:
    """Hard-sample counterfactuals for single inputs from a trained model."""

    def __init__(self, model: L2cModel, clf: Classifier, batch_draws: int = 32):
        self.model = model
        self.clf = clf
        self.wiring = _Wiring(model, clf)
        self.batch_draws = batch_draws

    def _draw(self, rng, logits, log_pi, log_1m_pi, origin_levels, n):
        m = self.model
        noise, snoise = draw_noise(rng, m, n)
        if m.config.selector:
            s = (log_pi + snoise[..., 1]) > (log_1m_pi + snoise[..., 0])
        else:
            s = np.ones((n, len(m.mutable)), dtype=bool)
        levels = np.repeat(origin_levels[None, :], n, axis=0)
        base = logits + m.unary_shift(levels)
        scores = _block_log_softmax(base, m.mut_sizes) + noise
        if m.rules:
            base = base + m.rule_shift(scores, s, levels)
            scores = _block_log_softmax(base, m.mut_sizes) + noise
        for k, i in enumerate(m.mutable):
            choice = m._block_argmax(scores, k)
            levels[:, i] = np.where(s[:, k], choice, levels[:, i])
        return levels, s

    def decode(self, levels: np.ndarray, s: np.ndarray, origin_row: dict) -> pd.DataFrame:
        """Raw rows for hard samples: midpoints for selected continuous
        features, original values otherwise."""
        m, schema = self.model, self.model.schema
        cols = {}
        for i, f in enumerate(schema.features):
            if f.is_continuous:
                x = float(origin_row[f.name])
                if i in m.mutable:
                    sel = s[:, m.mutable.index(i)]
                    cols[f.name] = np.where(sel, midpoints(f)[levels[:, i]], x)
                else:
                    cols[f.name] = np.full(len(levels), x)
            else:
                cols[f.name] = np.asarray(f.levels, dtype=object)[levels[:, i]]
        return pd.DataFrame(cols, columns=schema.names)

    def classifier_input(self, levels, rows: pd.DataFrame) -> np.ndarray:
        if self.wiring.mode == DISCRETIZED:
            return one_hot_levels(levels, self.model.schema)
        return self.clf.layout.encode(rows)

    def generate(self, row: dict | pd.Series, num_samples: int = 100, budget_seconds: float = 300.0,
                 seed: int = 0, input_id: int = 0, min_sparsity: float | None = None,
                 enforce_constraints: bool = False, max_draws: int | None = None) -> CounterfactualSet:
        """Draw until ``num_samples`` acceptable valid samples exist or the
        budget runs out.  Filters (minimum sparsity in percent, constraint
        re-check) only decide acceptance; nothing is retrained."""
        if num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        m = self.model
        row = dict(row)
        frame = pd.DataFrame([row], columns=m.schema.names)
        b = prepare(m, self.clf, frame)
        origin_levels = b.levels[0]
        target = int(b.target[0])
        tape = ad.Tape()
        zc = tape.constant(b.z)
        logits = m.generator_logits(zc).value
        if m.config.selector:
            pi = m.selector_probs(zc).value
            with np.errstate(divide="ignore"):
                log_pi, log_1m_pi = np.log(pi), np.log1p(-pi)
        else:
            log_pi = log_1m_pi = None
        rng = np.random.default_rng(seed)
        t0 = time.perf_counter()
        all_levels, all_s, all_pred, all_valid, all_acc = [], [], [], [], []
        n_acc = drawn = 0
        while True:
            lv, s = self._draw(rng, logits, log_pi, log_1m_pi, origin_levels, self.batch_draws)
            rows = self.decode(lv, s, row)
            pred = self.clf.predict(self.classifier_input(lv, rows))
            valid = pred == target
            acc = valid.copy()
            if min_sparsity is not None:
                acc &= 100.0 * (lv == origin_levels).mean(axis=1) >= min_sparsity
            if enforce_constraints:
                acc &= constraints_ok(lv, origin_levels, m.schema)
            all_levels.append(lv); all_s.append(s); all_pred.append(pred)
            all_valid.append(valid); all_acc.append(acc)
            n_acc += int(acc.sum())
            drawn += len(lv)
            if n_acc >= num_samples or time.perf_counter() - t0 > budget_seconds:
                break
            if max_draws is not None and drawn >= max_draws:
                break
        lv = np.concatenate(all_levels)
        s = np.concatenate(all_s)
        pred = np.concatenate(all_pred)
        valid = np.concatenate(all_valid)
        acc = np.concatenate(all_acc)
        good = np.flatnonzero(acc)[:num_samples]
        if len(good) < num_samples:
            rest = np.flatnonzero(~acc)[: num_samples - len(good)]
            pick = np.concatenate([good, rest])
        else:
            pick = good
        return CounterfactualSet(
            input_id=input_id,
            origin_levels=origin_levels,
            origin_row=row,
            target=target,
            seed=seed,
            levels=lv[pick],
            selected=s[pick],
            rows=self.decode(lv[pick], s[pick], row),
            predicted=pred[pick],
            valid=acc[pick],
            num_requested=num_samples,
            draw_levels=lv,
            draw_valid=valid,
            draw_accepted=acc,
            elapsed=time.perf_counter() - t0,
        )


def _block_log_softmax(v: np.ndarray, sizes: Sequence[int]) -> np.ndarray:
    out = np.empty_like(v)
    start = 0
    for c in sizes:
        blk = v[:, start:start + c]
        mx = blk.max(axis=1, keepdims=True)
        out[:, start:start + c] = blk - mx - np.log(np.exp(blk - mx).sum(axis=1, keepdims=True))
        start += c
    return out


def constraints_ok(levels: np.ndarray, origin_levels: np.ndarray, schema: DatasetSchema) -> np.ndarray:
    """Per-sample check of every unary and correlation constraint."""
    levels = np.atleast_2d(levels)
    ok = np.ones(len(levels), dtype=bool)
    for i, f in enumerate(schema.features):
        if f.monotonic == NON_DECREASING:
            ok &= levels[:, i] >= origin_levels[i]
        elif f.monotonic == NON_INCREASING:
            ok &= levels[:, i] <= origin_levels[i]
    for r in schema.correlations:
        p, c = schema.index(r.parent), schema.index(r.child)
        up = levels[:, p] > origin_levels[p]
        ok &= ~up | (levels[:, c] >= origin_levels[c])
    return ok


def generate(model: L2cModel, clf: Classifier, input_row, num_samples: int = 100,
             budget_seconds: float = 300.0, min_sparsity_filter: float | None = None,
             seed: int = 0, **kw) -> CounterfactualSet:
    return Generator(model, clf).generate(input_row, num_samples, budget_seconds, seed=seed,
                                          min_sparsity=min_sparsity_filter, **kw)
