"""Central finite-difference gradient checks for tape-built scalars."""
from __future__ import annotations

import numpy as np

from l2c import autodiff as ad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.ravel(a), np.ravel(b)
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


def check(loss_fn, params, h: float = 1e-6) -> float:
    """``loss_fn(tape)`` builds a scalar from watched ``params``.

    Returns the norm-wise relative error between the tape gradient and
    central differences over every entry of every parameter.
    """
    for p in params:
        p.zero_grad()
    tape = ad.Tape()
    tape.backward(loss_fn(tape))
    analytic = np.concatenate([p.grad.ravel().copy() for p in params])
    numeric = []
    for p in params:
        flat = p.value.reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + h
            up = float(loss_fn(ad.Tape()).value)
            flat[k] = old - h
            down = float(loss_fn(ad.Tape()).value)
            flat[k] = old
            numeric.append((up - down) / (2 * h))
    for p in params:
        p.zero_grad()
    return relative_error(analytic, np.array(numeric))


def _weighted(node, w):
    return ad.sum_(ad.mul(node, w))


def op_cases(rng: np.random.Generator):
    """(name, loss_fn, params) for every differentiable op."""
    B, n = 3, 5
    P = lambda *shape, lo=-1.0, hi=1.0: ad.Parameter(rng.uniform(lo, hi, shape))
    x, y = P(B, n), P(B, n)
    pos = P(B, n, lo=0.1, hi=2.0)
    away = ad.Parameter(rng.choice([-1, 1], (B, n)) * rng.uniform(0.1, 1.0, (B, n)))
    W, b = P(4, n), P(4)
    M = rng.normal(size=(n, 2))
    w5 = rng.normal(size=(B, n))
    w4 = rng.normal(size=(B, 4))
    w2 = rng.normal(size=(B, 2))
    w7 = rng.normal(size=(B, n + 2))
    sizes = [2, 3]
    probs = ad.Parameter(rng.dirichlet(np.ones(2), B))
    pi = P(B, 2, lo=0.05, hi=0.95)
    noise = ad.gumbel_noise(rng, (B, n))
    bnoise = ad.gumbel_noise(rng, (B, 2, 2))
    tgt = rng.integers(0, 2, B)
    gate = P(B, 2)
    W_ = lambda t, p: t.watch(p)
    cases = [
        ("dense", lambda t: _weighted(ad.dense(W_(t, x), W, b), w4), [x, W, b]),
        ("relu", lambda t: _weighted(ad.relu(W_(t, away)), w5), [away]),
        ("sigmoid", lambda t: _weighted(ad.sigmoid(W_(t, x)), w5), [x]),
        ("log", lambda t: _weighted(ad.log(W_(t, pos)), w5), [pos]),
        ("add", lambda t: _weighted(ad.add(W_(t, x), W_(t, y)), w5), [x, y]),
        ("sub", lambda t: _weighted(ad.sub(W_(t, x), W_(t, y)), w5), [x, y]),
        ("mul", lambda t: _weighted(ad.mul(W_(t, x), W_(t, y)), w5), [x, y]),
        ("mul_broadcast", lambda t: _weighted(ad.mul(W_(t, x), M[:, 0]), w5), [x]),
        ("scale", lambda t: _weighted(ad.scale(W_(t, x), -2.5), w5), [x]),
        ("matmul_const", lambda t: _weighted(ad.matmul_const(W_(t, x), M), w2), [x]),
        ("l1_norm", lambda t: ad.sum_(ad.mul(ad.l1_norm(W_(t, away)), w5[:, 0])), [away]),
        ("mean", lambda t: ad.mean(ad.mul(W_(t, x), W_(t, x))), [x]),
        ("concat", lambda t: _weighted(ad.concat([W_(t, x), W_(t, gate)]), w7), [x, gate]),
        ("take", lambda t: _weighted(ad.take(W_(t, x), [4, 0, 0, 2]), w4), [x]),
        ("repeat_blocks", lambda t: _weighted(ad.repeat_blocks(W_(t, gate), sizes), w5), [gate]),
        ("softmax_block", lambda t: _weighted(ad.softmax_block(W_(t, x), sizes), w5), [x]),
        ("cross_entropy", lambda t: ad.sum_(ad.cross_entropy(W_(t, probs), tgt)), [probs]),
        ("gumbel_softmax", lambda t: _weighted(ad.gumbel_softmax(W_(t, x), noise, 0.5, sizes), w5), [x]),
        ("binary_concrete", lambda t: _weighted(ad.binary_concrete(W_(t, pi), bnoise, 0.5), w2), [pi]),
    ]
    return cases


def tiny_problem(seed: int):
    """A three-feature schema, a random classifier and a small L2C model.

    Even seeds use a mixed-input classifier; odd seeds a discretized one
    together with a correlation rule, so the rule mask is exercised too.
    """
    import pandas as pd

    from l2c import blackbox as bb
    from l2c import counterfactual as cf
    from l2c.tabular import DatasetSchema

    rng = np.random.default_rng(seed)
    discretized = seed % 2 == 1
    schema = DatasetSchema.from_config({
        "features": [
            {"name": "c", "kind": "continuous", "range": [0, 1], "edges": [0, 0.3, 0.6, 1],
             "monotonic": "non_decreasing"},
            {"name": "k", "kind": "categorical", "levels": ["lo", "hi"], "mutation_cost": 0.25},
            {"name": "im", "kind": "categorical", "levels": ["a", "b"], "mutable": False},
        ],
        "correlations": [{"parent": "c", "child": "k"}] if discretized else [],
    })
    layout = bb.InputLayout(schema, bb.DISCRETIZED if discretized else bb.MIXED)
    layout.shift, layout.scale = np.zeros(layout.width), np.ones(layout.width)
    W, b = ad.glorot(rng, 1, layout.width, "layer0")
    W.value *= 3
    clf = bb.Classifier(bb.LOGISTIC, {W.name: W, b.name: b}, layout)
    model = cf.L2cModel(schema, cf.L2cConfig(generator_hidden=(4, 4), selector_hidden=4, seed=seed, alpha=0.1))
    # zero biases put dead-ReLU pre-activations exactly on the kink
    for name, p in model.params.items():
        if name.endswith(".bias"):
            p.value[...] = rng.uniform(-0.5, 0.5, p.shape)
    frame = pd.DataFrame({"c": rng.uniform(0, 1, 4), "k": rng.choice(["lo", "hi"], 4),
                          "im": rng.choice(["a", "b"], 4)})
    batch = cf.prepare(model, clf, frame)
    noise, snoise = cf.draw_noise(rng, model, len(batch))

    def loss_fn(tape):
        return cf.relaxed_loss(model, clf, batch, noise, snoise, tape)[0]

    return loss_fn, model.trainable()
