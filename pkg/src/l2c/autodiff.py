"""Tape-based reverse-mode autodiff over float64 numpy arrays, plus Adam.

Operations work on row batches: values are ``(batch, width)`` arrays (or
``(batch,)`` / scalars after reductions).  Random noise for the relaxed
samplers is always passed in by the caller.
"""
from __future__ import annotations

import json
from typing import Iterable, Sequence

import numpy as np

PROB_FLOOR = 1e-12


class Parameter:
    __slots__ = ("name", "value", "grad", "adam_m", "adam_v", "step_count")

    def __init__(self, value, name: str = ""):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.adam_m = np.zeros_like(self.value)
        self.adam_v = np.zeros_like(self.value)
        self.step_count = 0

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad.fill(0.0)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


class Node:
    __slots__ = ("tape", "value", "parents", "backward_fn", "grad", "param")

    def __init__(self, tape, value, parents=(), backward_fn=None, param=None):
        self.tape = tape
        self.value = value
        self.parents = parents
        self.backward_fn = backward_fn
        self.grad = None
        self.param = param

    @property
    def shape(self):
        return np.shape(self.value)

    def __repr__(self):
        return f"Node(shape={self.shape})"


class Tape:
    """Append-only record of a forward computation."""

    def __init__(self):
        self.nodes: list[Node] = []
        self._watched: dict[int, Node] = {}

    def _record(self, value, parents=(), backward_fn=None, param=None) -> Node:
        node = Node(self, value, tuple(parents), backward_fn, param)
        self.nodes.append(node)
        return node

    def constant(self, value) -> Node:
        return self._record(np.asarray(value, dtype=np.float64))

    def variable(self, value) -> Node:
        """A leaf whose adjoint is kept after ``backward`` (e.g. classifier inputs)."""
        return self._record(np.array(value, dtype=np.float64))

    def watch(self, param: Parameter) -> Node:
        node = self._watched.get(id(param))
        if node is None:
            node = self._record(param.value, param=param)
            self._watched[id(param)] = node
        return node

    def backward(self, loss: Node) -> None:
        """Propagate adjoints from ``loss`` and accumulate parameter grads."""
        for n in self.nodes:
            n.grad = None
        loss.grad = np.ones_like(loss.value, dtype=np.float64)
        for node in reversed(self.nodes):
            if node.grad is None:
                continue
            if node.backward_fn is not None:
                grads = node.backward_fn(node.grad)
                for parent, g in zip(node.parents, grads):
                    if g is None:
                        continue
                    parent.grad = g if parent.grad is None else parent.grad + g
            elif node.param is not None:
                node.param.grad += node.grad


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Node):
            return x.tape
    raise TypeError("at least one operand must be a Node")


def _as_node(tape: Tape, x) -> Node:
    return x if isinstance(x, Node) else tape.constant(x)


def _check_same(a: Node, b: Node, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- layers and elementwise ops -------------------------------------------

def dense(x: Node, weight: Parameter, bias: Parameter) -> Node:
    """``x @ W.T + b`` for ``x`` of shape (batch, in) and W of shape (out, in)."""
    t = x.tape
    W, b = t.watch(weight), t.watch(bias)
    xv = x.value
    if W.value.ndim != 2 or b.value.shape != (W.value.shape[0],) or xv.shape[-1] != W.value.shape[1]:
        raise ValueError(
            f"dense: shape mismatch x{xv.shape}, W{W.value.shape}, b{b.value.shape}"
        )
    out = xv @ W.value.T + b.value

    def backward(g):
        g2 = np.atleast_2d(g)
        x2 = np.atleast_2d(xv)
        return g @ W.value, g2.T @ x2, g2.sum(axis=0)

    return t._record(out, (x, W, b), backward)


def relu(x: Node) -> Node:
    mask = x.value > 0
    return x.tape._record(np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x: Node) -> Node:
    v = x.value
    out = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))), np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    return x.tape._record(out, (x,), lambda g: (g * out * (1.0 - out),))


def log(x: Node, floor: float = PROB_FLOOR) -> Node:
    """Natural log with the argument clamped below at ``floor``."""
    v = x.value
    clamped = v < floor
    safe = np.where(clamped, floor, v)
    return x.tape._record(np.log(safe), (x,), lambda g: (np.where(clamped, 0.0, g / safe),))


def add(a, b) -> Node:
    """Sum of two nodes of equal shape; a numpy constant may broadcast."""
    t = _tape_of(a, b)
    if isinstance(a, Node) and isinstance(b, Node):
        _check_same(a, b, "binary op")
    a, b = _as_node(t, a), _as_node(t, b)
    out = a.value + b.value
    sa, sb = a.shape, b.shape
    return t._record(out, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Node:
    t = _tape_of(a, b)
    if isinstance(a, Node) and isinstance(b, Node):
        _check_same(a, b, "binary op")
    a, b = _as_node(t, a), _as_node(t, b)
    sa, sb = a.shape, b.shape
    return t._record(a.value - b.value, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Node:
    t = _tape_of(a, b)
    if isinstance(a, Node) and isinstance(b, Node):
        _check_same(a, b, "binary op")
    a, b = _as_node(t, a), _as_node(t, b)
    av, bv = a.value, b.value
    return t._record(
        av * bv,
        (a, b),
        lambda g: (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)),
    )


def scale(x: Node, c: float) -> Node:
    return x.tape._record(x.value * c, (x,), lambda g: (g * c,))


def matmul_const(x: Node, M: np.ndarray) -> Node:
    """``x @ M`` for a constant matrix ``M``."""
    M = np.asarray(M, dtype=np.float64)
    if x.value.shape[-1] != M.shape[0]:
        raise ValueError(f"matmul_const: shape mismatch {x.shape} @ {M.shape}")
    return x.tape._record(x.value @ M, (x,), lambda g: (g @ M.T,))


# -- reductions -----------------------------------------------------------

def l1_norm(x: Node) -> Node:
    """Row-wise L1 norm over the last axis."""
    v = x.value
    sign = np.sign(v)
    return x.tape._record(np.abs(v).sum(axis=-1), (x,), lambda g: (np.expand_dims(g, -1) * sign,))


def sum_(x: Node) -> Node:
    shape = x.shape
    return x.tape._record(np.asarray(x.value.sum()), (x,), lambda g: (np.full(shape, float(g)),))


def mean(x: Node) -> Node:
    shape, n = x.shape, x.value.size
    return x.tape._record(np.asarray(x.value.mean()), (x,), lambda g: (np.full(shape, float(g) / n),))


# -- column plumbing ------------------------------------------------------

def concat(nodes: Sequence[Node]) -> Node:
    """Concatenate along the last axis."""
    t = _tape_of(*nodes)
    widths = [n.value.shape[-1] for n in nodes]
    cuts = np.cumsum(widths)[:-1]
    out = np.concatenate([n.value for n in nodes], axis=-1)
    return t._record(out, tuple(nodes), lambda g: tuple(np.split(g, cuts, axis=-1)))


def take(x: Node, cols) -> Node:
    """Select columns (last axis) by index; duplicates accumulate on backward."""
    cols = np.asarray(cols, dtype=np.int64)
    shape = x.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, (Ellipsis, cols), g)
        return (out,)

    return x.tape._record(x.value[..., cols], (x,), backward)


def repeat_blocks(x: Node, sizes: Sequence[int]) -> Node:
    """Repeat column ``i`` of ``x`` ``sizes[i]`` times (per-feature gate to
    per-level width)."""
    sizes = np.asarray(sizes, dtype=np.int64)
    if x.value.shape[-1] != len(sizes):
        raise ValueError("repeat_blocks: one size per column required")
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return x.tape._record(
        np.repeat(x.value, sizes, axis=-1), (x,), lambda g: (np.add.reduceat(g, starts, axis=-1),)
    )


# -- probability ops ------------------------------------------------------

def _block_softmax_values(v: np.ndarray, sizes: Sequence[int]) -> np.ndarray:
    out = np.empty_like(v)
    start = 0
    for c in sizes:
        blk = v[..., start:start + c]
        e = np.exp(blk - blk.max(axis=-1, keepdims=True))
        out[..., start:start + c] = e / e.sum(axis=-1, keepdims=True)
        start += c
    return out


def softmax_block(x: Node, sizes: Sequence[int]) -> Node:
    """Independent softmax over consecutive column blocks of the given sizes."""
    sizes = [int(c) for c in sizes]
    if sum(sizes) != x.value.shape[-1]:
        raise ValueError(f"softmax_block: block sizes sum to {sum(sizes)}, width is {x.value.shape[-1]}")
    out = _block_softmax_values(x.value, sizes)

    def backward(g):
        gx = np.empty_like(g)
        start = 0
        for c in sizes:
            s = out[..., start:start + c]
            gs = g[..., start:start + c]
            gx[..., start:start + c] = s * (gs - (gs * s).sum(axis=-1, keepdims=True))
            start += c
        return (gx,)

    return x.tape._record(out, (x,), backward)


def cross_entropy(probs: Node, target) -> Node:
    """Per-row ``-log p[target]`` for probs of shape (batch, classes)."""
    p = probs.value
    tgt = np.broadcast_to(np.asarray(target, dtype=np.int64), p.shape[:-1])
    rows = np.arange(p.shape[0]) if p.ndim == 2 else ()
    picked = p[rows, tgt] if p.ndim == 2 else p[tgt]
    clamped = picked < PROB_FLOOR
    safe = np.where(clamped, PROB_FLOOR, picked)

    def backward(g):
        gp = np.zeros_like(p)
        val = np.where(clamped, 0.0, -g / safe)
        if p.ndim == 2:
            gp[rows, tgt] = val
        else:
            gp[tgt] = val
        return (gp,)

    return probs.tape._record(-np.log(safe), (probs,), backward)


def gumbel_softmax(log_probs: Node, noise, tau: float, sizes: Sequence[int]) -> Node:
    """Relaxed categorical sample per block: softmax((log p + G) / tau)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return softmax_block(scale(add(log_probs, np.asarray(noise, dtype=np.float64)), 1.0 / tau), sizes)


def binary_concrete(pi: Node, noise, tau: float) -> Node:
    """Relaxed Bernoulli sample from probabilities ``pi``.

    ``noise[..., 0]`` and ``noise[..., 1]`` are the Gumbel draws of the
    "off" and "on" categories.  The result is the two-category softmax
    weight of "on", i.e. ``sigmoid((log pi + G1 - log(1-pi) - G0) / tau)``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    noise = np.asarray(noise, dtype=np.float64)
    on = add(log(pi), noise[..., 1])
    off = add(log(sub(np.ones(pi.shape), pi)), noise[..., 0])
    return sigmoid(scale(sub(on, off), 1.0 / tau))


def gumbel_noise(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard Gumbel draws ``-log(-log u)``, ``u ~ Uniform(0, 1)``."""
    u = rng.uniform(np.finfo(float).tiny, 1.0, size=shape)
    return -np.log(-np.log(u))


# -- optimization ---------------------------------------------------------

def adam_step(params: Iterable[Parameter], lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One bias-corrected Adam update; gradients are zeroed afterwards."""
    for p in params:
        p.step_count += 1
        p.adam_m = beta1 * p.adam_m + (1 - beta1) * p.grad
        p.adam_v = beta2 * p.adam_v + (1 - beta2) * p.grad**2
        m_hat = p.adam_m / (1 - beta1**p.step_count)
        v_hat = p.adam_v / (1 - beta2**p.step_count)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p.zero_grad()


# -- serialization --------------------------------------------------------

def params_to_dict(params: dict[str, Parameter]) -> dict:
    return {
        name: {"shape": list(p.value.shape), "data": p.value.ravel().tolist()}
        for name, p in params.items()
    }


def params_from_dict(d: dict) -> dict[str, Parameter]:
    return {
        name: Parameter(np.asarray(v["data"], dtype=np.float64).reshape(v["shape"]), name)
        for name, v in d.items()
    }


def dump_params(params: dict[str, Parameter]) -> str:
    return json.dumps(params_to_dict(params), sort_keys=True)


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int, name: str) -> tuple[Parameter, Parameter]:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    W = Parameter(rng.uniform(-limit, limit, size=(fan_out, fan_in)), name + ".weight")
    b = Parameter(np.zeros(fan_out), name + ".bias")
    return W, b

