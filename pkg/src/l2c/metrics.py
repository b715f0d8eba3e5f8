"""Desiderata metrics for counterfactual sets.

All comparisons happen on level indices (continuous features discretized),
and every metric is a percentage.  Per-input values are aggregated with an
unweighted mean.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .counterfactual import CounterfactualSet
from .tabular import NON_DECREASING, NON_INCREASING, DatasetSchema

METRIC_ORDER = ("sparsity", "diversity", "harmonic_mean", "validity", "coverage", "unary", "binary")


@dataclass
class DesiderataReport:
    sparsity: float
    diversity: float
    harmonic_mean: float
    validity: float
    coverage: float
    unary: float
    binary: float | None = None
    inference_time_seconds: float = 0.0
    n_inputs: int = 1

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("inference_time_seconds")
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True)


# -- array-level metrics --------------------------------------------------

def validity_of(valid) -> float:
    valid = np.asarray(valid, dtype=bool)
    if valid.size == 0:
        raise ValueError("empty counterfactual set")
    return 100.0 * valid.mean()


def sparsity_of(levels, origin) -> float:
    levels = np.atleast_2d(levels)
    if levels.shape[0] == 0:
        raise ValueError("empty counterfactual set")
    return 100.0 * float((levels == np.asarray(origin)[None, :]).mean())


def diversity_of(levels, valid) -> float:
    """Mean normalized Hamming distance over unordered pairs of valid samples."""
    v = np.atleast_2d(levels)[np.asarray(valid, dtype=bool)]
    n, N = v.shape
    if n < 2:
        return 0.0
    # count disagreements per feature from level histograms: pairs - agreeing pairs
    total = 0.0
    for j in range(N):
        counts = np.bincount(v[:, j])
        total += n * (n - 1) / 2 - float((counts * (counts - 1) / 2).sum())
    return 100.0 * total / (n * (n - 1) / 2 * N)


def harmonic_mean(diversity: float, sparsity: float) -> float:
    if diversity < 0 or sparsity < 0:
        raise ValueError("metrics must be non-negative")
    if diversity + sparsity == 0:
        return 0.0
    return 2.0 * diversity * sparsity / (diversity + sparsity)


def unary_of(levels, origin, schema: DatasetSchema) -> float:
    levels = np.atleast_2d(levels)
    origin = np.asarray(origin)
    rates = []
    for i, f in enumerate(schema.features):
        if f.monotonic == NON_DECREASING:
            rates.append((levels[:, i] >= origin[i]).mean())
        elif f.monotonic == NON_INCREASING:
            rates.append((levels[:, i] <= origin[i]).mean())
    return 100.0 if not rates else 100.0 * float(np.mean(rates))


def binary_of(levels, origin, schema: DatasetSchema) -> float | None:
    if not schema.correlations:
        return None
    levels = np.atleast_2d(levels)
    origin = np.asarray(origin)
    ok = np.ones(len(levels), dtype=bool)
    for r in schema.correlations:
        try:
            p, c = schema.index(r.parent), schema.index(r.child)
        except KeyError as e:
            raise ValueError(f"correlation rule references unknown feature {e.args[0]!r}") from None
        up = levels[:, p] > origin[p]
        ok &= ~up | (levels[:, c] >= origin[c])
    return 100.0 * float(ok.mean())


# -- set-level API ---------------------------------------------------------

def validity(cs: CounterfactualSet) -> float:
    return validity_of(cs.valid)


def coverage(sets) -> float:
    """100 for a covered set; for a sequence of sets, the mean over inputs."""
    if isinstance(sets, CounterfactualSet):
        return 100.0 if sets.coverage else 0.0
    sets = list(sets)
    if not sets:
        raise ValueError("no counterfactual sets")
    return float(np.mean([100.0 if s.coverage else 0.0 for s in sets]))


def sparsity(cs: CounterfactualSet) -> float:
    return sparsity_of(cs.levels, cs.origin_levels)


def diversity(cs: CounterfactualSet) -> float:
    return diversity_of(cs.levels, cs.valid)


def unary_rate(cs: CounterfactualSet, schema: DatasetSchema) -> float:
    return unary_of(cs.levels, cs.origin_levels, schema)


def binary_rate(cs: CounterfactualSet, schema: DatasetSchema) -> float | None:
    return binary_of(cs.levels, cs.origin_levels, schema)


def evaluate_set(cs: CounterfactualSet, schema: DatasetSchema) -> DesiderataReport:
    s, d = sparsity(cs), diversity(cs)
    return DesiderataReport(
        sparsity=s,
        diversity=d,
        harmonic_mean=harmonic_mean(d, s),
        validity=validity(cs),
        coverage=coverage(cs),
        unary=unary_rate(cs, schema),
        binary=binary_rate(cs, schema),
        inference_time_seconds=cs.elapsed,
    )


def aggregate(reports: list[DesiderataReport]) -> DesiderataReport:
    """Unweighted mean over inputs (or seeds); the harmonic mean is averaged
    per input rather than recomputed from the averaged operands."""
    if not reports:
        raise ValueError("no reports to aggregate")
    out = {}
    for f in fields(DesiderataReport):
        if f.name == "n_inputs":
            continue
        vals = [getattr(r, f.name) for r in reports]
        out[f.name] = None if any(v is None for v in vals) else float(np.mean(vals))
    out["n_inputs"] = int(sum(r.n_inputs for r in reports))
    return DesiderataReport(**out)


def evaluate(sets, schema: DatasetSchema) -> DesiderataReport:
    sets = list(sets)
    if not sets:
        raise ValueError("no counterfactual sets found")
    return aggregate([evaluate_set(cs, schema) for cs in sets])


def format_table(rows: dict[str, DesiderataReport]) -> str:
    """Aligned text table, one method (or seed) per row."""
    cols = ["method", "Sparsity", "Diversity", "Harm. mean", "Validity", "Coverage", "Unary", "Binary", "Time(s)"]
    body = []
    for name, r in rows.items():
        vals = [getattr(r, k) for k in METRIC_ORDER]
        cells = [name] + ["-" if v is None else f"{v:.2f}" for v in vals] + [f"{r.inference_time_seconds:.3f}"]
        body.append(cells)
    widths = [max(len(c), *(len(b[k]) for b in body)) for k, c in enumerate(cols)]
    line = lambda cells: "  ".join(c.ljust(w) if k == 0 else c.rjust(w) for k, (c, w) in enumerate(zip(cells, widths)))
    return "\n".join([line(cols), line(["-" * w for w in widths])] + [line(b) for b in body])
