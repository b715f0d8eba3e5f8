"""Command-line pipeline: discretize, train the black box, train L2C,
generate, evaluate and audit privacy.

Every stage reads an experiment config (JSON) and writes into its output
directory.  Reports are deterministic given the seeds; wall-clock timings go
to ``timing.json`` only.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import blackbox as bb
from . import counterfactual as cf
from . import datasets
from . import discretize as dz
from . import metrics as mt
from . import privacy as pv
from .tabular import DataError, Dataset, DatasetSchema, SchemaError, load_csv, load_schema, write_csv

log = logging.getLogger("l2c")


class CliError(Exception):
    pass


@dataclass
class ExperimentConfig:
    train: str
    test: str
    schema: str
    out_dir: str
    val: str | None = None
    attack: str | None = None
    strategy: str = dz.EQUAL_FREQUENCY
    max_buckets: int = 4
    min_split_samples: int = 30
    classifier: str = bb.LOGISTIC
    classifier_mode: str = bb.MIXED
    hidden_dims: list[int] = field(default_factory=list)
    classifier_epochs: int | None = None
    classifier_lr: float | None = None
    classifier_seed: int = 0
    epochs: int = 200
    lr: float = 1e-4
    tau: float = 0.2
    alpha: float = 1e-4
    batch_size: int = 64
    mc_samples: int = 1
    generator_hidden: list[int] = field(default_factory=lambda: [64, 64])
    selector_hidden: int = 64
    selector: bool = True
    num_samples: int = 100
    budget_seconds: float = 300.0
    sparsity_filter: float | None = None
    n_inputs: int | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    k: int = 2

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise CliError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise CliError(f"{path}: invalid JSON ({e})") from None
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise CliError(f"{path}: unknown config key(s): {', '.join(unknown)}")
        base = path.parent
        for key in ("train", "val", "test", "schema", "out_dir", "attack"):
            if raw.get(key) is not None and not Path(raw[key]).is_absolute():
                raw[key] = str((base / raw[key]).resolve())
        try:
            return cls(**raw)
        except TypeError as e:
            raise CliError(f"{path}: {e}") from None

    def l2c_config(self, seed: int) -> cf.L2cConfig:
        return cf.L2cConfig(
            epochs=self.epochs, lr=self.lr, tau=self.tau, alpha=self.alpha,
            batch_size=self.batch_size, mc_samples=self.mc_samples,
            generator_hidden=tuple(self.generator_hidden), selector_hidden=self.selector_hidden,
            selector=self.selector, seed=seed,
        )

    def check_paths(self) -> None:
        for key in ("train", "test", "schema", "val", "attack"):
            p = getattr(self, key)
            if p is not None and not Path(p).exists():
                raise CliError(f"{key} file not found: {p}")

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- helpers -------------------------------------------------------------

def _out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _record_timing(out: Path, key: str, seconds: float) -> None:
    path = out / "timing.json"
    timing = json.loads(path.read_text()) if path.exists() else {}
    timing[key] = seconds
    _dump(timing, path)


def _need(path: Path, what: str) -> Path:
    if not path.exists():
        raise CliError(f"{what} not found at {path}; run the earlier pipeline stage first")
    return path


def _schema(cfg) -> DatasetSchema:
    return load_schema(cfg.schema)


def _load(cfg, key: str) -> Dataset:
    return load_csv(getattr(cfg, key), _schema(cfg))


def _discretized_schema(cfg, out: Path) -> DatasetSchema:
    disc = dz.Discretizer.load(_need(out / "discretizer.json", "discretizer"))
    return dz.attach(_schema(cfg), disc)


def _l2c_schema(cfg, out: Path) -> DatasetSchema:
    schema = _discretized_schema(cfg, out)
    if cfg.classifier_mode != bb.DISCRETIZED and schema.correlations:
        log.info("correlation rules need a discretized classifier; training without them")
        schema = replace(schema, correlations=())
    return schema


# -- stages --------------------------------------------------------------

def cmd_discretize(cfg: ExperimentConfig) -> Path:
    """Fit bucket edges on the training split.

    Supervised strategies use the black box's predicted labels when a mixed
    classifier has already been trained, the training labels otherwise.
    """
    out = _out(cfg)
    train = _load(cfg, "train")
    labels = train.labels
    clf_path = out / "classifier.json"
    if cfg.classifier_mode == bb.MIXED and clf_path.exists():
        clf = bb.Classifier.load(clf_path)
        labels = clf.predict(clf.layout.encode(train.frame))
    disc = dz.fit_discretizer(train, cfg.strategy, labels, cfg.max_buckets, cfg.min_split_samples,
                              seed=cfg.classifier_seed)
    path = out / "discretizer.json"
    disc.save(path)
    return path


def cmd_train_blackbox(cfg: ExperimentConfig) -> Path:
    out = _out(cfg)
    train, test = _load(cfg, "train"), _load(cfg, "test")
    val = _load(cfg, "val") if cfg.val else None
    if cfg.classifier_mode == bb.DISCRETIZED:
        schema = _discretized_schema(cfg, out)
        train, test = replace(train, schema=schema), replace(test, schema=schema)
        val = replace(val, schema=schema) if val is not None else None
    t0 = time.perf_counter()
    clf = bb.train(train, cfg.classifier, tuple(cfg.hidden_dims), cfg.classifier_epochs, cfg.classifier_lr,
                   cfg.classifier_seed, cfg.classifier_mode, val)
    clf.metrics["test_accuracy"] = clf.accuracy(test)
    path = out / "classifier.json"
    clf.save(path)
    _dump(clf.metrics, out / "blackbox_report.json")
    _record_timing(out, "train_blackbox", time.perf_counter() - t0)
    return path


def cmd_train_l2c(cfg: ExperimentConfig) -> list[Path]:
    out = _out(cfg)
    clf = bb.Classifier.load(_need(out / "classifier.json", "classifier"))
    schema = _l2c_schema(cfg, out)
    train = replace(_load(cfg, "train"), schema=schema)
    paths = []
    for seed in cfg.seeds:
        model = cf.L2cModel(schema, cfg.l2c_config(seed))
        model, hist = cf.train(model, train, clf)
        path = out / f"l2c_seed{seed}.json"
        model.save(path)
        hist.to_frame().drop(columns="seconds").to_csv(out / f"loss_seed{seed}.csv", index=False)
        hist.to_frame()[["epoch", "seconds"]].to_csv(out / f"loss_seed{seed}_time.csv", index=False)
        _record_timing(out, f"train_l2c_seed{seed}", hist.seconds[-1] if hist.seconds else 0.0)
        paths.append(path)
    return paths


def _inputs(cfg, data: Dataset) -> pd.DataFrame:
    frame = data.frame
    return frame if cfg.n_inputs is None else frame.iloc[: cfg.n_inputs]


def cmd_generate(cfg: ExperimentConfig, inputs: str | None = None) -> list[Path]:
    """Counterfactuals for each input row; the row seed is ``seed ^ row``."""
    out = _out(cfg)
    clf = bb.Classifier.load(_need(out / "classifier.json", "classifier"))
    data = load_csv(inputs, _schema(cfg)) if inputs else _load(cfg, "test")
    frame = _inputs(cfg, data)
    cf_dir = out / "counterfactuals"
    cf_dir.mkdir(exist_ok=True)
    paths = []
    for seed in cfg.seeds:
        model = cf.L2cModel.load(_need(out / f"l2c_seed{seed}.json", f"L2C checkpoint for seed {seed}"))
        if model.schema.fingerprint() != _l2c_schema(cfg, out).fingerprint():
            raise CliError("checkpoint schema hash does not match the current schema and discretizer")
        gen = cf.Generator(model, clf)
        sets, frames, elapsed = [], [], 0.0
        for row_id, (_, row) in enumerate(frame.iterrows()):
            cs = gen.generate(row.to_dict(), cfg.num_samples, cfg.budget_seconds, seed=seed ^ row_id,
                              input_id=row_id, min_sparsity=cfg.sparsity_filter)
            sets.append(cs.to_dict())
            frames.append(cs.to_frame())
            elapsed += cs.elapsed
        csv_path = cf_dir / f"seed{seed}.csv"
        pd.concat(frames, ignore_index=True).to_csv(csv_path, index=False, float_format="%.10g")
        _dump({"seed": seed, "sets": sets}, cf_dir / f"seed{seed}.json")
        _record_timing(out, f"generate_seed{seed}", elapsed)
        _record_timing(out, f"generate_seed{seed}_per_input", elapsed / max(len(sets), 1))
        paths.append(csv_path)
    return paths


def _load_sets(cf_dir: Path, schema: DatasetSchema) -> dict[str, list[cf.CounterfactualSet]]:
    files = sorted(cf_dir.glob("seed*.json")) if cf_dir.is_dir() else []
    out = {}
    for path in files:
        payload = json.loads(path.read_text(encoding="utf-8"))
        sets = []
        for d in payload["sets"]:
            samples = d["samples"]
            lv = np.array([s["levels"] for s in samples], dtype=np.int64).reshape(len(samples), len(schema))
            valid = np.array([s["valid"] for s in samples], dtype=bool)
            sets.append(cf.CounterfactualSet(
                input_id=d["input_id"], origin_levels=np.asarray(d["origin_levels"]), origin_row=d["origin"],
                target=d["target"], seed=d["seed"], levels=lv, selected=np.zeros((len(lv), 0), bool),
                rows=pd.DataFrame([s["values"] for s in samples]),
                predicted=np.array([s["predicted_label"] for s in samples]), valid=valid,
                num_requested=d["num_requested"], draw_levels=lv, draw_valid=valid, draw_accepted=valid,
            ))
        if sets:
            out[path.stem] = sets
    if not out:
        raise CliError(f"no counterfactual sets found in {cf_dir}")
    return out


def cmd_evaluate(cfg: ExperimentConfig, cf_dir: str | None = None) -> Path:
    out = _out(cfg)
    schema = _discretized_schema(cfg, out)
    cf_path = Path(cf_dir) if cf_dir else out / "counterfactuals"
    by_seed = _load_sets(cf_path, schema)
    reports = {name: mt.evaluate(sets, schema) for name, sets in by_seed.items()}
    mean = mt.aggregate(list(reports.values()))
    mean.n_inputs = next(iter(reports.values())).n_inputs
    payload = {"per_seed": {k: r.to_dict(timing=False) for k, r in reports.items()},
               "mean": mean.to_dict(timing=False)}
    path = out / "report.json"
    _dump(payload, path)
    timing_path = out / "timing.json"
    timing = json.loads(timing_path.read_text()) if timing_path.exists() else {}
    for name, r in reports.items():
        r.inference_time_seconds = timing.get(f"generate_{name}_per_input", 0.0)
    mean.inference_time_seconds = float(np.mean([r.inference_time_seconds for r in reports.values()]))
    (out / "report.txt").write_text(mt.format_table({**reports, "mean": mean}) + "\n", encoding="utf-8")
    return path


def cmd_privacy_audit(cfg: ExperimentConfig, cf_dir: str | None = None, attack: str | None = None) -> Path:
    out = _out(cfg)
    schema = _discretized_schema(cfg, out)
    cf_path = Path(cf_dir) if cf_dir else out / "counterfactuals"
    files = sorted(cf_path.glob("seed*.csv")) if cf_path.is_dir() else []
    if not files:
        raise CliError(f"no counterfactual sets found in {cf_path}")
    attack_path = attack or cfg.attack or cfg.val
    attack_frame = None
    if attack_path is not None:
        if not Path(attack_path).exists():
            raise CliError(f"attack file not found: {attack_path}")
        attack_frame = pd.read_csv(attack_path, dtype=str, keep_default_na=False)
        attack_frame.columns = [c.strip() for c in attack_frame.columns]
        missing = [q for q in schema.quasi_identifiers if q not in attack_frame.columns]
        if missing:
            raise CliError(f"attack dataset is missing quasi-identifier column(s): {', '.join(missing)}")
    reports = {}
    for path in files:
        records = pd.read_csv(path, dtype=str, keep_default_na=False)
        reports[path.stem] = pv.privacy_report(records, schema, attack_frame, k=cfg.k, valid_only=True)
    path = out / "privacy.json"
    _dump(reports, path)
    return path


def cmd_make_synthetic(out_dir: str, n: int = 500, seed: int = 0) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = datasets.synthetic(n, seed)
    for name, part in zip(("train", "val", "test"), datasets.split(data, seed=seed)):
        write_csv(part, out / f"{name}.csv")
    datasets.write_schema(datasets.SYNTHETIC_SCHEMA, out / "schema.json")
    return out


STAGES = ("discretize", "train-blackbox", "train-l2c", "generate", "evaluate", "privacy-audit")


def run_all(cfg: ExperimentConfig) -> Path:
    if cfg.classifier_mode == bb.DISCRETIZED:
        cmd_discretize(cfg)
        cmd_train_blackbox(cfg)
    else:
        cmd_train_blackbox(cfg)
        cmd_discretize(cfg)
    cmd_train_l2c(cfg)
    cmd_generate(cfg)
    cmd_privacy_audit(cfg)
    return cmd_evaluate(cfg)


# -- argument parsing -------------------------------------------------------

def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        cfg.seeds = [args.seed]
    for attr, key in (("num_samples", "num_samples"), ("budget", "budget_seconds"), ("alpha", "alpha"),
                      ("tau", "tau"), ("sparsity_filter", "sparsity_filter"), ("out_dir", "out_dir"),
                      ("strategy", "strategy"), ("epochs", "epochs"), ("n_inputs", "n_inputs")):
        v = getattr(args, attr, None)
        if v is not None:
            setattr(cfg, key, v)
    if getattr(args, "selector", None) is not None:
        cfg.selector = args.selector == "on"
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="l2c", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def stage(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True)
        s.add_argument("--seed", type=int)
        s.add_argument("--out-dir")
        s.add_argument("--num-samples", type=int)
        s.add_argument("--budget", type=float, help="seconds per input row")
        s.add_argument("--alpha", type=float)
        s.add_argument("--tau", type=float)
        s.add_argument("--epochs", type=int)
        s.add_argument("--selector", choices=["on", "off"])
        s.add_argument("--sparsity-filter", type=float, metavar="PCT")
        s.add_argument("--strategy", choices=dz.STRATEGIES)
        s.add_argument("--n-inputs", type=int)
        return s

    stage("discretize", "fit bucket edges")
    stage("train-blackbox", "train the classifier")
    stage("train-l2c", "train generator and selector")
    stage("generate", "generate counterfactuals").add_argument("--inputs", help="CSV of rows to explain")
    stage("evaluate", "desiderata report").add_argument("--cf-dir")
    a = stage("privacy-audit", "linkage-attack report")
    a.add_argument("--cf-dir")
    a.add_argument("--attack")
    stage("run", "all stages in order")
    m = sub.add_parser("make-synthetic", help="write the synthetic benchmark")
    m.add_argument("--out-dir", required=True)
    m.add_argument("--n", type=int, default=500)
    m.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "make-synthetic":
            print(cmd_make_synthetic(args.out_dir, args.n, args.seed))
            return 0
        cfg = _apply_overrides(ExperimentConfig.load(args.config), args)
        cfg.check_paths()
        cf.L2cConfig(tau=cfg.tau, alpha=cfg.alpha)  # validate overrides early
        cfg.write(_out(cfg) / "effective_config.json")
        c = args.command
        if c == "discretize":
            res = cmd_discretize(cfg)
        elif c == "train-blackbox":
            res = cmd_train_blackbox(cfg)
        elif c == "train-l2c":
            res = cmd_train_l2c(cfg)
        elif c == "generate":
            res = cmd_generate(cfg, args.inputs)
        elif c == "evaluate":
            res = cmd_evaluate(cfg, args.cf_dir)
            print((Path(cfg.out_dir) / "report.txt").read_text(), end="")
        elif c == "privacy-audit":
            res = cmd_privacy_audit(cfg, args.cf_dir, args.attack)
        else:
            res = run_all(cfg)
            print((Path(cfg.out_dir) / "report.txt").read_text(), end="")
        for r in res if isinstance(res, list) else [res]:
            log.info("wrote %s", r)
        return 0
    except (CliError, DataError, SchemaError, dz.DiscretizationError, ValueError, KeyError, OSError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
