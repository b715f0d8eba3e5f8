"""Desiderata table for one dataset over several L2C seeds.

    python scripts/run_desiderata.py --dataset german --seeds 0 1 2 3 4
"""
import argparse
import json
from dataclasses import replace
from pathlib import Path


from l2c import blackbox as bb
from l2c import counterfactual as cf
from l2c import discretize as dz
from l2c import metrics as mt
from l2c.tabular import load_csv, load_schema

ROOT = Path(__file__).resolve().parents[1]


def load(name):
    d = ROOT / "data" / name
    schema = load_schema(d / "schema.json")
    return schema, [load_csv(d / f"{s}.csv", schema) for s in ("train", "val", "test")]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dataset", choices=["german", "synthetic"], default="german")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--n-inputs", type=int)
    ap.add_argument("--num-samples", type=int, default=100)
    ap.add_argument("--strategy", default=dz.EQUAL_FREQUENCY, choices=dz.STRATEGIES)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    schema, (train, val, test) = load(args.dataset)
    clf = bb.train(train, val=val)
    print(f"black box test accuracy {100 * clf.accuracy(test):.2f}%")
    labels = clf.predict(clf.layout.encode(train.frame))
    full = dz.attach(schema, dz.fit_discretizer(train, args.strategy, labels))
    l2c_schema = replace(full, correlations=())
    n = len(test) if args.n_inputs is None else args.n_inputs
    rows = {}
    for seed in args.seeds:
        model, hist = cf.train(cf.L2cModel(l2c_schema, cf.L2cConfig(seed=seed)), train, clf)
        gen = cf.Generator(model, clf)
        sets = [gen.generate(test.frame.iloc[r].to_dict(), args.num_samples, seed=seed ^ r, input_id=r)
                for r in range(n)]
        rows[f"seed {seed}"] = mt.evaluate(sets, full)
        print(f"seed {seed}: final loss {hist.loss[-1]:.4f}, train {hist.seconds[-1]:.1f}s")
    rows["mean"] = mt.aggregate(list(rows.values()))
    rows["mean"].n_inputs = n
    print(mt.format_table(rows))
    spars_floor = 100 * sum(not f.mutable for f in schema.features) / len(schema)
    print(f"minimum possible sparsity {spars_floor:.2f}%")
    if args.out:
        args.out.write_text(json.dumps({k: r.to_dict() for k, r in rows.items()}, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
