"""L2C under each discretization strategy (plus a mixed assignment)."""
import argparse
from dataclasses import replace

from l2c import blackbox as bb
from l2c import counterfactual as cf
from l2c import discretize as dz
from l2c import metrics as mt

from run_desiderata import load


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dataset", choices=["german", "synthetic"], default="synthetic")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-inputs", type=int, default=50)
    args = ap.parse_args()

    schema, (train, val, test) = load(args.dataset)
    clf = bb.train(train, val=val)
    labels = clf.predict(clf.layout.encode(train.frame))
    strategies = [dz.EQUAL_FREQUENCY, dz.MDP, dz.CART, dz.MIXED]
    if any(f.bins is not None for f in schema.continuous):
        strategies.insert(3, dz.MANUAL)
    rows = {}
    for s in strategies:
        disc = dz.fit_discretizer(train, s, labels, seed=args.seed)
        full = dz.attach(schema, disc)
        sizes = {f.name: f.n_levels for f in full.continuous}
        model, _ = cf.train(cf.L2cModel(replace(full, correlations=()), cf.L2cConfig(seed=args.seed)), train, clf)
        gen = cf.Generator(model, clf)
        sets = [gen.generate(test.frame.iloc[r].to_dict(), 100, seed=args.seed ^ r, input_id=r)
                for r in range(min(args.n_inputs, len(test)))]
        rows[s] = mt.evaluate(sets, full)
        print(s, "buckets", sizes, dict(disc.assignments) or "")
    print(mt.format_table(rows))


if __name__ == "__main__":
    main()
