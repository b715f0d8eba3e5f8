"""Selector on/off and sparsity-weight sweep on one dataset."""
import argparse
from dataclasses import replace

import numpy as np

from l2c import blackbox as bb
from l2c import counterfactual as cf
from l2c import discretize as dz
from l2c import metrics as mt

from run_desiderata import load


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dataset", choices=["german", "synthetic"], default="synthetic")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.0, 1e-4, 1e-2])
    ap.add_argument("--n-inputs", type=int, default=50)
    args = ap.parse_args()

    schema, (train, val, test) = load(args.dataset)
    clf = bb.train(train, val=val)
    full = dz.attach(schema, dz.fit_discretizer(train, dz.EQUAL_FREQUENCY))
    l2c_schema = replace(full, correlations=())
    variants = [("selector off", dict(selector=False))] + [(f"alpha {a:g}", dict(alpha=a)) for a in args.alphas]
    rows, pi_norm = {}, {}
    for name, kw in variants:
        reps, norms = [], []
        for seed in args.seeds:
            model, hist = cf.train(cf.L2cModel(l2c_schema, cf.L2cConfig(seed=seed, **kw)), train, clf)
            gen = cf.Generator(model, clf)
            sets = [gen.generate(test.frame.iloc[r].to_dict(), 100, seed=seed ^ r, input_id=r)
                    for r in range(min(args.n_inputs, len(test)))]
            reps.append(mt.evaluate(sets, full))
            norms.append(hist.l1[-1])
        rows[name] = mt.aggregate(reps)
        pi_norm[name] = float(np.mean(norms))
    print(mt.format_table(rows))
    for name, v in pi_norm.items():
        print(f"{name}: mean |pi|_1 in last epoch {v:.3f}")


if __name__ == "__main__":
    main()
