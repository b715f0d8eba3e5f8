"""Convert the raw German Credit file into schema + train/val/test CSVs.

Split sizes 640/160/200 from one seeded permutation.
"""
import argparse
from pathlib import Path

from l2c import datasets
from l2c.tabular import write_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--raw", default="data/german/german.data")
    ap.add_argument("--out-dir", default="data/german")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out_dir)
    raw = datasets.read_german(args.raw)
    data = datasets.german_dataset(args.raw)
    datasets.write_schema(datasets.german_schema(raw), out / "schema.json")
    parts = datasets.split(data, (0.64, 0.16, 0.2), seed=args.seed)
    for name, part in zip(("train", "val", "test"), parts):
        write_csv(part, out / f"{name}.csv")
        print(name, len(part), f"positive rate {part.labels.mean():.3f}")


if __name__ == "__main__":
    main()
