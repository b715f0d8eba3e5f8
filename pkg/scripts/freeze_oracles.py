"""Recompute the slow reference values in tests/oracles.py and freeze them
to tests/frozen_oracles.json.  The test suite compares the package against
the frozen file, so the references are not re-derived from package code."""
import json
import math
import random
import statistics
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))
import oracles  # noqa: E402


def main():
    out = {}
    out["unary_mask_uniform4_level2"] = oracles.mask_restricted_mass([0.25] * 4, [True, False, False, False])
    # child at level 2 of 4 (1-based) after its parent moved up: level 1 masked
    p = [0.4, 0.3, 0.2, 0.1]
    out["binary_mask_child_level2"] = oracles.mask_restricted_mass(p, [True, False, False, False])
    out["midpoint_0_100_c4_level2"] = oracles.midpoint_equal_width(0, 100, 4, 2)
    out["relaxed_decode_half"] = 0.5 * 10 + 0.5 * out["midpoint_0_100_c4_level2"]
    samples = [[0, 0, 0, 0], [1, 0, 0, 0], [1, 1, 1, 0]]  # pairwise disagreements 1, 3, 2
    out["diversity_three_samples"] = oracles.diversity(samples, [True] * 3)
    out["coverage_nine_of_ten"] = 100.0 * statistics.mean([1] * 9 + [0])
    d, s = 37.31, 61.35
    out["harmonic_mean_table"] = 2 * d * s / (d + s)
    out["cart_separable_cut"] = oracles.cart_cuts([i / 10 for i in range(100)], [int(i >= 50) for i in range(100)], 30)
    rng = random.Random(7)
    fixtures = []
    for _ in range(10):
        n = rng.randint(20, 100)
        v = [round(rng.gauss(0, 1), 2) for _ in range(n)]
        y = [int(x + rng.gauss(0, 0.7) > 0) for x in v]
        fixtures.append({"values": v, "labels": y, "mdlp": oracles.mdlp_cuts(v, y),
                         "cart": oracles.cart_cuts(v, y, 30)})
    out["discretizer_fixtures"] = fixtures
    out["epsilon"] = math.exp(-10)
    path = ROOT / "tests" / "frozen_oracles.json"
    path.write_text(json.dumps(out, indent=1) + "\n", encoding="utf-8")
    print("wrote", path)


if __name__ == "__main__":
    main()
