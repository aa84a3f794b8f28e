"""FLOP-sensitive valuation: c * |theta| versus sqrt(c) * |theta|.

Trains a two-layer MLP whose first-layer weights cost 4x the second
layer's, at the same total cost budget, and reports realized sparsity and
how many weights each layer keeps.

    python scripts/flop_sensitive.py
"""

import sys

import numpy as np

from spartan.experiments import FlopConfig, flop_sensitivity


def main() -> int:
    cfg = FlopConfig()
    res = flop_sensitivity(cfg)
    print(f"cost budget {res.budget:g} (fc1 entries cost {cfg.expensive_cost:g}, fc2 entries cost {cfg.cheap_cost:g})")
    for p, vals in res.sparsity.items():
        kept = res.kept[p]
        print(f"valuation exponent {p:g}: sparsity median {np.median(vals):.4f} per seed {np.round(vals, 4).tolist()}; "
              f"kept fc1/fc2 {[(k['fc1.weight'], k['fc2.weight']) for k in kept]}")
    lower = np.median(res.sparsity[0.5]) < np.median(res.sparsity[1.0])
    print("sqrt-cost valuation gives lower sparsity:", "yes" if lower else "no")
    return 0


if __name__ == "__main__":
    sys.exit(main())
