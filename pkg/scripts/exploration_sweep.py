"""Mask-churn sweep on planted sparse regression through the CLI.

Trains dual averaging, Spartan (beta_max=10) and IMP for several seeds
from scripts/configs/planted_regression.ini, then runs ``spartan analyze``
to report the median consecutive-epoch mask correlation per rule.

    python scripts/exploration_sweep.py --out runs/exploration --seeds 0 1 2
"""

import argparse
import sys
from pathlib import Path

from spartan.cli import main as spartan
from spartan.experiments import SWEEP_RUNS

CONFIG = Path(__file__).with_name("configs") / "planted_regression.ini"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/exploration")
    ap.add_argument("--config", default=str(CONFIG))
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()

    dirs, labels = [], []
    for label, rule, beta_max in SWEEP_RUNS:
        for seed in args.seeds:
            out = Path(args.out) / f"{label}_seed{seed}"
            overrides = [f"rule.name={rule}", f"schedule.beta_max={beta_max}",
                         f"schedule.beta_start={min(1.0, beta_max)}", f"run.seed={seed}", f"dataset.seed={seed}"]
            argv = ["train", args.config, "-o", str(out)]
            for o in overrides:
                argv += ["--set", o]
            code = spartan(argv)
            if code:
                return code
            dirs.append(str(out))
            labels.append(label)
    order = ",".join(label for label, _, _ in SWEEP_RUNS)
    return spartan(["analyze", *dirs, "--labels", ",".join(labels), "--order", order,
                    "-o", str(Path(args.out) / "correlations.csv")])


if __name__ == "__main__":
    sys.exit(main())
