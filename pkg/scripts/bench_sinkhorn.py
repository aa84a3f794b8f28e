"""Sinkhorn initialization benchmark at d = 100,000.

Writes a CSV of median iterations and wall time per (beta, strategy) and
prints whether sorted initialization needs no more iterations than a cold
start and whether all strategies agree within 2 * tolerance.

    python scripts/bench_sinkhorn.py --out runs/bench_sinkhorn.csv
"""

import argparse
import sys

from spartan.bench import BENCH_COLUMNS, BenchConfig, rows_by, run_benchmark
from spartan.io import write_csv


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/bench_sinkhorn.csv")
    ap.add_argument("--d", type=int, default=100_000)
    ap.add_argument("--betas", type=float, nargs="+", default=[0.0, 1.0, 8.0, 32.0, 128.0])
    ap.add_argument("--trials", type=int, default=3)
    args = ap.parse_args()

    cfg = BenchConfig(d=args.d, betas=tuple(args.betas), trials=args.trials)
    rows = run_benchmark(cfg)
    write_csv(args.out, BENCH_COLUMNS, [r.__dict__ for r in rows])
    for beta in cfg.betas:
        cold, srt = rows_by(rows, beta, "cold"), rows_by(rows, beta, "sorted_threshold")
        gap = max(r.max_objective_gap for r in rows if r.beta == beta)
        print(f"beta={beta:g}: iterations cold={cold.median_iterations:g} "
              f"dual_cache={rows_by(rows, beta, 'dual_cache').median_iterations:g} "
              f"sorted={srt.median_iterations:g}; max objective gap {gap:.2e} "
              f"({'within' if gap <= 2 * cfg.tolerance else 'OUTSIDE'} 2*tol)")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
