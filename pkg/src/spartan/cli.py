"""Command-line entry point: ``spartan {mask,train,bench-sinkhorn,analyze}``.

Exit codes: 0 success, 2 invalid config or input, 3 numerical divergence.
The default output directory is ``$SPARTAN_OUTPUT_DIR`` (else ``runs`` for
``train`` and the current directory for the other commands).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (
    CORRELATION_COLUMNS,
    correlation_series,
    load_mask_archive,
    ordering_holds,
    window_median,
    write_mask_archive_entry,
)
from .bench import BENCH_COLUMNS, BenchConfig, run_benchmark
from .config import OUTPUT_DIR_ENV, ConfigError, load_config
from .data import DatasetError, load_dataset
from .io import InputError, atomic_write_text, csv_text, format_float, read_vector, write_csv, write_vector
from .models import Model
from .ot_topk import INIT_STRATEGIES, InvalidInstanceError, SinkhornConfig, TopKInstance, hard_project, soft_topk_forward
from .trainer import METRICS_COLUMNS, TrainingDiverged, train

EXIT_OK, EXIT_INPUT, EXIT_DIVERGED = 0, 2, 3


class CLIError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _default_dir(fallback: str) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or fallback)


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


# -- mask ---------------------------------------------------------------------

def cmd_mask(args: argparse.Namespace) -> int:
    values = read_vector(args.values)
    costs = read_vector(args.costs) if args.costs else None
    if costs is not None and costs.size != values.size:
        raise CLIError(f"costs has {costs.size} entries but values has {values.size}")
    if args.hard:
        hard = hard_project(values, args.k, costs)
        mask = hard.indicator
        iterations, converged = 0, True
    else:
        inst = TopKInstance(values, args.k, args.beta, costs)
        cfg = SinkhornConfig(args.max_iterations, args.tolerance, args.init_strategy)
        res = soft_topk_forward(inst, cfg)
        mask, iterations, converged = res.mask, res.iterations, res.converged
    c = np.ones_like(values) if costs is None else costs
    out = Path(args.output) if args.output else _default_dir(".") / "mask.txt"
    write_vector(out, mask, args.decimals)
    print(f"budget={format_float(float(c @ mask), 6)} iterations={iterations} "
          f"converged={str(bool(converged)).lower()} output={out}")
    return EXIT_OK


# -- train --------------------------------------------------------------------

def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.set or ())
    out = Path(args.output_dir) if args.output_dir else Path(cfg.output_dir)
    data = load_dataset(cfg.dataset, task=cfg.task)
    n_classes = data.n_classes if data.task == "classification" else None
    try:
        spec = cfg.model.resolve(data.dim, n_classes)
        model = Model(spec)
        units = cfg.group.build(model.layout)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if spec.input_dim != data.dim:
        raise ConfigError(f"model input_dim {spec.input_dim} != dataset dim {data.dim}")

    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "config.ini", Path(args.config).read_text()
                      + "".join(f"; override: {s}\n" for s in (args.set or ())))
    rows: list[dict] = []

    def on_epoch(row, support, params):
        rows.append(row.as_dict())
        write_csv(out / "metrics.csv", METRICS_COLUMNS, rows)
        write_mask_archive_entry(out / "masks", row.epoch, support, units.n_units)

    write_csv(out / "metrics.csv", METRICS_COLUMNS, rows)
    try:
        res = train(model, data, cfg.rule, cfg.schedule, cfg.optimizer, cfg.group, cfg.seed, cfg.sinkhorn,
                    on_epoch=on_epoch)
    except TrainingDiverged as exc:
        write_vector(out / "final_params.txt", exc.params)
        print(f"error: {exc}; last finite parameters written to {out / 'final_params.txt'}", file=sys.stderr)
        return EXIT_DIVERGED
    write_vector(out / "final_params.txt", res.params)
    write_vector(out / "final_sparse_params.txt", res.sparse_params)
    last = res.metrics[-1] if res.metrics else None
    summary = f"epochs={len(res.metrics)} output={out}"
    if last is not None:
        summary += f" {res.eval_metric_name}={format_float(last.eval_metric, 6)} sparsity={format_float(last.sparsity, 4)}"
    print(summary)
    return EXIT_OK


# -- bench-sinkhorn -----------------------------------------------------------

def cmd_bench(args: argparse.Namespace) -> int:
    try:
        cfg = BenchConfig(d=args.d, betas=args.betas, strategies=args.strategies, trials=args.trials,
                          steps=args.steps, keep_fraction=args.keep_fraction, value_scale=args.value_scale,
                          tolerance=args.tolerance, max_iterations=args.max_iterations, seed=args.seed)
    except ValueError as exc:
        raise CLIError(str(exc)) from None
    rows = [asdict(r) for r in run_benchmark(cfg)]
    if args.output:
        write_csv(args.output, BENCH_COLUMNS, rows)
    else:
        sys.stdout.write(csv_text(BENCH_COLUMNS, rows))
    return EXIT_OK


# -- analyze ------------------------------------------------------------------

def _archive_dir(path: str) -> Path:
    p = Path(path)
    return p / "masks" if (p / "masks").is_dir() else p


def cmd_analyze(args: argparse.Namespace) -> int:
    labels = list(args.labels) if args.labels else [Path(p).resolve().name for p in args.archives]
    if len(labels) != len(args.archives):
        raise CLIError(f"{len(labels)} labels for {len(args.archives)} archives")
    archives = [load_mask_archive(_archive_dir(p)) for p in args.archives]
    ds = {a.d for a in archives}
    if len(ds) > 1:
        raise CLIError(f"archives have different unit counts: {sorted(ds)}")

    rows = []
    lo, hi = args.window
    per_label: dict[str, list[float]] = {}
    for run, (label, archive) in enumerate(zip(labels, archives)):
        corr_final, corr_prev = correlation_series(archive)
        prev = [None] + corr_prev
        for e, cf, cp in zip(archive.epochs, corr_final, prev):
            rows.append({"run": f"{label}#{run}", "epoch": e, "corr_final": cf, "corr_prev": "" if cp is None else cp})
        per_label.setdefault(label, []).append(window_median(archive, lo, hi))

    text = csv_text(CORRELATION_COLUMNS, rows)
    if args.output:
        atomic_write_text(args.output, text)
    else:
        sys.stdout.write(text)

    medians = {k: float(np.median(v)) for k, v in per_label.items()}
    report = sys.stdout if args.output else sys.stderr  # keep stdout clean for CSV
    for label, m in medians.items():
        print(f"median corr_prev epochs {lo}-{hi}: {label}={format_float(m, 6)} (runs={len(per_label[label])})",
              file=report)
    if args.order:
        missing = [n for n in args.order if n not in medians]
        if missing:
            raise CLIError(f"--order names not among labels: {missing}")
        verdict = "holds" if ordering_holds(medians, args.order) else "violated"
        print(f"ordering {' <= '.join(args.order)}: {verdict}", file=report)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spartan", description="Soft top-k sparse training tools.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mask", help="compute a soft (or hard) top-k mask for a value vector")
    m.add_argument("values", help="file with one value per line")
    m.add_argument("--costs", help="file with one positive cost per line (default: all ones)")
    m.add_argument("--k", type=float, required=True, help="budget: sum(c * m) = k")
    m.add_argument("--beta", type=float, default=1.0, help="sharpness (default 1)")
    m.add_argument("--hard", action="store_true", help="output the hard top-k indicator instead")
    m.add_argument("--decimals", type=int, default=None, help="fixed decimals in the mask file (default: full precision)")
    m.add_argument("--max-iterations", type=int, default=100)
    m.add_argument("--tolerance", type=float, default=0.01)
    m.add_argument("--init-strategy", choices=INIT_STRATEGIES, default="sorted_threshold")
    m.add_argument("-o", "--output", help="mask file (default: $SPARTAN_OUTPUT_DIR/mask.txt or ./mask.txt)")
    m.set_defaults(func=cmd_mask)

    t = sub.add_parser("train", help="run a sparse training experiment from a config file")
    t.add_argument("config", help="INI experiment config")
    t.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
    t.add_argument("-o", "--output-dir", help="artifact directory (default: [run] output_dir)")
    t.set_defaults(func=cmd_train)

    b = sub.add_parser("bench-sinkhorn", help="compare Sinkhorn initialization strategies")
    b.add_argument("--d", type=int, default=100_000)
    b.add_argument("--betas", type=_floats, default=(0.0, 1.0, 8.0, 32.0, 128.0))
    b.add_argument("--strategies", type=_names, default=INIT_STRATEGIES)
    b.add_argument("--trials", type=int, default=3)
    b.add_argument("--steps", type=int, default=5, help="simulated training steps per trial")
    b.add_argument("--keep-fraction", type=float, default=0.05)
    b.add_argument("--value-scale", type=float, default=0.02)
    b.add_argument("--tolerance", type=float, default=0.01)
    b.add_argument("--max-iterations", type=int, default=100)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("-o", "--output", help="CSV file (default: stdout)")
    b.set_defaults(func=cmd_bench)

    a = sub.add_parser("analyze", help="mask correlation series from training runs")
    a.add_argument("archives", nargs="+", help="run directories or mask archive directories")
    a.add_argument("--labels", type=_names, help="comma-separated label per archive (repeat a label to pool seeds)")
    a.add_argument("--window", type=int, nargs=2, default=(10, 40), metavar=("LO", "HI"))
    a.add_argument("--order", type=_names, help="labels expected in increasing median corr_prev")
    a.add_argument("-o", "--output", help="correlation CSV (default: stdout)")
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, DatasetError, InputError, InvalidInstanceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
