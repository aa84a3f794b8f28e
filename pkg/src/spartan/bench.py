"""Sinkhorn initialization benchmark.

Each trial draws Gaussian parameters and lets them drift over a few
simulated training steps; every strategy solves the same sequence of soft
top-k problems. ``dual_cache`` reuses mu from its previous step (cold
start on the first one). Only mask computation is timed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ot_topk import INIT_STRATEGIES, SinkhornConfig, TopKInstance, soft_topk_forward

__all__ = ["BenchConfig", "BenchRow", "BENCH_COLUMNS", "run_benchmark"]


@dataclass(frozen=True)
class BenchConfig:
    d: int = 100_000
    betas: tuple[float, ...] = (0.0, 1.0, 8.0, 32.0, 128.0)
    strategies: tuple[str, ...] = INIT_STRATEGIES
    trials: int = 3
    steps: int = 5
    keep_fraction: float = 0.05
    value_scale: float = 0.02  # std of the simulated weights
    drift: float = 0.01  # per-step perturbation, relative to value_scale
    tolerance: float = 0.01
    max_iterations: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.trials < 1 or self.steps < 1:
            raise ValueError("trials and steps must be >= 1")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError("keep_fraction must lie in (0, 1]")
        bad = [s for s in self.strategies if s not in INIT_STRATEGIES]
        if bad:
            raise ValueError(f"unknown strategies {bad}; choose from {INIT_STRATEGIES}")
        if any(not b >= 0 for b in self.betas):
            raise ValueError("betas must be >= 0")


@dataclass
class BenchRow:
    beta: float
    strategy: str
    d: int
    k: float
    samples: int
    median_iterations: float
    max_iterations: int
    converged_fraction: float
    median_wall_ms: float
    max_objective_gap: float
    max_mask_gap: float


BENCH_COLUMNS = tuple(BenchRow.__dataclass_fields__)


def _trajectories(cfg: BenchConfig) -> list[list[np.ndarray]]:
    rng = np.random.default_rng(cfg.seed)
    out = []
    for _ in range(cfg.trials):
        theta = rng.standard_normal(cfg.d) * cfg.value_scale
        steps = [np.abs(theta)]
        for _ in range(cfg.steps - 1):
            theta = theta + rng.standard_normal(cfg.d) * (cfg.drift * cfg.value_scale)
            steps.append(np.abs(theta))
        out.append(steps)
    return out


def run_benchmark(cfg: BenchConfig) -> list[BenchRow]:
    """One row per (beta, strategy), in the order given.

    Objective and mask gaps compare each strategy with the first strategy
    listed, on identical instances: objective gap is
    ``|v.(m - m_ref)| / |v.m_ref|`` and mask gap is ``max |m - m_ref|``.
    """
    trajectories = _trajectories(cfg)
    k = cfg.keep_fraction * cfg.d
    rows = []
    for beta in cfg.betas:
        ref: list[np.ndarray] = []
        for s_i, strategy in enumerate(cfg.strategies):
            base = SinkhornConfig(cfg.max_iterations, cfg.tolerance, strategy)
            iters, walls, conv = [], [], []
            obj_gap, mask_gap = 0.0, 0.0
            n = 0
            for steps in trajectories:
                last_mu = None
                for v in steps:
                    inst = TopKInstance(v, k, beta)
                    sk = base.with_dual(last_mu) if strategy == "dual_cache" and last_mu is not None else base
                    t0 = time.perf_counter()
                    res = soft_topk_forward(inst, sk)
                    walls.append(time.perf_counter() - t0)
                    iters.append(res.iterations)
                    conv.append(res.converged)
                    if np.isfinite(res.dual_mu):
                        last_mu = res.dual_mu
                    if s_i == 0:
                        ref.append(res.mask)
                    else:
                        m_ref = ref[n]
                        denom = abs(float(v @ m_ref))
                        gap = abs(float(v @ (res.mask - m_ref)))
                        obj_gap = max(obj_gap, gap / denom if denom > 0 else gap)
                        mask_gap = max(mask_gap, float(np.max(np.abs(res.mask - m_ref))))
                    n += 1
            rows.append(BenchRow(
                beta=float(beta), strategy=strategy, d=cfg.d, k=float(k), samples=len(iters),
                median_iterations=float(np.median(iters)), max_iterations=int(max(iters)),
                converged_fraction=float(np.mean(conv)), median_wall_ms=1e3 * float(np.median(walls)),
                max_objective_gap=obj_gap, max_mask_gap=mask_gap,
            ))
    return rows


def rows_by(rows: Sequence[BenchRow], beta: float, strategy: str) -> BenchRow:
    return next(r for r in rows if r.beta == beta and r.strategy == strategy)
