"""Acceptance suite: one test per headline criterion, each printing PASS/FAIL.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary lines
are repeated at the end of the pytest output.
"""

import time

import numpy as np
import pytest

from oracles import central_difference, lp_by_enumeration, max_relative_error
from spartan.bench import BenchConfig, rows_by, run_benchmark
from spartan.experiments import ExplorationConfig, FlopConfig, exploration_sweep, flop_sensitivity
from spartan.masking import ParamLayout, PruningGroupSpec, UnitMap
from spartan.ot_topk import (
    SinkhornConfig,
    TopKInstance,
    lp_topk_oracle,
    soft_mask_parameters,
    soft_topk_backward,
    soft_topk_forward,
)
from spartan.updates import UpdateRuleState, rule_direction, step_imp, step_spartan

TIGHT = SinkhornConfig(max_iterations=50_000, tolerance=1e-12)


def test_budget_exactness(criterion):
    rng = np.random.default_rng(2024)
    dims, betas = (10, 1_000, 100_000), (0.0, 1.0, 10.0, 100.0, 1e4)
    worst, t0 = 0.0, time.perf_counter()
    for i in range(1000):
        d, beta = dims[i % 3], betas[(i // 3) % 5]
        v = rng.standard_normal(d) * rng.choice([0.02, 1.0])
        c = rng.uniform(0.1, 10.0, d)
        k = rng.uniform(0.01, 0.99) * c.sum()
        res = soft_topk_forward(TopKInstance(np.abs(v), k, beta, c))
        worst = max(worst, abs(float(c @ res.mask) - k) / k)
    elapsed = time.perf_counter() - t0
    criterion("budget exactness", worst <= 1e-6 and elapsed < 60,
              f"1000 instances, max relative budget error {worst:.2e} (tol 1e-6), {elapsed:.1f}s (limit 60s)")


def test_gradient_fidelity(criterion):
    rng = np.random.default_rng(7)
    worst, t0 = 0.0, time.perf_counter()
    for i in range(100):
        beta = (1.0, 4.0, 16.0)[i % 3]
        v = rng.uniform(0.0, 2.0, 16)
        c = rng.uniform(0.5, 2.0, 16)
        k = rng.uniform(0.2, 0.8) * c.sum()
        w = rng.standard_normal(16)
        inst = TopKInstance(v, k, beta, c)
        analytic = soft_topk_backward(w, soft_topk_forward(inst, TIGHT), inst)
        fd = central_difference(lambda x: float(w @ soft_topk_forward(TopKInstance(x, k, beta, c), TIGHT).mask), v)
        worst = max(worst, max_relative_error(analytic, fd))
    elapsed = time.perf_counter() - t0
    criterion("gradient fidelity", worst <= 1e-4 and elapsed < 60,
              f"100 instances d=16, max relative error vs central differences {worst:.2e} (tol 1e-4), {elapsed:.1f}s")


def _separated_instance(rng, d):
    while True:
        v = rng.uniform(0.0, 1.0, d)
        c = rng.uniform(0.5, 2.0, d)
        r = np.sort(v / c)
        if np.min(np.diff(r)) > 0.02:
            return v, c, rng.uniform(0.2, 0.8) * c.sum()


def test_lp_convergence(criterion):
    rng = np.random.default_rng(11)
    grid = (1.0, 4.0, 16.0, 64.0, 256.0, 1024.0)
    worst_neg, worst_rise, worst_dist = 0.0, 0.0, 0.0
    for _ in range(50):
        v, c, k = _separated_instance(rng, 8)
        lp = lp_topk_oracle(TopKInstance(v, k, 1.0, c))
        gaps = [float(v @ lp - v @ soft_topk_forward(TopKInstance(v, k, b, c), TIGHT).mask) for b in grid]
        worst_neg = max(worst_neg, -min(gaps))
        worst_rise = max(worst_rise, max(np.diff(gaps)))
        top = soft_topk_forward(TopKInstance(v, k, grid[-1], c), TIGHT).mask
        worst_dist = max(worst_dist, float(np.max(np.abs(top - lp))))
    enum_err = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 7))
        v, c = rng.uniform(0, 1, d), rng.uniform(0.5, 2.0, d)
        k = rng.uniform(0.05, 1.0) * c.sum()
        enum_err = max(enum_err, abs(float(v @ lp_topk_oracle(TopKInstance(v, k, 1.0, c))) - lp_by_enumeration(v, c, k)))
    ok = worst_neg <= 1e-8 and worst_rise <= 1e-8 and worst_dist <= 1e-2 and enum_err <= 1e-12
    criterion("LP convergence", ok,
              f"50 instances: min gap {-worst_neg:.1e} (>= -1e-8), max rise {worst_rise:.1e} (<= 1e-8), "
              f"||m_1024 - m_LP||inf {worst_dist:.2e} (<= 1e-2); LP oracle vs vertex enumeration (d<=6) {enum_err:.1e}")


def test_interpolation_endpoints(criterion):
    rng = np.random.default_rng(5)
    worst0, worst_inf = 0.0, 0.0
    for _ in range(20):
        d = 16
        theta = rng.standard_normal(d)
        units = UnitMap.per_entry(d, rng.uniform(0.5, 2.0, d))
        k = 0.4 * units.total_cost
        g = rng.standard_normal(d)
        da = rule_direction(UpdateRuleState("dual_averaging"), theta, lambda p: g, k, units)
        sp = rule_direction(UpdateRuleState("spartan", beta=0.0), theta, lambda p: g, k, units)
        scaled = k / units.total_cost * da.direction
        worst0 = max(worst0, float(np.max(np.abs(sp.direction - scaled)) / np.max(np.abs(scaled))))

        theta = rng.permutation(np.arange(1, 21) * 0.5) * rng.choice([-1.0, 1.0], 20)
        target = rng.standard_normal(20)
        units = UnitMap.per_entry(20)
        grad = lambda p: p - target
        imp = step_imp(theta, grad, 8, 0.1, units)
        spartan, _ = step_spartan(theta, grad, 8, 1e4, 0.1, units)
        worst_inf = max(worst_inf, float(np.max(np.abs(spartan - imp)) / np.max(np.abs(imp - theta))))
    criterion("interpolation endpoints", worst0 <= 1e-12 and worst_inf <= 1e-3,
              f"beta=0 vs (k/sum c) * DA direction {worst0:.1e} (tol 1e-12); "
              f"beta=1e4 vs IMP step {worst_inf:.1e} (tol 1e-3)")


def test_block_structure(criterion):
    rng = np.random.default_rng(3)
    layout = ParamLayout([("a", (8, 12)), ("b", (4, 4)), ("a.bias", (8,))])
    worst_adj, all_shared = 0.0, True
    for B in (1, 2, 4):
        units = PruningGroupSpec(layout="blocks", block_size=B).build(layout)
        for _ in range(20):
            theta = rng.standard_normal(layout.size)
            masked = soft_mask_parameters(theta, units, 0.3 * units.total_cost, 5.0)
            m = masked.result.mask
            inc = units.included
            all_shared &= bool(np.array_equal(masked.entry_mask[inc], m[units.unit_of[inc]]))
            all_shared &= bool(np.all(masked.entry_mask[~inc] == 1.0))
            x, y = rng.standard_normal(units.n_units), rng.standard_normal(layout.size)
            lhs, rhs = float(units.expand(x) @ y), float(x @ units.collapse(y))
            worst_adj = max(worst_adj, abs(lhs - rhs) / max(1.0, abs(rhs)))
    criterion("block structure", all_shared and worst_adj <= 1e-12,
              f"entries share their block's mask value: {all_shared}; adjoint error {worst_adj:.1e} (tol 1e-12)")


@pytest.mark.slow
def test_exploration_ordering(criterion):
    t0 = time.perf_counter()
    res = exploration_sweep(ExplorationConfig())
    elapsed = time.perf_counter() - t0
    m = res.medians
    ok = m["dual_averaging"] <= m["spartan"] <= m["imp"] and elapsed < 300
    criterion("mask churn ordering", ok,
              f"median consecutive-epoch mask correlation over epochs 10-40, 3 seeds: "
              f"DA {m['dual_averaging']:.3f} <= Spartan(beta_max=10) {m['spartan']:.3f} <= IMP {m['imp']:.3f}; "
              f"{elapsed:.1f}s (limit 300s)")


@pytest.mark.slow
def test_sinkhorn_benchmark(criterion):
    cfg = BenchConfig(d=100_000, betas=(32.0, 128.0), trials=3)
    t0 = time.perf_counter()
    rows = run_benchmark(cfg)
    elapsed = time.perf_counter() - t0
    parts, ok = [], elapsed < 120
    for beta in cfg.betas:
        cold, srt = rows_by(rows, beta, "cold"), rows_by(rows, beta, "sorted_threshold")
        gap = max(r.max_objective_gap for r in rows if r.beta == beta)
        ok &= srt.median_iterations <= cold.median_iterations and gap <= 2 * cfg.tolerance
        parts.append(f"beta={beta:g}: sorted {srt.median_iterations:g} <= cold {cold.median_iterations:g} iterations, "
                     f"max objective gap {gap:.1e} (<= {2 * cfg.tolerance:g})")
    criterion("Sinkhorn initialization benchmark", ok, "; ".join(parts) + f"; {elapsed:.1f}s (limit 120s)")


@pytest.mark.slow
def test_flop_sensitive_valuation(criterion):
    res = flop_sensitivity(FlopConfig())
    s1, s05 = res.sparsity[1.0], res.sparsity[0.5]
    same_budget = all(abs(x - y) <= FlopConfig().expensive_cost for x, y in zip(res.support_cost[1.0], res.support_cost[0.5]))
    ok = max(s05) < min(s1) and same_budget
    criterion("FLOP-sensitive valuation", ok,
              f"budget {res.budget:g}: sparsity with sqrt(c) valuation {np.round(s05, 4).tolist()} < "
              f"with c valuation {np.round(s1, 4).tolist()} on every seed; support costs within one unit: {same_budget}")
