"""Acceptance gate: every criterion at its stated size and tolerance.

Each test prints one pass/fail line (visible with `pytest -s`); the assertion
carries the same verdict.  Criterion 10 runs the full experiment grid and
takes a few minutes; everything else is quick.
"""

import math
import time

import numpy as np
import pytest

from conftest import random_instance, sparse_instance
from dap.core import Instance, combine, pad_pair, subinstance
from dap.error import best_grid_prediction, prediction_error
from dap.harness import (
    MATCHED_PAIRS,
    DistributionSpec,
    ExperimentConfig,
    adversarial_pair,
    aggregate_ratios,
    build_policy,
    perturb_instance,
    run_experiment,
)
from dap.offline import OptTable, brute_force_optimal, optimal_solution, optimal_value
from dap.policies import AdaptiveBudgetPolicy, GreedyPolicy, RobustPolicy, run_policy
from dap.stability import is_stable_interval, stabilize

LAMBDAS = (0.1, 0.32, 0.58)


def _report(num, ok: bool, detail: str) -> None:
    print(f"criterion {num:>3}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


def test_criterion_01_oracle_equivalence():
    d = 10.0
    rng = np.random.default_rng(101)
    start = time.time()
    mismatches = 0
    for _ in range(1000):
        inst = random_instance(rng, d, max_horizon=12, high=3 * d)
        if optimal_solution(inst) != brute_force_optimal(inst):
            mismatches += 1
    elapsed = time.time() - start
    _report(1, mismatches == 0 and elapsed < 10,
            f"opt DP vs brute force: {mismatches} mismatches on 1000 instances (T<=12) in {elapsed:.1f}s")


def _enumerate_eta_from_tables(over, under, tbl_o, tbl_u):
    n = over.horizon
    upos = [t for t in range(1, n + 1) if under.demands[t - 1] > 0]
    if not upos:
        return optimal_value(over)
    best = -np.inf
    for mask in range(1 << (n - 1)):
        cuts = [t for t in range(1, n) if mask >> (t - 1) & 1] + [n]
        prev, total, ok = 0, 0.0, True
        for c in cuts:
            if not any(prev < t <= c for t in upos):
                ok = False
                break
            total += tbl_o.values[prev + 1, c] - tbl_u.values[prev + 1, c]
            prev = c
        if ok and total > best:
            best = total
    return best


def test_criterion_02_eta_equals_enumeration():
    d = 10.0
    rng = np.random.default_rng(102)
    start = time.time()
    exact_mismatches = 0
    cross_check_bad = 0
    for _ in range(500):
        a = random_instance(rng, d, max_horizon=10, zero_frac=0.4)
        b = random_instance(rng, d, max_horizon=10, zero_frac=0.4)
        a, b = pad_pair(a, b)
        over, under = combine(a, b, "max"), combine(a, b, "min")
        got = prediction_error(a, b).eta
        # exhaustive partition enumeration over the same window optima
        ref = _enumerate_eta_from_tables(over, under, OptTable(over), OptTable(under))
        if got != ref:
            exact_mismatches += 1
        # window optima independently recomputed by the plain DP
        n = a.horizon
        win = {
            (i, j): optimal_value(subinstance(over, i, j)) - optimal_value(subinstance(under, i, j))
            for i in range(1, n + 1)
            for j in range(i, n + 1)
        }
        upos = [t for t in range(1, n + 1) if under.demands[t - 1] > 0]
        if upos:
            ref2 = -np.inf
            for mask in range(1 << (n - 1)):
                cuts = [t for t in range(1, n) if mask >> (t - 1) & 1] + [n]
                prev, total, ok = 0, 0.0, True
                for c in cuts:
                    if not any(prev < t <= c for t in upos):
                        ok = False
                        break
                    total += win[prev + 1, c]
                    prev = c
                if ok:
                    ref2 = max(ref2, total)
            if abs(got - ref2) > 1e-9:
                cross_check_bad += 1
    elapsed = time.time() - start
    _report(2, exact_mismatches == 0 and cross_check_bad == 0 and elapsed < 30,
            f"partition DP vs enumeration: {exact_mismatches} exact mismatches, "
            f"{cross_check_bad} cross-check failures on 500 pairs in {elapsed:.1f}s")


def test_criterion_03_monotone_and_lipschitz():
    d = 10.0
    rng = np.random.default_rng(103)
    violations = 0
    for _ in range(1000):
        n = int(rng.integers(1, 11))
        a = Instance(d, tuple(rng.uniform(0, 2 * d, n) * (rng.random(n) < 0.8)))
        b = Instance(d, tuple(rng.uniform(0, 2 * d, n) * (rng.random(n) < 0.8)))
        eta = prediction_error(a, b).eta
        if abs(optimal_value(a) - optimal_value(b)) > eta + 1e-9:
            violations += 1
        subset = rng.random(n) < rng.uniform(0.2, 0.8)
        mixed = tuple(a.demands[i] if subset[i] else b.demands[i] for i in range(n))
        if prediction_error(a, Instance(d, mixed)).eta > eta + 1e-9:
            violations += 1
    _report(3, violations == 0, f"eta monotonicity+Lipschitzness: {violations} violations on 1000 pairs")


def test_criterion_04_stable_constructor_guarantee():
    d = 100.0
    rng = np.random.default_rng(104)
    violations = 0
    for lam in LAMBDAS:
        for _ in range(500):
            inst = sparse_instance(rng, d, horizon_range=(2, 50), scale_range=(0.1, 2.0))
            sol = stabilize(inst, lam)
            from dap.core import evaluate

            if inst.last_positive == 0:
                continue
            if evaluate(inst, sol).total > optimal_value(inst) / (1 - lam) + 1e-9:
                violations += 1
                continue
            prev = 0
            for x in sol.acks:
                if not is_stable_interval(subinstance(inst, prev + 1, x), lam):
                    violations += 1
                    break
                prev = x
    _report(4, violations == 0,
            f"stable constructor: {violations} violations over 500 instances x lambda in {LAMBDAS}")


def test_criterion_05_perfect_prediction_consistency():
    d = 100.0
    rng = np.random.default_rng(105)
    violations = 0
    worst = np.inf
    for lam in LAMBDAS:
        bound_factor = (1 + lam) / (1 - lam)
        for _ in range(500):
            inst = sparse_instance(rng, d, horizon_range=(15, 90))
            opt = optimal_value(inst)
            cost = run_policy(inst, AdaptiveBudgetPolicy(inst, lam)).cost.total
            slack = bound_factor * opt + 1e-6 - cost
            worst = min(worst, slack)
            if slack < 0:
                violations += 1
    _report(5, violations == 0,
            f"perfect-prediction consistency: {violations} violations on 500x3 runs (min slack {worst:.4g})")


def test_criterion_06_error_aware_consistency():
    d = 100.0
    rng = np.random.default_rng(106)
    violations = 0
    for k in range(500):
        lam = LAMBDAS[k % 3]
        c1 = (1 + lam) / (1 - lam)
        inst = sparse_instance(rng, d, horizon_range=(10, 60))
        pred = perturb_instance(inst, rng.uniform(0, 1),
                                DistributionSpec("poisson", 0.5), int(rng.integers(1 << 30)))
        eta = prediction_error(inst, pred).eta
        cost = run_policy(inst, AdaptiveBudgetPolicy(pred, lam)).cost.total
        if cost > c1 * optimal_value(inst) + (c1 + 2 + 4 / lam) * eta + 1e-9:
            violations += 1
    _report(6, violations == 0, f"error-aware consistency: {violations} violations on 500 pairs")


def test_criterion_07_robustness():
    d = 100.0
    rng = np.random.default_rng(107)
    violations = 0
    for k in range(500):
        lam = LAMBDAS[k % 3]
        inst = sparse_instance(rng, d, horizon_range=(15, 80))
        kind = k % 4
        if kind == 0:
            pred = perturb_instance(inst, rng.uniform(0, 1),
                                    DistributionSpec("poisson", 0.5), int(rng.integers(1 << 30)))
        elif kind == 1:
            pred = Instance(d, tuple(rng.exponential(0.6, size=inst.horizon)))
        elif kind == 2:
            pred = Instance(d, (0.0,) * inst.horizon)  # silent prediction
        else:
            pred = Instance(d, tuple(5 * d * (rng.random(inst.horizon) < 0.1)))  # spiky garbage
        opt = optimal_value(inst)
        cost = run_policy(inst, RobustPolicy(pred, lam)).cost.total
        if cost > (2 + 5 * lam) * opt + 3 * (math.ceil(lam * opt) + 1) + 1e-9:
            violations += 1
    _report(7, violations == 0,
            "robustness: %d violations on 500 pairs (incl. adversarial predictions)" % violations)


def test_criterion_08_greedy_competitiveness():
    # dense uniform and sparse exponential traces; the +1 covers the
    # discrete-time overshoot of the threshold rule
    d = 100.0
    rng = np.random.default_rng(108)
    violations = 0
    for k in range(1000):
        if k % 2:
            horizon = int(rng.integers(1, 200))
            inst = Instance(d, tuple(rng.uniform(0.0, 3 * d, horizon)))
        else:
            inst = sparse_instance(rng, d, horizon_range=(1, 200))
        cost = run_policy(inst, GreedyPolicy(d)).cost.total
        if cost > 2 * optimal_value(inst) + 1 + 1e-9:
            violations += 1
    _report(8, violations == 0, f"greedy <= 2 opt + 1: {violations} violations on 1000 instances")


def test_criterion_09_partition_observation():
    d = 10.0
    rng = np.random.default_rng(109)
    violations = 0
    for _ in range(1000):
        inst = random_instance(rng, d, max_horizon=20, zero_frac=0.4)
        n = inst.horizon
        cuts = sorted(set(rng.integers(1, n + 1, size=int(rng.integers(1, 6))).tolist()) | {n})
        prev, total = 0, 0.0
        for c in cuts:
            total += optimal_value(subinstance(inst, prev + 1, c))
            prev = c
        if total > len(cuts) - 1 + optimal_value(inst) + 1e-9:
            violations += 1
    _report(9, violations == 0, f"partition observation: {violations} violations on 1000 splits")


@pytest.fixture(scope="module")
def full_experiment(tmp_path_factory):
    cfg = ExperimentConfig(
        distributions=(
            DistributionSpec("poisson", 1.0),
            DistributionSpec("pareto", 2.0),
            DistributionSpec("iterated_poisson", 1.0),
        ),
        d=100.0,
        horizon=1000,
        seeds=5,
        output=str(tmp_path_factory.mktemp("exp") / "trials.csv"),
        workers=2,
    )
    start = time.time()
    rows = run_experiment(cfg)
    return cfg, rows, time.time() - start


def test_criterion_10a_zero_noise_beats_greedy(full_experiment):
    cfg, rows, elapsed = full_experiment
    stats = aggregate_ratios(rows)
    problems = []
    for dist in [d.label for d in cfg.distributions]:
        robust0 = stats[(dist, 0.0, "robust", "0.1")][0]
        greedy0 = stats[(dist, 0.0, "greedy", "")][0]
        if not robust0 < greedy0:
            problems.append(f"{dist}: robust {robust0:.4f} !< greedy {greedy0:.4f}")
    _report("10a", not problems and elapsed < 1800,
            f"full-grid experiment ({len(rows)} rows in {elapsed:.0f}s); robust(0.1) vs greedy at r=0: "
            + ("beats greedy on every distribution" if not problems else "; ".join(problems)))


def test_criterion_10b_robust_ratio_cap(full_experiment):
    cfg, rows, _ = full_experiment
    stats = aggregate_ratios(rows)
    worst = 0.0
    problems = []
    for (dist, r, alg, param), (mean, _, _) in stats.items():
        if alg == "robust":
            worst = max(worst, mean)
            if mean > 2.2:
                problems.append(f"{dist} r={r} lambda={param}: {mean:.3f}")
    _report("10b", not problems, f"max robust mean ratio {worst:.3f} (cap 2.2)"
            + ("" if not problems else "; over cap: " + "; ".join(problems)))


def test_criterion_10c_matched_pair_majority(full_experiment):
    # Known-red check, kept honest: the two-rate primal-dual baseline defined
    # here is empirically greedy-grade or better on these trace families,
    # while the robust wrapper cannot stay below greedy once its error
    # threshold trips, so the dominance sweep cannot reach a majority for
    # every pair.  The failure detail prints the per-cell win counts.
    cfg, rows, _ = full_experiment
    stats = aggregate_ratios(rows)
    problems = []
    for dist in [d.label for d in cfg.distributions]:
        for beta, lam in MATCHED_PAIRS:
            wins = sum(
                1
                for r in cfg.r_grid
                if stats[(dist, r, "robust", f"{lam:g}")][0] <= stats[(dist, r, "pdla", f"{beta:g}")][0]
            )
            if not wins > len(cfg.r_grid) / 2:
                problems.append(f"{dist} (beta={beta:g}, lambda={lam:g}): {wins}/{len(cfg.r_grid)}")
    _report("10c", not problems,
            "robust(lambda) <= pdla(beta) on a majority of r points per distribution and pair"
            + ("" if not problems else "; failing cells: " + "; ".join(problems)))


def test_criterion_11_lower_bound_sanity():
    d = 100.0
    lam, eps = 0.5, 0.01
    failures = []
    for name, param in [("greedy", None), ("blind", None), ("pdla", 0.6),
                        ("pbb", 0.3), ("apb", 0.3), ("robust", 0.3)]:
        factory = lambda pred: build_policy(name, param, pred, d)  # noqa: B023, E731
        inst, pred = adversarial_pair(lam, eps, factory, d=d)
        cost = run_policy(inst, factory(pred)).cost.total
        opt = optimal_value(inst)
        eta = prediction_error(inst, pred).eta
        bound = min((1 + lam - eps) * opt, opt + eta / lam)
        if cost < bound - 1e-6:
            failures.append(name)
    _report(11, not failures, f"lower-bound family (lambda=0.5): failing policies: {failures or 'none'}")


def test_criterion_12_learnability_utilities():
    d = 10.0
    rng = np.random.default_rng(112)
    violations = 0
    for _ in range(1000):
        n = int(rng.integers(1, 13))
        a = Instance(d, tuple(rng.uniform(0, 3 * d, n)))
        b = Instance(d, tuple(rng.uniform(0, 3 * d, n)))
        rho = sum(abs(x - y) for x, y in zip(a.demands, b.demands))
        if abs(optimal_value(a) - optimal_value(b)) > rho * n / d + 1e-9:
            violations += 1
    truth = Instance(d, (2.0, 0.0, 0.0, 1.0, 0.0, 1.0))
    found, score = best_grid_prediction([truth] * 4, grid_step=1.0, max_demand=2.0)
    recovered = all(abs(x - y) <= 1.0 for x, y in zip(found.demands, truth.demands))
    _report(12, violations == 0 and recovered and score <= 1e-12,
            f"learnability: {violations} l1-Lipschitz violations; grid recovery "
            f"{'ok' if recovered else 'failed'} (mean error {score:.3g})")
