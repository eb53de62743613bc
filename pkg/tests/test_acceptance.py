"""The eight acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the
terminal summary so they survive output capture.
"""

import math
import time

import numpy as np
import pytest

from gentree.bench import EASY_SUBSET, benchmark_config, get_problem, power_pattern, run_problem
from gentree.core import LEAF, Gentree
from gentree.dimension import check_model_units, feasible_power_sets, tree_unit_constraints
from gentree.enumeration import ALL_RULES, PAPER_COUNTS, enumerate_gentrees, prune
from gentree.scheduler import Phase, search
from gentree.subsolver import SOLVED, SolverConfig, solve_gentree

from conftest import G, gravity_dataset, record_criterion
from oracles import ORACLE_TREES, brute_force_best_sse, random_instance
from test_enumeration import GOLDEN_CUMULATIVE, brute_force
from test_scheduler import noisy_dataset, replay_cutoff, replay_safety, strip_times

PUBLISHED_COUNTS = {2: 7, 3: 60, 4: 4485}


def test_1_gravity_recovery():
    cfg = SolverConfig(depth=1, max_constants=1, tol=1e-4, tol_relative=True, dimensioned_constants=True)
    t0 = time.perf_counter()
    rep = search(gravity_dataset(), cfg, threads=4)
    dt = time.perf_counter() - t0
    leaf = rep.answer.params.leaves[0] if rep.answer else None
    ok = (rep.status == SOLVED and rep.answer.tree.depth == 0 and leaf.powers == (1, 1, -2)
          and abs(leaf.h - G) <= 1e-6 * G and rep.answer.sse <= cfg.threshold(gravity_dataset())
          and dt < 60)
    record_criterion(1, ok, f"{rep.formula}  sse={rep.sse:.3g}  {dt:.2f}s")
    assert ok


def test_2_constant_discovery():
    row = run_problem("I.12.2", threads=4)
    h = row.report.answer.params.leaves[0].h if row.report.answer else math.nan
    ok = row.solved and 0.0795774 <= h <= 0.0795775 and row.elapsed_s < 600
    record_criterion(2, ok, f"h={h:.10f}  {row.elapsed_s:.2f}s")
    assert ok


def test_3_dimensional_infeasibility():
    g = gravity_dataset()
    sys = tree_unit_constraints(Gentree(LEAF), [True], g, dimensioned_constants=False)
    empty = feasible_power_sets(sys, 2, 6) == []
    cfg = SolverConfig(depth=1, max_constants=1, tol=1e-4, tol_relative=True, dimensioned_constants=False)
    rep = search(g, cfg, threads=4)
    audit = all(e["units_ok"] for e in rep.events)
    final_ok = rep.answer is None or check_model_units(rep.answer, g, dimensioned_constants=False)
    no_leaf = all(not (s["depth"] == 0 and s["status"] == SOLVED) for s in rep.statuses)
    # the gravity search above emits nothing; audit a run that does emit models
    p = get_problem("I.12.4")
    data = p.generate(0)
    live = search(data, benchmark_config(depth=2, tol=1e-300, time_limit_s=120.0), threads=4)
    live_ok = bool(live.events) and all(e["units_ok"] for e in live.events)
    live_ok &= check_model_units(live.answer, data, dimensioned_constants=False)
    ok = empty and audit and final_ok and no_leaf and live_ok
    record_criterion(3, ok, f"feasible set empty={empty}  gravity answer={rep.formula}  "
                            f"I.12.4 audit over {len(live.events)} events ok={live_ok}")
    assert ok


def test_4_enumeration_counts():
    cat = enumerate_gentrees(4, PAPER_COUNTS["ops"], PAPER_COUNTS["rules"], PAPER_COUNTS["canonicalize"])
    cum = cat.cumulative_counts(4)
    exact = all(cum[d] == PUBLISHED_COUNTS[d] for d in PUBLISHED_COUNTS)
    equiv = all(
        set(enumerate_gentrees(d, PAPER_COUNTS["ops"], ALL_RULES).serials())
        == {n.serial for n in brute_force(d, PAPER_COUNTS["ops"]) if prune(n, ALL_RULES) is None}
        for d in range(4))
    frozen = all(cum[d] == GOLDEN_CUMULATIVE[d] for d in GOLDEN_CUMULATIVE)
    counts = "/".join(str(cum[d]) for d in (2, 3, 4))
    if exact:
        record_criterion(4, True, f"exact match {counts}")
    else:
        print(f"criterion 4: exact counts 7/60/4485 not reproduced (got {counts}); using the fallback")
        record_criterion(4, equiv and frozen,
                         f"fallback: oracle equivalence d<=3 {equiv}, frozen goldens {frozen}  (exact match FAILED: {counts})")
    assert exact or (equiv and frozen)


def test_5_noise_robustness():
    clean = run_problem("I.12.2", threads=4)
    ref = power_pattern(clean.report.answer)
    cfg = benchmark_config(tol=1e-2, tol_relative=True)
    plan = [Phase(cfg.ops, 1e-2, None)]
    hits = 0
    for seed in range(1, 6):
        row = run_problem("I.12.2", cfg, 4, noise=1e-2, noise_seed=seed, plan=plan)
        hits += row.report.answer is not None and power_pattern(row.report.answer) == ref
    ok = hits >= 4
    record_criterion(5, ok, f"{hits}/5 noisy seeds keep pattern {ref}")
    assert ok


def test_6_easy_subset():
    cfg = benchmark_config(depth=3, max_constants=1, time_limit_s=600.0)
    parts, ok = [], True
    for label in EASY_SUBSET:
        row = run_problem(label, cfg, threads=4, n_points=10)
        good = row.solved and row.form_ok and row.elapsed_s < 600
        ok &= good
        parts.append(f"{label}={'ok' if good else 'FAIL'}({row.elapsed_s:.1f}s)")
    record_criterion(6, ok, " ".join(parts))
    assert ok


def test_7_subsolver_oracle():
    cfg = SolverConfig(max_constants=1, omega=10.0, delta=1, tau=3, tol=1e-300)
    worst, bad = 0.0, []
    for seed in range(50):
        tree, d = random_instance(seed, ORACLE_TREES)
        st_ = solve_gentree(tree, d, cfg)
        got = st_.model.sse if st_.model else math.inf
        ref = brute_force_best_sse(tree, d, delta=1, omega=10.0)
        gap = 0.0 if got == ref else abs(got - ref)
        worst = max(worst, gap)
        if not gap <= 1e-8:
            bad.append(seed)
    ok = not bad
    record_criterion(7, ok, f"50 instances, worst |gap|={worst:.2e}, mismatches={bad}")
    assert ok


def test_8_determinism_and_cutoff():
    cfg = SolverConfig(depth=2, delta=1, tau=2, tol=1e-3)
    repro = all(strip_times(search(noisy_dataset(s), cfg, threads=1, slice_evals=40))
                == strip_times(search(noisy_dataset(s), cfg, threads=1, slice_evals=40)) for s in range(3))

    g = np.random.Generator(np.random.Philox(4))
    X = g.uniform(1, 2, (8, 2))
    from conftest import plain_dataset

    d = plain_dataset(X, X[:, 0] + X[:, 1])
    cat = enumerate_gentrees(2)
    rep = search(d, SolverConfig(depth=2, delta=1, tau=2, tol=1e-10), threads=2, slice_evals=50, catalog=cat)
    try:
        replay_cutoff(rep, cat)
        replay_safety(rep)
        deeper = all(s["status"] != SOLVED for s in rep.statuses if s["depth"] > rep.cutoff_depth)
        cutoff = rep.status == SOLVED and deeper
    except AssertionError:
        cutoff = False
    ok = repro and cutoff
    record_criterion(8, ok, f"bit-reproducible={repro}  cutoff replay at d'={rep.cutoff_depth} ok={cutoff}")
    assert ok
