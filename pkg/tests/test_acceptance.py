"""End-to-end acceptance gate.

Each test exercises one externally meaningful guarantee of the package
on the shipped benchmark problems (plus the shared random corpus) and
prints a single summary line with the measured margins.  Run with

    pytest tests/test_acceptance.py -v -s

to see the per-check lines alongside the pass/fail verdicts.
"""

import dataclasses
import math
import time

import numpy as np
from scipy import stats

from helpers import CORPUS_SEED, random_problem
from tdompc import bench, linalg
from tdompc.certify import (
    SolverKind,
    apgm_min_iters,
    apgm_rate,
    certify,
    gain_report,
    iteration_bound,
    pgm_rate,
)
from tdompc.ocp import (
    condense,
    condensed_state_weight,
    in_terminal_set,
    jacobi_precondition,
    project,
    resolve_terminal_weight,
)
from tdompc.sim import (
    StabilityTest,
    empirical_min_iterations,
    evaluate_value_function,
    simulate_tdo,
)
from tdompc.solvers import apgm_run, oracle_solve, pgm_run

R_GRID = np.logspace(-1.0, 3.0, 9)


def _both_benchmarks():
    return bench.jones_system(), bench.pendulum_case()


def test_terminal_weight_dominates_and_routes_agree():
    t0 = time.monotonic()
    worst_rel = 0.0
    worst_slack = math.inf
    for case in _both_benchmarks():
        spec = resolve_terminal_weight(case.plant, case.spec)
        w = {m: condensed_state_weight(case.plant, spec, method=m)
             for m in ("series", "assembly", "riccati")}
        scale = linalg.spectral_norm(w["series"])
        for method in ("assembly", "riccati"):
            rel = linalg.spectral_norm(w[method] - w["series"]) / scale
            worst_rel = max(worst_rel, rel)
            assert rel <= 1e-10
        gap = w["series"] - spec.p
        lam_min = np.linalg.eigvalsh(0.5 * (gap + gap.T)).min()
        lam_plus = np.linalg.eigvalsh(w["series"]).max()
        worst_slack = min(worst_slack, lam_min / lam_plus)
        assert lam_min >= -1e-9 * lam_plus
    elapsed = time.monotonic() - t0
    assert elapsed < 1.0
    print(f"PASS terminal weight: route mismatch <= {worst_rel:.2e} rel, "
          f"min-eig(W-P)/max-eig(W) >= {worst_slack:.2e}, {elapsed:.2f}s")


def test_pgm_contracts_at_its_certified_rate_on_random_corpus():
    t0 = time.monotonic()
    rng = np.random.default_rng(CORPUS_SEED)
    worst_excess = -math.inf
    checked = 0
    for _ in range(100):
        plant, spec = random_problem(rng)
        qp = condense(plant, spec)
        eta = pgm_rate(qp)
        x = rng.standard_normal(qp.n)
        s = oracle_solve(qp, x)
        z = project(rng.uniform(2.0 * qp.box.lower, 2.0 * qp.box.upper),
                    qp.box)
        err = np.linalg.norm(z - s)
        for _ in range(300):
            if err < 1e-4:  # stop well above the oracle's own tolerance
                break
            z = pgm_run(qp, z, x, 1).iterate
            nxt = np.linalg.norm(z - s)
            worst_excess = max(worst_excess, nxt - (eta + 1e-9) * err)
            assert nxt <= (eta + 1e-9) * err
            checked += 1
            err = nxt
    elapsed = time.monotonic() - t0
    assert checked > 1000
    assert elapsed < 30.0
    print(f"PASS pgm rate: {checked} iteration ratios, worst excess "
          f"{worst_excess:.2e}, {elapsed:.2f}s")


def test_apgm_meets_its_multi_step_error_factor_on_random_corpus():
    t0 = time.monotonic()
    rng = np.random.default_rng(CORPUS_SEED)
    worst_ratio_gap = -math.inf
    skipped = 0
    for _ in range(100):
        plant, spec = random_problem(rng)
        qp = condense(plant, spec)
        ell = max(1, math.ceil(apgm_min_iters(qp))) + 20
        factor = apgm_rate(qp, ell)
        x = rng.standard_normal(qp.n)
        s = oracle_solve(qp, x)
        z0 = project(rng.uniform(2.0 * qp.box.lower, 2.0 * qp.box.upper),
                     qp.box)
        e0 = np.linalg.norm(qp.h_factor.sqrt @ (z0 - s))
        if e0 < 1e-3:  # start indistinguishable from the solution
            skipped += 1
            continue
        out = apgm_run(qp, z0, x, ell)
        e_end = np.linalg.norm(qp.h_factor.sqrt @ (out.iterate - s))
        worst_ratio_gap = max(worst_ratio_gap, e_end - (factor + 1e-9) * e0)
        assert e_end <= (factor + 1e-9) * e0
    elapsed = time.monotonic() - t0
    assert skipped < 10
    assert elapsed < 60.0
    print(f"PASS apgm factor: {100 - skipped} instances, worst excess "
          f"{worst_ratio_gap:.2e}, {elapsed:.2f}s")


def test_solution_map_and_value_function_inequalities_hold():
    t0 = time.monotonic()
    rng = np.random.default_rng(7)
    worst = math.inf
    for case, xscale in zip(_both_benchmarks(), (8.0, 1.0)):
        qp = condense(case.plant, case.spec)
        h_sqrt = qp.h_factor.sqrt
        h_inv_sqrt = qp.h_factor.inv_sqrt
        w_sqrt = qp.w_factor.sqrt
        p = qp.p_factor.original
        for _ in range(200):
            x1 = xscale * rng.standard_normal(qp.n)
            x2 = xscale * rng.standard_normal(qp.n)
            v1, psi1, s1 = evaluate_value_function(qp, x1)
            v2, psi2, s2 = evaluate_value_function(qp, x2)
            d, dx = s1 - s2, x1 - x2
            slacks = (
                # monotone-operator bound on the solution map
                -(d @ (qp.g @ dx)) - d @ qp.h @ d,
                # the same bound as a Lipschitz estimate in H-norms
                np.linalg.norm(h_inv_sqrt @ (qp.g @ dx))
                - np.linalg.norm(h_sqrt @ d),
                # value function pinched between terminal and condensed costs
                v1 - x1 @ p @ x1,
                x1 @ qp.w @ x1 - s1 @ qp.h @ s1 - v1,
                # its square root inherits a W-norm Lipschitz constant
                np.linalg.norm(w_sqrt @ dx) - abs(psi1 - psi2),
            )
            worst = min(worst, min(slacks))
            assert min(slacks) >= -1e-7
    elapsed = time.monotonic() - t0
    print(f"PASS regularity: 200 state pairs x 2 benchmarks, worst slack "
          f"{worst:.2e}, {elapsed:.2f}s")


def test_jones_iteration_bounds_sit_in_the_expected_band():
    t0 = time.monotonic()
    case = bench.jones_system()
    in_band = 0
    bounds = {}
    for n in range(1, 11):
        spec = case.spec.with_horizon(n)
        per_kind = {}
        for kind in SolverKind:
            value = iteration_bound(case.plant, spec, kind,
                                    precondition=True)
            assert 1.0 <= value <= 20.0
            per_kind[kind] = math.ceil(value)
        bounds[n] = per_kind
        if any(4 <= b <= 10 for b in per_kind.values()):
            in_band += 1
    elapsed = time.monotonic() - t0
    assert in_band >= 6
    print(f"PASS horizon band: bounds in [1,20] for N=1..10 both solvers, "
          f"{in_band}/10 horizons inside [4,10], {elapsed:.2f}s")


def test_pendulum_accelerated_bounds_have_the_expected_magnitude():
    t0 = time.monotonic()
    case = bench.pendulum_case()
    bounds = [iteration_bound(case.plant, case.spec.with_r_scale(c),
                              SolverKind.APGM, precondition=True)
              for c in R_GRID]
    inside = sum(1e3 <= value <= 1e5 for value in bounds)
    elapsed = time.monotonic() - t0
    assert inside > len(bounds) // 2
    print(f"PASS pendulum magnitude: {inside}/{len(bounds)} accelerated "
          f"bounds within [1e3, 1e5] over the R sweep "
          f"(min {min(bounds):.0f}, max {max(bounds):.0f}), {elapsed:.2f}s")


def test_simulating_at_the_certified_budget_stabilizes_both_benchmarks():
    expected = {
        ("jones", SolverKind.PGM): 9,
        ("jones", SolverKind.APGM): 14,
        ("pendulum", SolverKind.PGM): 88_564,
        ("pendulum", SolverKind.APGM): 4_854,
    }
    caps = {"jones": 120.0, "pendulum": 600.0}
    test = StabilityTest()
    lines = []
    for case in _both_benchmarks():
        t0 = time.monotonic()
        for kind in SolverKind:
            bound = iteration_bound(case.plant, case.spec, kind,
                                    precondition=True)
            ell = math.ceil(bound) + 1
            assert ell == expected[case.name, kind]
            assert ell <= 100_000
            log = simulate_tdo(case.plant, case.spec, kind, ell, case.x0,
                               steps=test.horizon_steps, precondition=True,
                               track_errors=False)
            assert log.passes(test)
            lines.append(f"{case.name}/{kind.value}@{ell}")
        elapsed = time.monotonic() - t0
        assert elapsed < caps[case.name]
    print(f"PASS certified budgets stabilize: {', '.join(lines)} "
          f"all shrink to 1e-4")


def test_observed_minimum_budgets_track_below_the_theory_curve():
    t0 = time.monotonic()
    case = bench.pendulum_case()
    bounds, observed = [], []
    for c in R_GRID:
        spec = case.spec.with_r_scale(c)
        bound = iteration_bound(case.plant, spec, SolverKind.APGM,
                                precondition=True)
        cap = math.ceil(bound)
        found = empirical_min_iterations(case.plant, spec, SolverKind.APGM,
                                         case.x0, cap, StabilityTest(),
                                         precondition=True)
        assert found is not None and found <= cap
        bounds.append(bound)
        observed.append(found)
    rho = stats.spearmanr(bounds, observed).statistic
    elapsed = time.monotonic() - t0
    assert rho >= 0.6
    print(f"PASS observed vs theory: minima {observed} all below bounds, "
          f"rank correlation {rho:.3f}, {elapsed:.2f}s")


def test_certificate_mechanisms_move_the_right_way():
    t0 = time.monotonic()
    # (a) more iterations per step always means a smaller optimizer gain
    for case in _both_benchmarks():
        report = certify(case.plant, case.spec, 10, SolverKind.PGM,
                         precondition=True)
        pgm_gains = [report.gamma2(ell) for ell in range(1, 41)]
        assert all(b < a for a, b in zip(pgm_gains, pgm_gains[1:]))
        onset = math.ceil(report.ell_bar) + 1
        apgm_gains = [report.gamma2a(ell)
                      for ell in range(onset, onset + 40)]
        assert all(b < a for a, b in zip(apgm_gains, apgm_gains[1:]))
    # (b) diagonal rescaling may only help conditioning and the threshold
    for case in _both_benchmarks():
        raw = condense(case.plant, case.spec)
        scaled, _ = jacobi_precondition(raw)
        assert scaled.kappa <= raw.kappa * (1.0 + 1e-12)
        raw_star = iteration_bound(case.plant, case.spec, SolverKind.PGM)
        pre_star = iteration_bound(case.plant, case.spec, SolverKind.PGM,
                                   precondition=True)
        assert pre_star <= raw_star * (1.0 + 1e-12)
    # (c) a heavier input penalty never worsens conditioning
    for case in _both_benchmarks():
        base = condense(case.plant, case.spec).kappa
        eye = np.eye(case.plant.m)
        for c in (0.1, 1.0, 10.0, 100.0):
            spec = dataclasses.replace(case.spec, r=case.spec.r + c * eye,
                                       p=None)
            assert condense(case.plant, spec).kappa <= base * (1.0 + 1e-12)
    # (d) longer horizons never loosen the pendulum loop product
    case = bench.pendulum_case()
    products = [certify(case.plant, case.spec.with_horizon(n), 3000,
                        SolverKind.PGM, precondition=True).smallgain_at_ell
                for n in range(2, 13)]
    assert all(b >= a for a, b in zip(products, products[1:]))
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0
    print(f"PASS mechanisms: gain monotone in budget, preconditioning and "
          f"input weighting never hurt, loop product nondecreasing in N, "
          f"{elapsed:.2f}s")


def test_iss_recursions_hold_along_the_nominal_trajectory():
    t0 = time.monotonic()
    case = bench.jones_system()
    ell = case.nominal_iterations[SolverKind.PGM]
    qp = condense(case.plant, case.spec)  # physical coordinates throughout
    report = gain_report(qp, ell, SolverKind.PGM)
    log = simulate_tdo(case.plant, case.spec, SolverKind.PGM, ell, case.x0,
                       steps=400)
    w_sqrt = qp.w_factor.sqrt
    h_inv_sqrt = qp.h_factor.inv_sqrt
    decay = report.eta ** ell
    worst_value = math.inf
    worst_error = math.inf
    audited = 0
    for k in range(log.steps):
        e_vec = log.iterates[k] - log.solutions[k]
        if in_terminal_set(qp, log.states[k], log.solutions[k]):
            audited += 1
            drive = np.linalg.norm(w_sqrt @ (qp.bbar @ e_vec))
            slack = (report.beta * log.psis[k] + drive + 1e-6
                     - log.psis[k + 1])
            worst_value = min(worst_value, slack)
            assert slack >= 0.0
        if k + 1 < log.steps:
            e_now = np.linalg.norm(e_vec)
            e_next = np.linalg.norm(log.iterates[k + 1]
                                    - log.solutions[k + 1])
            dx = log.states[k + 1] - log.states[k]
            coupling = report.b * np.linalg.norm(h_inv_sqrt @ (qp.g @ dx))
            slack = decay * (e_now + coupling) + 1e-6 - e_next
            worst_error = min(worst_error, slack)
            assert slack >= 0.0
    elapsed = time.monotonic() - t0
    assert audited > 0
    print(f"PASS trajectory audits: value recursion on {audited}/{log.steps} "
          f"in-set steps (worst slack {worst_value:.2e}), warmstart error "
          f"recursion worst slack {worst_error:.2e}, {elapsed:.2f}s")
