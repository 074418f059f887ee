"""Acceptance suite: every bound the library states, checked at desk scale.

Each criterion prints one [PASS]/[FAIL] line (visible with `pytest -s` or on
failure). Monte Carlo comparisons carry the standard two-standard-error slack:
the theorems bound expectations, and the MC mean fluctuates around them.
"""
import math
import time

import numpy as np
import pytest

from sgdcert import bounds
from sgdcert.certify import run_certification_suite
from sgdcert.continual import (
    forgetting,
    forgetting_threshold,
    make_pinned_sets,
    make_task_collection,
    pocs_objective,
    pocs_threshold,
    population_loss,
    population_loss_threshold,
    projection_objective,
    run_continual_regression,
    run_pocs,
)
from sgdcert.harness import fit_rate, read_report, run_experiment, write_report
from sgdcert.kaczmarz import kaczmarz_loss, make_block_system, reduced_problem, run_kaczmarz
from sgdcert.optimizer import (
    WITH_REPLACEMENT,
    WITHOUT_REPLACEMENT,
    StepsizePolicy,
    average_iterate,
    excess_risk,
    mc_excess_risk,
    mc_statistic,
    mean_stderr,
    run_sgd,
)
from sgdcert.problems import (
    make_low_noise_least_squares,
    make_realizable_least_squares,
    make_strongly_convex_ls,
)
from sgdcert.rng import make_rng

DYADIC_8_1024 = [2**k for k in range(3, 11)]
DYADIC_8_2048 = [2**k for k in range(3, 12)]


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num:>2}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def _offset_start(p, seed: int) -> np.ndarray:
    rng = make_rng(seed)
    u = rng.standard_normal(p.d)
    return p.x_star + u / np.linalg.norm(u)


def _check_grid(grid, bound_at):
    """Worst slack of mean <= bound(T) + 2 stderr over the grid; ok iff all hold."""
    failures = []
    margin = math.inf
    for T, est in grid.items():
        b = bound_at(T)
        gap = b + 2.0 * est.stderr - est.mean
        margin = min(margin, gap / max(b, 1e-300))
        if gap < 0.0:
            failures.append((T, est.mean, b, est.stderr))
    return not failures, margin, failures


def test_criterion_1_thm1_greedy_interpolation():
    start = time.monotonic()
    p = make_realizable_least_squares(20, 100, seed=7)
    x1 = _offset_start(p, seed=101)
    d0_sq = float(np.sum((x1 - p.x_star) ** 2))
    grid = mc_excess_risk(
        p, x1, StepsizePolicy.fixed(1.0), WITH_REPLACEMENT, DYADIC_8_1024, 200, 0
    )
    ok, margin, fails = _check_grid(
        grid, lambda T: bounds.bound_thm1_greedy(1.0, d0_sq, T)
    )
    elapsed = time.monotonic() - start
    ok = ok and elapsed < 60.0
    _report(
        1,
        ok,
        f"greedy-stepsize interpolation mean <= 3/sqrt(T): worst slack "
        f"{margin:.3f} of bound, {elapsed:.1f}s {fails if fails else ''}",
    )


def test_criterion_2_thm1_log_stepsize():
    start = time.monotonic()
    p = make_realizable_least_squares(20, 100, seed=7)
    x1 = _offset_start(p, seed=101)
    d0_sq = float(np.sum((x1 - p.x_star) ** 2))
    grid = mc_excess_risk(
        p, x1, StepsizePolicy.log_tuned(), WITH_REPLACEMENT, DYADIC_8_1024, 200, 1
    )
    ok, margin, fails = _check_grid(grid, lambda T: bounds.bound_thm1_log(1.0, d0_sq, T))
    elapsed = time.monotonic() - start
    ok = ok and elapsed < 60.0
    _report(
        2,
        ok,
        f"log-tuned stepsize mean <= 6 log2(T)/T: worst slack {margin:.3f} of bound, "
        f"{elapsed:.1f}s {fails if fails else ''}",
    )


def test_criterion_3_thm2_low_noise_tuned():
    start = time.monotonic()
    p = make_low_noise_least_squares(20, 100, sigma_star=0.05, seed=11)
    x1 = _offset_start(p, seed=103)
    d0_sq = float(np.sum((x1 - p.x_star) ** 2))
    policy = StepsizePolicy.thm2_tuned()
    grid = mc_excess_risk(p, x1, policy, WITH_REPLACEMENT, DYADIC_8_1024, 400, 2)

    def bound_at(T):
        eta = policy.resolve(p, x1, T)
        return bounds.bound_thm2(p.beta, eta, d0_sq, p.sigma_star_sq, T)

    ok, margin, fails = _check_grid(grid, bound_at)
    elapsed = time.monotonic() - start
    ok = ok and elapsed < 180.0
    _report(
        3,
        ok,
        f"low-noise tuned stepsize mean <= thm2 bound: worst slack {margin:.3f}, "
        f"{elapsed:.1f}s {fails if fails else ''}",
    )


def test_criterion_4_thm3_without_replacement():
    p = make_realizable_least_squares(20, 2048, seed=13)
    x1 = _offset_start(p, seed=104)
    d0_sq = float(np.sum((x1 - p.x_star) ** 2))
    results = []
    for policy, special in (
        (StepsizePolicy.fixed(1.0), lambda T: bounds.bound_thm3_wor_greedy(1.0, d0_sq, T)),
        (StepsizePolicy.log_tuned(), lambda T: bounds.bound_thm3_wor_log(1.0, d0_sq, T)),
    ):
        grid = mc_excess_risk(p, x1, policy, WITHOUT_REPLACEMENT, DYADIC_8_2048, 200, 3)

        def general(T):
            return bounds.bound_thm3_wor(p.beta, policy.resolve(p, x1, T), d0_sq, T)

        ok_g, margin_g, fails_g = _check_grid(grid, general)
        ok_s, margin_s, fails_s = _check_grid(grid, special)
        results.append((ok_g and ok_s, min(margin_g, margin_s), fails_g + fails_s))
    ok = all(r[0] for r in results)
    _report(
        4,
        ok,
        "without-replacement mean <= thm3 bound and 13/sqrt(T), 22 log2(T)/T "
        f"specializations: worst slack {min(r[1] for r in results):.3f} "
        f"{[r[2] for r in results if r[2]]}",
    )


def test_criterion_5_average_iterate_bound():
    def avg_excess(problem, tr):
        return excess_risk(problem, average_iterate(tr))

    worst = math.inf
    all_fails = []
    # realizable, greedy stepsize: the bound specializes to the fast 2 D0^2/T curve
    p = make_realizable_least_squares(20, 100, seed=7)
    x1 = _offset_start(p, seed=101)
    d0_sq = float(np.sum((x1 - p.x_star) ** 2))
    grid = mc_statistic(
        p, x1, StepsizePolicy.fixed(1.0), WITH_REPLACEMENT, DYADIC_8_1024, 200, 4, avg_excess
    )
    assert bounds.bound_avg_iterate(1.0, 1.0, 1.0, 0.0, 100) == pytest.approx(0.02)
    ok, margin, fails = _check_grid(
        grid, lambda T: bounds.bound_avg_iterate(1.0, 1.0, d0_sq, 0.0, T)
    )
    worst = min(worst, margin)
    all_fails += fails

    # low-noise, greedy and tuned stepsizes
    q = make_low_noise_least_squares(20, 100, sigma_star=0.05, seed=11)
    y1 = _offset_start(q, seed=103)
    e0_sq = float(np.sum((y1 - q.x_star) ** 2))
    grid = mc_statistic(
        q, y1, StepsizePolicy.fixed(1.0), WITH_REPLACEMENT, DYADIC_8_1024, 200, 5, avg_excess
    )
    ok2, margin, fails = _check_grid(
        grid, lambda T: bounds.bound_avg_iterate(1.0, 1.0, e0_sq, q.sigma_star_sq, T)
    )
    worst = min(worst, margin)
    all_fails += fails

    ok3 = True
    for T in DYADIC_8_1024:
        eta = bounds.tuned_eta_avg(q.beta, math.sqrt(e0_sq), 0.05, T)
        est = mc_statistic(
            q, y1, StepsizePolicy.fixed(eta), WITH_REPLACEMENT, [T], 200, 6, avg_excess
        )[T]
        b = bounds.bound_avg_iterate(q.beta, eta, e0_sq, q.sigma_star_sq, T)
        worst = min(worst, (b + 2 * est.stderr - est.mean) / b)
        if est.mean > b + 2 * est.stderr:
            ok3 = False
            all_fails.append((T, est.mean, b, est.stderr))
    _report(
        5,
        ok and ok2 and ok3,
        f"average-iterate bound (incl. the 2/T realizable curve): worst slack "
        f"{worst:.3f} {all_fails if all_fails else ''}",
    )


def test_criterion_6_strongly_convex_linear_rate():
    p = make_strongly_convex_ls(4, 40, alpha_sc=0.1, seed=2)
    assert p.strong_convexity >= 0.1
    x1 = _offset_start(p, seed=106)
    d0_sq = float(np.sum((x1 - p.x_star) ** 2))
    alpha = p.strong_convexity

    def dist_sq(problem, tr):
        return float(np.sum((tr.x_final - problem.x_star) ** 2))

    def bound_at(T):
        return bounds.bound_strongly_convex(1.0, alpha, 1.0, d0_sq, 0.0, T)

    # dyadic T plus the first T where the bound crosses 1e-10
    t_floor = math.ceil(2.0 * math.log(d0_sq * 1e10) / alpha)
    T_grid = [T for T in [8, 16, 32, 64, 128, 256, 512] if T < t_floor] + [t_floor]
    assert bound_at(T_grid[-1]) <= 1e-10
    grid = mc_statistic(
        p, x1, StepsizePolicy.fixed(1.0), WITH_REPLACEMENT, T_grid, 200, 7, dist_sq
    )
    ok, margin, fails = _check_grid(grid, bound_at)
    _report(
        6,
        ok,
        f"strongly convex linear rate |x_(T+1)-x*|^2 <= exp(-a T/2) D0^2 down to "
        f"1e-10 (T up to {T_grid[-1]}, a={alpha:.4f}): worst slack {margin:.3f} "
        f"{fails if fails else ''}",
    )


def test_criterion_7_small_stepsize_alternative_bound():
    p = make_realizable_least_squares(20, 100, seed=7)
    x1 = _offset_start(p, seed=101)
    d0_sq = float(np.sum((x1 - p.x_star) ** 2))
    ok = True
    worst = math.inf
    all_fails = []
    for eta, seed in ((0.25, 8), (0.1, 9)):
        grid = mc_excess_risk(
            p, x1, StepsizePolicy.fixed(eta), WITH_REPLACEMENT, DYADIC_8_1024, 200, seed
        )
        good, margin, fails = _check_grid(
            grid, lambda T, e=eta: bounds.bound_thmD_alt(1.0, e, d0_sq, 0.0, T)
        )
        ok = ok and good
        worst = min(worst, margin)
        all_fails += fails
    # dominance remark: at eta = 1/2 the main bound beats the alternative at T = 10^4
    dominance = bounds.bound_thm1(1.0, 0.5, d0_sq, 10_000) < bounds.bound_thmD_alt(
        1.0, 0.5, d0_sq, 0.0, 10_000
    )
    ok = ok and dominance
    _report(
        7,
        ok,
        f"alternative small-stepsize bound holds (eta=0.25, 0.1) and is dominated "
        f"at eta=0.5, T=1e4: worst slack {worst:.3f} {all_fails if all_fails else ''}",
    )


def test_criterion_8_reduction_equivalences():
    def max_rel_dev(A, B):
        scale = 1.0 + np.abs(A) + np.abs(B)
        return float(np.max(np.abs(A - B) / scale))

    T = 100
    worst = 0.0

    sys_ = make_block_system(10, 6, [2] * 6, seed=81)
    red = reduced_problem(sys_)
    cs = [1.0, 0.5, 1.0 / math.log2(T), 0.25]
    for k in range(20):
        c = cs[k % len(cs)]
        ka = run_kaczmarz(sys_, c, WITH_REPLACEMENT, T, 200 + k)
        sg = run_sgd(red, np.zeros(10), StepsizePolicy.fixed(c), WITH_REPLACEMENT, T, 200 + k)
        assert np.array_equal(ka.indices, sg.indices)
        worst = max(worst, max_rel_dev(ka.iterates, sg.iterates))

    tasks = make_task_collection(8, 10, [2] * 10, seed=82)
    for k in range(20):
        cr = run_continual_regression(tasks, WITH_REPLACEMENT, T, 300 + k)
        kz = run_kaczmarz(tasks, 1.0, WITH_REPLACEMENT, T, 300 + k)
        worst = max(worst, max_rel_dev(cr.iterates, kz.iterates))

    sets = make_pinned_sets(6, 12, seed=83)
    obj = projection_objective(sets)
    for k in range(20):
        po = run_pocs(sets, WITH_REPLACEMENT, T, 400 + k)
        sg = run_sgd(obj, np.zeros(6), StepsizePolicy.fixed(1.0), WITH_REPLACEMENT, T, 400 + k)
        worst = max(worst, max_rel_dev(po.iterates, sg.iterates))

    ok = worst <= 1e-9
    _report(
        8,
        ok,
        f"Kaczmarz=SGD(eta=c), continual=Kaczmarz(c=1), POCS=SGD(eta=1): "
        f"max per-coordinate relative deviation {worst:.2e} <= 1e-9",
    )


def test_criterion_9_corollary_thresholds():
    reps, T = 100, 64
    checks = []

    sys_ = make_block_system(10, 8, [2] * 8, seed=91)
    losses = [
        kaczmarz_loss(sys_, run_kaczmarz(sys_, 1.0, WITH_REPLACEMENT, T, 500 + k).x_last)
        for k in range(reps)
    ]
    est = mean_stderr(losses)
    b = bounds.bound_cor4_kaczmarz(sys_.R**2, float(sys_.x_star @ sys_.x_star), 1.0, T)
    checks.append(("kaczmarz 3/sqrt(T)", est, b))

    tasks = make_task_collection(12, 100, [2] * 100, seed=92)
    for scheme, label in ((WITH_REPLACEMENT, "with"), (WITHOUT_REPLACEMENT, "without")):
        losses, forgets = [], []
        for k in range(reps):
            tr = run_continual_regression(tasks, scheme, T, 600 + k)
            losses.append(population_loss(tasks, tr.x_final))
            forgets.append(forgetting(tasks, tr.indices, tr.x_final))
        checks.append(
            (f"continual loss 13 ({label})", mean_stderr(losses), population_loss_threshold(tasks, T))
        )
        checks.append(
            (
                f"forgetting {'30' if scheme == WITH_REPLACEMENT else '10'} ({label})",
                mean_stderr(forgets),
                forgetting_threshold(tasks, T, scheme),
            )
        )

    sets = make_pinned_sets(8, 64, seed=93)
    min_dist_sq = float(sets.witness @ sets.witness)
    for scheme, label in ((WITH_REPLACEMENT, "with"), (WITHOUT_REPLACEMENT, "without")):
        vals = [
            pocs_objective(sets, run_pocs(sets, scheme, T, 700 + k).x_last)
            for k in range(reps)
        ]
        checks.append((f"pocs 7/sqrt(T) ({label})", mean_stderr(vals), pocs_threshold(min_dist_sq, T)))

    failures = [
        (name, est.mean, b) for name, est, b in checks if est.mean > b + 2.0 * est.stderr
    ]
    worst = min((b + 2 * est.stderr - est.mean) / b for _, est, b in checks)
    _report(
        9,
        not failures,
        f"corollary constants 3/13/30/10/7 over {len(checks)} checks: worst slack "
        f"{worst:.3f} {failures if failures else ''}",
    )


def test_criterion_10_certification_suite():
    start = time.monotonic()
    results = run_certification_suite()  # acceptance configuration by default
    elapsed = time.monotonic() - start
    for r in results:
        print(f"    {r.check_name}: margin_or_z={r.margin_or_z:+.3e} "
              f"{'PASS' if r.passed else 'FAIL'}")
    ok = all(r.passed for r in results) and elapsed < 300.0
    _report(
        10,
        ok,
        f"deterministic + MC certification suite ({len(results)} checks, "
        f"{elapsed:.1f}s < 5min)",
    )


def test_criterion_11_property_suite(tmp_path):
    ok_parts = []

    # bit-identical reruns
    p = make_realizable_least_squares(6, 20, seed=51)
    x1 = _offset_start(p, seed=52)
    a = run_sgd(p, x1, StepsizePolicy.fixed(0.7), WITH_REPLACEMENT, 64, 9)
    b = run_sgd(p, x1, StepsizePolicy.fixed(0.7), WITH_REPLACEMENT, 64, 9)
    ok_parts.append(np.array_equal(a.iterates, b.iterates) and np.array_equal(a.indices, b.indices))

    # per-step distance monotonicity for eta < 2/beta on realizable instances
    mono = True
    for eta in (0.5, 1.0, 1.9):
        tr = run_sgd(p, x1, StepsizePolicy.fixed(eta), WITH_REPLACEMENT, 100, 10)
        dists = np.linalg.norm(tr.iterates - p.x_star, axis=1)
        mono = mono and bool(np.all(dists[1:] <= dists[:-1] * (1 + 1e-12) + 1e-15))
    ok_parts.append(mono)

    # analytic gradients vs central finite differences
    rng = np.random.default_rng(3)
    fd_ok = True
    for _ in range(20):
        x = p.x_star + rng.standard_normal(p.d)
        i = int(rng.integers(p.n))
        g = p.component_gradient(i, x)
        fd = np.zeros(p.d)
        for j in range(p.d):
            e = np.zeros(p.d)
            e[j] = 1e-6
            fd[j] = (p.component_value(i, x + e) - p.component_value(i, x - e)) / 2e-6
        fd_ok = fd_ok and np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(g))
    ok_parts.append(fd_ok)

    # exact synthetic power-law slopes
    fit = fit_rate([(T, 2.0 * T**-0.5) for T in (8, 16, 32, 64, 128)])
    ok_parts.append(abs(fit.slope + 0.5) <= 1e-12)
    fit = fit_rate([(T, 5.0 / T) for T in (8, 16, 32, 64, 128)])
    ok_parts.append(abs(fit.slope + 1.0) <= 1e-12)

    # report round-trip identity
    from sgdcert.harness import ExperimentConfig

    cfg = ExperimentConfig.from_dict(
        {
            "problem": {"family": "realizable_ls", "d": 4, "n": 12, "seed": 7},
            "x1": {"kind": "unit_offset", "seed": 1},
            "policy": {"kind": "greedy"},
            "scheme": WITH_REPLACEMENT,
            "T_grid": [8, 16, 32],
            "replicates": 12,
            "base_seed": 0,
            "bounds": ["thm1", "thm1_greedy"],
        }
    )
    report = run_experiment(cfg)
    write_report(report, tmp_path / "r")
    ok_parts.append(read_report(tmp_path / "r") == report)

    labels = ["determinism", "monotonicity", "finite-diff", "slope -1/2", "slope -1", "round-trip"]
    failing = [lab for lab, good in zip(labels, ok_parts) if not good]
    _report(11, all(ok_parts), f"property suite {'all good' if not failing else failing}")
