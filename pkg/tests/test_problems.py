"""Problem-family generators: construction guarantees and independent oracles."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgdcert import certify
from sgdcert.errors import DomainError, IndexOutOfRange
from sgdcert.problems import (
    LOG_COSH,
    SQUARED,
    ComponentLoss,
    component_gradient,
    make_logcosh_realizable,
    make_low_noise_least_squares,
    make_realizable_least_squares,
    make_strongly_convex_ls,
    population_value,
    problem_from_json,
    problem_to_json,
    verify_problem,
)


def central_fd(f, x, step=1e-6):
    """Central finite-difference gradient, the independent oracle for analytic gradients."""
    g = np.zeros_like(x, dtype=float)
    for j in range(x.size):
        e = np.zeros_like(x, dtype=float)
        e[j] = step
        g[j] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


def test_realizable_single_component_minimized_at_x_star():
    p = make_realizable_least_squares(1, 1, seed=3)
    assert p.n == 1
    assert population_value(p, p.x_star) == 0.0
    # the single component is (a x - a x_star)^2 / 2: positive away from x_star
    assert population_value(p, p.x_star + 0.5) > 0.0


def test_realizable_construction_guarantees():
    p = make_realizable_least_squares(20, 100, seed=7)
    verify_problem(p)
    assert p.sigma_star_sq == 0.0
    assert p.beta == 1.0
    gn = np.linalg.norm(p.population_gradient(p.x_star))
    assert gn <= 1e-10 * (1.0 + np.linalg.norm(p.x_star))
    for i in range(p.n):
        assert np.allclose(p.component_gradient(i, p.x_star), 0.0, atol=1e-14)


def test_realizable_grid_search_oracle():
    # brute-force minimizer of F over a fine grid around x_star lands on x_star
    p = make_realizable_least_squares(2, 2, seed=0)
    step = 1e-3
    g = np.arange(-1.0, 1.0 + step / 2, step)
    X, Y = np.meshgrid(p.x_star[0] + g, p.x_star[1] + g, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    A = np.array([c.a for c in p.components])
    b = np.array([c.b for c in p.components])
    vals = 0.5 * np.mean((pts @ A.T - b) ** 2, axis=1)
    best = pts[np.argmin(vals)]
    assert np.linalg.norm(best - p.x_star) <= step * math.sqrt(2.0) + 1e-12


def test_low_noise_zero_sigma_reduces_to_realizable():
    p = make_low_noise_least_squares(4, 12, sigma_star=0.0, seed=5)
    verify_problem(p)
    assert p.sigma_star_sq == 0.0
    # all residuals identically zero: every component is minimized at x_star
    for c in p.components:
        assert float(c.a @ p.x_star) - c.b == 0.0
        assert np.array_equal(c.gradient(p.x_star), np.zeros(p.d))


def test_low_noise_residual_recomputation():
    p = make_low_noise_least_squares(5, 50, sigma_star=0.1, seed=3)
    verify_problem(p)
    A = np.array([c.a for c in p.components])
    b = np.array([c.b for c in p.components])
    r = A @ p.x_star - b
    # unit-norm rows make |a_i r_i| = |r_i|
    assert abs(np.mean(r**2) - 0.01) <= 1e-12
    assert np.linalg.norm(A.T @ r) <= 1e-12


def test_low_noise_normal_equations_oracle():
    p = make_low_noise_least_squares(2, 10, sigma_star=0.5, seed=1)
    A = np.array([c.a for c in p.components])
    b = np.array([c.b for c in p.components])
    x_ls = np.linalg.solve(A.T @ A, A.T @ b)  # independent dense solve
    assert np.linalg.norm(x_ls - p.x_star) <= 1e-9


def test_low_noise_population_value_at_x_star():
    p = make_low_noise_least_squares(3, 20, sigma_star=0.3, seed=9)
    A = np.array([c.a for c in p.components])
    b = np.array([c.b for c in p.components])
    r = A @ p.x_star - b
    expected = 0.5 * np.mean(r**2)  # termwise recomputation
    assert math.isclose(population_value(p, p.x_star), expected, rel_tol=1e-14)


def test_low_noise_preconditions():
    with pytest.raises(DomainError):
        make_low_noise_least_squares(5, 5, 0.1, seed=0)  # needs n >= d + 1
    with pytest.raises(DomainError):
        make_low_noise_least_squares(2, 10, -0.1, seed=0)


def test_logcosh_gradients_vanish_at_x_star():
    p = make_logcosh_realizable(3, 20, seed=5)
    verify_problem(p)
    for i in range(p.n):
        assert np.allclose(p.component_gradient(i, p.x_star), 0.0, atol=1e-15)
    assert certify.check_cocoercivity(p, 300, seed=0) <= 1e-9


def test_logcosh_scalar_values():
    comp = ComponentLoss(LOG_COSH, np.array([1.0]), 0.0)
    x = np.array([2.0])
    # independent scalar path: math.log(math.cosh(.)), math.tanh(.)
    assert math.isclose(comp.value(x), math.log(math.cosh(2.0)), rel_tol=1e-15)
    assert math.isclose(comp.gradient(x)[0], math.tanh(2.0), rel_tol=1e-15)
    assert math.isclose(comp.value(x), 1.325, rel_tol=1e-3)
    assert math.isclose(comp.gradient(x)[0], 0.964, rel_tol=1e-3)


def test_logcosh_value_stable_for_large_margins():
    comp = ComponentLoss(LOG_COSH, np.array([1.0]), 0.0)
    v = comp.value(np.array([800.0]))  # cosh overflows; log cosh must not
    assert math.isclose(v, 800.0 - math.log(2.0), rel_tol=1e-15)


def test_strongly_convex_scalar_case():
    p = make_strongly_convex_ls(1, 1, alpha_sc=1.0, seed=0)
    assert p.strong_convexity == pytest.approx(1.0, abs=1e-15)
    assert p.beta == 1.0


def test_strongly_convex_eigenvalue_oracle():
    import scipy.linalg

    p = make_strongly_convex_ls(4, 40, alpha_sc=0.1, seed=2)
    verify_problem(p)
    A = np.array([c.a for c in p.components])
    lam = scipy.linalg.eigh(A.T @ A / p.n, eigvals_only=True)[0]
    assert abs(lam - p.strong_convexity) <= 1e-10
    assert p.strong_convexity >= 0.1
    assert p.strong_convexity <= p.beta


def test_population_value_examples():
    p = make_realizable_least_squares(6, 9, seed=1)
    assert population_value(p, p.x_star) == 0.0
    comp = ComponentLoss(SQUARED, np.array([1.0]), 0.0)
    assert comp.value(np.array([2.0])) == 2.0


def test_component_gradient_examples():
    comp = ComponentLoss(SQUARED, np.array([1.0, 0.0]), 1.0)
    assert np.array_equal(comp.gradient(np.array([0.0, 0.0])), np.array([-1.0, 0.0]))
    p = make_realizable_least_squares(4, 6, seed=11)
    with pytest.raises(IndexOutOfRange):
        component_gradient(p, 6, p.x_star)
    with pytest.raises(IndexOutOfRange):
        component_gradient(p, -1, p.x_star)


@pytest.mark.parametrize(
    "maker,kwargs",
    [
        (make_realizable_least_squares, {"d": 4, "n": 9, "seed": 21}),
        (make_low_noise_least_squares, {"d": 4, "n": 12, "sigma_star": 0.2, "seed": 22}),
        (make_logcosh_realizable, {"d": 4, "n": 9, "seed": 23}),
        (make_strongly_convex_ls, {"d": 3, "n": 30, "alpha_sc": 0.05, "seed": 24}),
    ],
)
def test_gradients_match_finite_differences(maker, kwargs):
    p = maker(**kwargs)
    rng = np.random.default_rng(77)
    for _ in range(20):
        x = p.x_star + rng.standard_normal(p.d)
        i = int(rng.integers(p.n))
        g = p.component_gradient(i, x)
        fd = central_fd(lambda y: p.component_value(i, y), x)
        denom = max(np.linalg.norm(g), 1.0)
        assert np.linalg.norm(g - fd) / denom <= 1e-6


@pytest.mark.parametrize(
    "maker,kwargs",
    [
        (make_realizable_least_squares, {"d": 3, "n": 8, "seed": 31}),
        (make_low_noise_least_squares, {"d": 3, "n": 10, "sigma_star": 0.4, "seed": 32}),
        (make_logcosh_realizable, {"d": 3, "n": 8, "seed": 33}),
    ],
)
def test_gradient_monotonicity_sampled(maker, kwargs):
    # convexity witness: <grad f_i(x) - grad f_i(y), x - y> >= 0
    p = maker(**kwargs)
    rng = np.random.default_rng(5)
    for _ in range(50):
        x = rng.standard_normal(p.d) * 2.0
        y = rng.standard_normal(p.d) * 2.0
        i = int(rng.integers(p.n))
        dg = p.component_gradient(i, x) - p.component_gradient(i, y)
        assert float(dg @ (x - y)) >= -1e-12


@settings(max_examples=100, deadline=None)
@given(
    u=st.floats(-30.0, 30.0, allow_nan=False),
    v=st.floats(-30.0, 30.0, allow_nan=False),
)
def test_logcosh_envelope_one_smooth(u, v):
    # scalar envelope of log_cosh: tanh is a nonexpansive monotone gradient
    assert abs(math.tanh(u) - math.tanh(v)) <= abs(u - v) + 1e-15
    assert (math.tanh(u) - math.tanh(v)) * (u - v) >= -1e-15


def test_json_round_trip_bit_exact():
    for p in (
        make_realizable_least_squares(3, 5, seed=8),
        make_low_noise_least_squares(3, 6, 0.25, seed=8),
        make_logcosh_realizable(2, 4, seed=8),
        make_strongly_convex_ls(2, 9, 0.2, seed=8),
    ):
        doc = problem_to_json(p)
        q = problem_from_json(doc)
        assert q.family_tag == p.family_tag
        assert q.d == p.d and q.n == p.n
        assert q.beta == p.beta
        assert q.sigma_star_sq == p.sigma_star_sq
        assert q.strong_convexity == p.strong_convexity
        assert np.array_equal(q.x_star, p.x_star)
        for ci, cj in zip(p.components, q.components):
            assert ci.kind == cj.kind and ci.b == cj.b
            assert np.array_equal(ci.a, cj.a)
        # the serialized text itself is reproducible
        assert problem_to_json(q) == doc
        payload = json.loads(doc)
        assert set(payload) == {
            "family_tag",
            "d",
            "n",
            "beta",
            "x_star",
            "sigma_star_sq",
            "strong_convexity",
            "components",
        }
