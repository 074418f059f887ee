"""Numerical certification of the checkable inequalities behind the rate proofs.

Two kinds of checks live here. Deterministic ones hold pointwise and are
certified with tight tolerances: the per-trajectory telescoped regret
inequality, the weight-schedule construction with its coefficient bound,
two scalar technical lemmas, componentwise cocoercivity, and the invariance
of the gradient variance across population minimizers. The weighted regret
inequality itself holds in expectation only and is certified by a Monte Carlo
z-score.

All inequality margins are reported relative to scale = 1 + |LHS| + |RHS|,
since magnitudes vary by orders across (T, eta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LengthMismatch, NotAMinimizer
from .optimizer import WITH_REPLACEMENT, StepsizePolicy, Trajectory, run_sgd
from .problems import (
    LOG_COSH,
    LOW_NOISE_LS,
    SQUARED,
    _row_dots,
    ComponentLoss,
    ProblemInstance,
    make_logcosh_realizable,
    make_low_noise_least_squares,
    make_realizable_least_squares,
    make_strongly_convex_ls,
    _unit_rows,
    _unit_vector,
)
from .rng import make_rng

TELESCOPE_REL_TOL = 1e-8
SCHEDULE_TOL = 1e-12
LEMMA_TOL = 1e-12
COCOERCIVITY_TOL = 1e-9
SIGMA_INVARIANCE_TOL = 1e-10
MINIMIZER_GRAD_TOL = 1e-10


@dataclass
class WeightSchedule:
    """Nondecreasing analysis weights v_0..v_T and per-step coefficients c_1..c_T.

    v_t = (T - t + 2)^(-alpha) for 1 <= t <= T-1, v_T = v_{T-1}, and
    v_0 = (T + 2)^(-alpha). For a fixed stepsize eta,
    c_t = eta v_t^2 - (v_t - v_{t-1}) sum_{s=t}^T eta v_s.
    """

    T: int
    alpha: float
    eta: float
    v: np.ndarray  # length T+1, entries v_0..v_T
    c: np.ndarray  # length T, entry [t-1] is c_t


def build_weight_schedule(T: int, alpha: float, eta: float) -> WeightSchedule:
    if T < 2:
        raise DomainError("T must be >= 2")
    if not 0.0 < alpha < 0.5:
        raise DomainError("alpha must lie in (0, 1/2)")
    if eta <= 0.0:
        raise DomainError("eta must be positive")
    v = np.empty(T + 1)
    v[0] = (T + 2.0) ** (-alpha)
    t = np.arange(1, T)
    v[1:T] = (T - t + 2.0) ** (-alpha)
    v[T] = v[T - 1]
    suffix = np.cumsum(v[::-1])[::-1]  # suffix[t] = sum_{s=t}^T v_s
    c = eta * (v[1:] ** 2 - (v[1:] - v[:-1]) * suffix[1:])
    return WeightSchedule(T, float(alpha), float(eta), v, c)


def schedule_coefficient_bound(ws: WeightSchedule) -> np.ndarray:
    """a_t = (v_t - v_{t-1}) sum_{s=t}^T v_s for t = 1..T-1 (must satisfy a_t <= v_t^2)."""
    v = ws.v
    suffix = np.cumsum(v[::-1])[::-1]
    return (v[1 : ws.T] - v[: ws.T - 1]) * suffix[1 : ws.T]


def weight_schedule_violation(ws: WeightSchedule) -> float:
    """Worst violation of positivity, monotonicity and a_t <= v_t^2 (negative = slack)."""
    v = ws.v
    worst = -v[0]  # positivity: v_0 > 0
    mono = float(np.max(v[:-1] - v[1:]))  # nondecreasing: v_{t-1} - v_t <= 0
    worst = max(worst, mono)
    if ws.T >= 2:
        a = schedule_coefficient_bound(ws)
        worst = max(worst, float(np.max(a - v[1 : ws.T] ** 2)))
    return worst


def _component_gradients_at(p: ProblemInstance, i: int, X: np.ndarray) -> np.ndarray:
    """Gradients of component i at every row of X, stacked; analytic fast path."""
    row = p._A[i]
    u = X @ row - p._b[i]
    kind = p.components[i].kind
    if kind == SQUARED:
        return u[:, None] * row[None, :]
    return np.tanh(u)[:, None] * row[None, :]


@dataclass(frozen=True)
class TelescopeResult:
    margin: float  # RHS - LHS, mathematically equal to the dropped term
    scale: float  # 1 + |LHS| + |RHS|
    lhs: float
    rhs: float
    dropped: float  # v_T^2 |x_{T+1} - y_T|^2 / 2

    @property
    def passed(self) -> bool:
        return self.margin >= -TELESCOPE_REL_TOL * self.scale


def check_regret_telescope(
    tr: Trajectory, p: ProblemInstance, ws: WeightSchedule, x_ref: np.ndarray
) -> TelescopeResult:
    """Deterministic per-trajectory telescoped inequality.

    With y_0 = x_ref and y_t = (v_{t-1}/v_t) y_{t-1} + (1 - v_{t-1}/v_t) x_t,
    checks  sum_t eta v_t^2 <grad f_t(x_t), x_t - y_t>
              <=  v_0^2 |x_1 - x_ref|^2 / 2 + sum_t eta^2 v_t^2 |grad f_t(x_t)|^2 / 2.
    The gap equals the dropped final telescope term, so the margin is
    nonnegative up to roundoff for every trajectory and any x_ref.
    """
    if tr.T != ws.T:
        raise LengthMismatch(f"trajectory T={tr.T} but schedule T={ws.T}")
    x_ref = np.asarray(x_ref, dtype=float)
    eta = tr.eta
    v = ws.v
    y = x_ref.copy()
    lhs = 0.0
    grad_sum = 0.0
    for t in range(1, tr.T + 1):
        x_t = tr.iterates[t - 1]
        ratio = v[t - 1] / v[t]
        y = ratio * y + (1.0 - ratio) * x_t
        g = p.component_gradient(int(tr.indices[t - 1]), x_t)
        lhs += eta * v[t] ** 2 * float(g @ (x_t - y))
        grad_sum += v[t] ** 2 * float(g @ g)
    init = tr.iterates[0] - x_ref
    rhs = 0.5 * v[0] ** 2 * float(init @ init) + 0.5 * eta**2 * grad_sum
    tail = tr.iterates[tr.T] - y
    dropped = 0.5 * v[tr.T] ** 2 * float(tail @ tail)
    lhs = float(lhs)
    rhs = float(rhs)
    return TelescopeResult(rhs - lhs, 1.0 + abs(lhs) + abs(rhs), lhs, rhs, dropped)


def check_cocoercivity(p: ProblemInstance, pair_count: int, seed: int) -> float:
    """Max over sampled pairs and components of
    |grad f_i(x) - grad f_i(y)|^2 - beta <grad f_i(x) - grad f_i(y), x - y>."""
    rng = make_rng(seed)
    X = p.x_star + rng.standard_normal((pair_count, p.d))
    Y = p.x_star + rng.standard_normal((pair_count, p.d))
    row_sq = np.einsum("ij,ij->i", p._A, p._A)
    gap = (X - Y) @ p._A.T  # (pairs, n): <a_i, x - y>
    if p._kind == SQUARED:
        delta = gap
    elif p._kind == LOG_COSH:
        delta = np.tanh(X @ p._A.T - p._b) - np.tanh(Y @ p._A.T - p._b)
    else:  # mixed kinds: per-component fallback
        worst = -math.inf
        for i in range(p.n):
            for x, y in zip(X, Y):
                dg = p.component_gradient(i, x) - p.component_gradient(i, y)
                worst = max(worst, float(dg @ dg) - p.beta * float(dg @ (x - y)))
        return worst
    violation = row_sq[None, :] * delta**2 - p.beta * delta * gap
    return float(np.max(violation))


def check_lemma_sum_vt(c_values, alpha_values, n_max: int) -> float:
    """Max violation over the grid of
    (1+c)^(-a) + sum_{i=1}^n (i+c)^(-a) - (n+c)^(1-a)/(1-a),  n = 0..n_max."""
    if n_max < 0:
        raise DomainError("n_max must be nonnegative")
    worst = -math.inf
    i = np.arange(1, n_max + 1, dtype=float)
    n = np.arange(0, n_max + 1, dtype=float)
    for c in c_values:
        if c < 1.0:
            raise DomainError("lemma requires c >= 1")
        for a in alpha_values:
            if not 0.0 < a < 1.0:
                raise DomainError("lemma requires alpha in (0, 1)")
            partial = np.concatenate(([0.0], np.cumsum((i + c) ** (-a))))
            lhs = (1.0 + c) ** (-a) + partial
            rhs = (n + c) ** (1.0 - a) / (1.0 - a)
            worst = max(worst, float(np.max(lhs - rhs)))
    return worst


def check_lemma_diff_vt(x_values, alpha_values) -> float:
    """Max violation over the grid of x^(-a) - (x+1)^(-a) - a/(x (x+1)^a)."""
    x = np.asarray(x_values, dtype=float)
    if np.any(x < 1.0):
        raise DomainError("lemma requires x >= 1")
    worst = -math.inf
    for a in alpha_values:
        if not 0.0 < a < 1.0:
            raise DomainError("lemma requires alpha in (0, 1)")
        lhs = x ** (-a) - (x + 1.0) ** (-a)
        rhs = a / (x * (x + 1.0) ** a)
        worst = max(worst, float(np.max(lhs - rhs)))
    return worst


def make_rank_deficient_instance(
    d: int, n: int, rank: int, sigma_star: float, seed: int
) -> tuple[ProblemInstance, np.ndarray]:
    """Least-squares instance whose minimizer set is an affine subspace.

    Rows span only a rank-dimensional subspace, so any displacement along the
    orthogonal complement leaves every residual unchanged. Returns the
    instance (with one minimizer stored as x_star) and a second minimizer
    displaced along a unit flat direction.
    """
    if not 1 <= rank < d:
        raise DomainError("need 1 <= rank < d for a flat direction")
    if n < d + 1:
        raise DomainError("need n >= d + 1 for the residual projection")
    if sigma_star < 0:
        raise DomainError("sigma_star must be nonnegative")
    rng = make_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((d, rank + 1)))
    span, null_dir = basis[:, :rank], basis[:, rank]
    A = _unit_rows(rng, n, rank) @ span.T
    x_star = _unit_vector(rng, d)
    if sigma_star == 0.0:
        r = np.zeros(n)
    else:
        q, _ = np.linalg.qr(A)
        r = rng.standard_normal(n)
        r -= q @ (q.T @ r)
        r -= q @ (q.T @ r)
        r *= sigma_star * math.sqrt(n) / float(np.linalg.norm(r))
    b = _row_dots(A, x_star) - r
    comps = [ComponentLoss(SQUARED, A[i], b[i]) for i in range(n)]
    p = ProblemInstance(d, comps, 1.0, x_star, float(sigma_star) ** 2, 0.0, LOW_NOISE_LS)
    return p, x_star + null_dir


def check_sigma_star_invariance(
    p: ProblemInstance, x_star_1: np.ndarray, x_star_2: np.ndarray
) -> float:
    """|sigma^2(x_star_1) - sigma^2(x_star_2)| for two population minimizers."""
    for x in (x_star_1, x_star_2):
        gnorm = float(np.linalg.norm(p.population_gradient(np.asarray(x, float))))
        if gnorm > MINIMIZER_GRAD_TOL:
            raise NotAMinimizer(f"|grad F| = {gnorm} at a claimed minimizer")
    return abs(p.gradient_variance_at(x_star_1) - p.gradient_variance_at(x_star_2))


@dataclass(frozen=True)
class Lemma1Result:
    mean: float
    stderr: float
    z: float

    @property
    def passed(self) -> bool:
        return self.mean >= -2.0 * self.stderr


def check_lemma1_expectation(
    p: ProblemInstance,
    x1: np.ndarray,
    eta: float,
    ws: WeightSchedule,
    replicates: int,
    seed: int,
) -> Lemma1Result:
    """Monte Carlo margin of the full weighted regret inequality (with-replacement).

    Per replicate, computes RHS - LHS of

      sum_t c_t (f_t(x_t) - f_t(x*))
        <=  v_0^2 |x_1 - x*|^2 / 2  +  (eta^2/2) sum_t v_t^2 |g_t(x_t)|^2
          - (1/2 beta) sum_t eta v_t [ sum_{s<=t} (v_s - v_{s-1}) |g_t(x_t)-g_t(x_s)|^2
                                       + v_0 |g_t(x_t) - g_t(x*)|^2 ],

    where g_t is the gradient of the component sampled at step t, replayed at
    the stored historical iterates. Returns mean/stderr of the margin and
    their ratio; the inequality holds in expectation, so the acceptance
    threshold is z >= -2.
    """
    if replicates < 2:
        raise DomainError("replicates must be >= 2")
    if abs(ws.eta - eta) > 0.0:
        raise DomainError("schedule was built for a different stepsize")
    T = ws.T
    v = ws.v
    dv = v[1:] - v[:-1]  # dv[t-1] = v_t - v_{t-1}
    x1 = np.asarray(x1, dtype=float)
    f_star = np.array([p.component_value(i, p.x_star) for i in range(p.n)])
    g_star = np.array([p.component_gradient(i, p.x_star) for i in range(p.n)])
    init = x1 - p.x_star
    head = 0.5 * v[0] ** 2 * float(init @ init)
    policy = StepsizePolicy.fixed(eta)
    margins = np.empty(replicates)
    for k in range(replicates):
        tr = run_sgd(p, x1, policy, WITH_REPLACEMENT, T, seed + k)
        lhs = 0.0
        grad_sq = 0.0
        cross = 0.0
        for t in range(1, T + 1):
            i = int(tr.indices[t - 1])
            hist = _component_gradients_at(p, i, tr.iterates[:t])  # rows: x_1..x_t
            g_t = hist[-1]
            lhs += ws.c[t - 1] * (p.component_value(i, tr.iterates[t - 1]) - f_star[i])
            grad_sq += v[t] ** 2 * float(g_t @ g_t)
            diffs = hist - g_t
            star_diff = g_t - g_star[i]
            cross += v[t] * (
                float(dv[:t] @ np.einsum("ij,ij->i", diffs, diffs))
                + v[0] * float(star_diff @ star_diff)
            )
        rhs = head + 0.5 * eta**2 * grad_sq - eta / (2.0 * p.beta) * cross
        margins[k] = rhs - lhs
    mean = float(np.mean(margins))
    stderr = float(np.std(margins, ddof=1) / math.sqrt(replicates))
    if stderr == 0.0:
        z = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    else:
        z = mean / stderr
    return Lemma1Result(mean, stderr, z)


# ---------------------------------------------------------------------------
# The certification suite


@dataclass(frozen=True)
class CheckResult:
    check_name: str
    params: dict
    margin_or_z: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "check_name": self.check_name,
            "params": self.params,
            "margin_or_z": self.margin_or_z,
            "pass": self.passed,
        }


def _telescope_sweep(trajectories: int, seed: int) -> CheckResult:
    rng = make_rng(seed)
    worst = math.inf
    ok = True
    for run in range(trajectories):
        d = int(rng.integers(1, 8))
        n = int(rng.integers(d + 2, d + 24))
        family = run % 3
        inst_seed = int(rng.integers(0, 2**31))
        if family == 0:
            p = make_realizable_least_squares(d, n, inst_seed)
        elif family == 1:
            p = make_low_noise_least_squares(d, n, float(rng.uniform(0.0, 0.5)), inst_seed)
        else:
            p = make_logcosh_realizable(d, n, inst_seed)
        T = int(rng.integers(2, 48))
        alpha = float(rng.uniform(0.02, 0.48))
        eta = float(rng.uniform(0.05, 1.95)) / p.beta
        ws = build_weight_schedule(T, alpha, eta)
        x1 = p.x_star + rng.standard_normal(d) * float(rng.uniform(0.1, 2.0))
        tr = run_sgd(
            p, x1, StepsizePolicy.fixed(eta), WITH_REPLACEMENT, T, int(rng.integers(0, 2**31))
        )
        x_ref = p.x_star if run % 2 == 0 else p.x_star + rng.standard_normal(d)
        res = check_regret_telescope(tr, p, ws, x_ref)
        worst = min(worst, res.margin / res.scale)
        ok = ok and res.passed
    return CheckResult(
        "regret_telescope",
        {"trajectories": trajectories, "seed": seed, "rel_tol": TELESCOPE_REL_TOL},
        worst,
        ok,
    )


def _schedule_grid() -> CheckResult:
    alphas = [round(0.05 * k, 2) for k in range(1, 10)]  # 0.05 .. 0.45
    worst = -math.inf
    for T in range(2, 513):
        for alpha in alphas:
            ws = build_weight_schedule(T, alpha, 1.0)
            worst = max(worst, weight_schedule_violation(ws))
    return CheckResult(
        "weight_schedule_grid",
        {"T": "2..512", "alpha": alphas, "tol": SCHEDULE_TOL},
        worst,
        worst <= SCHEDULE_TOL,
    )


def run_certification_suite(
    trajectories: int = 100,
    lemma1_replicates: int = 10_000,
    cocoercivity_pairs: int = 1000,
    seed: int = 0,
) -> list[CheckResult]:
    """Every certification check at its acceptance configuration."""
    results = [_telescope_sweep(trajectories, seed), _schedule_grid()]

    v = check_lemma_sum_vt(
        [1.0, 2.0, 5.0, 10.0], [round(0.1 * k, 1) for k in range(1, 10)], 10_000
    )
    results.append(
        CheckResult(
            "lemma_sum_vt",
            {"c": [1, 2, 5, 10], "alpha": "0.1..0.9", "n": "0..10^4", "tol": LEMMA_TOL},
            v,
            v <= LEMMA_TOL,
        )
    )

    v = check_lemma_diff_vt(
        np.logspace(0.0, 6.0, 241), [round(0.05 * k, 2) for k in range(1, 20)]
    )
    results.append(
        CheckResult(
            "lemma_diff_vt",
            {"x": "1..10^6 log-spaced", "alpha": "0.05..0.95", "tol": LEMMA_TOL},
            v,
            v <= LEMMA_TOL,
        )
    )

    families = [
        make_realizable_least_squares(6, 30, seed + 11),
        make_low_noise_least_squares(6, 30, 0.2, seed + 12),
        make_logcosh_realizable(6, 30, seed + 13),
        make_strongly_convex_ls(4, 40, 0.05, seed + 14),
    ]
    v = max(
        check_cocoercivity(p, cocoercivity_pairs, seed + 20 + j)
        for j, p in enumerate(families)
    )
    results.append(
        CheckResult(
            "cocoercivity",
            {"pairs": cocoercivity_pairs, "families": 4, "tol": COCOERCIVITY_TOL},
            v,
            v <= COCOERCIVITY_TOL,
        )
    )

    worst = -math.inf
    for sigma in (0.0, 0.3):
        p, x2 = make_rank_deficient_instance(3, 12, 2, sigma, seed + 31)
        worst = max(worst, check_sigma_star_invariance(p, p.x_star, x2))
    results.append(
        CheckResult(
            "sigma_star_invariance",
            {"d": 3, "rank": 2, "sigma": [0.0, 0.3], "tol": SIGMA_INVARIANCE_TOL},
            worst,
            worst <= SIGMA_INVARIANCE_TOL,
        )
    )

    p = make_realizable_least_squares(2, 3, seed + 41)
    rng = make_rng(seed + 42)
    x1 = p.x_star + _unit_vector(rng, 2)
    eta = 0.5
    ws = build_weight_schedule(8, (2.0 - p.beta * eta) / 4.0, eta)
    lemma1 = check_lemma1_expectation(p, x1, eta, ws, lemma1_replicates, seed + 43)
    results.append(
        CheckResult(
            "lemma1_mc",
            {
                "d": 2,
                "n": 3,
                "T": 8,
                "eta": eta,
                "replicates": lemma1_replicates,
                "mean": lemma1.mean,
                "stderr": lemma1.stderr,
            },
            lemma1.z,
            lemma1.passed,
        )
    )
    return results
