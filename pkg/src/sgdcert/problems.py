"""Finite uniform families of convex, componentwise-smooth stochastic objectives.

Each instance is a family of n scalar-envelope losses f_i(x) = phi(<a_i, x> - b_i)
together with an analytically known population minimizer x_star, a uniform
smoothness bound beta, the gradient variance at the minimizer sigma_star_sq,
and (optionally) a strong-convexity constant of the population objective.
The sampling distribution is fixed to uniform over the n components, which
makes F, x_star and sigma_star_sq exactly computable - the property the bound
certification machinery needs.

Two envelopes are supported:

  squared:   phi(u) = u^2 / 2          (gradient a*u,       smoothness |a|^2)
  log_cosh:  phi(u) = log cosh(u)      (gradient a*tanh(u), smoothness |a|^2)

Both are convex for every (a, b). Instances are immutable after construction
and safe to share across concurrent workers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    FormatError,
    GenerationFailed,
    IndexOutOfRange,
    InfeasibleNoise,
)
from .rng import make_rng

SQUARED = "squared"
LOG_COSH = "log_cosh"
_KINDS = (SQUARED, LOG_COSH)

REALIZABLE_LS = "realizable_ls"
LOW_NOISE_LS = "low_noise_ls"
REALIZABLE_LOGCOSH = "realizable_logcosh"
STRONGLY_CONVEX_LS = "strongly_convex_ls"
_FAMILY_TAGS = (REALIZABLE_LS, LOW_NOISE_LS, REALIZABLE_LOGCOSH, STRONGLY_CONVEX_LS)

STATIONARITY_TOL = 1e-10
SIGMA_RECOMPUTE_RTOL = 1e-12

_GENERATION_ATTEMPTS = 100


def log_cosh(u: np.ndarray | float) -> np.ndarray | float:
    """Overflow-safe log(cosh(u)) = |u| + log1p(exp(-2|u|)) - log 2."""
    a = np.abs(u)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


@dataclass
class ComponentLoss:
    """One component loss f(x) = phi(<a, x> - b)."""

    kind: str
    a: np.ndarray
    b: float

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise DomainError(f"unknown component kind {self.kind!r}")
        self.a = np.asarray(self.a, dtype=float)
        self.b = float(self.b)

    @property
    def smoothness(self) -> float:
        """Exact smoothness constant |a|^2 (both envelopes have phi'' <= 1)."""
        return float(self.a @ self.a)

    def value(self, x: np.ndarray) -> float:
        u = float(self.a @ x) - self.b
        if self.kind == SQUARED:
            return 0.5 * u * u
        return float(log_cosh(u))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        u = float(self.a @ x) - self.b
        if self.kind == SQUARED:
            return self.a * u
        return self.a * math.tanh(u)


@dataclass
class ProblemInstance:
    """A finite uniform family of convex smooth losses with known minimizer.

    Treat as immutable after construction. `beta` upper-bounds every
    component smoothness; `sigma_star_sq` equals the recomputable
    (1/n) sum_i |grad f_i(x_star)|^2; `strong_convexity` is 0 when the
    population objective is not strongly convex.
    """

    d: int
    components: list[ComponentLoss]
    beta: float
    x_star: np.ndarray
    sigma_star_sq: float
    strong_convexity: float
    family_tag: str

    _A: np.ndarray = field(init=False, repr=False)
    _b: np.ndarray = field(init=False, repr=False)
    _kind: str | None = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.family_tag not in _FAMILY_TAGS:
            raise DomainError(f"unknown family tag {self.family_tag!r}")
        self.x_star = np.asarray(self.x_star, dtype=float)
        self._A = np.array([c.a for c in self.components], dtype=float)
        self._b = np.array([c.b for c in self.components], dtype=float)
        kinds = {c.kind for c in self.components}
        self._kind = kinds.pop() if len(kinds) == 1 else None

    @property
    def n(self) -> int:
        return len(self.components)

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexOutOfRange(f"component index {i} outside [0, {self.n})")

    def component_value(self, i: int, x: np.ndarray) -> float:
        self._check_index(i)
        return self.components[i].value(x)

    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        """Exact analytic gradient of component i at x."""
        self._check_index(i)
        row = self._A[i]
        u = row @ x - self._b[i]
        if self._kind == SQUARED or self.components[i].kind == SQUARED:
            return row * u
        return row * math.tanh(u)

    def _margins(self, x: np.ndarray) -> np.ndarray:
        # per-row dots, not a matvec: bitwise-identical to the componentwise
        # gradient path, so realizable margins vanish exactly at x_star
        return np.array([row @ x for row in self._A]) - self._b

    def population_value(self, x: np.ndarray) -> float:
        """F(x) = (1/n) sum_i f_i(x)."""
        u = self._margins(x)
        if self._kind == SQUARED:
            return float(0.5 * np.mean(u * u))
        if self._kind == LOG_COSH:
            return float(np.mean(log_cosh(u)))
        return float(np.mean([c.value(x) for c in self.components]))

    def population_gradient(self, x: np.ndarray) -> np.ndarray:
        u = self._margins(x)
        if self._kind == SQUARED:
            return self._A.T @ u / self.n
        if self._kind == LOG_COSH:
            return self._A.T @ np.tanh(u) / self.n
        g = np.zeros(self.d)
        for c in self.components:
            g += c.gradient(x)
        return g / self.n

    def gradient_variance_at(self, x: np.ndarray) -> float:
        """(1/n) sum_i |grad f_i(x)|^2, the quantity sigma_star_sq stores at x_star."""
        u = self._margins(x)
        row_sq = np.einsum("ij,ij->i", self._A, self._A)
        if self._kind == LOG_COSH:
            u = np.tanh(u)
        elif self._kind != SQUARED:
            return float(np.mean([c.gradient(x) @ c.gradient(x) for c in self.components]))
        return float(np.mean(row_sq * u * u))


def verify_problem(p: ProblemInstance) -> None:
    """Check the instance invariants; raise DomainError on any violation.

    - beta dominates every component smoothness,
    - x_star is stationary for the population objective,
    - the stored sigma_star_sq matches its recomputation.
    """
    worst = max(c.smoothness for c in p.components)
    if p.beta < worst - 1e-12 * (1.0 + worst):
        raise DomainError(f"beta={p.beta} below component smoothness {worst}")
    gnorm = float(np.linalg.norm(p.population_gradient(p.x_star)))
    if gnorm > STATIONARITY_TOL * (1.0 + float(np.linalg.norm(p.x_star))):
        raise DomainError(f"x_star is not stationary: |grad F| = {gnorm}")
    recomputed = p.gradient_variance_at(p.x_star)
    scale = max(abs(p.sigma_star_sq), abs(recomputed))
    if abs(recomputed - p.sigma_star_sq) > SIGMA_RECOMPUTE_RTOL * scale:
        raise DomainError(
            f"sigma_star_sq mismatch: stored {p.sigma_star_sq}, recomputed {recomputed}"
        )


def _unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    rows = rng.standard_normal((n, d))
    norms = np.linalg.norm(rows, axis=1)
    while np.any(norms == 0.0):  # probability zero, but keep the loop total
        bad = norms == 0.0
        rows[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(rows, axis=1)
    return rows / norms[:, None]


def _unit_vector(rng: np.random.Generator, d: int) -> np.ndarray:
    return _unit_rows(rng, 1, d)[0]


def _row_dots(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Per-row dot products via the same op the componentwise gradient uses,
    so that targets built from them make x_star an exact fixed point."""
    return np.array([row @ x for row in A])


def make_realizable_least_squares(d: int, n: int, seed: int) -> ProblemInstance:
    """Interpolation-regime least squares: unit-norm rows, targets on the model.

    Every component is minimized at x_star, so sigma_star_sq = 0 and beta = 1.
    """
    if d < 1 or n < 1:
        raise DomainError("d and n must be positive")
    rng = make_rng(seed)
    A = _unit_rows(rng, n, d)
    x_star = _unit_vector(rng, d)
    b = _row_dots(A, x_star)
    comps = [ComponentLoss(SQUARED, A[i], b[i]) for i in range(n)]
    return ProblemInstance(d, comps, 1.0, x_star, 0.0, 0.0, REALIZABLE_LS)


def make_low_noise_least_squares(
    d: int, n: int, sigma_star: float, seed: int
) -> ProblemInstance:
    """Least squares with exact gradient variance sigma_star^2 at the minimizer.

    Residuals are projected onto the null space of A^T so that
    sum_i a_i r_i = 0 (x_star stays the exact population minimizer) and then
    rescaled so that (1/n) sum_i r_i^2 = sigma_star^2 exactly (rows are
    unit-norm, so |a_i r_i| = |r_i|).
    """
    if sigma_star < 0:
        raise DomainError("sigma_star must be nonnegative")
    if n < d + 1:
        raise DomainError("need n >= d + 1 so the stationarity correction is solvable")
    rng = make_rng(seed)
    A = _unit_rows(rng, n, d)
    x_star = _unit_vector(rng, d)
    if sigma_star == 0.0:
        r = np.zeros(n)
    else:
        q, _ = np.linalg.qr(A)  # columns span col(A); residual must be orthogonal
        r = None
        for _ in range(_GENERATION_ATTEMPTS):
            cand = rng.standard_normal(n)
            cand -= q @ (q.T @ cand)
            cand -= q @ (q.T @ cand)  # second pass keeps A^T r at roundoff level
            nrm = float(np.linalg.norm(cand))
            if nrm > 1e-9:
                r = cand * (sigma_star * math.sqrt(n) / nrm)
                break
        if r is None:
            raise InfeasibleNoise(
                f"projected residual vanished in {_GENERATION_ATTEMPTS} attempts"
            )
    b = _row_dots(A, x_star) - r
    comps = [ComponentLoss(SQUARED, A[i], b[i]) for i in range(n)]
    return ProblemInstance(
        d, comps, 1.0, x_star, float(sigma_star) ** 2, 0.0, LOW_NOISE_LS
    )


def make_logcosh_realizable(d: int, n: int, seed: int) -> ProblemInstance:
    """Interpolating log-cosh family; tanh(0) = 0 makes every gradient vanish at x_star."""
    if d < 1 or n < 1:
        raise DomainError("d and n must be positive")
    rng = make_rng(seed)
    A = _unit_rows(rng, n, d)
    x_star = _unit_vector(rng, d)
    b = _row_dots(A, x_star)
    comps = [ComponentLoss(LOG_COSH, A[i], b[i]) for i in range(n)]
    return ProblemInstance(d, comps, 1.0, x_star, 0.0, 0.0, REALIZABLE_LOGCOSH)


def make_strongly_convex_ls(
    d: int, n: int, alpha_sc: float, seed: int
) -> ProblemInstance:
    """Realizable least squares whose population Hessian has lambda_min >= alpha_sc.

    Rows are unit norm (beta = 1); the stored strong_convexity is the exact
    minimum eigenvalue of (1/n) A^T A, recomputed from the accepted sample.
    """
    if not 0.0 < alpha_sc <= 1.0:
        raise DomainError("alpha_sc must lie in (0, 1]")
    if n < d:
        raise DomainError("need n >= d for a positive-definite Hessian")
    rng = make_rng(seed)
    for _ in range(_GENERATION_ATTEMPTS):
        A = _unit_rows(rng, n, d)
        lam_min = float(np.linalg.eigvalsh(A.T @ A / n)[0])
        if lam_min >= alpha_sc:
            x_star = _unit_vector(rng, d)
            b = _row_dots(A, x_star)
            comps = [ComponentLoss(SQUARED, A[i], b[i]) for i in range(n)]
            return ProblemInstance(
                d, comps, 1.0, x_star, 0.0, lam_min, STRONGLY_CONVEX_LS
            )
    raise GenerationFailed(
        f"could not reach lambda_min >= {alpha_sc} in {_GENERATION_ATTEMPTS} samples"
    )


def population_value(p: ProblemInstance, x: np.ndarray) -> float:
    """F(x) = (1/n) sum_i f_i(x)."""
    return p.population_value(np.asarray(x, dtype=float))


def component_gradient(p: ProblemInstance, i: int, x: np.ndarray) -> np.ndarray:
    """Exact analytic gradient of component i at x."""
    return p.component_gradient(i, np.asarray(x, dtype=float))


def problem_to_json(p: ProblemInstance) -> str:
    """Serialize to the canonical JSON document; floats round-trip bit-exactly."""
    doc = {
        "family_tag": p.family_tag,
        "d": p.d,
        "n": p.n,
        "beta": p.beta,
        "x_star": [float(v) for v in p.x_star],
        "sigma_star_sq": p.sigma_star_sq,
        "strong_convexity": p.strong_convexity,
        "components": [
            {"kind": c.kind, "a": [float(v) for v in c.a], "b": c.b}
            for c in p.components
        ],
    }
    return json.dumps(doc)


def problem_from_json(text: str) -> ProblemInstance:
    doc = json.loads(text)
    comps = [
        ComponentLoss(c["kind"], np.array(c["a"], dtype=float), float(c["b"]))
        for c in doc["components"]
    ]
    if len(comps) != int(doc["n"]):
        raise FormatError(f"document claims n={doc['n']} but holds {len(comps)} components")
    return ProblemInstance(
        int(doc["d"]),
        comps,
        float(doc["beta"]),
        np.array(doc["x_star"], dtype=float),
        float(doc["sigma_star_sq"]),
        float(doc["strong_convexity"]),
        doc["family_tag"],
    )
