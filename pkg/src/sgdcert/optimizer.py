"""Fixed-stepsize SGD with seeded sampling, trajectories and Monte Carlo statistics.

`run_sgd` accepts any objective exposing the duck-typed surface of
`problems.ProblemInstance` (attributes `n`, `d`, `beta`, `x_star`,
`sigma_star_sq`; methods `component_gradient`, `population_value`), which is
also how the Kaczmarz and POCS reductions are driven through the same runner.

Conventions: a T-step run stores iterates x_1 .. x_{T+1}; the *reported last
iterate* is x_T (the quantity the last-iterate guarantees speak about), while
x_{T+1} is kept because the continual-regression corollary reports it.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PermutationTooShort, StepsizeOutOfRange
from .rng import make_rng

WITH_REPLACEMENT = "with_replacement"
WITHOUT_REPLACEMENT = "without_replacement"
_SCHEMES = (WITH_REPLACEMENT, WITHOUT_REPLACEMENT)

FIXED = "fixed"
GREEDY = "greedy"
LOG_TUNED = "log_tuned"
THM2_TUNED = "thm2_tuned"
THMD_TUNED = "thmD_tuned"

NEGATIVE_EXCESS_CLAMP = -1e-12


def sample_indices(scheme: str, n: int, T: int, seed: int) -> np.ndarray:
    """Draw the component index sequence for one run.

    with_replacement: T i.i.d. uniform draws from [0, n).
    without_replacement: first T entries of a uniformly random permutation
    (Fisher-Yates under the seeded generator); requires T <= n.
    """
    if scheme not in _SCHEMES:
        raise DomainError(f"unknown sampling scheme {scheme!r}")
    rng = make_rng(seed)
    if scheme == WITH_REPLACEMENT:
        return rng.integers(0, n, size=T)
    if T > n:
        raise PermutationTooShort(f"T={T} exceeds family size n={n}")
    return rng.permutation(n)[:T]


@dataclass(frozen=True)
class StepsizePolicy:
    """Stepsize selection rule, resolved to a number once (problem, x1, T) are known.

    fixed       eta as given, required 0 < eta < 2/beta
    greedy      1/beta
    log_tuned   1/(beta * log2 T)
    thm2_tuned  min{ 1/(beta log2 T), |x1-x_star| / sqrt(sigma_star^2 T log2(T+2)) }
    thmD_tuned  min{ 1/(beta ln T),   |x1-x_star| / sqrt(sigma_star^2 T ln T) },
                required 0 < eta < 1/beta
    """

    kind: str
    eta: float | None = None

    @classmethod
    def fixed(cls, eta: float) -> "StepsizePolicy":
        return cls(FIXED, float(eta))

    @classmethod
    def greedy(cls) -> "StepsizePolicy":
        return cls(GREEDY)

    @classmethod
    def log_tuned(cls) -> "StepsizePolicy":
        return cls(LOG_TUNED)

    @classmethod
    def thm2_tuned(cls) -> "StepsizePolicy":
        return cls(THM2_TUNED)

    @classmethod
    def thmD_tuned(cls) -> "StepsizePolicy":
        return cls(THMD_TUNED)

    def resolve(self, problem, x1: np.ndarray, T: int) -> float:
        beta = problem.beta
        if self.kind == FIXED:
            if self.eta is None:
                raise DomainError("fixed policy needs an explicit eta")
            eta = self.eta
        elif self.kind == GREEDY:
            eta = 1.0 / beta
        elif self.kind == LOG_TUNED:
            if T < 2:
                raise DomainError("log_tuned needs T >= 2")
            eta = 1.0 / (beta * math.log2(T))
        elif self.kind == THM2_TUNED:
            if T < 2:
                raise DomainError("thm2_tuned needs T >= 2")
            first = 1.0 / (beta * math.log2(T))
            s2 = problem.sigma_star_sq
            if s2 > 0.0:
                d0 = float(np.linalg.norm(np.asarray(x1, float) - problem.x_star))
                eta = min(first, d0 / math.sqrt(s2 * T * math.log2(T + 2)))
            else:
                eta = first
        elif self.kind == THMD_TUNED:
            if T < 3:
                raise DomainError("thmD_tuned needs T >= 3")
            first = 1.0 / (beta * math.log(T))
            s2 = problem.sigma_star_sq
            if s2 > 0.0:
                d0 = float(np.linalg.norm(np.asarray(x1, float) - problem.x_star))
                eta = min(first, d0 / math.sqrt(s2 * T * math.log(T)))
            else:
                eta = first
        else:
            raise DomainError(f"unknown stepsize policy {self.kind!r}")

        limit = 1.0 / beta if self.kind == THMD_TUNED else 2.0 / beta
        if not 0.0 < eta < limit:
            raise StepsizeOutOfRange(
                f"eta={eta} outside (0, {limit}) for policy {self.kind}"
            )
        return float(eta)


@dataclass
class Trajectory:
    """Full record of one run: exactly reproducible from (problem, x1, eta, seed)."""

    eta: float
    seed: int
    indices: np.ndarray
    iterates: np.ndarray  # shape (T+1, d), rows x_1 .. x_{T+1}
    gradient_norms_sq: np.ndarray | None = None

    @property
    def T(self) -> int:
        return len(self.indices)

    @property
    def d(self) -> int:
        return self.iterates.shape[1]

    @property
    def x_last(self) -> np.ndarray:
        """x_T, the reported last iterate."""
        return self.iterates[self.T - 1]

    @property
    def x_final(self) -> np.ndarray:
        """x_{T+1}, the point after the T-th update."""
        return self.iterates[self.T]


def run_sgd(
    problem,
    x1: np.ndarray,
    policy: StepsizePolicy,
    scheme: str,
    T: int,
    seed: int,
    record_gradient_norms: bool = False,
) -> Trajectory:
    """Run T steps of x_{t+1} = x_t - eta * grad f_{i_t}(x_t)."""
    if T < 1:
        raise DomainError("T must be >= 1")
    eta = policy.resolve(problem, x1, T)
    indices = sample_indices(scheme, problem.n, T, seed)
    x = np.array(x1, dtype=float)
    if x.shape != (problem.d,):
        raise DomainError(f"x1 has shape {x.shape}, expected ({problem.d},)")
    iterates = np.empty((T + 1, problem.d))
    iterates[0] = x
    norms = np.empty(T) if record_gradient_norms else None
    for t in range(T):
        g = problem.component_gradient(int(indices[t]), x)
        if norms is not None:
            norms[t] = g @ g
        x = x - eta * g
        iterates[t + 1] = x
    return Trajectory(eta, seed, indices, iterates, norms)


def average_iterate(tr: Trajectory) -> np.ndarray:
    """(1/T) sum_{t=1..T} x_t; excludes x_{T+1}."""
    if tr.T < 1:
        raise DomainError("need T >= 1")
    return tr.iterates[:-1].mean(axis=0)


class _ClampCounter:
    """Counts excess-risk values clamped from below; values under the clamp
    threshold indicate something worse than roundoff and are tallied apart."""

    def __init__(self) -> None:
        self.total = 0
        self.anomalous = 0

    def reset(self) -> None:
        self.total = 0
        self.anomalous = 0


negative_excess_clamps = _ClampCounter()


def _clamp_excess(raw: float) -> float:
    if raw >= 0.0:
        return raw
    negative_excess_clamps.total += 1
    if raw < NEGATIVE_EXCESS_CLAMP:
        negative_excess_clamps.anomalous += 1
    return 0.0


def excess_risk(problem, x: np.ndarray) -> float:
    """F(x) - F(x_star), clamped to 0 against floating-point undershoot."""
    x = np.asarray(x, dtype=float)
    raw = problem.population_value(x) - problem.population_value(problem.x_star)
    return _clamp_excess(raw)


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float


def mean_stderr(values) -> MCEstimate:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise DomainError("need at least two replicates")
    return MCEstimate(float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(v.size)))


def mc_statistic(
    problem,
    x1: np.ndarray,
    policy: StepsizePolicy,
    scheme: str,
    T_grid,
    replicates: int,
    base_seed: int,
    statistic,
) -> dict[int, MCEstimate]:
    """Replicated runs of a per-trajectory statistic, reduced in seed order.

    Replicate k uses seed base_seed + k; the reduction is performed in
    ascending-seed order regardless of any execution interleaving, so results
    are exactly reproducible.
    """
    if replicates < 2:
        raise DomainError("replicates must be >= 2")
    out: dict[int, MCEstimate] = {}
    for T in T_grid:
        vals = np.empty(replicates)
        for k in range(replicates):
            tr = run_sgd(problem, x1, policy, scheme, int(T), base_seed + k)
            vals[k] = statistic(problem, tr)
        out[int(T)] = mean_stderr(vals)
    return out


def _last_iterate_excess(problem, tr: Trajectory) -> float:
    return excess_risk(problem, tr.x_last)


def mc_excess_risk(
    problem,
    x1: np.ndarray,
    policy: StepsizePolicy,
    scheme: str,
    T_grid,
    replicates: int,
    base_seed: int,
) -> dict[int, MCEstimate]:
    """Mean and standard error of the last-iterate excess risk F(x_T) - F(x_star)."""
    return mc_statistic(
        problem, x1, policy, scheme, T_grid, replicates, base_seed, _last_iterate_excess
    )


def trajectory_to_csv(tr: Trajectory, path) -> None:
    """Columns: t, index, x components (flattened), gradient_norm_sq."""
    header = ["t", "index"] + [f"x_{j}" for j in range(tr.d)] + ["gradient_norm_sq"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(tr.T + 1):
            idx = int(tr.indices[t]) if t < tr.T else ""
            gn = ""
            if tr.gradient_norms_sq is not None and t < tr.T:
                gn = repr(float(tr.gradient_norms_sq[t]))
            w.writerow([t + 1, idx] + [repr(float(v)) for v in tr.iterates[t]] + [gn])
