"""Continual linear regression learned to convergence, and POCS over convex sets.

A task collection is a jointly realizable `kaczmarz.BlockSystem`: task j is a
dataset (A_j, b_j) with A_j x_star = b_j for a shared x_star. Learning a task
to convergence from the current point is the min-distance exact solve, which
equals the block Kaczmarz step with relaxation c = 1.

POCS sequentially projects onto uniformly sampled closed convex sets; it is an
SGD step of size 1 on the 1-smooth component f_i(x) = |x - P_i(x)|^2 / 2.
Supported set kinds (all with exact closed-form projections): affine systems
{x : Ax = b}, halfspaces {x : <a, x> <= b}, Euclidean balls.

Report thresholds (`population_loss_threshold`, `forgetting_threshold`,
`pocs_threshold`) carry the explicit constants 13, 30, 10 and 7 attached to
the respective corollaries, so Monte Carlo means have numbers to be checked
against.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSet, DomainError, InconsistentTask
from .kaczmarz import (
    PINV_RCOND,
    BlockSystem,
    kaczmarz_loss,
    kaczmarz_step,
    make_block_system,
)
from .optimizer import WITHOUT_REPLACEMENT, Trajectory, sample_indices

TaskCollection = BlockSystem
CONSISTENCY_TOL = 1e-8


def make_task_collection(d: int, m: int, task_sizes, seed: int) -> TaskCollection:
    """Jointly realizable regression tasks; same layout and text format as block systems."""
    return make_block_system(d, m, task_sizes, seed)


def regression_update(tasks: TaskCollection, i: int, x: np.ndarray) -> np.ndarray:
    """argmin |x' - x|^2 s.t. A_i x' = b_i, computed as x - A_i^+(A_i x - b_i).

    Bit-identical to `kaczmarz_step` with c = 1 on the same block.
    """
    tasks._check_index(i)
    A, b = tasks.blocks[i]
    resid = float(np.linalg.norm(b - A @ (tasks.pinv_cache[i] @ b)))
    if resid > CONSISTENCY_TOL:
        raise InconsistentTask(f"task {i} has no exact solution (residual {resid})")
    return kaczmarz_step(tasks, i, x, 1.0)


def run_continual_regression(
    tasks: TaskCollection, scheme: str, T: int, seed: int
) -> Trajectory:
    """x_1 = 0, then T tasks learned to convergence; returns the full trajectory
    including x_{T+1}, the model the loss corollary reports."""
    if T < 1:
        raise DomainError("T must be >= 1")
    indices = sample_indices(scheme, tasks.m, T, seed)
    x = np.zeros(tasks.d)
    iterates = np.empty((T + 1, tasks.d))
    iterates[0] = x
    for t in range(T):
        x = regression_update(tasks, int(indices[t]), x)
        iterates[t + 1] = x
    return Trajectory(1.0, seed, indices, iterates)


def forgetting(tasks: TaskCollection, ordering, x: np.ndarray) -> float:
    """(1/2T) sum_t |A_{tau(t)} x - b_{tau(t)}|^2 over the visited ordering."""
    ordering = np.asarray(ordering, dtype=int)
    if ordering.size == 0:
        raise DomainError("ordering must be nonempty")
    total = 0.0
    for i in ordering:
        tasks._check_index(int(i))
        A, b = tasks.blocks[int(i)]
        r = A @ x - b
        total += float(r @ r)
    return total / (2.0 * ordering.size)


def population_loss(tasks: TaskCollection, x: np.ndarray) -> float:
    """(1/2m) sum_j |A_j x - b_j|^2; identical to the Kaczmarz loss."""
    return kaczmarz_loss(tasks, x)


def population_loss_threshold(tasks: TaskCollection, T: int) -> float:
    """13 R^2 |x_star|^2 / sqrt(T): loss constant for either sampling scheme."""
    return 13.0 * tasks.R**2 * float(tasks.x_star @ tasks.x_star) / math.sqrt(T)


def forgetting_threshold(tasks: TaskCollection, T: int, scheme: str) -> float:
    """30 (with replacement) or 10 (without) times R^2 |x_star|^2 / sqrt(T)."""
    k = 10.0 if scheme == WITHOUT_REPLACEMENT else 30.0
    return k * tasks.R**2 * float(tasks.x_star @ tasks.x_star) / math.sqrt(T)


# ---------------------------------------------------------------------------
# Convex sets and POCS


@dataclass
class AffineSet:
    """{x : A x = b}; requires a consistent system."""

    A: np.ndarray
    b: np.ndarray
    _pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if self.A.shape[0] != self.b.shape[0]:
            raise DegenerateSet("A and b row counts differ")
        if not np.any(self.A):
            raise DegenerateSet("affine set with all-zero coefficient matrix")
        self._pinv = np.linalg.pinv(self.A, rcond=PINV_RCOND)
        resid = float(np.linalg.norm(self.b - self.A @ (self._pinv @ self.b)))
        if resid > CONSISTENCY_TOL:
            raise DegenerateSet(f"affine system is inconsistent (residual {resid})")

    def project(self, x: np.ndarray) -> np.ndarray:
        return x - self._pinv @ (self.A @ x - self.b)


@dataclass
class Halfspace:
    """{x : <a, x> <= b}."""

    a: np.ndarray
    b: float

    def __post_init__(self) -> None:
        self.a = np.asarray(self.a, dtype=float)
        self.b = float(self.b)
        self._norm_sq = float(self.a @ self.a)
        if self._norm_sq == 0.0:
            raise DegenerateSet("halfspace with zero normal vector")

    def project(self, x: np.ndarray) -> np.ndarray:
        slack = float(self.a @ x) - self.b
        if slack <= 0.0:
            return x
        return x - (slack / self._norm_sq) * self.a


@dataclass
class Ball:
    """{x : |x - center| <= radius}."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=float)
        self.radius = float(self.radius)
        if self.radius <= 0.0:
            raise DegenerateSet("ball with nonpositive radius")

    def project(self, x: np.ndarray) -> np.ndarray:
        offset = x - self.center
        dist = float(np.linalg.norm(offset))
        if dist <= self.radius:
            return x
        return self.center + (self.radius / dist) * offset


ConvexSet = AffineSet | Halfspace | Ball


def project(cset: ConvexSet, x: np.ndarray) -> np.ndarray:
    """Exact Euclidean projection onto the set."""
    return cset.project(np.asarray(x, dtype=float))


WITNESS_TOL = 1e-9


@dataclass
class SetCollection:
    """Closed convex sets with a stored witness of their nonempty intersection."""

    sets: list[ConvexSet]
    witness: np.ndarray

    def __post_init__(self) -> None:
        self.witness = np.asarray(self.witness, dtype=float)
        for j, s in enumerate(self.sets):
            gap = float(np.linalg.norm(self.witness - s.project(self.witness)))
            if gap > WITNESS_TOL * (1.0 + float(np.linalg.norm(self.witness))):
                raise DegenerateSet(f"witness is not in set {j} (distance {gap})")

    @property
    def m(self) -> int:
        return len(self.sets)

    @property
    def d(self) -> int:
        return self.witness.shape[0]


def run_pocs(sets: SetCollection, scheme: str, T: int, seed: int) -> Trajectory:
    """x_1 = 0, then x_{t+1} = P_{tau(t)}(x_t) on uniformly sampled sets."""
    if T < 1:
        raise DomainError("T must be >= 1")
    indices = sample_indices(scheme, sets.m, T, seed)
    x = np.zeros(sets.d)
    iterates = np.empty((T + 1, sets.d))
    iterates[0] = x
    for t in range(T):
        x = sets.sets[int(indices[t])].project(x)
        iterates[t + 1] = x
    return Trajectory(1.0, seed, indices, iterates)


def pocs_objective(sets: SetCollection, x: np.ndarray) -> float:
    """(1/2m) sum_j |x - P_j(x)|^2."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for s in sets.sets:
        r = x - s.project(x)
        total += float(r @ r)
    return total / (2.0 * sets.m)


def pocs_threshold(min_dist_sq: float, T: int) -> float:
    """7 min_{x in intersection} |x_1 - x|^2 / sqrt(T)."""
    return 7.0 * min_dist_sq / math.sqrt(T)


@dataclass
class ProjectionObjective:
    """SGD view of POCS: components f_i(x) = |x - P_i(x)|^2 / 2, beta = 1.

    The witness is a joint minimizer of every component, so sigma_star_sq = 0
    and a stepsize-1 gradient step reproduces the projection exactly.
    """

    sets: SetCollection
    beta: float = 1.0
    sigma_star_sq: float = 0.0

    @property
    def n(self) -> int:
        return self.sets.m

    @property
    def d(self) -> int:
        return self.sets.d

    @property
    def x_star(self) -> np.ndarray:
        return self.sets.witness

    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        return x - self.sets.sets[i].project(x)

    def component_value(self, i: int, x: np.ndarray) -> float:
        g = self.component_gradient(i, x)
        return 0.5 * float(g @ g)

    def population_value(self, x: np.ndarray) -> float:
        return pocs_objective(self.sets, x)


def projection_objective(sets: SetCollection) -> ProjectionObjective:
    return ProjectionObjective(sets)


def make_pinned_sets(
    d: int, m: int, seed: int, mixed_kinds: bool = True
) -> SetCollection:
    """Random sets whose intersection is exactly the witness point.

    The first d sets are hyperplanes through a drawn witness w whose normals
    are verified to span R^d (so the affine part already pins {w}); remaining
    sets are drawn among hyperplanes, halfspaces and balls containing w. With
    a pinned intersection, min over the intersection of |x - y|^2 from any x
    is exactly |x - w|^2, which is what the POCS threshold needs.
    """
    from .rng import make_rng

    if m < d:
        raise DomainError("need m >= d sets to pin the intersection")
    rng = make_rng(seed)
    w = rng.standard_normal(d)
    w *= 1.0 / np.linalg.norm(w) * (1.0 + rng.random())
    normals = rng.standard_normal((d, d))
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    if np.linalg.matrix_rank(normals) < d:
        normals += np.eye(d) * 1e-3  # rank deficiency has probability zero
    sets: list[ConvexSet] = [
        AffineSet(normals[i : i + 1], np.array([normals[i] @ w])) for i in range(d)
    ]
    kinds = ("affine", "halfspace", "ball") if mixed_kinds else ("affine",)
    for j in range(m - d):
        kind = kinds[j % len(kinds)]
        a = rng.standard_normal(d)
        a /= np.linalg.norm(a)
        if kind == "affine":
            sets.append(AffineSet(a[None, :], np.array([a @ w])))
        elif kind == "halfspace":
            sets.append(Halfspace(a, float(a @ w) + rng.random() + 0.1))
        else:
            center = w + a * rng.random()
            radius = float(np.linalg.norm(w - center)) + 0.5 + rng.random()
            sets.append(Ball(center, radius))
    return SetCollection(sets, w)


def sets_to_json(sc: SetCollection) -> str:
    """JSON schema: {"sets": [{kind, params...}], "witness": [...]}."""
    out = []
    for s in sc.sets:
        if isinstance(s, AffineSet):
            out.append(
                {
                    "kind": "affine",
                    "A": [[float(v) for v in row] for row in s.A],
                    "b": [float(v) for v in s.b],
                }
            )
        elif isinstance(s, Halfspace):
            out.append({"kind": "halfspace", "a": [float(v) for v in s.a], "b": s.b})
        elif isinstance(s, Ball):
            out.append(
                {
                    "kind": "ball",
                    "center": [float(v) for v in s.center],
                    "radius": s.radius,
                }
            )
        else:
            raise DomainError(f"unknown set type {type(s).__name__}")
    return json.dumps({"sets": out, "witness": [float(v) for v in sc.witness]})


def sets_from_json(text: str) -> SetCollection:
    doc = json.loads(text)
    sets: list[ConvexSet] = []
    for entry in doc["sets"]:
        kind = entry["kind"]
        if kind == "affine":
            sets.append(AffineSet(np.array(entry["A"], float), np.array(entry["b"], float)))
        elif kind == "halfspace":
            sets.append(Halfspace(np.array(entry["a"], float), float(entry["b"])))
        elif kind == "ball":
            sets.append(Ball(np.array(entry["center"], float), float(entry["radius"])))
        else:
            raise DomainError(f"unknown set kind {kind!r}")
    return SetCollection(sets, np.array(doc["witness"], dtype=float))
