"""Randomized block Kaczmarz for consistent linear systems.

A `BlockSystem` is a blocked system (A_i, b_i), i = 1..m, with per-block
spectral norms at most R, a stored min-norm solution x_star and eagerly cached
Moore-Penrose pseudoinverses. The relaxed update

    x_{t+1} = x_t - c * A_i^+ (A_i x_t - b_i),    0 < c <= 1,

coincides with an SGD step of size eta = c on the reduced 1-smooth least
squares component f_i(x) = |A_i^+(A_i x - b_i)|^2 / 2; `reduced_problem`
exposes exactly that objective so the equivalence can be driven through
`optimizer.run_sgd` with shared seeds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FormatError, GenerationFailed, IndexOutOfRange
from .optimizer import WITH_REPLACEMENT, Trajectory, sample_indices
from .rng import make_rng

PINV_RCOND = 1e-12  # singular values below 1e-12 * sigma_max are treated as zero
REALIZABILITY_TOL = 1e-10


@dataclass
class BlockSystem:
    """Blocked linear system with cached pseudoinverses; immutable after build."""

    blocks: list[tuple[np.ndarray, np.ndarray]]
    x_star: np.ndarray
    R: float
    pinv_cache: list[np.ndarray] = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.blocks)

    @property
    def d(self) -> int:
        return self.blocks[0][0].shape[1]

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.m:
            raise IndexOutOfRange(f"block index {i} outside [0, {self.m})")


def make_block_system(
    d: int, m: int, block_sizes, seed: int, realizable: bool = True
) -> BlockSystem:
    """Random consistent blocked system with per-block spectral norm <= 1.

    Blocks are scaled by their largest singular value; x_star is a random
    draw projected onto the row space of the stacked system, which makes the
    stored point the min-norm solution. Only realizable systems are
    supported (b_i = A_i x_star).
    """
    if not realizable:
        raise DomainError("inconsistent systems are unsupported; realizable must be True")
    block_sizes = [int(s) for s in block_sizes]
    if len(block_sizes) != m or any(s < 1 for s in block_sizes):
        raise DomainError("block_sizes must list m positive sizes")
    rng = make_rng(seed)
    blocks_A = []
    for size in block_sizes:
        for _ in range(100):
            G = rng.standard_normal((size, d))
            smax = float(np.linalg.norm(G, 2))
            if smax > 0.0:
                blocks_A.append(G / smax)
                break
        else:
            raise GenerationFailed("degenerate block draw")
    stacked = np.vstack(blocks_A)
    z = rng.standard_normal(d)
    x_star = np.linalg.pinv(stacked, rcond=PINV_RCOND) @ (stacked @ z)
    blocks = [(A, A @ x_star) for A in blocks_A]
    pinvs = [np.linalg.pinv(A, rcond=PINV_RCOND) for A in blocks_A]
    R = max(float(np.linalg.norm(A, 2)) for A in blocks_A)
    return BlockSystem(blocks, x_star, R, pinvs)


def kaczmarz_step(sys: BlockSystem, i: int, x: np.ndarray, c: float) -> np.ndarray:
    """x - c * A_i^+ (A_i x - b_i); c = 1 projects onto the block's solution set."""
    sys._check_index(i)
    if not 0.0 < c <= 1.0:
        raise DomainError("relaxation c must lie in (0, 1]")
    A, b = sys.blocks[i]
    return x - c * (sys.pinv_cache[i] @ (A @ x - b))


def run_kaczmarz(
    sys: BlockSystem,
    c: float,
    scheme: str,
    T: int,
    seed: int,
    weights=None,
) -> Trajectory:
    """T relaxed projection steps from x_1 = 0 onto sampled blocks.

    Sampling is uniform by default. `weights` selects blocks with probability
    proportional to the given nonnegative vector (norm-weighted sampling);
    only with-replacement sampling supports it, and no bound in this package
    covers the weighted variant.
    """
    if T < 1:
        raise DomainError("T must be >= 1")
    if not 0.0 < c <= 1.0:
        raise DomainError("relaxation c must lie in (0, 1]")
    if weights is None:
        indices = sample_indices(scheme, sys.m, T, seed)
    else:
        if scheme != WITH_REPLACEMENT:
            raise DomainError("weighted sampling requires with-replacement")
        w = np.asarray(weights, dtype=float)
        if w.shape != (sys.m,) or np.any(w < 0.0) or w.sum() <= 0.0:
            raise DomainError("weights must be m nonnegative values with positive sum")
        indices = make_rng(seed).choice(sys.m, size=T, p=w / w.sum())
    x = np.zeros(sys.d)
    iterates = np.empty((T + 1, sys.d))
    iterates[0] = x
    for t in range(T):
        i = int(indices[t])
        A, b = sys.blocks[i]
        x = x - c * (sys.pinv_cache[i] @ (A @ x - b))
        iterates[t + 1] = x
    return Trajectory(float(c), seed, indices, iterates)


def kaczmarz_loss(sys: BlockSystem, x: np.ndarray) -> float:
    """F(x) = (1/2m) sum_j |A_j x - b_j|^2."""
    total = 0.0
    for A, b in sys.blocks:
        r = A @ x - b
        total += float(r @ r)
    return total / (2.0 * sys.m)


@dataclass
class ReducedKaczmarzObjective:
    """The 1-smooth least-squares family the relaxed Kaczmarz update descends.

    Components f_i(x) = |A_i^+(A_i x - b_i)|^2 / 2 with gradient
    A_i^+ A_i x - A_i^+ b_i; realizability gives sigma_star_sq = 0. Satisfies
    the duck-typed objective surface expected by `optimizer.run_sgd`.
    """

    system: BlockSystem
    beta: float = 1.0
    sigma_star_sq: float = 0.0

    @property
    def n(self) -> int:
        return self.system.m

    @property
    def d(self) -> int:
        return self.system.d

    @property
    def x_star(self) -> np.ndarray:
        return self.system.x_star

    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        self.system._check_index(i)
        A, b = self.system.blocks[i]
        return self.system.pinv_cache[i] @ (A @ x - b)

    def component_value(self, i: int, x: np.ndarray) -> float:
        g = self.component_gradient(i, x)
        return 0.5 * float(g @ g)

    def population_value(self, x: np.ndarray) -> float:
        return float(
            np.mean([self.component_value(i, x) for i in range(self.n)])
        )


def reduced_problem(sys: BlockSystem) -> ReducedKaczmarzObjective:
    """Reduced SGD objective; requires the (guaranteed) realizable system."""
    for A, b in sys.blocks:
        if float(np.linalg.norm(A @ sys.x_star - b)) > REALIZABILITY_TOL * (
            1.0 + float(np.linalg.norm(b))
        ):
            raise DomainError("system is not realizable at the stored x_star")
    return ReducedKaczmarzObjective(sys)


def save_block_system(sys: BlockSystem, path) -> None:
    """Text format: header `d m`, then per block `n_i` followed by n_i rows of
    d+1 numbers (the A row, then the b entry)."""
    lines = [f"{sys.d} {sys.m}"]
    for A, b in sys.blocks:
        lines.append(str(A.shape[0]))
        for row, rhs in zip(A, b):
            lines.append(" ".join(repr(float(v)) for v in row) + " " + repr(float(rhs)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_block_system(path) -> BlockSystem:
    """Parse the text format; rejects ragged rows. The min-norm solution,
    R and the pseudoinverse cache are recomputed from the data."""
    with open(path) as fh:
        tokens_by_line = [ln.split() for ln in fh if ln.strip()]
    if not tokens_by_line:
        raise FormatError("empty block-system file")
    header = tokens_by_line[0]
    if len(header) != 2:
        raise FormatError("header must be exactly 'd m'")
    d, m = int(header[0]), int(header[1])
    if d < 1 or m < 1:
        raise FormatError("d and m must be positive")
    pos = 1
    blocks = []
    for _ in range(m):
        if pos >= len(tokens_by_line) or len(tokens_by_line[pos]) != 1:
            raise FormatError("expected a block-size line")
        size = int(tokens_by_line[pos][0])
        if size < 1:
            raise FormatError("block sizes must be positive")
        pos += 1
        rows = np.empty((size, d))
        rhs = np.empty(size)
        for r in range(size):
            if pos >= len(tokens_by_line):
                raise FormatError("unexpected end of file inside a block")
            line = tokens_by_line[pos]
            if len(line) != d + 1:
                raise FormatError(
                    f"ragged row: expected {d + 1} numbers, found {len(line)}"
                )
            vals = [float(v) for v in line]
            rows[r] = vals[:d]
            rhs[r] = vals[d]
            pos += 1
        blocks.append((rows, rhs))
    if pos != len(tokens_by_line):
        raise FormatError("trailing data after the declared blocks")
    stacked_A = np.vstack([A for A, _ in blocks])
    stacked_b = np.concatenate([b for _, b in blocks])
    x_star = np.linalg.pinv(stacked_A, rcond=PINV_RCOND) @ stacked_b
    resid = float(np.linalg.norm(stacked_A @ x_star - stacked_b))
    if resid > REALIZABILITY_TOL * (1.0 + float(np.linalg.norm(stacked_b))):
        raise FormatError(f"system is inconsistent (min-norm residual {resid})")
    pinvs = [np.linalg.pinv(A, rcond=PINV_RCOND) for A, _ in blocks]
    R = max(float(np.linalg.norm(A, 2)) for A, _ in blocks)
    return BlockSystem(blocks, x_star, R, pinvs)
