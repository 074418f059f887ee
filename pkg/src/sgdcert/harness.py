"""Experiment orchestration: Monte Carlo grids vs bound curves, rate fits, reports.

A report is reproducible from its echoed config: the config hash and package
version pin every number. Grids go to CSV (columns: T, mean_excess, stderr,
bound_<name>..., pass_<name>...), everything else to a JSON file next to it.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from . import bounds as bounds_mod
from .errors import DomainError, InsufficientPoints
from .optimizer import (
    WITH_REPLACEMENT,
    WITHOUT_REPLACEMENT,
    StepsizePolicy,
    average_iterate,
    excess_risk,
    mc_statistic,
)
from .problems import (
    LOW_NOISE_LS,
    REALIZABLE_LOGCOSH,
    REALIZABLE_LS,
    STRONGLY_CONVEX_LS,
    ProblemInstance,
    make_logcosh_realizable,
    make_low_noise_least_squares,
    make_realizable_least_squares,
    make_strongly_convex_ls,
)
from .rng import make_rng

VERSION = "0.1.0"

LAST_ITERATE_EXCESS = "last_iterate_excess"
AVERAGE_ITERATE_EXCESS = "average_iterate_excess"
FINAL_DISTANCE_SQ = "final_distance_sq"
_MEASURES = (LAST_ITERATE_EXCESS, AVERAGE_ITERATE_EXCESS, FINAL_DISTANCE_SQ)

MEAN_EXCLUSION_FLOOR = 1e-15


@dataclass
class ExperimentConfig:
    problem: dict
    x1: dict
    policy: dict
    scheme: str
    T_grid: list[int]
    replicates: int
    base_seed: int
    bounds: list[str]
    measure: str = LAST_ITERATE_EXCESS
    out: str | None = None

    def __post_init__(self) -> None:
        self.T_grid = [int(t) for t in self.T_grid]
        if any(t < 2 for t in self.T_grid):
            raise DomainError("every T in T_grid must be >= 2")
        if any(a >= b for a, b in zip(self.T_grid, self.T_grid[1:])):
            raise DomainError("T_grid must be strictly increasing")
        if self.replicates < 2:
            raise DomainError("replicates must be >= 2")
        if self.scheme not in (WITH_REPLACEMENT, WITHOUT_REPLACEMENT):
            raise DomainError(f"unknown scheme {self.scheme!r}")
        if self.measure not in _MEASURES:
            raise DomainError(f"unknown measure {self.measure!r}")
        for name in self.bounds:
            if name not in bounds_mod.THEOREMS:
                raise DomainError(f"unknown bound {name!r}")
            if name == bounds_mod.COR4_KACZMARZ:
                raise DomainError("cor4_kaczmarz applies to Kaczmarz runs, not SGD grids")

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "x1": self.x1,
            "policy": self.policy,
            "scheme": self.scheme,
            "T_grid": self.T_grid,
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "bounds": self.bounds,
            "measure": self.measure,
            "out": self.out,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        return cls(
            problem=doc["problem"],
            x1=doc["x1"],
            policy=doc["policy"],
            scheme=doc["scheme"],
            T_grid=list(doc["T_grid"]),
            replicates=int(doc["replicates"]),
            base_seed=int(doc["base_seed"]),
            bounds=list(doc["bounds"]),
            measure=doc.get("measure", LAST_ITERATE_EXCESS),
            out=doc.get("out"),
        )


def config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def build_problem(spec: dict) -> ProblemInstance:
    family = spec["family"]
    d, n, seed = int(spec["d"]), int(spec["n"]), int(spec["seed"])
    if family == REALIZABLE_LS:
        return make_realizable_least_squares(d, n, seed)
    if family == LOW_NOISE_LS:
        return make_low_noise_least_squares(d, n, float(spec["sigma_star"]), seed)
    if family == REALIZABLE_LOGCOSH:
        return make_logcosh_realizable(d, n, seed)
    if family == STRONGLY_CONVEX_LS:
        return make_strongly_convex_ls(d, n, float(spec["alpha_sc"]), seed)
    raise DomainError(f"unknown problem family {family!r}")


def build_x1(spec: dict, p: ProblemInstance) -> np.ndarray:
    kind = spec["kind"]
    if kind == "x_star":
        return p.x_star.copy()
    if kind == "zero":
        return np.zeros(p.d)
    if kind == "unit_offset":
        rng = make_rng(int(spec["seed"]))
        u = rng.standard_normal(p.d)
        return p.x_star + u / np.linalg.norm(u)
    if kind == "explicit":
        x = np.asarray(spec["values"], dtype=float)
        if x.shape != (p.d,):
            raise DomainError(f"explicit x1 has shape {x.shape}, expected ({p.d},)")
        return x
    raise DomainError(f"unknown x1 kind {kind!r}")


def build_policy(spec: dict) -> StepsizePolicy:
    kind = spec["kind"]
    eta = spec.get("eta")
    return StepsizePolicy(kind, float(eta) if eta is not None else None)


def _measure_fn(measure: str):
    if measure == LAST_ITERATE_EXCESS:
        return lambda p, tr: excess_risk(p, tr.x_last)
    if measure == AVERAGE_ITERATE_EXCESS:
        return lambda p, tr: excess_risk(p, average_iterate(tr))
    if measure == FINAL_DISTANCE_SQ:
        return lambda p, tr: float(np.sum((tr.x_final - p.x_star) ** 2))
    raise DomainError(f"unknown measure {measure!r}")


def _evaluate_bound(name: str, p: ProblemInstance, eta: float, d0_sq: float, T: int) -> float:
    beta, s2 = p.beta, p.sigma_star_sq
    if name == bounds_mod.THM1:
        return bounds_mod.bound_thm1(beta, eta, d0_sq, T)
    if name == bounds_mod.THM1_GREEDY:
        return bounds_mod.bound_thm1_greedy(beta, d0_sq, T)
    if name == bounds_mod.THM1_LOG:
        return bounds_mod.bound_thm1_log(beta, d0_sq, T)
    if name == bounds_mod.THM2:
        return bounds_mod.bound_thm2(beta, eta, d0_sq, s2, T)
    if name == bounds_mod.THM2_TUNED:
        return bounds_mod.bound_thm2_tuned(beta, d0_sq, s2, T)
    if name == bounds_mod.THM3_WOR:
        return bounds_mod.bound_thm3_wor(beta, eta, d0_sq, T)
    if name == bounds_mod.AVG_ITERATE_B:
        return bounds_mod.bound_avg_iterate(beta, eta, d0_sq, s2, T)
    if name == bounds_mod.STRONGLY_CONVEX_C:
        return bounds_mod.bound_strongly_convex(
            beta, p.strong_convexity, eta, d0_sq, s2, T
        )
    if name == bounds_mod.THMD_ALT:
        return bounds_mod.bound_thmD_alt(beta, eta, d0_sq, s2, T)
    raise DomainError(f"unknown bound {name!r}")


def bound_passes(mean: float, stderr: float, bound: float) -> bool:
    """Two-standard-error slack; the boundary is inclusive."""
    return mean <= bound + 2.0 * stderr


@dataclass(frozen=True)
class RateFit:
    """OLS of log(mean) on log(T); slope is the empirical rate exponent."""

    slope: float
    intercept: float
    r_squared: float
    fit_range: tuple[int, int]
    n_points: int
    excluded: int


def fit_rate(points) -> RateFit:
    """Fit mean ~ exp(intercept) * T^slope; points with mean <= 1e-15 are
    excluded (and counted). Needs at least 3 usable points."""
    usable = [(int(T), float(m)) for T, m in points if m > MEAN_EXCLUSION_FLOOR]
    excluded = len(list(points)) - len(usable)
    if len(usable) < 3:
        raise InsufficientPoints(
            f"rate fit needs >= 3 nonzero points, have {len(usable)}"
        )
    logT = np.log([T for T, _ in usable])
    logm = np.log([m for _, m in usable])
    slope, intercept = np.polyfit(logT, logm, 1)
    pred = slope * logT + intercept
    ss_res = float(np.sum((logm - pred) ** 2))
    ss_tot = float(np.sum((logm - np.mean(logm)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(
        float(slope),
        float(intercept),
        float(r2),
        (usable[0][0], usable[-1][0]),
        len(usable),
        excluded,
    )


@dataclass
class ReportRow:
    T: int
    mean: float
    stderr: float
    bounds: dict[str, float]
    passes: dict[str, bool]


@dataclass
class ExperimentReport:
    version: str
    config: dict
    config_hash: str
    measure: str
    bound_names: list[str]
    bound_units: dict[str, str]
    rows: list[ReportRow]
    fit: RateFit | None
    excluded_points: int

    @property
    def all_pass(self) -> bool:
        return all(flag for row in self.rows for flag in row.passes.values())


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Build the problem, estimate the configured statistic over the T grid,
    evaluate the selected bounds at each T, fit the empirical rate."""
    p = build_problem(cfg.problem)
    x1 = build_x1(cfg.x1, p)
    policy = build_policy(cfg.policy)
    d0_sq = float(np.sum((x1 - p.x_star) ** 2))
    stat = _measure_fn(cfg.measure)
    grid = mc_statistic(
        p, x1, policy, cfg.scheme, cfg.T_grid, cfg.replicates, cfg.base_seed, stat
    )
    rows = []
    for T in cfg.T_grid:
        est = grid[T]
        eta = policy.resolve(p, x1, T)
        bvals = {name: _evaluate_bound(name, p, eta, d0_sq, T) for name in cfg.bounds}
        flags = {name: bound_passes(est.mean, est.stderr, bv) for name, bv in bvals.items()}
        rows.append(ReportRow(T, est.mean, est.stderr, bvals, flags))
    try:
        fit = fit_rate([(r.T, r.mean) for r in rows])
        excluded = fit.excluded
    except InsufficientPoints:
        fit = None
        excluded = sum(1 for r in rows if r.mean <= MEAN_EXCLUSION_FLOOR)
    return ExperimentReport(
        VERSION,
        cfg.to_dict(),
        config_hash(cfg),
        cfg.measure,
        list(cfg.bounds),
        {name: bounds_mod.BOUND_UNITS[name] for name in cfg.bounds},
        rows,
        fit,
        excluded,
    )


def _split_path(path) -> tuple[str, str]:
    base, ext = os.path.splitext(str(path))
    if ext not in (".csv", ".json"):
        base = str(path)
    return base + ".csv", base + ".json"


def write_report(report: ExperimentReport, path) -> None:
    """CSV data grid plus JSON sidecar; floats serialized with repr so the
    round trip is exact. Column order is fixed by the bound selection."""
    csv_path, json_path = _split_path(path)
    names = report.bound_names
    lines = [
        ",".join(
            ["T", "mean_excess", "stderr"]
            + [f"bound_{n}" for n in names]
            + [f"pass_{n}" for n in names]
        )
    ]
    for row in report.rows:
        cells = [str(row.T), repr(row.mean), repr(row.stderr)]
        cells += [repr(row.bounds[n]) for n in names]
        cells += [str(int(row.passes[n])) for n in names]
        lines.append(",".join(cells))
    with open(csv_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    doc = {
        "version": report.version,
        "config": report.config,
        "config_hash": report.config_hash,
        "measure": report.measure,
        "bound_names": names,
        "bound_units": report.bound_units,
        "rate_fit": None
        if report.fit is None
        else {
            "slope": report.fit.slope,
            "intercept": report.fit.intercept,
            "r_squared": report.fit.r_squared,
            "fit_range": list(report.fit.fit_range),
            "n_points": report.fit.n_points,
            "excluded": report.fit.excluded,
        },
        "excluded_points": report.excluded_points,
        "all_pass": report.all_pass,
    }
    with open(json_path, "w") as fh:
        json.dump(doc, fh, indent=2)


def read_report(path) -> ExperimentReport:
    csv_path, json_path = _split_path(path)
    with open(json_path) as fh:
        doc = json.load(fh)
    names = list(doc["bound_names"])
    with open(csv_path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split(",")
    expected = (
        ["T", "mean_excess", "stderr"]
        + [f"bound_{n}" for n in names]
        + [f"pass_{n}" for n in names]
    )
    if header != expected:
        raise DomainError(f"CSV header {header} does not match bound selection")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        T = int(cells[0])
        mean, stderr = float(cells[1]), float(cells[2])
        bvals = {n: float(cells[3 + j]) for j, n in enumerate(names)}
        flags = {n: bool(int(cells[3 + len(names) + j])) for j, n in enumerate(names)}
        rows.append(ReportRow(T, mean, stderr, bvals, flags))
    fit_doc = doc["rate_fit"]
    fit = (
        None
        if fit_doc is None
        else RateFit(
            fit_doc["slope"],
            fit_doc["intercept"],
            fit_doc["r_squared"],
            tuple(fit_doc["fit_range"]),
            fit_doc["n_points"],
            fit_doc["excluded"],
        )
    )
    return ExperimentReport(
        doc["version"],
        doc["config"],
        doc["config_hash"],
        doc["measure"],
        names,
        doc["bound_units"],
        rows,
        fit,
        doc["excluded_points"],
    )
