"""Closed-form convergence rates and tuned stepsizes, as pure scalar functions.

Every bound is evaluable without running any experiment; parameters are passed
explicitly (beta, eta, D0^2 = |x1 - x_star|^2, sigma_star^2, alpha_sc, R^2, T).
Logarithm bases follow the source formulas exactly: the last-iterate family
uses log2, the alternative small-stepsize analysis uses ln; there is no silent
base normalization.

`bound_strongly_convex` bounds the squared distance E|x_{T+1} - x_star|^2,
not an excess risk; it is labeled with `units` accordingly in `BOUND_UNITS`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

THM1 = "thm1"
THM1_GREEDY = "thm1_greedy"
THM1_LOG = "thm1_log"
THM2 = "thm2"
THM2_TUNED = "thm2_tuned"
THM3_WOR = "thm3_wor"
COR4_KACZMARZ = "cor4_kaczmarz"
AVG_ITERATE_B = "avg_iterate_B"
STRONGLY_CONVEX_C = "strongly_convex_C"
THMD_ALT = "thmD_alt"

THEOREMS = (
    THM1,
    THM1_GREEDY,
    THM1_LOG,
    THM2,
    THM2_TUNED,
    THM3_WOR,
    COR4_KACZMARZ,
    AVG_ITERATE_B,
    STRONGLY_CONVEX_C,
    THMD_ALT,
)

# What the bound constrains; used by report writers to avoid unit confusion.
BOUND_UNITS = {name: "excess_risk" for name in THEOREMS}
BOUND_UNITS[STRONGLY_CONVEX_C] = "distance_sq"


def _check_eta(beta: float, eta: float, limit_factor: float = 2.0) -> None:
    if beta <= 0.0:
        raise DomainError("beta must be positive")
    if not 0.0 < eta < limit_factor / beta:
        raise DomainError(f"eta={eta} outside (0, {limit_factor}/beta)")


def _check_T(T: int, minimum: int) -> None:
    if T < minimum:
        raise DomainError(f"T={T} below required minimum {minimum}")


def bound_thm1(beta: float, eta: float, d0_sq: float, T: int) -> float:
    """Last iterate, interpolation regime: 3 D0^2 / (eta (2 - beta eta) T^{1 - beta eta / 2})."""
    _check_eta(beta, eta)
    _check_T(T, 2)
    return 3.0 * d0_sq / (eta * (2.0 - beta * eta) * T ** (1.0 - beta * eta / 2.0))


def bound_thm1_greedy(beta: float, d0_sq: float, T: int) -> float:
    """eta = 1/beta specialization: 3 beta D0^2 / sqrt(T)."""
    _check_T(T, 2)
    return 3.0 * beta * d0_sq / math.sqrt(T)


def bound_thm1_log(beta: float, d0_sq: float, T: int) -> float:
    """eta = 1/(beta log2 T) specialization: 6 beta D0^2 log2(T) / T."""
    _check_T(T, 2)
    return 6.0 * beta * d0_sq * math.log2(T) / T


def bound_thm2(
    beta: float, eta: float, d0_sq: float, sigma_star_sq: float, T: int
) -> float:
    """Last iterate, low-noise regime.

    12 D0^2 / (eta (2-beta eta) T^{1-beta eta/2})
      + 24 eta sigma_star^2 T^{beta eta/2} log2(T+2) / (2-beta eta)^2.
    With sigma_star = 0 this equals exactly 4x `bound_thm1`.
    """
    _check_eta(beta, eta)
    _check_T(T, 2)
    first = 12.0 * d0_sq / (eta * (2.0 - beta * eta) * T ** (1.0 - beta * eta / 2.0))
    second = (
        24.0
        * eta
        * sigma_star_sq
        * T ** (beta * eta / 2.0)
        * math.log2(T + 2)
        / (2.0 - beta * eta) ** 2
    )
    return first + second


def bound_thm2_tuned(beta: float, d0_sq: float, sigma_star_sq: float, T: int) -> float:
    """Tuned-stepsize specialization: 24 beta D0^2 log2(T)/T + 120 sigma D0 sqrt(log2(T+2))/sqrt(T)."""
    _check_T(T, 2)
    d0 = math.sqrt(d0_sq)
    sigma = math.sqrt(sigma_star_sq)
    return 24.0 * beta * d0_sq * math.log2(T) / T + 120.0 * sigma * d0 * math.sqrt(
        math.log2(T + 2)
    ) / math.sqrt(T)


def tuned_eta_thm2(beta: float, d0: float, sigma_star: float, T: int) -> float:
    """min{ 1/(beta log2 T), D0 / sqrt(sigma^2 T log2(T+2)) }; first branch when sigma = 0."""
    _check_T(T, 2)
    first = 1.0 / (beta * math.log2(T))
    if sigma_star <= 0.0:
        return first
    return min(first, d0 / math.sqrt(sigma_star**2 * T * math.log2(T + 2)))


def bound_thm3_wor(beta: float, eta: float, d0_sq: float, T: int) -> float:
    """Last iterate, without replacement (realizable): 9 D0^2/(eta(2-be)T^{1-be/2}) + 4 b^2 e D0^2 / T."""
    _check_eta(beta, eta)
    _check_T(T, 2)
    first = 9.0 * d0_sq / (eta * (2.0 - beta * eta) * T ** (1.0 - beta * eta / 2.0))
    return first + 4.0 * beta**2 * eta * d0_sq / T


def bound_thm3_wor_greedy(beta: float, d0_sq: float, T: int) -> float:
    """eta = 1/beta specialization: 13 beta D0^2 / sqrt(T)."""
    _check_T(T, 2)
    return 13.0 * beta * d0_sq / math.sqrt(T)


def bound_thm3_wor_log(beta: float, d0_sq: float, T: int) -> float:
    """eta = 1/(beta log2 T) specialization: 22 beta D0^2 log2(T) / T."""
    _check_T(T, 2)
    return 22.0 * beta * d0_sq * math.log2(T) / T


def bound_avg_iterate(
    beta: float, eta: float, d0_sq: float, sigma_star_sq: float, T: int
) -> float:
    """Average iterate: 2 D0^2 / ((2-beta eta) eta T) + 8 eta sigma_star^2 / (2-beta eta)^2."""
    _check_eta(beta, eta)
    _check_T(T, 1)
    return 2.0 * d0_sq / ((2.0 - beta * eta) * eta * T) + 8.0 * eta * sigma_star_sq / (
        2.0 - beta * eta
    ) ** 2


def tuned_eta_avg(beta: float, d0: float, sigma_star: float, T: int) -> float:
    """Average-iterate tuning: min{ 1/beta, D0 / sqrt(4 sigma^2 T) }."""
    _check_T(T, 1)
    first = 1.0 / beta
    if sigma_star <= 0.0:
        return first
    return min(first, d0 / math.sqrt(4.0 * sigma_star**2 * T))


def bound_strongly_convex(
    beta: float,
    alpha_sc: float,
    eta: float,
    d0_sq: float,
    sigma_star_sq: float,
    T: int,
) -> float:
    """Squared-distance bound E|x_{T+1}-x_star|^2 under alpha_sc-strong convexity.

    exp(-eta (2 - eta beta) alpha_sc T / 2) D0^2
      + 8 eta sigma_star^2 / (alpha_sc (2 - eta beta)^2).
    """
    _check_eta(beta, eta)
    if alpha_sc <= 0.0:
        raise DomainError("alpha_sc must be positive")
    if T < 0:
        raise DomainError("T must be nonnegative")
    rate = math.exp(-0.5 * eta * (2.0 - eta * beta) * alpha_sc * T)
    noise = 8.0 * eta * sigma_star_sq / (alpha_sc * (2.0 - eta * beta) ** 2)
    return rate * d0_sq + noise


def bound_thmD_alt(
    beta: float, eta: float, d0_sq: float, sigma_star_sq: float, T: int
) -> float:
    """Alternative small-stepsize analysis (strictly eta < 1/beta, T >= 3, natural log).

    16 D0^2 / (eta T^{1-(2-eta beta) beta eta})
      + 64 eta sigma_star^2 T^{(2-eta beta) beta eta} ln(T) / (1 - eta beta).
    """
    _check_eta(beta, eta, limit_factor=1.0)
    _check_T(T, 3)
    expo = (2.0 - eta * beta) * beta * eta
    first = 16.0 * d0_sq / (eta * T ** (1.0 - expo))
    second = 64.0 * eta * sigma_star_sq * T**expo * math.log(T) / (1.0 - eta * beta)
    return first + second


def tuned_eta_thmD(beta: float, d0: float, sigma_star: float, T: int) -> float:
    """min{ 1/(beta ln T), D0 / sqrt(sigma^2 T ln T) }; first branch when sigma = 0."""
    _check_T(T, 3)
    first = 1.0 / (beta * math.log(T))
    if sigma_star <= 0.0:
        return first
    return min(first, d0 / math.sqrt(sigma_star**2 * T * math.log(T)))


def bound_cor4_kaczmarz(
    r_sq: float,
    x_star_norm_sq: float,
    c: float,
    T: int,
    without_replacement: bool = False,
) -> float:
    """Block-Kaczmarz loss bound: K R^2 |x_star|^2 / (c (2-c) T^{1-c/2}).

    The reduced objective is 1-smooth, so the relaxation c plays the role of
    the stepsize. K = 3 under with-replacement sampling, 13 without.
    """
    if not 0.0 < c <= 1.0:
        raise DomainError("relaxation c must lie in (0, 1]")
    _check_T(T, 2)
    constant = 13.0 if without_replacement else 3.0
    return constant * r_sq * x_star_norm_sq / (c * (2.0 - c) * T ** (1.0 - c / 2.0))


@dataclass(frozen=True)
class BoundSpec:
    """A named bound plus the parameters needed to evaluate it at any T.

    For `cor4_kaczmarz`, `eta` carries the relaxation c and `d0_sq` carries
    |x_star|^2 (runs start at x_1 = 0).
    """

    theorem: str
    beta: float = 1.0
    eta: float = 1.0
    d0_sq: float = 1.0
    sigma_star_sq: float = 0.0
    alpha_sc: float = 0.0
    r_sq: float = 1.0
    without_replacement: bool = False

    def __post_init__(self) -> None:
        if self.theorem not in THEOREMS:
            raise DomainError(f"unknown theorem {self.theorem!r}")

    def evaluate(self, T: int) -> float:
        th = self.theorem
        if th == THM1:
            return bound_thm1(self.beta, self.eta, self.d0_sq, T)
        if th == THM1_GREEDY:
            return bound_thm1_greedy(self.beta, self.d0_sq, T)
        if th == THM1_LOG:
            return bound_thm1_log(self.beta, self.d0_sq, T)
        if th == THM2:
            return bound_thm2(self.beta, self.eta, self.d0_sq, self.sigma_star_sq, T)
        if th == THM2_TUNED:
            return bound_thm2_tuned(self.beta, self.d0_sq, self.sigma_star_sq, T)
        if th == THM3_WOR:
            return bound_thm3_wor(self.beta, self.eta, self.d0_sq, T)
        if th == COR4_KACZMARZ:
            return bound_cor4_kaczmarz(
                self.r_sq, self.d0_sq, self.eta, T, self.without_replacement
            )
        if th == AVG_ITERATE_B:
            return bound_avg_iterate(
                self.beta, self.eta, self.d0_sq, self.sigma_star_sq, T
            )
        if th == STRONGLY_CONVEX_C:
            return bound_strongly_convex(
                self.beta, self.alpha_sc, self.eta, self.d0_sq, self.sigma_star_sq, T
            )
        if th == THMD_ALT:
            return bound_thmD_alt(self.beta, self.eta, self.d0_sq, self.sigma_star_sq, T)
        raise DomainError(f"unknown theorem {th!r}")
