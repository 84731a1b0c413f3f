"""Analytic predictors: the giant fraction ``rho``, the large-beta integral
condition and its thresholds, consensus-time exponents, the mean-field order
and the degree-tail exponent.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .dynamics import check_theta

GAMMA_GRID = np.round(np.arange(1, 100) / 100.0, 2)
CRITICAL_TOL = 1e-12


class Regime(str, enum.Enum):
    SUBCRITICAL = "SUBCRITICAL"
    SUPERCRITICAL_SMALL = "SUPERCRITICAL_SMALL"
    SUPERCRITICAL_ULTRASMALL = "SUPERCRITICAL_ULTRASMALL"
    CRITICAL_LINE = "CRITICAL_LINE"


def regime(beta: float, gamma: float) -> Regime:
    s = beta + 2.0 * gamma
    if math.isclose(s, 1.0, rel_tol=0.0, abs_tol=CRITICAL_TOL):
        return Regime.CRITICAL_LINE
    if s < 1.0:
        return Regime.SUBCRITICAL
    return Regime.SUPERCRITICAL_SMALL if gamma <= 0.5 else Regime.SUPERCRITICAL_ULTRASMALL


def solve_rho(beta: float, tol: float = 1e-13) -> float:
    """Positive root of ``1 - rho = exp(-beta rho)``; 0 when ``beta <= 1``.

    ``f(r) = 1 - exp(-beta r) - r`` is concave with ``f(0) = 0``, positive up
    to the root and negative after it, so bisection on ``(0, 1]`` keeps a
    valid bracket.
    """
    beta = float(beta)
    if not beta > 0:
        raise ValueError("beta must be positive")
    if beta <= 1.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if -math.expm1(-beta * mid) - mid > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _exponent_factor(gamma: float) -> float:
    """``1/(1-gamma) - 1 + gamma``."""
    return 1.0 / (1.0 - gamma) - 1.0 + gamma


def _integral_given_rho(rho: float, gamma: float) -> float:
    """``int_0^1 x^(-2g) (1-rho)^(a x^(-g)) dx`` for a given ``rho``.

    After ``u = x**(-gamma)`` this is ``(1/g) int_1^inf u^(1-1/g) exp(-c u) du``
    with ``c = a log(1/(1-rho))``.
    """
    if gamma == 0.0:
        return 1.0
    c = _exponent_factor(gamma) * -math.log1p(-rho)
    p = 1.0 - 1.0 / gamma
    if c == 0.0:
        return 1.0 / (1.0 - 2.0 * gamma) if gamma < 0.5 else math.inf
    # shift to s = u - 1 and pull exp(-c) out of the integral
    f = lambda s: (1.0 + s) ** p * math.exp(-c * s)
    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-10, limit=200)
    return math.exp(-c) * val / gamma


def assumption_integral(beta: float, gamma: float) -> float:
    """The large-beta integral ``I(beta)`` at weight exponent ``gamma``."""
    if not beta > 1.0:
        raise ValueError("the integral needs beta > 1 (rho = 0 otherwise)")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    return _integral_given_rho(solve_rho(beta), float(gamma))


def assumption_holds(beta: float, gamma: float) -> bool:
    return beta > 1.0 and assumption_integral(beta, gamma) < 1.0


# ---------------------------------------------------------------- beta thresholds


def _level_b1(gamma: float) -> float:
    # bound from dropping the power of u
    return 1.0 / (gamma * _exponent_factor(gamma))


def _level_b2(gamma: float) -> float:
    # bound from freezing the exponential at u = 1, gamma < 1/2 only
    return -math.log1p(-2.0 * gamma) / _exponent_factor(gamma)


def sufficient_level(gamma: float) -> float:
    """Value that ``log(1/(1-rho))`` must exceed for the closed-form bounds on
    the integral to certify ``I < 1`` at this ``gamma``."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    b1 = _level_b1(gamma)
    return min(b1, _level_b2(gamma)) if gamma < 0.5 else b1


def _beta_from_level(level: float) -> float:
    # rho = 1 - exp(-L) and beta rho = L
    return level / -math.expm1(-level)


def min_beta_uniform() -> float:
    """Smallest beta for which the closed-form bounds give ``I < 1`` at every
    ``gamma`` in ``(0, 1)``.

    ``b1`` falls and ``b2`` rises in ``gamma``, so the supremum of their
    minimum sits at the crossing point.
    """
    g = optimize.brentq(lambda x: _level_b1(x) - _level_b2(x), 0.05, 0.49, xtol=1e-14)
    return _beta_from_level(_level_b1(g))


def min_beta_highgamma() -> float:
    """As :func:`min_beta_uniform` restricted to ``gamma >= 1/2``, where only
    ``b1`` applies and is largest at ``gamma = 1/2``."""
    return _beta_from_level(_level_b1(0.5))


def min_beta_exact(gammas=None, tol: float = 1e-3, hi: float = 10.0) -> float:
    """Smallest beta (bisection) with ``assumption_integral < 1`` at every
    ``gamma`` of the grid, using the integral itself instead of its bounds."""
    gammas = GAMMA_GRID if gammas is None else np.asarray(gammas, dtype=np.float64)

    def ok(b):
        return all(assumption_integral(b, float(g)) < 1.0 for g in gammas)

    lo = 1.0
    if not ok(hi):
        raise ValueError(f"condition fails at beta={hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------- exponents


def subcritical_exponent(gamma: float, theta: float) -> float:
    """Polynomial order of the consensus time when ``beta + 2 gamma < 1``."""
    upper = (3.0 - 4.0 * gamma) / (2.0 - 2.0 * gamma)
    if theta >= upper:
        return gamma / (2.0 - 2.0 * gamma)
    if theta > 1.0:
        return gamma * (2.0 - theta)
    if theta >= 2.0 * gamma:
        return gamma
    return gamma * (2.0 - theta) / (2.0 - 2.0 * gamma)


def predict_exponent(beta: float, gamma: float, theta: float) -> float | None:
    """Predicted exponent ``c`` in ``E[tau_cons] ~ N^c`` up to polylog factors.

    Returns ``None`` on the critical line ``beta + 2 gamma = 1``. The regime
    depends on ``(beta, gamma)`` only; whether the large-beta integral
    condition holds is reported separately by :func:`assumption_holds`.
    """
    theta = check_theta(theta)
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    r = regime(beta, gamma)
    if r is Regime.CRITICAL_LINE:
        return None
    if r is Regime.SUBCRITICAL:
        return subcritical_exponent(gamma, theta)
    if gamma <= 0.5 or theta * gamma <= 1.0:
        return 1.0
    return 2.0 - gamma * theta


def mean_field_order(degrees, theta: float) -> float:
    """``N**2 / sum d(v)**theta``."""
    d = np.asarray(degrees, dtype=np.float64)
    if d.size == 0:
        raise ValueError("degree list is empty")
    if theta < 0 and (d == 0).any():
        raise ValueError("zero degree with negative theta")
    return d.size**2 / math.fsum(np.power(d, theta).tolist())


def tau_from_gamma(gamma: float) -> float:
    """Degree-tail exponent ``1 + 1/gamma``."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    return 1.0 + 1.0 / gamma


# ---------------------------------------------------------------- region scans


@dataclass(frozen=True)
class RegionPoint:
    beta: float
    gamma: float
    rho: float
    integral_value: float
    assumption_holds: bool
    regime: Regime


def region_point(beta: float, gamma: float) -> RegionPoint:
    """One parameter point. For ``beta <= 1`` the integral is evaluated
    literally with ``rho = 0``, which gives ``1/(1-2 gamma)`` or infinity."""
    rho = solve_rho(beta)
    val = _integral_given_rho(rho, gamma)
    return RegionPoint(float(beta), float(gamma), rho, val, bool(beta > 1.0 and val < 1.0),
                       regime(beta, gamma))


def region_grid(beta_max: float = 4.0, beta_step: float = 0.05, gammas=None) -> list[RegionPoint]:
    if not beta_max > 0 or not beta_step > 0:
        raise ValueError("beta_max and beta_step must be positive")
    gammas = GAMMA_GRID if gammas is None else gammas
    count = int(math.floor(beta_max / beta_step + 1e-9))
    betas = np.round(beta_step * np.arange(1, count + 1), 10)
    return [region_point(float(b), float(g)) for b in betas for g in gammas]


REGION_FIELDS = ("beta", "gamma", "rho", "integral", "assumption_holds", "regime")


def write_region_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REGION_FIELDS)
        for p in points:
            w.writerow([repr(p.beta), repr(p.gamma), repr(p.rho), repr(p.integral_value),
                        int(p.assumption_holds), p.regime.value])
