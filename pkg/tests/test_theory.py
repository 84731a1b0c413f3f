import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from voterlab import netgen as ng, theory as th
from voterlab.netgen import NetworkParams
from voterlab.theory import Regime


def rho_by_iteration(beta, steps=10_000):
    r = 1.0
    for _ in range(steps):
        r = 1.0 - math.exp(-beta * r)
    return r


def integral_in_x(beta, gamma):
    """Direct quadrature of the x-space integrand on (0, 1]."""
    rho = rho_by_iteration(beta)
    a = 1.0 / (1.0 - gamma) - 1.0 + gamma
    lq = math.log1p(-rho)
    f = lambda x: math.exp(-2 * gamma * math.log(x) + a * x ** (-gamma) * lq)
    pts = [10.0**-k for k in range(1, 12)]
    val, _ = integrate.quad(f, 0.0, 1.0, points=pts, limit=500, epsabs=0, epsrel=1e-11)
    return val


# ---------------------------------------------------------------- rho


def test_rho_examples():
    assert th.solve_rho(1.0) == 0.0
    assert th.solve_rho(0.4) == 0.0
    assert abs(th.solve_rho(2.0) - 0.79681) < 1e-4
    assert th.solve_rho(20.0) > 0.999
    with pytest.raises(ValueError):
        th.solve_rho(0.0)


@pytest.mark.parametrize("beta", [1.1, 1.5, 2.0, 3.0, 7.0])
def test_rho_matches_iteration(beta):
    r = th.solve_rho(beta)
    assert abs(r - rho_by_iteration(beta)) < 1e-12
    assert abs(1 - r - math.exp(-beta * r)) < 1e-12


def test_rho_monotone_and_subcritical_mean_degree():
    betas = np.linspace(1.001, 10, 2000)
    rho = np.array([th.solve_rho(b) for b in betas])
    assert np.all(np.diff(rho) > -1e-6)
    assert np.all(betas * (1 - rho) < 1)
    assert np.abs(np.diff(rho)).max() < 0.01


# ---------------------------------------------------------------- integral


@pytest.mark.parametrize("gamma", [0.05, 0.2, 0.4, 0.5, 0.6, 0.75, 0.9])
@pytest.mark.parametrize("beta", [1.3, 2.0, 3.0])
def test_integral_matches_x_space_quadrature(beta, gamma):
    assert th.assumption_integral(beta, gamma) == pytest.approx(integral_in_x(beta, gamma), rel=1e-8)


def test_integral_examples():
    assert th.assumption_integral(60.0, 0.5) < 1e-10
    assert all(th.assumption_integral(3.0, g) < 1 for g in np.round(np.arange(1, 10) / 10, 1))
    assert th.assumption_integral(2.0, 0.6) < 1
    assert th.assumption_integral(2.0, 0.0) == 1.0
    with pytest.raises(ValueError):
        th.assumption_integral(1.0, 0.3)
    with pytest.raises(ValueError):
        th.assumption_integral(2.0, 1.0)


@given(st.floats(0.01, 0.99), st.floats(1.05, 5.0), st.floats(0.01, 1.0))
def test_integral_decreasing_in_beta(gamma, beta, step):
    assert th.assumption_integral(beta + step, gamma) <= th.assumption_integral(beta, gamma) * (1 + 1e-9)


def test_assumption_holds_monotone_in_beta():
    betas = np.arange(1.05, 4.0, 0.05)
    for g in th.GAMMA_GRID[::7]:
        holds = [th.assumption_holds(b, g) for b in betas]
        first = holds.index(True) if True in holds else len(holds)
        assert all(holds[first:]) and not any(holds[:first])


def test_threshold_constants():
    assert abs(th.min_beta_uniform() - 2.17) <= 0.05
    assert abs(th.min_beta_highgamma() - 1.81) <= 0.05


def test_closed_form_levels_certify_the_integral():
    # the bounds are sufficient, so the integral is below 1 just above each threshold
    for g in th.GAMMA_GRID:
        beta = th._beta_from_level(th.sufficient_level(g)) * (1 + 1e-6)
        assert th.assumption_integral(beta, g) < 1


def test_exact_threshold_below_bound_threshold():
    exact = th.min_beta_exact()
    assert 1.0 < exact <= th.min_beta_uniform()
    high = th.min_beta_exact(th.GAMMA_GRID[th.GAMMA_GRID >= 0.5])
    assert 1.0 < high <= th.min_beta_highgamma()


# ---------------------------------------------------------------- exponents


def test_predict_examples():
    assert th.predict_exponent(2.0, 0.75, 2.0) == pytest.approx(0.5)
    assert th.predict_exponent(2.0, 0.3, 1.0) == 1.0
    assert th.predict_exponent(0.3, 0.25, 0.4) == pytest.approx(0.25 * 1.6 / 1.5)
    assert th.predict_exponent(0.5, 0.25, 1.0) is None
    with pytest.raises(ValueError):
        th.predict_exponent(2.0, 0.3, 2.1)
    with pytest.raises(ValueError):
        th.predict_exponent(2.0, 1.0, 1.0)


SUBCRITICAL_TABLE = [
    # theta >= (3 - 4g)/(2 - 2g): g/(2 - 2g)
    (0.1, 2.0, 0.1 / 1.8), (0.3, 1.8, 0.3 / 1.4), (0.4, 1.7, 0.4 / 1.2),
    # 1 < theta < (3 - 4g)/(2 - 2g): g (2 - theta)
    (0.1, 1.3, 0.07), (0.2, 1.2, 0.16), (0.3, 1.1, 0.27),
    # 2g <= theta <= 1: g
    (0.1, 0.5, 0.1), (0.2, 1.0, 0.2), (0.4, 0.8, 0.4),
    # theta < 2g: g (2 - theta)/(2 - 2g)
    (0.25, 0.4, 0.25 * 1.6 / 1.5), (0.4, 0.0, 0.8 / 1.2), (0.3, -1.0, 0.9 / 1.4),
]


@pytest.mark.parametrize("gamma,theta,expected", SUBCRITICAL_TABLE)
def test_subcritical_table(gamma, theta, expected):
    beta = (1 - 2 * gamma) / 2
    assert th.regime(beta, gamma) is Regime.SUBCRITICAL
    assert th.predict_exponent(beta, gamma, theta) == pytest.approx(expected, rel=1e-12)


@given(st.floats(0.01, 0.49))
def test_subcritical_continuity(gamma):
    upper = (3 - 4 * gamma) / (2 - 2 * gamma)
    for edge in (upper, 1.0, 2 * gamma):
        left = th.subcritical_exponent(gamma, edge - 1e-9)
        right = th.subcritical_exponent(gamma, edge + 1e-9)
        assert abs(left - right) < 1e-8


@given(st.floats(0.51, 0.99))
def test_supercritical_continuity_at_inverse_gamma(gamma):
    t = 1 / gamma
    if t <= 2:
        assert th.predict_exponent(2.0, gamma, t - 1e-9) == 1.0
        assert abs(th.predict_exponent(2.0, gamma, t + 1e-9) - 1.0) < 1e-8


@given(st.floats(0.0, 0.99), st.floats(0.0, 5.0))
def test_regime_classification(gamma, beta):
    r = th.regime(beta, gamma)
    if abs(beta + 2 * gamma - 1) <= th.CRITICAL_TOL:
        assert r is Regime.CRITICAL_LINE
    elif beta + 2 * gamma < 1:
        assert r is Regime.SUBCRITICAL
    else:
        assert r in (Regime.SUPERCRITICAL_SMALL, Regime.SUPERCRITICAL_ULTRASMALL)
        assert (r is Regime.SUPERCRITICAL_ULTRASMALL) == (gamma > 0.5)


# ---------------------------------------------------------------- mean field and tail


def test_mean_field_examples():
    assert th.mean_field_order([3] * 10, 0.0) == 10
    assert th.mean_field_order([1, 1], 2.0) == 2.0
    with pytest.raises(ValueError):
        th.mean_field_order([], 1.0)
    with pytest.raises(ValueError):
        th.mean_field_order([0, 1], -0.5)
    assert th.mean_field_order([0, 1], 1.0) == 4.0


def expected_degree_square_sum(n, beta, gamma, block=500):
    """Exact ``E sum d_i**2`` for the simple rank-one graph from its edge probabilities."""
    a = np.arange(1, n + 1, dtype=float) ** -gamma
    c = beta * n ** (2 * gamma - 1)
    total = 0.0
    for lo in range(0, n, block):
        p = -np.expm1(-c * np.outer(a[lo:lo + block], a))
        rows = np.arange(p.shape[0])
        p[rows, lo + rows] = 0.0
        s1, s2 = p.sum(1), (p * p).sum(1)
        total += float((s1**2 - s2 + s1).sum())
    return total


# log(mean_field_order / sqrt(N)) at beta=2, gamma=0.75, theta=2, N=10**4 from the oracle above
FROZEN_MF_LOG_RATIO = -4.0646


def test_mean_field_on_sample():
    n = 10_000
    oracle = math.log(n**2 / expected_degree_square_sum(n, 2.0, 0.75) / n**0.5)
    assert oracle == pytest.approx(FROZEN_MF_LOG_RATIO, abs=1e-4)
    for seed in range(3):
        g = ng.generate(NetworkParams(2.0, 0.75, n, seed=seed))
        val = th.mean_field_order(g.degrees, 2.0)
        assert abs(math.log(val / n**0.5) - oracle) < 0.05


def test_tau_from_gamma():
    assert th.tau_from_gamma(0.5) == 3.0
    assert th.tau_from_gamma(1 / 3) == pytest.approx(4.0)
    assert th.tau_from_gamma(1 - 1e-12) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        th.tau_from_gamma(0.0)


# ---------------------------------------------------------------- region


def test_region_point_invariants():
    for p in th.region_grid(3.0, 0.25, gammas=th.GAMMA_GRID[::5]):
        assert (p.rho == 0) == (p.beta <= 1)
        assert p.assumption_holds == (p.beta > 1 and p.integral_value < 1)
        assert (p.regime is Regime.SUBCRITICAL) == (p.beta + 2 * p.gamma < 1
                                                   and p.regime is not Regime.CRITICAL_LINE)
        assert p.integral_value >= 0


def test_region_csv(tmp_path):
    pts = th.region_grid(1.0, 0.5, gammas=[0.25, 0.75])
    path = tmp_path / "r.csv"
    th.write_region_csv(pts, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == th.REGION_FIELDS
    assert len(rows) == 1 + len(pts)
    # beta = 0.5, gamma = 0.25 lies on the critical line
    assert rows[1][-1] == "CRITICAL_LINE"
    assert float(rows[1][3]) == pytest.approx(2.0)
    assert rows[2][3] == "inf"


def test_region_grid_defaults():
    pts = th.region_grid(0.1, 0.05)
    assert len(pts) == 2 * 99
    with pytest.raises(ValueError):
        th.region_grid(0.0)
