"""End-to-end acceptance criteria. Each test prints one PASS/FAIL line."""
import math

import pytest

from voterlab import harness as hs, netgen as ng, theory as th
from voterlab.netgen import NetworkParams, Variant

NS_CONSENSUS = [2**k for k in range(7, 13)]
NS_MIXING = [2**k for k in range(8, 14)]


@pytest.fixture
def report(capsys):
    def emit(number, passed, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if passed else 'FAIL'}: {detail}")
        return passed
    return emit


def consensus_exponent(gamma, theta):
    cfg = hs.ExperimentConfig(beta=2.0, gamma=gamma, theta=theta, u=0.5,
                              n_values=NS_CONSENSUS, mode="CONSENSUS", seed=0)
    res = hs.run_sweep(cfg)
    return res.fitted_exponent, res.fit_stderr


@pytest.mark.slow
def test_criterion_1_small_world_exponent(report):
    rows = {theta: consensus_exponent(0.3, theta) for theta in (0.0, 1.0, 2.0)}
    ok = all(0.85 <= e <= 1.15 for e, _ in rows.values())
    detail = ", ".join(f"theta={t:g}: {e:.3f} +- {s:.3f}" for t, (e, s) in rows.items())
    assert report(1, ok, f"gamma=0.3 fitted exponents {detail} (band [0.85, 1.15])")


@pytest.mark.slow
def test_criterion_2_ultrasmall_exponent(report):
    e2, s2 = consensus_exponent(0.75, 2.0)
    e1, s1 = consensus_exponent(0.75, 1.0)
    ok = 0.3 <= e2 <= 0.7 and 0.85 <= e1 <= 1.15
    assert report(2, ok, f"gamma=0.75 theta=2: {e2:.3f} +- {s2:.3f} (band [0.3, 0.7]); "
                         f"theta=1: {e1:.3f} +- {s1:.3f} (band [0.85, 1.15])")


def test_criterion_3_region_constants(report):
    uni, high = th.min_beta_uniform(), th.min_beta_highgamma()
    worst = max(th.assumption_integral(3.0, float(g)) for g in th.GAMMA_GRID)
    ok = abs(uni - 2.17) <= 0.05 and abs(high - 1.81) <= 0.05 and worst < 1
    assert report(3, ok, f"min_beta_uniform={uni:.4f}, min_beta_highgamma={high:.4f}, "
                         f"max integral at beta=3 = {worst:.4f}")


def test_criterion_4_rho_and_er_giant(report):
    rho = th.solve_rho(2.0)
    g = ng.generate(NetworkParams(2.0, 0.0, 100_000, Variant.ER, seed=0))
    frac = ng.components(g).giant_size / g.n
    ok = abs(rho - 0.79681) <= 1e-4 and abs(frac - rho) <= 0.01
    assert report(4, ok, f"rho(2)={rho:.6f}, ER giant fraction at N=1e5 = {frac:.4f}")


def test_criterion_5_exact_oracle_suite(report):
    results = hs.run_checks()
    failed = [r.name for r in results if not r.passed]
    ok = not failed
    assert report(5, ok, f"{len(results) - len(failed)}/{len(results)} checks passed"
                         + (f"; failed: {failed}" if failed else ""))


@pytest.mark.slow
def test_criterion_6_mixing_growth(report):
    rows = {}
    for gamma in (0.3, 0.75):
        cfg = hs.ExperimentConfig(beta=3.0, gamma=gamma, n_values=NS_MIXING,
                                  mode="MIXING_PROXY", seed=0)
        res = hs.mixing_proxy_sweep(cfg)
        rows[gamma] = (res.fitted_exponent, res.fit_stderr)
    ok = all(e < 0.2 for e, _ in rows.values())
    detail = ", ".join(f"gamma={g:g}: {e:.3f} +- {s:.3f}" for g, (e, s) in rows.items())
    assert report(6, ok, f"t_rel growth exponents {detail} (bound < 0.2)")


def test_criterion_7_degree_law(report):
    params = NetworkParams(2.0, 0.6, 100_000, seed=0)
    s = ng.degree_summary(ng.generate(params), params)
    target = 1 + 1 / 0.6
    ok = s.tail_exponent_estimate is not None and abs(s.tail_exponent_estimate - target) <= 0.35
    assert report(7, ok, f"tail exponent {s.tail_exponent_estimate:.3f} vs {target:.3f}")


TABLE = [
    (0.1, 2.0, 0.1 / 1.8), (0.3, 1.8, 0.3 / 1.4), (0.4, 1.7, 0.4 / 1.2),
    (0.1, 1.3, 0.1 * 0.7), (0.2, 1.2, 0.2 * 0.8), (0.3, 1.1, 0.3 * 0.9),
    (0.1, 0.5, 0.1), (0.2, 1.0, 0.2), (0.4, 0.8, 0.4),
    (0.25, 0.4, 0.25 * 1.6 / 1.5), (0.4, 0.0, 0.4 * 2 / 1.2), (0.3, -1.0, 0.3 * 3 / 1.4),
]


def test_criterion_8_subcritical_table(report):
    bad = []
    for gamma, theta, expected in TABLE:
        beta = 0.5 * (1 - 2 * gamma)
        got = th.predict_exponent(beta, gamma, theta)
        if got is None or not math.isclose(got, expected, rel_tol=1e-12, abs_tol=1e-15):
            bad.append((gamma, theta, got, expected))
    assert report(8, not bad, f"{len(TABLE) - len(bad)}/{len(TABLE)} table points reproduced"
                              + (f"; mismatches {bad}" if bad else ""))
