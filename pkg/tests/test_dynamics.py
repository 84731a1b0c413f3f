import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from conftest import small_connected_graphs
from voterlab import chain, dynamics as dy, netgen as ng
from voterlab.dynamics import VoterParams, stream, summarize
from voterlab.netgen import NetworkParams

THETAS = (0.0, 1.0, 2.0)


def mc_mean(values):
    m, se = summarize(values)
    return m, se


def voter_times(g, theta, start, reps, engine, seed=0):
    sim = dy.VoterSimulator(g, theta, engine)
    start = np.asarray(start, dtype=np.int8)
    return np.array([sim.run(start.copy(), stream(seed, r)).time for r in range(reps)])


def multilabel_gillespie(g, theta, rng):
    """Reference simulation of the voter model from all-distinct labels."""
    d = g.degrees.astype(float)
    w = d[g.eu] ** (theta - 1) + d[g.ev] ** (theta - 1)
    lab = list(range(g.n))
    eu, ev = g.eu.tolist(), g.ev.tolist()
    t = 0.0
    while True:
        disc = [k for k in range(len(eu)) if lab[eu[k]] != lab[ev[k]]]
        if not disc:
            return t
        rates = w[disc]
        total = rates.sum()
        t += rng.exponential(1.0 / total)
        k = disc[int(np.searchsorted(np.cumsum(rates), rng.random() * total, side="right"))]
        a, b = eu[k], ev[k]
        if rng.random() < 0.5:
            lab[a] = lab[b]
        else:
            lab[b] = lab[a]


# ---------------------------------------------------------------- parameters and state


def test_theta_above_two_rejected(k2):
    with pytest.raises(ValueError):
        VoterParams(2.5)
    with pytest.raises(ValueError):
        dy.VoterSimulator(k2, 2.01)
    with pytest.raises(ValueError):
        dy.simulate_coalescing(k2, dy.WalkerSet.full(k2), 3.0)
    with pytest.raises(ValueError):
        VoterParams(1.0, u=0.0)


def test_multigraph_rejected():
    g = ng.gen_mnr(NetworkParams(3.0, 0.3, 30, ng.Variant.MNR, 1))
    with pytest.raises(ValueError):
        dy.VoterSimulator(g, 1.0)


def test_boundary_initializers_absorb_immediately(c4):
    for fill in (0, 1):
        st_ = dy.init_opinions(c4, VoterParams(1.0), fill=fill)
        assert st_.is_absorbing()
        rec = dy.simulate_voter(c4, st_, VoterParams(1.0))
        assert rec.time == 0.0 and rec.events == 0


def test_init_mean_matches_binomial():
    g = ng.cycle_graph(50)
    u, reps = 0.3, 10_000
    sums = np.array([dy.init_opinions(g, VoterParams(1.0, u, s)).ones for s in range(reps)])
    sd = math.sqrt(g.n * u * (1 - u))
    assert abs(sums.mean() - u * g.n) <= 3 * sd / math.sqrt(reps)


def test_k2_discordant_set(k2):
    s = dy.OpinionState.from_opinions(k2, [0, 1])
    assert s.discordant.sum() == 1
    assert not s.is_absorbing()


@given(st.integers(2, 60), st.integers(0, 2**32), st.floats(-1.0, 2.0))
def test_opinion_state_invariants(n, seed, theta):
    g = ng.generate(NetworkParams(2.0, 0.4, n, seed=seed))
    st_ = dy.init_opinions(g, VoterParams(theta, 0.5, seed))
    cd = ng.components(g)
    assert np.array_equal(st_.comp_ones, np.bincount(cd.labels, weights=st_.opinions,
                                                      minlength=cd.count))
    assert np.array_equal(st_.discordant, st_.opinions[g.eu] != st_.opinions[g.ev])
    dy.simulate_voter(g, st_, VoterParams(theta, 0.5, seed))
    assert st_.is_absorbing()
    assert not st_.discordant.any()
    assert np.all((st_.comp_ones == 0) | (st_.comp_ones == cd.sizes))


# ---------------------------------------------------------------- voter runs


@pytest.mark.parametrize("engine", dy.ENGINES)
@pytest.mark.parametrize("theta", THETAS + (-1.5,))
def test_k2_consensus_mean_half(k2, engine, theta):
    m, se = mc_mean(voter_times(k2, theta, [0, 1], 10_000, engine))
    assert abs(m - 0.5) <= 3 * se


@pytest.mark.parametrize("engine", dy.ENGINES)
def test_triangle_matches_linear_solve(engine):
    k3 = ng.complete_graph(3)
    # 2-vs-1 states: four discordant flips per unit time, half of them absorbing
    oracle = 0.5
    assert chain.exact_consensus_time(k3, 1.0, [0, 1, 1]) == pytest.approx(oracle, abs=1e-12)
    m, _ = mc_mean(voter_times(k3, 1.0, [0, 1, 1], 20_000, engine, seed=3))
    assert abs(m / oracle - 1) < 0.02


def test_trajectory_and_holding_times(tmp_path):
    g = ng.giant(ng.generate(NetworkParams(2.0, 0.5, 200, seed=1)))
    op = (stream(2, 0).random(g.n) < 0.5).astype(np.int8)
    start_ones = int(op.sum())
    rec = dy.VoterSimulator(g, 1.0, "edge").run(op, stream(2, 1), sample_every=1)
    times, ones = rec.trajectory
    assert times[0] == 0.0 and ones[0] == start_ones
    assert np.all(np.diff(times) >= 0)
    assert times[-1] == pytest.approx(rec.time)
    assert ones[-1] in (0, g.n)
    assert np.all(np.abs(np.diff(ones)) <= 1)
    path = tmp_path / "traj.csv"
    rec.write_trajectory_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,stat" and len(lines) == times.size + 1


def test_trajectory_requires_sampling(k2, tmp_path):
    rec = dy.VoterSimulator(k2, 1.0).run(np.array([0, 1], np.int8), stream(0))
    with pytest.raises(ValueError):
        rec.write_trajectory_csv(tmp_path / "x.csv")


@pytest.mark.parametrize("g", small_connected_graphs(4), ids=lambda g: f"n{g.n}m{g.m}")
@pytest.mark.parametrize("theta", THETAS)
def test_engines_agree_in_law(g, theta):
    start = np.arange(g.n) % 2
    a = voter_times(g, theta, start, 10_000, "edge", seed=1)
    b = voter_times(g, theta, start, 10_000, "naive", seed=2)
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_martingale_and_direction():
    g = ng.giant(ng.generate(NetworkParams(2.0, 0.5, 60, seed=4)))
    cps = np.array([0.1, 1.0, 4.0])
    for theta in THETAS:
        sim = dy.VoterSimulator(g, theta, "edge")
        diffs, absorbed = [], []
        for r in range(10_000):
            op = (stream(8, r, 0).random(g.n) < 0.6).astype(np.int8)
            s0 = op.sum()
            rec = sim.run(op, stream(8, r, 1), checkpoints=cps)
            diffs.append(rec.checkpoint_values - s0)
            absorbed.append(float(op.sum() == g.n) - s0 / g.n)
        d = np.array(diffs)
        assert np.all(np.abs(d.mean(0)) <= 3 * d.std(0, ddof=1) / 100)
        a = np.array(absorbed)
        assert abs(a.mean()) <= 3 * a.std(ddof=1) / 100


def test_wall_cap_censors():
    g = ng.giant(ng.generate(NetworkParams(2.0, 0.3, 3000, seed=1)))
    op = (stream(1).random(g.n) < 0.5).astype(np.int8)
    rec = dy.VoterSimulator(g, 1.0, "naive").run(op, stream(2), wall_cap=1e-4)
    assert rec.censored
    rec = dy.VoterSimulator(g, 1.0, "edge").run(op, stream(2), max_events=10)
    assert rec.censored and rec.events == 10


# ---------------------------------------------------------------- walkers


def test_single_walker_is_coalesced(p3):
    rec = dy.simulate_coalescing(p3, dy.WalkerSet.at([1]), 1.0)
    assert rec.time == 0.0


def test_k2_coalescence_mean_half(k2):
    sim = dy.WalkSimulator(k2, 1.0)
    m, se = mc_mean([sim.coalesce([0, 1], stream(4, r)).time for r in range(10_000)])
    assert abs(m - 0.5) <= 3 * se


@given(st.integers(2, 80), st.integers(0, 2**32), st.floats(-1.0, 2.0))
def test_walker_count_never_increases(n, seed, theta):
    g = ng.generate(NetworkParams(2.0, 0.5, n, seed=seed))
    rec = dy.simulate_coalescing(g, dy.WalkerSet.full(g), theta, seed, sample_every=1)
    times, alive = rec.trajectory
    assert alive[0] == n
    assert np.all(np.diff(alive) <= 0)
    cd = ng.components(g)
    final = np.asarray(rec.final)
    assert len(final) == cd.count
    assert sorted(cd.labels[final]) == list(range(cd.count))


@pytest.mark.parametrize("g", small_connected_graphs(4), ids=lambda g: f"n{g.n}m{g.m}")
@pytest.mark.parametrize("theta", THETAS)
def test_duality_in_expectation_by_simulation(g, theta):
    reps = 3000
    rng = np.random.default_rng(13)
    cons = np.array([multilabel_gillespie(g, theta, rng) for _ in range(reps)])
    sim = dy.WalkSimulator(g, theta)
    coal = np.array([sim.coalesce(np.arange(g.n), stream(14, r)).time for r in range(reps)])
    se = math.sqrt(cons.var(ddof=1) / reps + coal.var(ddof=1) / reps)
    assert abs(cons.mean() - coal.mean()) <= 3.5 * se
    exact = chain.exact_coalescence_time(g, theta)
    assert abs(coal.mean() - exact) <= 3.5 * coal.std(ddof=1) / math.sqrt(reps)


def test_meeting_examples(k2, p3):
    assert dy.simulate_meeting(p3, 1, 1, 1.0).time == 0.0
    m, se = mc_mean([dy.simulate_meeting(k2, 0, 1, 1.0, seed=s).time for s in range(10_000)])
    assert abs(m - 0.5) <= 3 * se
    # ends of P3: a = 1/2 + b, b = 1/3 + a/3 by first-step analysis
    oracle = 1.25
    assert chain.exact_meeting_time(chain.build_vsrw_generator(p3), 0, 2) == pytest.approx(oracle)
    sim = dy.WalkSimulator(p3, 1.0)
    m, _ = mc_mean([sim.coalesce([0, 2], stream(6, r)).time for r in range(20_000)])
    assert abs(m / oracle - 1) < 0.02


def test_meeting_on_triangle_matches_chain():
    k3 = ng.complete_graph(3)
    exact = chain.exact_meeting_time(chain.build_dual_generator(k3, 1.0), 0, 1)
    sim = dy.WalkSimulator(k3, 1.0)
    m, _ = mc_mean([sim.coalesce([0, 1], stream(7, r)).time for r in range(20_000)])
    assert abs(m / exact - 1) < 0.02


def test_meeting_rejects_cross_component():
    g = ng.disjoint_union(ng.complete_graph(2), ng.complete_graph(2))
    with pytest.raises(ValueError):
        dy.simulate_meeting(g, 0, 2, 1.0)


def test_coalescence_sandwich_on_disconnected_graph():
    g = ng.disjoint_union(ng.star_graph(4), ng.cycle_graph(6), ng.path_graph(3))
    cd = ng.components(g)
    for theta in THETAS:
        t_meet = max(chain.worst_meeting_time(chain.build_dual_generator(g.subgraph(cd.members(c)), theta))
                     for c in range(cd.count))
        sim = dy.WalkSimulator(g, theta)
        m, se = mc_mean([sim.coalesce(np.arange(g.n), stream(9, r)).time for r in range(5000)])
        assert t_meet <= m + 3 * se
        assert m - 3 * se <= math.e * (2 + math.log(g.n)) * t_meet


# ---------------------------------------------------------------- partial observation


def test_observe_full_set_is_identity(p3):
    rec = dy.simulate_walk(p3, 0, 1.0, 50.0, seed=1)
    obs = dy.observe_on_subset(rec, range(3))
    assert obs.time == pytest.approx(rec.time)
    assert np.allclose(obs.trajectory[0], rec.trajectory[0])
    assert np.array_equal(obs.trajectory[1], rec.trajectory[1])


def test_observe_never_visited(p3):
    rec = dy.RunRecord(5.0, 0, trajectory=(np.array([0.0]), np.array([1])))
    obs = dy.observe_on_subset(rec, [0, 2])
    assert obs.time == 0.0


def test_observe_rejects_empty_set(p3):
    rec = dy.simulate_walk(p3, 0, 1.0, 1.0)
    with pytest.raises(ValueError):
        dy.observe_on_subset(rec, [])


@pytest.mark.parametrize("g,subset", [(ng.path_graph(3), [0, 2]), (ng.cycle_graph(4), [0, 1, 3])])
def test_observed_occupation_is_restricted_pi(g, subset):
    rec = dy.simulate_walk(g, 0, 1.0, 1e5, seed=2)
    obs = dy.observe_on_subset(rec, subset)
    occ = dy.occupation_fractions(obs, g.n)
    pi = np.full(g.n, 1.0 / g.n)
    target = np.where(np.isin(np.arange(g.n), subset), pi, 0.0)
    target /= target.sum()
    assert np.abs(occ - target).max() < 0.01


# ---------------------------------------------------------------- Monte Carlo estimator


def test_estimator_k2_forced():
    net = NetworkParams(200.0, 0.0, 2, seed=1)
    u = 0.3
    est = dy.estimate_consensus_mc(net, VoterParams(1.0, u, 5), 20_000)
    # discordant with probability 2u(1-u), then an Exp(2) wait
    assert abs(est.mean - u * (1 - u)) <= 3 * est.stderr


def test_estimator_is_deterministic():
    net = NetworkParams(2.0, 0.5, 30, seed=3)
    a = dy.estimate_consensus_mc(net, VoterParams(2.0, 0.5, 7), 1000)
    b = dy.estimate_consensus_mc(net, VoterParams(2.0, 0.5, 7), 1000)
    assert a.mean == b.mean and a.stderr == b.stderr
    assert np.array_equal(a.times, b.times)


def test_estimator_engines_and_quenched():
    net = NetworkParams(2.0, 0.5, 40, seed=3)
    voter = VoterParams(1.0, 0.5, 2)
    a = dy.estimate_consensus_mc(net, voter, 3000, engine="edge")
    b = dy.estimate_consensus_mc(net, voter, 3000, engine="naive")
    assert abs(a.mean - b.mean) <= 3.5 * math.hypot(a.stderr, b.stderr)
    q = dy.estimate_consensus_mc(net, voter, 50, quenched=True)
    assert q.replicas == 50


def test_estimator_rejects_too_few_replicas():
    with pytest.raises(ValueError):
        dy.estimate_consensus_mc(NetworkParams(2.0, 0.5, 10), VoterParams(1.0), 1)


def test_summary_is_order_independent():
    rng = np.random.default_rng(0)
    v = rng.exponential(size=1001) * 1e6
    assert summarize(v) == summarize(v[::-1]) == summarize(rng.permutation(v))
