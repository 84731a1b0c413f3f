"""Exact continuous-time simulation of the discursive voter model and its dual
coalescing random walks.

Across an edge ``{i, j}`` the voter model fires at rate
``w_ij = d(i)**(theta-1) + d(j)**(theta-1)``, each copy direction taking half.
The dual walkers jump ``i -> j`` at rate ``w_ij / 2``.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import netgen
from ._backend import get_kernels
from ._pykernels import ABSORBED, BAD_RATE, DEADLINE, EVENT_CAP
from .netgen import Graph, NetworkParams

THETA_MAX = 2.0
ENGINES = ("edge", "naive")


def check_theta(theta: float) -> float:
    theta = float(theta)
    if not math.isfinite(theta) or theta > THETA_MAX:
        raise ValueError(f"theta must be finite and <= {THETA_MAX}, got {theta!r}")
    return theta


@dataclass(frozen=True)
class VoterParams:
    theta: float
    u: float = 0.5
    seed: int = 0

    def __post_init__(self):
        check_theta(self.theta)
        if not (0.0 < self.u < 1.0):
            raise ValueError(f"u must lie in (0, 1), got {self.u!r}")


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, key...)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(seed: int, *key: int) -> int:
    """64-bit integer seed derived from ``(seed, key...)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _require_simple(g: Graph):
    if g.is_multigraph:
        raise ValueError("dynamics run on simple graphs; flatten the multigraph first")


def edge_weights(g: Graph, theta: float) -> np.ndarray:
    """``d(i)**(theta-1) + d(j)**(theta-1)`` for every edge."""
    d = g.degrees.astype(np.float64)
    p = np.zeros(g.n)
    nz = d > 0
    p[nz] = d[nz] ** (theta - 1.0)
    return p[g.eu] + p[g.ev]


@dataclass
class OpinionState:
    """Binary opinions with per-component 1-counts and the discordant edges."""

    opinions: np.ndarray
    labels: np.ndarray
    comp_sizes: np.ndarray
    comp_ones: np.ndarray
    discordant: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_opinions(cls, g: Graph, opinions, theta: float = 1.0) -> "OpinionState":
        _require_simple(g)
        op = np.ascontiguousarray(np.asarray(opinions, dtype=np.int8))
        if op.shape != (g.n,) or np.any((op != 0) & (op != 1)):
            raise ValueError("opinions must be a 0/1 vector of length n")
        cd = netgen.components(g)
        st = cls(op, cd.labels, cd.sizes, np.zeros(cd.count, np.int64),
                 np.zeros(g.m, bool), edge_weights(g, check_theta(theta)))
        st.refresh(g)
        return st

    def refresh(self, g: Graph) -> None:
        """Recount the auxiliary structures from ``opinions``."""
        self.comp_ones = np.bincount(self.labels, weights=self.opinions,
                                     minlength=self.comp_sizes.size).astype(np.int64)
        self.discordant = self.opinions[g.eu] != self.opinions[g.ev]

    @property
    def ones(self) -> int:
        return int(self.opinions.sum())

    @property
    def discordant_weight(self) -> float:
        return float(self.weights[self.discordant].sum())

    def is_absorbing(self) -> bool:
        return bool(np.all((self.comp_ones == 0) | (self.comp_ones == self.comp_sizes)))


def init_opinions(g: Graph, params: VoterParams, fill: int | None = None) -> OpinionState:
    """I.i.d. Bernoulli(u) opinions, or the constant ``fill`` (0 or 1)."""
    if g.n == 0:
        raise ValueError("graph is empty")
    if fill is not None:
        if fill not in (0, 1):
            raise ValueError("fill must be 0 or 1")
        op = np.full(g.n, fill, dtype=np.int8)
    else:
        op = (stream(params.seed, 0).random(g.n) < params.u).astype(np.int8)
    return OpinionState.from_opinions(g, op, params.theta)


@dataclass
class RunRecord:
    """Outcome of one simulated run.

    ``trajectory`` is ``(times, stats)``; for walker paths the statistic is
    the vertex occupied from that time on.
    """

    time: float
    events: int
    status: int = ABSORBED
    checkpoint_values: np.ndarray | None = None
    trajectory: tuple[np.ndarray, np.ndarray] | None = None
    final: np.ndarray | None = None
    wall_seconds: float = 0.0

    @property
    def censored(self) -> bool:
        return self.status in (EVENT_CAP, DEADLINE)

    def write_trajectory_csv(self, path) -> None:
        if self.trajectory is None:
            raise ValueError("run was not sampled; pass sample_every > 0")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "stat"])
            for t, s in zip(*self.trajectory):
                w.writerow([repr(float(t)), int(s) if float(s).is_integer() else repr(float(s))])


def _checked(status: int):
    if status == BAD_RATE:
        raise FloatingPointError("non-finite or vanishing total jump rate")


def _alias_table(rates: np.ndarray):
    """Vose alias table for sampling proportional to ``rates``."""
    k = rates.size
    prob = np.zeros(k)
    alias = np.zeros(k, dtype=np.int64)
    if k == 0:
        return prob, alias
    scaled = rates * (k / rates.sum())
    small = [i for i in range(k) if scaled[i] < 1.0]
    large = [i for i in range(k) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = scaled[g] + scaled[s] - 1.0
        (small if scaled[g] < 1.0 else large).append(g)
    for i in large + small:
        prob[i] = 1.0
        alias[i] = i
    return prob, alias


class VoterSimulator:
    """Precomputed static data for repeated voter runs on one graph."""

    def __init__(self, g: Graph, theta: float, engine: str = "edge", backend: str | None = None):
        _require_simple(g)
        self.g = g
        self.theta = check_theta(theta)
        if engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        self.engine = engine
        self.k = get_kernels(backend)
        self.cd = netgen.components(g)
        self.comp = np.ascontiguousarray(self.cd.labels, dtype=np.int64)
        self.comp_size = np.ascontiguousarray(self.cd.sizes, dtype=np.int64)
        if engine == "edge":
            self.w = np.ascontiguousarray(edge_weights(g, self.theta))
        else:
            d = g.degrees
            self.act = np.flatnonzero(d > 0).astype(np.int64)
            rates = d[self.act].astype(np.float64) ** self.theta
            self.total_rate = float(rates.sum())
            self.alias_prob, self.alias_idx = _alias_table(rates)

    def run(self, opinions: np.ndarray, rng: np.random.Generator, checkpoints=None,
            max_events: int = -1, sample_every: int = 0, wall_cap: float | None = None) -> RunRecord:
        """Run to absorption; ``opinions`` (int8) is overwritten with the final state."""
        cp = np.ascontiguousarray(np.sort(np.asarray(checkpoints if checkpoints is not None else [],
                                                     dtype=np.float64)))
        deadline = time.monotonic() + wall_cap if wall_cap else 0.0
        g = self.g
        start = time.perf_counter()
        if self.engine == "edge":
            out = self.k.voter_edge_run(g.indptr, g.indices, g.inc_edge, g.eu, g.ev, self.w,
                                        opinions, rng, cp, int(max_events), int(sample_every),
                                        float(deadline))
        else:
            out = self.k.voter_naive_run(g.indptr, g.indices, self.act, self.alias_prob,
                                         self.alias_idx, self.total_rate, self.comp,
                                         self.comp_size, opinions, rng, cp, int(max_events),
                                         int(sample_every), float(deadline))
        t, events, status, cpv, tt, ts = out
        _checked(status)
        return RunRecord(float(t), int(events), int(status), cpv,
                         (tt, ts) if sample_every > 0 else None,
                         wall_seconds=time.perf_counter() - start)


def simulate_voter(g: Graph, state: OpinionState, params: VoterParams, engine: str = "edge",
                   checkpoints=None, sample_every: int = 0, max_events: int = -1,
                   wall_cap: float | None = None, backend: str | None = None) -> RunRecord:
    """Run the voter model from ``state`` until every component is
    monochromatic. ``state`` is advanced in place to the terminal state.

    ``engine="edge"`` drives the jump chain by discordant edges; ``"naive"``
    fires vertices at rate ``d**theta``. The two agree in law.
    """
    sim = VoterSimulator(g, params.theta, engine, backend)
    rec = sim.run(state.opinions, stream(params.seed, 1), checkpoints, max_events,
                  sample_every, wall_cap)
    state.refresh(g)
    return rec


# ---------------------------------------------------------------- walkers


@dataclass
class WalkerSet:
    positions: np.ndarray
    elapsed: float = 0.0

    @classmethod
    def full(cls, g: Graph) -> "WalkerSet":
        return cls(np.arange(g.n, dtype=np.int64))

    @classmethod
    def at(cls, vertices) -> "WalkerSet":
        return cls(np.asarray(vertices, dtype=np.int64))

    def __len__(self):
        return int(self.positions.size)


def dual_rates(g: Graph, theta: float):
    """Per-CSR-slot rates ``(d(i)**(theta-1) + d(j)**(theta-1)) / 2``, their
    per-row running sums and the row totals ``q(i)``."""
    _require_simple(g)
    theta = check_theta(theta)
    d = g.degrees.astype(np.float64)
    p = np.zeros(g.n)
    nz = d > 0
    p[nz] = d[nz] ** (theta - 1.0)
    rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
    r = 0.5 * (p[rows] + p[g.indices])
    cum = np.cumsum(r)
    offset = np.zeros(g.n)
    starts = g.indptr[:-1]
    has = np.diff(g.indptr) > 0
    offset[has] = cum[starts[has]] - r[starts[has]]
    cum = cum - offset[rows]
    q = np.zeros(g.n)
    q[has] = cum[g.indptr[1:][has] - 1]
    # exact row totals keep the last cumulative entry consistent with q
    return r, np.ascontiguousarray(cum), np.ascontiguousarray(q)


class WalkSimulator:
    """Static dual-rate tables for repeated walker runs on one graph."""

    def __init__(self, g: Graph, theta: float, backend: str | None = None):
        self.g = g
        self.theta = check_theta(theta)
        self.k = get_kernels(backend)
        self.rates, self.cum, self.q = dual_rates(g, self.theta)
        self.comp = np.ascontiguousarray(netgen.components(g).labels, dtype=np.int64)

    def coalesce(self, positions, rng, max_events: int = -1, sample_every: int = 0,
                 wall_cap: float | None = None) -> RunRecord:
        g = self.g
        pos = np.asarray(positions, dtype=np.int64)
        if pos.size == 0:
            raise ValueError("walker set is empty")
        if pos.min() < 0 or pos.max() >= g.n:
            raise ValueError("walker position out of range")
        deadline = time.monotonic() + wall_cap if wall_cap else 0.0
        start = time.perf_counter()
        t, events, status, final, tt, ts = self.k.coalesce_run(
            g.n, g.indptr, g.indices, self.cum, self.q, self.comp, pos, rng,
            int(max_events), int(sample_every), float(deadline))
        _checked(status)
        return RunRecord(float(t), int(events), int(status), None,
                         (tt, ts) if sample_every > 0 else None, final,
                         wall_seconds=time.perf_counter() - start)

    def walk(self, start: int, t_max: float, rng) -> RunRecord:
        times, states = self.k.walk_trajectory(self.g.indptr, self.g.indices, self.cum, self.q,
                                               int(start), float(t_max), rng)
        return RunRecord(float(t_max), int(times.size - 1), ABSORBED, None, (times, states),
                         np.array([states[-1]]))


def simulate_coalescing(g: Graph, initial: WalkerSet, theta: float, seed: int = 0,
                        sample_every: int = 0, max_events: int = -1,
                        wall_cap: float | None = None, backend: str | None = None) -> RunRecord:
    """Coalescing dual walkers until one walker is left in every occupied
    component. ``final`` holds the surviving positions."""
    if not isinstance(initial, WalkerSet):
        initial = WalkerSet.at(initial)
    sim = WalkSimulator(g, theta, backend)
    rec = sim.coalesce(initial.positions, stream(seed, 2), max_events, sample_every, wall_cap)
    rec.time += initial.elapsed
    return rec


def simulate_meeting(g: Graph, x: int, y: int, theta: float, seed: int = 0,
                     backend: str | None = None) -> RunRecord:
    """First coincidence time of two independent dual walkers from ``x`` and ``y``."""
    cd = netgen.components(g)
    if cd.labels[x] != cd.labels[y]:
        raise ValueError(f"vertices {x} and {y} lie in different components; they never meet")
    if x == y:
        return RunRecord(0.0, 0, ABSORBED, final=np.array([x]))
    return simulate_coalescing(g, WalkerSet.at([x, y]), theta, seed, backend=backend)


def simulate_walk(g: Graph, start: int, theta: float, t_max: float, seed: int = 0,
                  backend: str | None = None) -> RunRecord:
    """Single dual walker path on ``[0, t_max]`` with its full trajectory."""
    return WalkSimulator(g, theta, backend).walk(start, t_max, stream(seed, 3))


def observe_on_subset(record: RunRecord, subset) -> RunRecord:
    """Partially observed chain: delete the excursions outside ``subset`` and
    run the clock only while the path is inside it.

    The input trajectory is read as jump times and states held until the next
    jump (the last one until ``record.time``).
    """
    if record.trajectory is None:
        raise ValueError("record carries no trajectory")
    V = np.unique(np.asarray(list(subset), dtype=np.int64))
    if V.size == 0:
        raise ValueError("observation set is empty")
    times, states = record.trajectory
    states = np.asarray(states, dtype=np.int64)
    ends = np.append(times[1:], record.time)
    length = np.clip(ends - times, 0.0, None)
    inside = np.isin(states, V)
    obs_len = np.where(inside, length, 0.0)
    clock = np.concatenate([[0.0], np.cumsum(obs_len)])
    keep = inside & (length > 0)
    o_states = states[keep]
    o_times = clock[:-1][keep]
    if o_states.size:
        new = np.concatenate([[True], o_states[1:] != o_states[:-1]])
        o_states, o_times = o_states[new], o_times[new]
    total = float(clock[-1])
    return RunRecord(total, max(int(o_states.size) - 1, 0), ABSORBED, None, (o_times, o_states),
                     o_states[-1:] if o_states.size else np.empty(0, np.int64))


def occupation_fractions(record: RunRecord, n: int) -> np.ndarray:
    """Fraction of ``record.time`` spent in each of ``n`` states."""
    times, states = record.trajectory
    ends = np.append(times[1:], record.time)
    occ = np.bincount(np.asarray(states, dtype=np.int64), weights=ends - times, minlength=n)
    return occ / record.time if record.time > 0 else occ


# ---------------------------------------------------------------- Monte Carlo


@dataclass
class ConsensusEstimate:
    mean: float
    stderr: float
    replicas: int
    censored: int = 0
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    wall_seconds: float = 0.0


def summarize(values) -> tuple[float, float]:
    """Order-independent mean and standard error."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return math.nan, math.nan
    mean = math.fsum(v.tolist()) / v.size
    if v.size < 2:
        return mean, math.nan
    var = math.fsum(((v - mean) ** 2).tolist()) / (v.size - 1)
    return mean, math.sqrt(var / v.size)


def consensus_replica(net: NetworkParams, voter: VoterParams, replica: int, quenched_graph=None,
                      engine: str = "naive", wall_cap: float | None = None,
                      backend: str | None = None) -> RunRecord:
    """One annealed (fresh graph) or quenched (given graph) consensus run.
    Multigraph samples are flattened first."""
    if quenched_graph is None:
        g = netgen.generate(net.replace(seed=child_seed(net.seed, voter.seed, replica, 0)))
    else:
        g = quenched_graph
    if g.is_multigraph:
        g = g.flatten()
    op = (stream(voter.seed, replica, 1).random(g.n) < voter.u).astype(np.int8)
    sim = VoterSimulator(g, voter.theta, engine, backend)
    return sim.run(op, stream(voter.seed, replica, 2), wall_cap=wall_cap)


def estimate_consensus_mc(net: NetworkParams, voter: VoterParams, replicas: int,
                          quenched: bool = False, engine: str = "naive",
                          wall_cap: float | None = None, backend: str | None = None,
                          executor=None) -> ConsensusEstimate:
    """Monte Carlo estimate of the expected consensus time.

    Annealed by default: every replica draws its own graph and opinions.
    The naive engine is the default here: a hub flip costs the edge engine
    O(degree * log m) tree updates, which dominates on scale-free graphs.
    Runs that hit ``wall_cap`` seconds are counted as censored and excluded.
    """
    if replicas < 2:
        raise ValueError("need at least two replicas")
    start = time.perf_counter()
    fixed = netgen.generate(net) if quenched else None
    jobs = [(net, voter, r, fixed, engine, wall_cap, backend) for r in range(replicas)]
    if executor is None:
        recs = [consensus_replica(*j) for j in jobs]
    else:
        recs = list(executor.map(lambda j: consensus_replica(*j), jobs))
    times = np.array([r.time for r in recs if not r.censored])
    censored = sum(r.censored for r in recs)
    mean, se = summarize(times)
    return ConsensusEstimate(mean, se, int(times.size), int(censored), times,
                             time.perf_counter() - start)
