"""Rank-one scale-free random graph ensembles and their structural statistics.

Vertices are stored 0-indexed; vertex ``v`` carries the label ``i = v + 1``
that enters the weight formula ``x_ij = beta * N**(2*gamma - 1) * i**-gamma * j**-gamma``.
"""
from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ._backend import kernels
from ._pykernels import LAW_CHUNG_LU, LAW_SNR

# pair loops above this size switch to geometric skip sampling
DENSE_MAX_N = 20_000
# direct per-pair Poisson draws for the multigraph below this size
MNR_DIRECT_MAX_N = 2_000


class Variant(str, enum.Enum):
    SNR = "SNR"
    MNR = "MNR"
    CHUNG_LU = "CHUNG_LU"
    ER = "ER"


@dataclass(frozen=True)
class NetworkParams:
    """Parameters of one random-graph law.

    ``beta`` may be 0 (the empty graph); the ensembles are only interesting
    for ``beta > 0``.
    """

    beta: float
    gamma: float
    n: int
    variant: Variant = Variant.SNR
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma!r}")
        if not (self.beta >= 0.0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be finite and non-negative, got {self.beta!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")

    def replace(self, **changes) -> "NetworkParams":
        d = dict(beta=self.beta, gamma=self.gamma, n=self.n, variant=self.variant, seed=self.seed)
        d.update(changes)
        return NetworkParams(**d)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph on ``range(n)``.

    ``eu < ev`` lists each distinct edge once, sorted lexicographically. For
    multigraphs ``mult`` holds the multiplicity of each listed edge and
    ``loops`` the number of self-loops per vertex; a loop adds one to the
    degree, so that multigraph degrees are Poisson with the vertex weight.
    """

    n: int
    eu: np.ndarray
    ev: np.ndarray
    mult: np.ndarray | None = None
    loops: np.ndarray | None = None

    @classmethod
    def from_edges(cls, n, src, dst, mult=None, loops=None) -> "Graph":
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.shape != dst.shape:
            raise ValueError("edge endpoint arrays differ in length")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(src == dst):
            raise ValueError("self-loops go in `loops`, not in the edge list")
        lo = np.minimum(src, dst)
        hi = np.maximum(src, dst)
        order = np.lexsort((hi, lo))
        lo, hi = lo[order], hi[order]
        if lo.size > 1 and np.any((lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])):
            raise ValueError("repeated edge; pass multiplicities via `mult`")
        if mult is not None:
            mult = np.asarray(mult, dtype=np.int64)[order]
            if np.any(mult < 1):
                raise ValueError("multiplicities must be >= 1")
        if loops is not None:
            loops = np.asarray(loops, dtype=np.int64)
            if loops.shape != (n,) or np.any(loops < 0):
                raise ValueError("loops must be a non-negative length-n array")
        for a in (lo, hi, mult, loops):
            if a is not None:
                a.setflags(write=False)
        return cls(int(n), lo, hi, mult, loops)

    @property
    def m(self) -> int:
        """Number of distinct non-loop edges."""
        return int(self.eu.size)

    @property
    def is_multigraph(self) -> bool:
        return self.mult is not None or self.loops is not None

    @cached_property
    def _csr(self):
        m = self.m
        a = np.concatenate([self.eu, self.ev])
        b = np.concatenate([self.ev, self.eu])
        eid = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((b, a))
        indices = b[order]
        inc = eid[order]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(a, minlength=self.n), out=indptr[1:])
        for arr in (indptr, indices, inc):
            arr.setflags(write=False)
        return indptr, np.ascontiguousarray(indices), np.ascontiguousarray(inc)

    @property
    def indptr(self) -> np.ndarray:
        return self._csr[0]

    @property
    def indices(self) -> np.ndarray:
        return self._csr[1]

    @property
    def inc_edge(self) -> np.ndarray:
        """Edge id of every CSR slot."""
        return self._csr[2]

    @cached_property
    def degrees(self) -> np.ndarray:
        if self.mult is None:
            d = np.diff(self.indptr)
        else:
            d = np.bincount(self.eu, weights=self.mult, minlength=self.n)
            d += np.bincount(self.ev, weights=self.mult, minlength=self.n)
            d = d.astype(np.int64)
        if self.loops is not None:
            d = d + self.loops
        d = np.asarray(d, dtype=np.int64)
        d.setflags(write=False)
        return d

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(v).tolist() for v in range(self.n)]

    def to_scipy(self) -> csr_matrix:
        data = np.ones(self.indices.size)
        return csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def subgraph(self, vertices) -> "Graph":
        """Induced simple subgraph, vertices relabelled in increasing order."""
        vertices = np.unique(np.asarray(vertices, dtype=np.int64))
        relabel = np.full(self.n, -1, dtype=np.int64)
        relabel[vertices] = np.arange(vertices.size)
        keep = (relabel[self.eu] >= 0) & (relabel[self.ev] >= 0)
        return Graph.from_edges(vertices.size, relabel[self.eu[keep]], relabel[self.ev[keep]])

    def flatten(self) -> "Graph":
        """Drop loops and cap multiplicities at one."""
        return Graph.from_edges(self.n, self.eu.copy(), self.ev.copy())

    @classmethod
    def from_pairs(cls, n, edges) -> "Graph":
        edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        return cls.from_edges(n, edges[:, 0], edges[:, 1])


@dataclass(frozen=True)
class ComponentDecomposition:
    labels: np.ndarray
    sizes: np.ndarray
    giant_id: int

    @property
    def count(self) -> int:
        return int(self.sizes.size)

    @property
    def giant_size(self) -> int:
        return int(self.sizes[self.giant_id]) if self.sizes.size else 0

    def members(self, cid: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cid)

    def second_largest(self) -> int:
        if self.sizes.size < 2:
            return 0
        return int(np.sort(self.sizes)[-2])


@dataclass(frozen=True)
class DegreeSummary:
    tail_exponent_estimate: float | None
    scaling_statistic: float
    max_degree: int
    tail_points: int = 0
    target_tail_exponent: float | None = field(default=None)


# ---------------------------------------------------------------- generators


def _weights_check(params: NetworkParams, variant: Variant):
    if params.variant is not variant:
        raise ValueError(f"expected variant {variant.value}, got {params.variant.value}")


def _pair_law(params: NetworkParams, gamma: float, law: int):
    n = params.n
    if n < 2 or params.beta == 0.0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    if n <= DENSE_MAX_N:
        return kernels.dense_pair_edges(n, float(params.beta), float(gamma), law, int(params.seed))
    rng = np.random.Generator(np.random.PCG64(int(params.seed)))
    return kernels.skip_pair_edges(n, float(params.beta), float(gamma), law, rng)


def gen_snr(params: NetworkParams) -> Graph:
    """Simplified Norros-Reittu graph: each pair independently present with
    probability ``1 - exp(-x_ij)``."""
    _weights_check(params, Variant.SNR)
    src, dst = _pair_law(params, params.gamma, LAW_SNR)
    return Graph.from_edges(params.n, src, dst)


def gen_chung_lu(params: NetworkParams) -> Graph:
    """Chung-Lu graph with ``p_ij = min(1, x_ij)``."""
    _weights_check(params, Variant.CHUNG_LU)
    src, dst = _pair_law(params, params.gamma, LAW_CHUNG_LU)
    return Graph.from_edges(params.n, src, dst)


def gen_er(params: NetworkParams) -> Graph:
    """Erdos-Renyi graph with ``p = beta / N``; ``gamma`` is ignored."""
    _weights_check(params, Variant.ER)
    if params.n >= 2 and params.beta > params.n:
        raise ValueError("Erdos-Renyi needs beta <= N")
    src, dst = _pair_law(params, 0.0, LAW_CHUNG_LU)
    return Graph.from_edges(params.n, src, dst)


def _zero_truncated_poisson(rng, lam):
    # inversion on (e^-lam, 1]; multiplicities are small so the loop is short
    lam = np.asarray(lam, dtype=np.float64)
    p0 = np.exp(-lam)
    u = p0 + rng.random(lam.shape) * (1.0 - p0)
    k = np.ones(lam.shape, dtype=np.int64)
    pmf = p0 * lam
    cdf = p0 + pmf
    todo = cdf < u
    while np.any(todo):
        k[todo] += 1
        pmf = pmf * lam / k
        cdf = cdf + pmf
        todo = todo & (cdf < u)
    return k


def gen_mnr(params: NetworkParams) -> Graph:
    """Multigraph Norros-Reittu: ``Pois(x_ij)`` edges per pair and
    ``Pois(beta/N * (N/i)**(2 gamma))`` loops at ``i``."""
    _weights_check(params, Variant.MNR)
    n, beta, gamma = params.n, float(params.beta), float(params.gamma)
    rng = np.random.Generator(np.random.PCG64(int(params.seed)))
    labels = np.arange(1, n + 1, dtype=np.float64)
    c = beta * float(n) ** (2.0 * gamma - 1.0)
    loops = rng.poisson(c * labels ** (-2.0 * gamma))
    if n <= MNR_DIRECT_MAX_N:
        a = labels ** (-gamma)
        iu, ju = np.triu_indices(n, k=1)
        counts = rng.poisson(c * a[iu] * a[ju])
        hit = counts > 0
        return Graph.from_edges(n, iu[hit], ju[hit], mult=counts[hit], loops=loops)
    # presence has exactly the SNR law; multiplicity is zero-truncated Poisson
    src, dst = kernels.skip_pair_edges(n, beta, gamma, LAW_SNR, rng)
    lam = c * (labels[src] ** (-gamma)) * (labels[dst] ** (-gamma))
    mult = _zero_truncated_poisson(rng, lam)
    return Graph.from_edges(n, src, dst, mult=mult, loops=loops)


_GENERATORS = {
    Variant.SNR: gen_snr,
    Variant.MNR: gen_mnr,
    Variant.CHUNG_LU: gen_chung_lu,
    Variant.ER: gen_er,
}


def generate(params: NetworkParams) -> Graph:
    return _GENERATORS[params.variant](params)


def edge_probability(params: NetworkParams, i: int, j: int) -> float:
    """Marginal probability of the simple edge between labels ``i != j``."""
    n, beta = params.n, params.beta
    gamma = 0.0 if params.variant is Variant.ER else params.gamma
    x = beta * float(n) ** (2.0 * gamma - 1.0) * float(i) ** (-gamma) * float(j) ** (-gamma)
    if params.variant in (Variant.SNR, Variant.MNR):
        return -math.expm1(-x)
    return min(1.0, x)


# ---------------------------------------------------------------- structure


def components(g: Graph) -> ComponentDecomposition:
    """Connected components; ids are ordered by their lowest vertex."""
    if g.n == 0:
        return ComponentDecomposition(np.empty(0, np.int64), np.empty(0, np.int64), -1)
    _, raw = connected_components(g.to_scipy(), directed=False)
    _, first = np.unique(raw, return_index=True)
    order = np.argsort(first)
    remap = np.empty(order.size, dtype=np.int64)
    remap[order] = np.arange(order.size)
    labels = remap[raw]
    sizes = np.bincount(labels)
    labels.setflags(write=False)
    sizes.setflags(write=False)
    return ComponentDecomposition(labels, sizes, int(np.argmax(sizes)))


def giant(g: Graph) -> Graph:
    """Induced subgraph on a largest component."""
    cd = components(g)
    return g.subgraph(cd.members(cd.giant_id))


def _bfs_far(g: Graph, s: int):
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[s] = 0
    frontier = np.array([s])
    d = 0
    last = frontier
    while frontier.size:
        last = frontier
        nb = np.concatenate([g.neighbors(v) for v in frontier]) if frontier.size else frontier
        nb = np.unique(nb)
        nb = nb[dist[nb] < 0]
        d += 1
        dist[nb] = d
        frontier = nb
    return int(last[0]), int(dist.max())


def double_sweep_lower_bound(g: Graph) -> int:
    """Two-BFS lower bound on the componentwise diameter."""
    cd = components(g)
    best = 0
    for cid in range(cd.count):
        if cd.sizes[cid] < 2:
            continue
        start = int(np.flatnonzero(cd.labels == cid)[0])
        far, _ = _bfs_far(g, start)
        _, ecc = _bfs_far(g, far)
        best = max(best, ecc)
    return best


def componentwise_diameter(g: Graph) -> int:
    """Largest graph distance between two vertices of the same component."""
    if g.n == 0:
        return 0
    ecc = kernels.eccentricities(g.indptr, g.indices)
    diam = int(ecc.max())
    assert diam >= double_sweep_lower_bound(g)
    return diam


def degree_summary(g: Graph, params: NetworkParams, min_degree: int = 10,
                   top_fraction: float = 0.01, min_points: int = 3) -> DegreeSummary:
    """Tail exponent from a log-log fit of the empirical degree survival
    function, plus ``max_v d(v) * (v/N)**gamma``.

    The fit uses distinct degrees ``k >= min_degree`` after discarding the
    largest ``top_fraction`` of order statistics. With fewer than
    ``min_points`` usable degrees the estimate is ``None`` and a warning is
    issued.
    """
    d = np.asarray(g.degrees, dtype=np.float64)
    n = g.n
    labels = np.arange(1, n + 1, dtype=np.float64)
    stat = float(np.max(d * (labels / n) ** params.gamma)) if n else 0.0
    max_deg = int(d.max()) if n else 0
    if params.gamma <= 0.0:
        return DegreeSummary(None, stat, max_deg)
    target = 1.0 + 1.0 / params.gamma
    ds = np.sort(d)
    cut = int(math.ceil(top_fraction * n))
    kept = ds[: n - cut] if cut < n else ds[:0]
    ks = np.unique(kept[kept >= min_degree])
    if ks.size < min_points:
        warnings.warn(f"only {ks.size} tail degrees >= {min_degree}; no tail fit", RuntimeWarning)
        return DegreeSummary(None, stat, max_deg, int(ks.size), target)
    surv = (n - np.searchsorted(ds, ks, side="left")) / n
    slope = np.polyfit(np.log(ks), np.log(surv), 1)[0]
    return DegreeSummary(float(1.0 - slope), stat, max_deg, int(ks.size), target)


# ---------------------------------------------------------------- edge lists


def write_edgelist(g: Graph, path) -> None:
    """Header ``n m``, then ``i j`` (1-indexed, sorted); multigraphs add a
    multiplicity column and list loops as ``i i k``."""
    rows = [(int(a) + 1, int(b) + 1, int(k)) for a, b, k in
            zip(g.eu, g.ev, g.mult if g.mult is not None else np.ones(g.m, dtype=np.int64))]
    if g.loops is not None:
        rows += [(v + 1, v + 1, int(k)) for v, k in enumerate(g.loops) if k > 0]
    rows.sort()
    with open(path, "w") as fh:
        fh.write(f"{g.n} {len(rows)}\n")
        for a, b, k in rows:
            fh.write(f"{a} {b} {k}\n" if g.is_multigraph else f"{a} {b}\n")


def read_edgelist(path) -> Graph:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("edge list header must be `n m`")
        n, m = int(header[0]), int(header[1])
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) != m:
        raise ValueError(f"header announces {m} edges, found {len(rows)}")
    if not rows:
        return Graph.from_edges(n, [], [])
    width = {len(r) for r in rows}
    if width not in ({2}, {3}):
        raise ValueError("edge rows must all have 2 or 3 columns")
    arr = np.array(rows, dtype=np.int64)
    a, b = arr[:, 0] - 1, arr[:, 1] - 1
    if width == {2}:
        return Graph.from_edges(n, a, b)
    k = arr[:, 2]
    loop = a == b
    loops = np.zeros(n, dtype=np.int64)
    np.add.at(loops, a[loop], k[loop])
    return Graph.from_edges(n, a[~loop], b[~loop], mult=k[~loop], loops=loops)


# ---------------------------------------------------------------- fixed families


def complete_graph(n: int) -> Graph:
    iu, ju = np.triu_indices(n, k=1)
    return Graph.from_edges(n, iu, ju)


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, np.arange(n - 1), np.arange(1, n))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    return Graph.from_edges(n, np.arange(n), (np.arange(n) + 1) % n)


def star_graph(leaves: int) -> Graph:
    """``K_{1,leaves}`` with the centre at vertex 0."""
    return Graph.from_edges(leaves + 1, np.zeros(leaves, dtype=np.int64), np.arange(1, leaves + 1))


def disjoint_union(*graphs: Graph) -> Graph:
    src, dst, off = [], [], 0
    for g in graphs:
        src.append(g.eu + off)
        dst.append(g.ev + off)
        off += g.n
    return Graph.from_edges(off, np.concatenate(src), np.concatenate(dst))


def all_connected_graphs(n: int):
    """Every connected labelled simple graph on ``n`` vertices (n <= 7)."""
    if n > 7:
        raise ValueError("enumeration is limited to n <= 7")
    if n == 1:
        yield Graph.from_edges(1, [], [])
        return
    iu, ju = np.triu_indices(n, k=1)
    for mask in range(1, 1 << iu.size):
        pick = np.array([(mask >> k) & 1 for k in range(iu.size)], dtype=bool)
        if pick.sum() < n - 1:
            continue
        g = Graph.from_edges(n, iu[pick], ju[pick])
        if components(g).count == 1:
            yield g


def nonisomorphic_connected_graphs(n: int) -> list[Graph]:
    """One representative per isomorphism class of connected graphs (n <= 6).

    Every edge mask is mapped to the smallest mask over all vertex
    permutations; the distinct minima are the classes.
    """
    if n > 6:
        raise ValueError("isomorphism enumeration is limited to n <= 6")
    if n <= 1:
        return [Graph.from_edges(max(n, 1), [], [])]
    iu, ju = np.triu_indices(n, k=1)
    slot = np.full((n, n), -1, dtype=np.int64)
    slot[iu, ju] = slot[ju, iu] = np.arange(iu.size)
    masks = np.arange(1 << iu.size, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(iu.size)) & 1
    canon = masks.copy()
    for perm in itertools.permutations(range(n)):
        p = np.asarray(perm)
        target = slot[p[iu], p[ju]]
        canon = np.minimum(canon, (bits << target).sum(axis=1))
    out = []
    for mask in np.unique(canon):
        pick = ((int(mask) >> np.arange(iu.size)) & 1).astype(bool)
        if pick.sum() < n - 1:
            continue
        g = Graph.from_edges(n, iu[pick], ju[pick])
        if components(g).count == 1:
            out.append(g)
    return out
