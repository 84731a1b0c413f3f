"""Exact Markov-chain analysis on small graphs.

Generators, stationary laws, relaxation and total-variation mixing times,
conductances, Cheeger constants, electrical hitting bounds, meeting times of
two independent walkers, and linear-solve oracles for the voter model and the
coalescing walkers. Everything here is exact up to floating point; beyond the
size caps the functions refuse rather than approximate.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import netgen
from ._backend import kernels
from .dynamics import check_theta, dual_rates, edge_weights
from .netgen import Graph

DENSE_CAP = 2000
PRODUCT_CAP = 200
EXHAUSTIVE_CHEEGER_MAX = 24
STATE_CAP = 200_000
REVERSIBILITY_TOL = 1e-12
# from the 1/e threshold
TV_LEVEL = math.exp(-1.0)


@dataclass(frozen=True)
class GeneratorMatrix:
    """Dense rate matrix ``q`` with stationary distribution ``pi``."""
    q: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("generator must be square")
        off = q - np.diag(np.diag(q))
        if (off < 0).any():
            raise ValueError("off-diagonal rates must be nonnegative")
        scale = max(1.0, float(np.abs(q).max(initial=0.0)))
        if np.abs(q.sum(axis=1)).max(initial=0.0) > 1e-12 * scale * q.shape[0]:
            raise ValueError("generator rows must sum to zero")
        pi = np.array(self.pi, dtype=np.float64)
        if pi.shape != (q.shape[0],) or (pi < 0).any() or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("pi must be a probability vector of matching length")
        q.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "pi", pi)

    @classmethod
    def from_rates(cls, q) -> "GeneratorMatrix":
        """Generator with the stationary law solved from ``pi Q = 0``."""
        q = np.asarray(q, dtype=np.float64)
        n = q.shape[0]
        a = np.vstack([q.T, np.ones(n)])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
        pi = np.clip(pi, 0.0, None)
        return cls(q, pi / pi.sum())

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def rates(self) -> np.ndarray:
        """Vertex rates ``q(i) = -Q(i, i)``."""
        return -np.diag(self.q).copy()

    def scaled(self, c: float) -> "GeneratorMatrix":
        return GeneratorMatrix(self.q * c, self.pi)

    def reversibility_defect(self) -> float:
        flow = self.pi[:, None] * self.q
        return float(np.abs(flow - flow.T).max(initial=0.0))

    def is_reversible(self, tol: float = REVERSIBILITY_TOL) -> bool:
        return self.reversibility_defect() <= tol * max(1.0, float(np.abs(self.q).max()))

    def to_csv(self, path) -> None:
        write_matrix_csv(self.q, path)


def write_matrix_csv(a, path) -> None:
    """Row-major CSV with 17 significant digits."""
    np.savetxt(path, np.atleast_2d(np.asarray(a, dtype=np.float64)), fmt="%.17g", delimiter=",")


def read_matrix_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))


# ---------------------------------------------------------------- construction


def _require_connected(g: Graph, cap: int):
    if g.n > cap:
        raise ValueError(f"graph has {g.n} vertices, above the dense cap {cap}")
    if g.n == 0 or netgen.components(g).count != 1:
        raise ValueError("graph must be connected: the stationary law is not unique otherwise")


def _dense_from_slots(g: Graph, slot_rates: np.ndarray) -> np.ndarray:
    q = np.zeros((g.n, g.n))
    rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
    q[rows, g.indices] = slot_rates
    q[np.diag_indices(g.n)] = -q.sum(axis=1)
    return q


def build_dual_generator(g: Graph, theta: float, cap: int = DENSE_CAP) -> GeneratorMatrix:
    """Dual walker generator ``Q(i,j) = (d(i)**(theta-1) + d(j)**(theta-1)) / 2``.

    The rates are symmetric, so the stationary law is uniform.
    """
    check_theta(theta)
    _require_connected(g, cap)
    r, _, _ = dual_rates(g, theta)
    return GeneratorMatrix(_dense_from_slots(g, r), np.full(g.n, 1.0 / g.n))


def build_vsrw_generator(g: Graph, cap: int = DENSE_CAP) -> GeneratorMatrix:
    """Variable speed random walk: unit rate across every edge."""
    _require_connected(g, cap)
    return GeneratorMatrix(_dense_from_slots(g, np.ones(g.indices.size)), np.full(g.n, 1.0 / g.n))


# ---------------------------------------------------------------- spectra


def _symmetrized(gm: GeneratorMatrix):
    if not gm.is_reversible():
        raise ValueError(f"generator is not reversible (defect {gm.reversibility_defect():.3g})")
    s = np.sqrt(gm.pi)
    sym = s[:, None] * gm.q / s[None, :]
    return 0.5 * (sym + sym.T), s


def spectrum(gm: GeneratorMatrix) -> np.ndarray:
    """Eigenvalues of a reversible generator, ascending (all <= 0)."""
    sym, _ = _symmetrized(gm)
    return np.linalg.eigvalsh(sym)


def relaxation_time(gm: GeneratorMatrix) -> float:
    """Inverse spectral gap ``-1/lambda_2``."""
    if gm.n == 1:
        return 0.0
    lam = spectrum(gm)
    gap = -lam[-2]
    if gap <= 0:
        raise ValueError("zero spectral gap: chain is reducible")
    return float(1.0 / gap)


def relaxation_time_sparse(g: Graph, theta: float = 1.0, seed: int = 0) -> float:
    """Dual-walk relaxation time of a connected graph by iterative eigensolvers.

    The dual generator is symmetric, so ``-Q`` is a weighted Laplacian whose
    null space is the constants. The gap is its smallest eigenvalue on the
    orthogonal complement, found by Jacobi-preconditioned LOBPCG with the
    constants deflated. If the residual check fails, shift-invert Lanczos
    (slower: the factorization fills in around hubs) is used instead.
    """
    check_theta(theta)
    if g.n < 2:
        return 0.0
    if netgen.components(g).count != 1:
        raise ValueError("graph must be connected")
    r, _, q = dual_rates(g, theta)
    rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
    lap = (sp.csr_matrix((-r, (rows, g.indices)), shape=(g.n, g.n)) + sp.diags(q)).tocsr()
    if g.n <= 64:
        lam = np.linalg.eigvalsh(lap.toarray())
        return float(1.0 / lam[1])
    x = np.random.default_rng(seed).standard_normal((g.n, 3))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lam, vec = spla.lobpcg(lap, x, M=sp.diags(1.0 / q), Y=np.ones((g.n, 1)),
                               largest=False, tol=1e-9, maxiter=5000)
    k = int(np.argmin(lam))
    v = vec[:, k]
    resid = np.linalg.norm(lap @ v - lam[k] * v) / np.linalg.norm(v)
    if lam[k] > 0 and resid <= 1e-6 * float(q.max()):
        return 1.0 / float(lam[k])
    shift = -1e-3 * float(q.min())
    lam = spla.eigsh(lap.tocsc(), k=2, sigma=shift, which="LM", return_eigenvectors=False)
    return 1.0 / float(np.max(lam))


def relaxation_time_of(g: Graph, theta: float = 1.0, cap: int = DENSE_CAP) -> float:
    """Dense eigen-decomposition up to ``cap`` vertices, Lanczos above."""
    if g.n <= cap:
        return relaxation_time(build_dual_generator(g, theta, cap))
    return relaxation_time_sparse(g, theta)


# ---------------------------------------------------------------- mixing


class _Propagator:
    """``exp(tQ)`` through the symmetric eigen-decomposition."""

    def __init__(self, gm: GeneratorMatrix):
        sym, s = _symmetrized(gm)
        self.lam, self.vec = np.linalg.eigh(sym)
        self.left = self.vec / s[:, None]
        self.right = (self.vec * s[:, None]).T
        self.pi = gm.pi

    def kernel(self, t: float) -> np.ndarray:
        return (self.left * np.exp(self.lam * t)) @ self.right

    def distance(self, t: float) -> float:
        """``max_x TV(p_t(x, .), pi)``."""
        return 0.5 * float(np.abs(self.kernel(t) - self.pi[None, :]).sum(axis=1).max())


def transition_kernel(gm: GeneratorMatrix, t: float) -> np.ndarray:
    return _Propagator(gm).kernel(t)


def tv_distance(gm: GeneratorMatrix, t: float) -> float:
    return _Propagator(gm).distance(t)


def tv_mixing_time(gm: GeneratorMatrix, level: float = TV_LEVEL, tol: float = 1e-6) -> float:
    """Smallest ``t`` with worst-start TV distance ``<= level``, by bisection.

    The worst-start distance is non-increasing in ``t``, and the upper end of
    the bracket uses ``t_mix <= t_rel (1 + log(n)/2)`` with a safety factor.
    """
    if gm.n == 1:
        return 0.0
    prop = _Propagator(gm)
    if prop.distance(0.0) <= level:
        return 0.0
    hi = 10.0 * relaxation_time(gm) * (1.0 + 0.5 * math.log(gm.n))
    while prop.distance(hi) > level:
        hi *= 2.0
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if prop.distance(mid) > level:
            lo = mid
        else:
            hi = mid
    return float(hi)


# ---------------------------------------------------------------- conductance and Cheeger


@dataclass(frozen=True)
class ConductanceMap:
    """Ergodic flow ``c(ij) = pi(i) Q(i, j)`` on the edges ``pairs`` (i < j)."""
    pairs: np.ndarray
    values: np.ndarray
    n: int

    def __getitem__(self, key) -> float:
        i, j = key
        a, b = (i, j) if i < j else (j, i)
        hit = np.flatnonzero((self.pairs[:, 0] == a) & (self.pairs[:, 1] == b))
        if hit.size == 0:
            raise KeyError(key)
        return float(self.values[hit[0]])

    def dense(self) -> np.ndarray:
        c = np.zeros((self.n, self.n))
        c[self.pairs[:, 0], self.pairs[:, 1]] = self.values
        return c + c.T


def edge_conductances(gm: GeneratorMatrix) -> ConductanceMap:
    if not gm.is_reversible():
        raise ValueError("conductances need a reversible generator")
    flow = gm.pi[:, None] * gm.q
    iu, ju = np.triu_indices(gm.n, k=1)
    keep = flow[iu, ju] > 0
    pairs = np.column_stack([iu[keep], ju[keep]])
    # average the two directions; they agree to the reversibility tolerance
    vals = 0.5 * (flow[iu[keep], ju[keep]] + flow[ju[keep], iu[keep]])
    return ConductanceMap(pairs, vals, gm.n)


def cheeger_exact(g: Graph) -> Fraction:
    """Exhaustive ``min e(S, S^c) / |S|`` over ``1 <= |S| <= n/2``."""
    if g.n < 2:
        raise ValueError("Cheeger constant needs at least two vertices")
    if g.n > EXHAUSTIVE_CHEEGER_MAX:
        raise ValueError(f"exhaustive search is limited to n <= {EXHAUSTIVE_CHEEGER_MAX}")
    if g.is_multigraph:
        g = g.flatten()
    cut, size = kernels.cheeger_exhaustive(g.n, g.eu, g.ev)
    return Fraction(int(cut), int(size))


def cheeger_sweep_bound(g: Graph) -> float:
    """Upper bound on the Cheeger constant from Fiedler-vector sweep cuts."""
    n = g.n
    lap = sp.csgraph.laplacian(g.to_scipy().astype(np.float64))
    if n <= 400:
        _, vec = np.linalg.eigh(lap.toarray())
        fiedler = vec[:, 1]
    else:
        _, vec = spla.eigsh(lap.tocsc(), k=2, sigma=-1e-3, which="LM")
        fiedler = vec[:, 1]
    deg = g.degrees.astype(np.int64)
    best = math.inf
    for order in (np.argsort(fiedler, kind="stable"), np.argsort(-fiedler, kind="stable")):
        pos = np.empty(n, dtype=np.int64)
        pos[order] = np.arange(n)
        # an edge is internal to the prefix of length k once k > max position
        inner = np.bincount(np.maximum(pos[g.eu], pos[g.ev]), minlength=n)
        k = np.arange(1, n // 2 + 1)
        vol = np.cumsum(deg[order])[: k.size]
        internal = np.cumsum(inner)[: k.size]
        cut = vol - 2 * internal
        best = min(best, float((cut / k).min()))
    return best


def cheeger_constant(g: Graph) -> float:
    """Exact for ``n <= 24``, a certified sweep-cut upper bound above."""
    if g.n <= EXHAUSTIVE_CHEEGER_MAX:
        return float(cheeger_exact(g))
    return cheeger_sweep_bound(g)


def cheeger_relax_sandwich(g: Graph):
    """``(1/(2 Phi), t_rel, 8 dmax / Phi**2)`` for the VSRW, with the ordering asserted."""
    phi = float(cheeger_exact(g))
    t_rel = relaxation_time(build_vsrw_generator(g))
    lower = 1.0 / (2.0 * phi)
    upper = 8.0 * float(g.degrees.max()) / phi**2
    slack = 1e-12 * max(1.0, t_rel)
    assert lower <= t_rel + slack and t_rel <= upper + slack, (lower, t_rel, upper)
    return lower, float(t_rel), upper


# ---------------------------------------------------------------- hitting and commute times


def hitting_times(gm: GeneratorMatrix, target: int) -> np.ndarray:
    """``E_i T_target`` for every start ``i``."""
    n = gm.n
    keep = np.arange(n) != target
    h = np.zeros(n)
    if n > 1:
        h[keep] = np.linalg.solve(-gm.q[np.ix_(keep, keep)], np.ones(n - 1))
    return h


def commute_time(gm: GeneratorMatrix, i: int, j: int) -> float:
    if i == j:
        return 0.0
    return float(hitting_times(gm, j)[i] + hitting_times(gm, i)[j])


def path_hitting_bound(gm: GeneratorMatrix, path) -> float:
    """Resistance of a path, ``sum 1/c(e)``: bounds the commute time of its ends."""
    path = [int(v) for v in path]
    if not path:
        raise ValueError("path is empty")
    if len(set(path)) != len(path):
        raise ValueError("path repeats a vertex")
    if min(path) < 0 or max(path) >= gm.n:
        raise ValueError("path vertex out of range")
    total = 0.0
    for a, b in zip(path, path[1:]):
        c = gm.pi[a] * gm.q[a, b]
        if not c > 0:
            raise ValueError(f"consecutive vertices {a} and {b} are not adjacent")
        total += 1.0 / c
    return total


# ---------------------------------------------------------------- meeting times


def meeting_times(gm: GeneratorMatrix, cap: int = PRODUCT_CAP) -> np.ndarray:
    """Matrix of expected meeting times of two independent copies.

    Solved on the product chain with generator ``Q x I + I x Q`` and the
    diagonal absorbing.
    """
    n = gm.n
    if n > cap:
        raise ValueError(f"product chain on {n}**2 states exceeds the cap {cap}**2")
    q = sp.csr_matrix(gm.q)
    eye = sp.identity(n, format="csr")
    joint = (sp.kron(q, eye) + sp.kron(eye, q)).tocsr()
    off = np.flatnonzero(~np.eye(n, dtype=bool).ravel())
    m = np.zeros(n * n)
    if off.size:
        a = -joint[off][:, off]
        m[off] = spla.spsolve(a.tocsc(), np.ones(off.size))
    return m.reshape(n, n)


def exact_meeting_time(gm: GeneratorMatrix, x: int, y: int) -> float:
    if x == y:
        return 0.0
    return float(meeting_times(gm)[x, y])


def stationary_meeting_time(gm: GeneratorMatrix) -> float:
    """Meeting time with both copies started independently from ``pi``."""
    return float(gm.pi @ meeting_times(gm) @ gm.pi)


def worst_meeting_time(gm: GeneratorMatrix) -> float:
    return float(meeting_times(gm).max())


def meeting_lower_bound(gm: GeneratorMatrix) -> float:
    """``(1 - sum pi**2)**2 / (4 sum q(i) pi(i)**2)``."""
    p2 = gm.pi**2
    return (1.0 - p2.sum()) ** 2 / (4.0 * float(gm.rates @ p2))


def relaxation_monotone_check(g: Graph, thetas, rtol: float = 1e-10):
    """Assert the dual relaxation time is non-increasing in ``theta``.

    Returns the ``(theta, t_rel)`` pairs in increasing ``theta``.
    """
    out = [(float(t), relaxation_time(build_dual_generator(g, t))) for t in sorted(thetas)]
    for (t0, r0), (t1, r1) in zip(out, out[1:]):
        assert r1 <= r0 * (1.0 + rtol), f"t_rel increases from theta={t0} ({r0}) to theta={t1} ({r1})"
    return out


# ---------------------------------------------------------------- absorption oracles


def _absorption_time(start, step, absorbing) -> float:
    """Expected hitting time of the absorbing set for a finite chain given by
    ``step(state) -> [(next_state, rate), ...]``, explored from ``start``."""
    if absorbing(start):
        return 0.0
    index = {start: 0}
    order = [start]
    rows, cols, vals = [], [], []
    k = 0
    while k < len(order):
        s = order[k]
        if not absorbing(s):
            out = 0.0
            for nxt, rate in step(s):
                if rate <= 0 or nxt == s:
                    continue
                out += rate
                if nxt not in index:
                    index[nxt] = len(order)
                    order.append(nxt)
                    if len(order) > STATE_CAP:
                        raise ValueError(f"state space exceeds {STATE_CAP} states")
                rows.append(k)
                cols.append(index[nxt])
                vals.append(-rate)
            rows.append(k)
            cols.append(k)
            vals.append(out)
        k += 1
    transient = np.array([not absorbing(s) for s in order])
    a = sp.csr_matrix((vals, (rows, cols)), shape=(len(order), len(order)))
    idx = np.flatnonzero(transient)
    sub = a[idx][:, idx]
    b = np.ones(idx.size)
    if idx.size <= 2000:
        x = sla.solve(sub.toarray(), b)
    else:
        x = spla.spsolve(sub.tocsc(), b)
    return float(x[np.searchsorted(idx, 0)])


def _canonical(labels) -> tuple:
    seen = {}
    return tuple(seen.setdefault(v, len(seen)) for v in labels)


def exact_consensus_time(g: Graph, theta: float, labels) -> float:
    """Expected time until every component is constant, for the voter model
    started from the given (arbitrary, possibly many-valued) labels.

    Label values only matter up to renaming, so states are canonical
    first-occurrence relabellings.
    """
    check_theta(theta)
    if g.is_multigraph:
        raise ValueError("voter oracle needs a simple graph")
    labels = np.asarray(labels)
    if labels.shape != (g.n,):
        raise ValueError("one label per vertex required")
    eu, ev = g.eu.tolist(), g.ev.tolist()
    half = (0.5 * edge_weights(g, theta)).tolist()

    # constant on every component <=> no discordant edge
    def absorbing(s):
        return all(s[a] == s[b] for a, b in zip(eu, ev))

    def step(s):
        out = []
        for a, b, h in zip(eu, ev, half):
            if s[a] != s[b]:
                x = list(s)
                x[a] = s[b]
                out.append((_canonical(x), h))
                x = list(s)
                x[b] = s[a]
                out.append((_canonical(x), h))
        return out

    return _absorption_time(_canonical(labels.tolist()), step, absorbing)


def exact_coalescence_time(g: Graph, theta: float, occupied=None) -> float:
    """Expected time until the coalescing dual walkers started on ``occupied``
    (default: every vertex) leave one walker in each occupied component."""
    check_theta(theta)
    if g.n > 62:
        raise ValueError("subset states are limited to n <= 62")
    occ = range(g.n) if occupied is None else occupied
    start = 0
    for v in occ:
        start |= 1 << int(v)
    if start == 0:
        raise ValueError("walker set is empty")
    r, _, _ = dual_rates(g, theta)
    nbrs = [list(zip(g.indices[g.indptr[i]:g.indptr[i + 1]].tolist(),
                     r[g.indptr[i]:g.indptr[i + 1]].tolist())) for i in range(g.n)]
    comp = netgen.components(g).labels.tolist()
    masks = {}
    for v, c in enumerate(comp):
        masks[c] = masks.get(c, 0) | (1 << v)
    comp_masks = list(masks.values())

    def absorbing(s):
        return all((s & cm) & ((s & cm) - 1) == 0 for cm in comp_masks)

    def step(s):
        out = []
        x = s
        while x:
            low = x & -x
            i = low.bit_length() - 1
            x ^= low
            for j, rate in nbrs[i]:
                out.append(((s & ~low) | (1 << j), rate))
        return out

    return _absorption_time(start, step, absorbing)
