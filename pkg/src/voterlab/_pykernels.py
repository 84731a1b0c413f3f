"""Pure-Python implementations of the hot kernels.

Every function here has a twin of the same name and signature in the compiled
``_ckernels`` extension. Both draw uniforms through ``Generator.random()`` /
``bitgen.next_double`` in the same order, so for a given seed the two
backends produce bit-identical output.

Status codes returned by the event loops: 0 = absorbed, 1 = event cap hit,
2 = wall-clock deadline hit, 3 = non-finite or non-positive total rate.
"""
import math
import time
from collections import deque

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
INV53 = 1.0 / 9007199254740992.0

LAW_SNR = 0
LAW_CHUNG_LU = 1

ABSORBED = 0
EVENT_CAP = 1
DEADLINE = 2
BAD_RATE = 3

_DEADLINE_MASK = (1 << 20) - 1


def _mix64_vec(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def pair_uniform(seed, i, j):
    """Counter-based uniform in [0, 1) attached to the labelled pair (i, j)."""
    with np.errstate(over="ignore"):
        key = (np.asarray(i, dtype=np.uint64) << np.uint64(32)) | np.asarray(j, dtype=np.uint64)
        h = _mix64_vec(np.uint64(seed) ^ _mix64_vec(key + np.uint64(GOLDEN)))
    return (h >> np.uint64(11)).astype(np.float64) * INV53


def dense_pair_edges(n, beta, gamma, law, seed):
    """Decide every pair i < j independently from its counter-based uniform.

    Vertices are 0-indexed in the output; the weight formula uses labels 1..n.
    """
    c = beta * float(n) ** (2.0 * gamma - 1.0)
    a = np.arange(1, n + 1, dtype=np.float64) ** (-gamma)
    src, dst = [], []
    for i in range(1, n):
        js = np.arange(i + 1, n + 1, dtype=np.int64)
        x = (c * a[i - 1]) * a[js - 1]
        u = pair_uniform(seed, i, js)
        if law == LAW_SNR:
            p = -np.expm1(-x)
        else:
            p = np.minimum(1.0, x)
        hit = js[(u < x) & (u < p)]
        if hit.size:
            src.append(np.full(hit.size, i - 1, dtype=np.int64))
            dst.append(hit - 1)
    if not src:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(src), np.concatenate(dst)


def skip_pair_edges(n, beta, gamma, law, rng):
    """Geometric skip sampling against the decreasing bound min(1, x_ij)."""
    c = beta * float(n) ** (2.0 * gamma - 1.0)
    src, dst = [], []
    for i in range(1, n):
        ca = c * float(i) ** (-gamma)
        j = i + 1
        while j <= n:
            p = ca * float(j) ** (-gamma)
            if p > 1.0:
                p = 1.0
            if p <= 0.0:
                break
            if p < 1.0:
                r = rng.random()
                k = math.floor(math.log1p(-r) / math.log1p(-p))
                if k > n:
                    break
                j += int(k)
                if j > n:
                    break
            x = ca * float(j) ** (-gamma)
            if law == LAW_SNR:
                q = -math.expm1(-x)
            else:
                q = x if x < 1.0 else 1.0
            if rng.random() * p < q:
                src.append(i - 1)
                dst.append(j - 1)
            j += 1
    return np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64)


# ---------------------------------------------------------------- sum tree


class _SumTree:
    def __init__(self, size):
        p = 1
        while p < max(size, 1):
            p <<= 1
        self.p = p
        self.t = [0.0] * (2 * p)

    def set(self, k, w):
        t = self.t
        i = self.p + k
        t[i] = w
        i >>= 1
        while i >= 1:
            t[i] = t[2 * i] + t[2 * i + 1]
            i >>= 1

    def total(self):
        return self.t[1]

    def find(self, u):
        t = self.t
        i = 1
        p = self.p
        while i < p:
            left = t[2 * i]
            if u < left or t[2 * i + 1] <= 0.0:
                i = 2 * i
            else:
                u -= left
                i = 2 * i + 1
        return i - p


def _fill_checkpoints(cp, cpv, k, tnext, value):
    while k < len(cp) and cp[k] < tnext:
        cpv[k] = value
        k += 1
    return k


# ---------------------------------------------------------------- voter


def voter_edge_run(indptr, indices, inc_edge, eu, ev, w, opinions, rng,
                   checkpoints, max_events, sample_every, deadline):
    """Discordant-edge jump chain. ``opinions`` (int8) is updated in place."""
    m = len(eu)
    tree = _SumTree(m)
    ndisc = 0
    for e in range(m):
        if opinions[eu[e]] != opinions[ev[e]]:
            tree.set(e, float(w[e]))
            ndisc += 1
    nones = int(np.sum(opinions))
    cp = checkpoints
    cpv = np.empty(len(cp), dtype=np.float64)
    k = 0
    t = 0.0
    events = 0
    status = ABSORBED
    traj_t, traj_s = [], []
    if sample_every > 0:
        traj_t.append(0.0)
        traj_s.append(nones)
    while ndisc > 0:
        if max_events >= 0 and events >= max_events:
            status = EVENT_CAP
            break
        if deadline > 0.0 and (events & _DEADLINE_MASK) == 0 and events and time.monotonic() > deadline:
            status = DEADLINE
            break
        total = tree.total()
        if not (total > 0.0) or math.isinf(total):
            status = BAD_RATE
            break
        tnext = t - math.log(1.0 - rng.random()) / total
        k = _fill_checkpoints(cp, cpv, k, tnext, nones)
        t = tnext
        e = tree.find(rng.random() * total)
        if rng.random() < 0.5:
            v = eu[e]
        else:
            v = ev[e]
        ov = 1 - opinions[v]
        opinions[v] = ov
        nones += 1 if ov else -1
        for s in range(indptr[v], indptr[v + 1]):
            f = inc_edge[s]
            if opinions[indices[s]] != ov:
                tree.set(f, float(w[f]))
                ndisc += 1
            else:
                tree.set(f, 0.0)
                ndisc -= 1
        events += 1
        if sample_every > 0 and events % sample_every == 0:
            traj_t.append(t)
            traj_s.append(nones)
    if status == ABSORBED:
        while k < len(cp):
            cpv[k] = nones
            k += 1
    else:
        cpv[k:] = np.nan
    if sample_every > 0 and (not traj_t or traj_t[-1] != t):
        traj_t.append(t)
        traj_s.append(nones)
    return t, events, status, cpv, np.asarray(traj_t), np.asarray(traj_s, dtype=np.float64)


def voter_naive_run(indptr, indices, act, alias_prob, alias_idx, total_rate,
                    comp, comp_size, opinions, rng, checkpoints, max_events,
                    sample_every, deadline):
    """Per-vertex firing: vertex fires at rate d^theta, picks a uniform
    neighbour, the pair adopts one of its two opinions uniformly."""
    ncomp = len(comp_size)
    ones = np.zeros(ncomp, dtype=np.int64)
    for v in range(len(opinions)):
        if opinions[v]:
            ones[comp[v]] += 1
    nonmono = 0
    for c in range(ncomp):
        if 0 < ones[c] < comp_size[c]:
            nonmono += 1
    nones = int(ones.sum())
    K = len(act)
    cp = checkpoints
    cpv = np.empty(len(cp), dtype=np.float64)
    k = 0
    t = 0.0
    events = 0
    status = ABSORBED
    traj_t, traj_s = [], []
    if sample_every > 0:
        traj_t.append(0.0)
        traj_s.append(nones)
    if nonmono > 0 and not (total_rate > 0.0 and math.isfinite(total_rate)):
        status = BAD_RATE
    while nonmono > 0 and status == ABSORBED:
        if max_events >= 0 and events >= max_events:
            status = EVENT_CAP
            break
        if deadline > 0.0 and (events & _DEADLINE_MASK) == 0 and events and time.monotonic() > deadline:
            status = DEADLINE
            break
        tnext = t - math.log(1.0 - rng.random()) / total_rate
        k = _fill_checkpoints(cp, cpv, k, tnext, nones)
        t = tnext
        slot = int(rng.random() * K)
        if rng.random() < alias_prob[slot]:
            a = act[slot]
        else:
            a = act[alias_idx[slot]]
        lo = indptr[a]
        deg = indptr[a + 1] - lo
        b = indices[lo + int(rng.random() * deg)]
        if rng.random() < 0.5:
            v, src = a, b
        else:
            v, src = b, a
        events += 1
        if opinions[v] != opinions[src]:
            c = comp[v]
            was_mixed = 0 < ones[c] < comp_size[c]
            ov = opinions[src]
            opinions[v] = ov
            if ov:
                ones[c] += 1
                nones += 1
            else:
                ones[c] -= 1
                nones -= 1
            is_mixed = 0 < ones[c] < comp_size[c]
            if was_mixed and not is_mixed:
                nonmono -= 1
        if sample_every > 0 and events % sample_every == 0:
            traj_t.append(t)
            traj_s.append(nones)
    if status == ABSORBED:
        while k < len(cp):
            cpv[k] = nones
            k += 1
    else:
        cpv[k:] = np.nan
    if sample_every > 0 and (not traj_t or traj_t[-1] != t):
        traj_t.append(t)
        traj_s.append(nones)
    return t, events, status, cpv, np.asarray(traj_t), np.asarray(traj_s, dtype=np.float64)


# ---------------------------------------------------------------- walkers


def _pick_neighbour_slot(cum, lo, hi, r):
    # first slot in [lo, hi) whose cumulative rate exceeds r; last slot on round-off
    hi -= 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[mid] > r:
            hi = mid
        else:
            lo = mid + 1
    return lo


def coalesce_run(n, indptr, indices, cum, q, comp, positions, rng,
                 max_events, sample_every, deadline):
    """Coalescing walkers with per-edge dual rates; ``cum`` holds per-vertex
    cumulative rates along each CSR row, ``q`` the row totals."""
    nw = len(positions)
    pos = np.array(positions, dtype=np.int64)
    occ = np.full(n, -1, dtype=np.int64)
    alive = np.zeros(nw, dtype=np.int8)
    tree = _SumTree(nw)
    nalive = 0
    seen = set()
    for wk in range(nw):
        v = pos[wk]
        seen.add(int(comp[v]))
        if occ[v] < 0:
            occ[v] = wk
            alive[wk] = 1
            nalive += 1
            tree.set(wk, float(q[v]))
    target = len(seen)
    t = 0.0
    events = 0
    status = ABSORBED
    traj_t, traj_s = [], []
    if sample_every > 0:
        traj_t.append(0.0)
        traj_s.append(nalive)
    while nalive > target:
        if max_events >= 0 and events >= max_events:
            status = EVENT_CAP
            break
        if deadline > 0.0 and (events & _DEADLINE_MASK) == 0 and events and time.monotonic() > deadline:
            status = DEADLINE
            break
        total = tree.total()
        if not (total > 0.0) or math.isinf(total):
            status = BAD_RATE
            break
        t -= math.log(1.0 - rng.random()) / total
        wk = tree.find(rng.random() * total)
        i = pos[wk]
        r = rng.random() * q[i]
        s = _pick_neighbour_slot(cum, indptr[i], indptr[i + 1], r)
        j = indices[s]
        occ[i] = -1
        if occ[j] >= 0:
            alive[wk] = 0
            nalive -= 1
            tree.set(wk, 0.0)
        else:
            occ[j] = wk
            pos[wk] = j
            tree.set(wk, float(q[j]))
        events += 1
        if sample_every > 0 and events % sample_every == 0:
            traj_t.append(t)
            traj_s.append(nalive)
    if sample_every > 0 and (not traj_t or traj_t[-1] != t):
        traj_t.append(t)
        traj_s.append(nalive)
    final = pos[alive.astype(bool)]
    return t, events, status, final, np.asarray(traj_t), np.asarray(traj_s, dtype=np.float64)


def walk_trajectory(indptr, indices, cum, q, start, t_max, rng):
    """Single walker path on [0, t_max]: jump times (first entry 0) and states."""
    times = [0.0]
    states = [int(start)]
    i = int(start)
    t = 0.0
    while True:
        qi = q[i]
        if not (qi > 0.0):
            break
        t -= math.log(1.0 - rng.random()) / qi
        if t > t_max:
            break
        r = rng.random() * qi
        s = _pick_neighbour_slot(cum, indptr[i], indptr[i + 1], r)
        i = int(indices[s])
        times.append(t)
        states.append(i)
    return np.asarray(times), np.asarray(states, dtype=np.int64)


# ---------------------------------------------------------------- structure


def eccentricities(indptr, indices):
    """BFS eccentricity of every vertex within its own component."""
    n = len(indptr) - 1
    ecc = np.zeros(n, dtype=np.int64)
    for s in range(n):
        dist = {s: 0}
        dq = deque([s])
        far = 0
        while dq:
            v = dq.popleft()
            dv = dist[v]
            if dv > far:
                far = dv
            for k in range(indptr[v], indptr[v + 1]):
                u = int(indices[k])
                if u not in dist:
                    dist[u] = dv + 1
                    dq.append(u)
        ecc[s] = far
    return ecc


def cheeger_exhaustive(n, eu, ev):
    """min over 1 <= |S| <= n/2 of e(S, S^c)/|S| as an integer pair (cut, size)."""
    nbr = [0] * n
    for a, b in zip(eu, ev):
        nbr[a] |= 1 << int(b)
        nbr[b] |= 1 << int(a)
    deg = [bin(x).count("1") for x in nbr]
    best_num, best_den = -1, 1
    S = 0
    size = 0
    cut = 0
    half = n // 2
    for k in range(1, 1 << n):
        b = (k & -k).bit_length() - 1
        inside = bin(nbr[b] & S).count("1")
        if S >> b & 1:
            S &= ~(1 << b)
            size -= 1
            cut += 2 * inside - deg[b]
        else:
            S |= 1 << b
            size += 1
            cut += deg[b] - 2 * inside
        if 1 <= size <= half:
            if best_num < 0 or cut * best_den < best_num * size:
                best_num, best_den = cut, size
    return best_num, best_den
