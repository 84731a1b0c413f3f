# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``_pykernels`` call-for-call."""
import time

import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, expm1, floor, isinf, log, log1p, pow
from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport free, malloc
from libc.string cimport memset
from numpy.random cimport bitgen_t

cnp.import_array()

DEF ABSORBED = 0
DEF EVENT_CAP = 1
DEF DEADLINE_CODE = 2
DEF BAD_RATE = 3
DEF DEADLINE_MASK = 1048575  # 2**20 - 1

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double pair_u(uint64_t seed, uint64_t i, uint64_t j) noexcept nogil:
    cdef uint64_t key = (i << 32) | j
    return <double>(mix64(seed ^ mix64(key + GOLDEN)) >> 11) * INV53


cdef bitgen_t* _bitgen(rng) except NULL:
    capsule = rng.bit_generator.capsule
    return <bitgen_t*>PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double U(bitgen_t* bg) noexcept nogil:
    return bg.next_double(bg.state)


# ---------------------------------------------------------------- sum tree

cdef struct SumTree:
    int64_t p
    double* t


cdef int tree_init(SumTree* st, int64_t size) except -1:
    cdef int64_t p = 1
    while p < (size if size > 1 else 1):
        p <<= 1
    st.p = p
    st.t = <double*>malloc(2 * p * sizeof(double))
    if st.t == NULL:
        raise MemoryError()
    memset(st.t, 0, 2 * p * sizeof(double))
    return 0


cdef inline void tree_set(SumTree* st, int64_t k, double w) noexcept nogil:
    cdef double* t = st.t
    cdef int64_t i = st.p + k
    t[i] = w
    i >>= 1
    while i >= 1:
        t[i] = t[2 * i] + t[2 * i + 1]
        i >>= 1


cdef inline int64_t tree_find(SumTree* st, double u) noexcept nogil:
    cdef double* t = st.t
    cdef int64_t i = 1
    cdef int64_t p = st.p
    cdef double left
    while i < p:
        left = t[2 * i]
        if u < left or t[2 * i + 1] <= 0.0:
            i = 2 * i
        else:
            u -= left
            i = 2 * i + 1
    return i - p


# ---------------------------------------------------------------- generators

def pair_uniform(seed, i, j):
    from ._pykernels import pair_uniform as _pu
    return _pu(seed, i, j)


def dense_pair_edges(int64_t n, double beta, double gamma, int law, uint64_t seed):
    cdef double c = beta * float(n) ** (2.0 * gamma - 1.0)
    cdef double[::1] a = np.arange(1, n + 1, dtype=np.float64) ** (-gamma)
    cdef int64_t cap = 1024
    cdef int64_t cnt = 0
    src = np.empty(cap, dtype=np.int64)
    dst = np.empty(cap, dtype=np.int64)
    cdef int64_t[::1] s = src
    cdef int64_t[::1] d = dst
    cdef int64_t i, j
    cdef double ca, x, u, p
    for i in range(1, n):
        ca = c * a[i - 1]
        for j in range(i + 1, n + 1):
            x = ca * a[j - 1]
            u = pair_u(seed, <uint64_t>i, <uint64_t>j)
            if u < x:
                if law == 0:
                    p = -expm1(-x)
                else:
                    p = x if x < 1.0 else 1.0
                if u < p:
                    if cnt == cap:
                        cap *= 2
                        src = np.resize(src, cap)
                        dst = np.resize(dst, cap)
                        s = src
                        d = dst
                    s[cnt] = i - 1
                    d[cnt] = j - 1
                    cnt += 1
    return src[:cnt].copy(), dst[:cnt].copy()


def skip_pair_edges(int64_t n, double beta, double gamma, int law, rng):
    cdef bitgen_t* bg = _bitgen(rng)
    cdef double c = beta * float(n) ** (2.0 * gamma - 1.0)
    cdef int64_t cap = 1024
    cdef int64_t cnt = 0
    src = np.empty(cap, dtype=np.int64)
    dst = np.empty(cap, dtype=np.int64)
    cdef int64_t[::1] s = src
    cdef int64_t[::1] d = dst
    cdef int64_t i, j
    cdef double ca, p, x, q, r, k
    with rng.bit_generator.lock:
        for i in range(1, n):
            ca = c * pow(<double>i, -gamma)
            j = i + 1
            while j <= n:
                p = ca * pow(<double>j, -gamma)
                if p > 1.0:
                    p = 1.0
                if p <= 0.0:
                    break
                if p < 1.0:
                    r = U(bg)
                    k = floor(log1p(-r) / log1p(-p))
                    if k > n:
                        break
                    j += <int64_t>k
                    if j > n:
                        break
                x = ca * pow(<double>j, -gamma)
                if law == 0:
                    q = -expm1(-x)
                else:
                    q = x if x < 1.0 else 1.0
                if U(bg) * p < q:
                    if cnt == cap:
                        cap *= 2
                        src = np.resize(src, cap)
                        dst = np.resize(dst, cap)
                        s = src
                        d = dst
                    s[cnt] = i - 1
                    d[cnt] = j - 1
                    cnt += 1
                j += 1
    return src[:cnt].copy(), dst[:cnt].copy()


# ---------------------------------------------------------------- voter

def voter_edge_run(const int64_t[::1] indptr, const int64_t[::1] indices,
                   const int64_t[::1] inc_edge, const int64_t[::1] eu,
                   const int64_t[::1] ev, const double[::1] w,
                   cnp.int8_t[::1] opinions, rng, const double[::1] checkpoints,
                   int64_t max_events, int64_t sample_every, double deadline):
    cdef bitgen_t* bg = _bitgen(rng)
    cdef int64_t m = eu.shape[0]
    cdef int64_t ncp = checkpoints.shape[0]
    cdef SumTree st
    tree_init(&st, m)
    cdef int64_t e, f, v, sl, k = 0, events = 0, ndisc = 0, nones = 0
    cdef int status = ABSORBED
    cdef double t = 0.0, tnext, total
    cdef cnp.int8_t ov
    cpv_arr = np.empty(ncp, dtype=np.float64)
    cdef double[::1] cpv = cpv_arr
    traj_t = []
    traj_s = []
    try:
        for e in range(m):
            if opinions[eu[e]] != opinions[ev[e]]:
                tree_set(&st, e, w[e])
                ndisc += 1
        for v in range(opinions.shape[0]):
            nones += opinions[v]
        if sample_every > 0:
            traj_t.append(0.0)
            traj_s.append(nones)
        with rng.bit_generator.lock:
            while ndisc > 0:
                if max_events >= 0 and events >= max_events:
                    status = EVENT_CAP
                    break
                if deadline > 0.0 and (events & DEADLINE_MASK) == 0 and events:
                    if time.monotonic() > deadline:
                        status = DEADLINE_CODE
                        break
                total = st.t[1]
                if not (total > 0.0) or isinf(total):
                    status = BAD_RATE
                    break
                tnext = t - log(1.0 - U(bg)) / total
                while k < ncp and checkpoints[k] < tnext:
                    cpv[k] = nones
                    k += 1
                t = tnext
                e = tree_find(&st, U(bg) * total)
                if U(bg) < 0.5:
                    v = eu[e]
                else:
                    v = ev[e]
                ov = 1 - opinions[v]
                opinions[v] = ov
                if ov:
                    nones += 1
                else:
                    nones -= 1
                for sl in range(indptr[v], indptr[v + 1]):
                    f = inc_edge[sl]
                    if opinions[indices[sl]] != ov:
                        tree_set(&st, f, w[f])
                        ndisc += 1
                    else:
                        tree_set(&st, f, 0.0)
                        ndisc -= 1
                events += 1
                if sample_every > 0 and events % sample_every == 0:
                    traj_t.append(t)
                    traj_s.append(nones)
    finally:
        free(st.t)
    if status == ABSORBED:
        while k < ncp:
            cpv[k] = nones
            k += 1
    else:
        cpv_arr[k:] = np.nan
    if sample_every > 0 and (not traj_t or traj_t[len(traj_t) - 1] != t):
        traj_t.append(t)
        traj_s.append(nones)
    return t, events, status, cpv_arr, np.asarray(traj_t), np.asarray(traj_s, dtype=np.float64)


def voter_naive_run(const int64_t[::1] indptr, const int64_t[::1] indices,
                    const int64_t[::1] act, const double[::1] alias_prob,
                    const int64_t[::1] alias_idx, double total_rate,
                    const int64_t[::1] comp, const int64_t[::1] comp_size,
                    cnp.int8_t[::1] opinions, rng, const double[::1] checkpoints,
                    int64_t max_events, int64_t sample_every, double deadline):
    cdef bitgen_t* bg = _bitgen(rng)
    cdef int64_t ncomp = comp_size.shape[0]
    cdef int64_t ncp = checkpoints.shape[0]
    ones_arr = np.zeros(ncomp, dtype=np.int64)
    cdef int64_t[::1] ones = ones_arr
    cdef int64_t v, c, a, b, src, lo, deg, slot, K = act.shape[0]
    cdef int64_t nonmono = 0, nones = 0, k = 0, events = 0
    cdef int status = ABSORBED
    cdef bint was_mixed, is_mixed
    cdef double t = 0.0, tnext
    cdef cnp.int8_t ov
    cpv_arr = np.empty(ncp, dtype=np.float64)
    cdef double[::1] cpv = cpv_arr
    traj_t = []
    traj_s = []
    for v in range(opinions.shape[0]):
        if opinions[v]:
            ones[comp[v]] += 1
            nones += 1
    for c in range(ncomp):
        if 0 < ones[c] < comp_size[c]:
            nonmono += 1
    if sample_every > 0:
        traj_t.append(0.0)
        traj_s.append(nones)
    if nonmono > 0 and not (total_rate > 0.0 and not isinf(total_rate)):
        status = BAD_RATE
    with rng.bit_generator.lock:
        while nonmono > 0 and status == ABSORBED:
            if max_events >= 0 and events >= max_events:
                status = EVENT_CAP
                break
            if deadline > 0.0 and (events & DEADLINE_MASK) == 0 and events:
                if time.monotonic() > deadline:
                    status = DEADLINE_CODE
                    break
            tnext = t - log(1.0 - U(bg)) / total_rate
            while k < ncp and checkpoints[k] < tnext:
                cpv[k] = nones
                k += 1
            t = tnext
            slot = <int64_t>(U(bg) * K)
            if U(bg) < alias_prob[slot]:
                a = act[slot]
            else:
                a = act[alias_idx[slot]]
            lo = indptr[a]
            deg = indptr[a + 1] - lo
            b = indices[lo + <int64_t>(U(bg) * deg)]
            if U(bg) < 0.5:
                v = a
                src = b
            else:
                v = b
                src = a
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
        while k < ncp:
            cpv[k] = nones
            k += 1
    else:
        cpv_arr[k:] = np.nan
    if sample_every > 0 and (not traj_t or traj_t[len(traj_t) - 1] != t):
        traj_t.append(t)
        traj_s.append(nones)
    return t, events, status, cpv_arr, np.asarray(traj_t), np.asarray(traj_s, dtype=np.float64)


# ---------------------------------------------------------------- walkers

cdef inline int64_t pick_slot(const double[::1] cum, int64_t lo, int64_t hi, double r) noexcept nogil:
    cdef int64_t mid
    hi -= 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[mid] > r:
            hi = mid
        else:
            lo = mid + 1
    return lo


def coalesce_run(int64_t n, const int64_t[::1] indptr, const int64_t[::1] indices,
                 const double[::1] cum, const double[::1] q, const int64_t[::1] comp,
                 positions, rng, int64_t max_events, int64_t sample_every,
                 double deadline):
    cdef bitgen_t* bg = _bitgen(rng)
    pos_arr = np.array(positions, dtype=np.int64)
    cdef int64_t[::1] pos = pos_arr
    cdef int64_t nw = pos.shape[0]
    occ_arr = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] occ = occ_arr
    alive_arr = np.zeros(nw, dtype=np.int8)
    cdef cnp.int8_t[::1] alive = alive_arr
    cdef SumTree st
    tree_init(&st, nw)
    cdef int64_t wk, v, i, j, s, nalive = 0, target, events = 0
    cdef int status = ABSORBED
    cdef double t = 0.0, total, r
    traj_t = []
    traj_s = []
    try:
        seen = set()
        for wk in range(nw):
            v = pos[wk]
            seen.add(comp[v])
            if occ[v] < 0:
                occ[v] = wk
                alive[wk] = 1
                nalive += 1
                tree_set(&st, wk, q[v])
        target = len(seen)
        if sample_every > 0:
            traj_t.append(0.0)
            traj_s.append(nalive)
        with rng.bit_generator.lock:
            while nalive > target:
                if max_events >= 0 and events >= max_events:
                    status = EVENT_CAP
                    break
                if deadline > 0.0 and (events & DEADLINE_MASK) == 0 and events:
                    if time.monotonic() > deadline:
                        status = DEADLINE_CODE
                        break
                total = st.t[1]
                if not (total > 0.0) or isinf(total):
                    status = BAD_RATE
                    break
                t -= log(1.0 - U(bg)) / total
                wk = tree_find(&st, U(bg) * total)
                i = pos[wk]
                r = U(bg) * q[i]
                s = pick_slot(cum, indptr[i], indptr[i + 1], r)
                j = indices[s]
                occ[i] = -1
                if occ[j] >= 0:
                    alive[wk] = 0
                    nalive -= 1
                    tree_set(&st, wk, 0.0)
                else:
                    occ[j] = wk
                    pos[wk] = j
                    tree_set(&st, wk, q[j])
                events += 1
                if sample_every > 0 and events % sample_every == 0:
                    traj_t.append(t)
                    traj_s.append(nalive)
    finally:
        free(st.t)
    if sample_every > 0 and (not traj_t or traj_t[len(traj_t) - 1] != t):
        traj_t.append(t)
        traj_s.append(nalive)
    final = pos_arr[alive_arr.astype(bool)]
    return t, events, status, final, np.asarray(traj_t), np.asarray(traj_s, dtype=np.float64)


def walk_trajectory(const int64_t[::1] indptr, const int64_t[::1] indices,
                    const double[::1] cum, const double[::1] q, int64_t start,
                    double t_max, rng):
    cdef bitgen_t* bg = _bitgen(rng)
    cdef int64_t cap = 1024, cnt = 1, i = start, s
    cdef double t = 0.0, qi, r
    times = np.empty(cap, dtype=np.float64)
    states = np.empty(cap, dtype=np.int64)
    cdef double[::1] tv = times
    cdef int64_t[::1] sv = states
    tv[0] = 0.0
    sv[0] = start
    with rng.bit_generator.lock:
        while True:
            qi = q[i]
            if not (qi > 0.0):
                break
            t -= log(1.0 - U(bg)) / qi
            if t > t_max:
                break
            r = U(bg) * qi
            s = pick_slot(cum, indptr[i], indptr[i + 1], r)
            i = indices[s]
            if cnt == cap:
                cap *= 2
                times = np.resize(times, cap)
                states = np.resize(states, cap)
                tv = times
                sv = states
            tv[cnt] = t
            sv[cnt] = i
            cnt += 1
    return times[:cnt].copy(), states[:cnt].copy()


# ---------------------------------------------------------------- structure

def eccentricities(const int64_t[::1] indptr, const int64_t[::1] indices):
    cdef int64_t n = indptr.shape[0] - 1
    ecc_arr = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] ecc = ecc_arr
    dist_arr = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] dist = dist_arr
    queue_arr = np.empty(max(n, 1), dtype=np.int64)
    cdef int64_t[::1] queue = queue_arr
    cdef int64_t s, head, tail, v, u, kk, far, dv
    with nogil:
        for s in range(n):
            queue[0] = s
            dist[s] = 0
            head = 0
            tail = 1
            far = 0
            while head < tail:
                v = queue[head]
                head += 1
                dv = dist[v]
                if dv > far:
                    far = dv
                for kk in range(indptr[v], indptr[v + 1]):
                    u = indices[kk]
                    if dist[u] < 0:
                        dist[u] = dv + 1
                        queue[tail] = u
                        tail += 1
            ecc[s] = far
            for kk in range(tail):
                dist[queue[kk]] = -1
    return ecc_arr


def cheeger_exhaustive(int n, eu, ev):
    if n > 62:
        raise ValueError("exhaustive Cheeger search limited to n <= 62")
    cdef uint64_t nbr[64]
    cdef int deg[64]
    cdef int a, b, idx
    for idx in range(64):
        nbr[idx] = 0
        deg[idx] = 0
    for a, b in zip(eu, ev):
        nbr[a] |= (<uint64_t>1) << b
        nbr[b] |= (<uint64_t>1) << a
    for idx in range(n):
        deg[idx] = __builtin_popcountll(nbr[idx])
    cdef int64_t best_num = -1, best_den = 1, cut = 0, size = 0, inside
    cdef uint64_t S = 0, k, total = (<uint64_t>1) << n
    cdef int half = n // 2
    with nogil:
        k = 1
        while k < total:
            b = __builtin_ctzll(k)
            inside = __builtin_popcountll(nbr[b] & S)
            if (S >> b) & 1:
                S &= ~((<uint64_t>1) << b)
                size -= 1
                cut += 2 * inside - deg[b]
            else:
                S |= (<uint64_t>1) << b
                size += 1
                cut += deg[b] - 2 * inside
            if 1 <= size <= half:
                if best_num < 0 or cut * best_den < best_num * size:
                    best_num = cut
                    best_den = size
            k += 1
    return best_num, best_den


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_ctzll(unsigned long long) nogil
