"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Both backends consume the same random streams, so each pair of timings runs
identical work; the script also confirms the outputs agree.
"""
import argparse
import time

import numpy as np

from voterlab import _backend, dynamics as dy, netgen as ng
from voterlab._pykernels import LAW_SNR
from voterlab.netgen import NetworkParams


def _best(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases():
    g = ng.giant(ng.generate(NetworkParams(2.0, 0.5, 2000, seed=1)))
    op0 = (dy.stream(0).random(g.n) < 0.5).astype(np.int8)

    def voter(engine):
        def run(backend):
            op = op0.copy()
            rec = dy.VoterSimulator(g, 1.0, engine, backend).run(op, dy.stream(1))
            return rec.time, rec.events
        return run

    def generator(backend):
        k = _backend.get_kernels(backend)
        src, _ = k.dense_pair_edges(3000, 2.0, 0.5, LAW_SNR, 7)
        return src.size

    def coalesce(backend):
        rec = dy.simulate_coalescing(g, dy.WalkerSet.full(g), 1.0, 3, backend=backend)
        return rec.time, rec.events

    def eccentricity(backend):
        k = _backend.get_kernels(backend)
        return int(k.eccentricities(g.indptr, g.indices).max())

    return [
        ("dense SNR pairs, N=3000", generator),
        (f"voter edge engine, giant n={g.n}", voter("edge")),
        (f"voter naive engine, giant n={g.n}", voter("naive")),
        (f"coalescing walks, full occupancy, n={g.n}", coalesce),
        (f"all-source BFS eccentricities, n={g.n}", eccentricity),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _backend._ckernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    print(f"{'kernel':<46}{'python s':>10}{'cython s':>10}{'speedup':>9}")
    for name, fn in cases():
        tp, op = _best(lambda: fn("python"), args.repeat)
        tc, oc = _best(lambda: fn("cython"), args.repeat)
        flag = "" if op == oc else "  OUTPUT MISMATCH"
        print(f"{name:<46}{tp:>10.3f}{tc:>10.4f}{tp / tc:>8.0f}x{flag}")


if __name__ == "__main__":
    main()
