import os
import subprocess
import sys

import numpy as np
import pytest

from voterlab import _backend, dynamics as dy, netgen as ng
from voterlab._pykernels import LAW_CHUNG_LU, LAW_SNR
from voterlab.netgen import NetworkParams

compiled = pytest.mark.skipif(_backend._ckernels is None, reason="extension not built")
PY = _backend.get_kernels("python")


def C():
    return _backend.get_kernels("cython")


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        _backend.get_kernels("fortran")


def test_pure_python_switch():
    code = "import voterlab; print(voterlab.BACKEND)"
    env = dict(os.environ, VOTERLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "python"


@compiled
def test_default_backend_is_compiled():
    if os.environ.get("VOTERLAB_PURE_PYTHON", "") in ("", "0"):
        assert _backend.BACKEND == "cython"


@compiled
@pytest.mark.parametrize("law", [LAW_SNR, LAW_CHUNG_LU])
@pytest.mark.parametrize("gamma", [0.0, 0.3, 0.75])
def test_dense_generator_identical(law, gamma):
    a = PY.dense_pair_edges(300, 2.0, gamma, law, 17)
    b = C().dense_pair_edges(300, 2.0, gamma, law, 17)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@compiled
@pytest.mark.parametrize("law", [LAW_SNR, LAW_CHUNG_LU])
def test_skip_generator_identical(law):
    a = PY.skip_pair_edges(2000, 2.0, 0.4, law, dy.stream(5))
    b = C().skip_pair_edges(2000, 2.0, 0.4, law, dy.stream(5))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@compiled
def test_pair_uniform_identical():
    for i, j in [(1, 2), (5, 900), (123456, 123457)]:
        assert PY.pair_uniform(9, i, j) == C().pair_uniform(9, i, j)


def _giant(n=400, seed=2):
    return ng.giant(ng.generate(NetworkParams(2.0, 0.5, n, seed=seed)))


@compiled
@pytest.mark.parametrize("engine", dy.ENGINES)
@pytest.mark.parametrize("theta", [0.0, 1.0, 2.0])
def test_voter_runs_identical(engine, theta):
    g = _giant()
    cps = np.array([0.5, 2.0, 10.0])
    recs = []
    for backend in ("python", "cython"):
        op = (dy.stream(1).random(g.n) < 0.5).astype(np.int8)
        sim = dy.VoterSimulator(g, theta, engine, backend)
        rec = sim.run(op, dy.stream(3), checkpoints=cps, sample_every=7)
        recs.append((rec, op))
    (a, oa), (b, ob) = recs
    assert a.time == b.time and a.events == b.events and a.censored == b.censored
    assert np.array_equal(oa, ob)
    assert np.array_equal(a.checkpoint_values, b.checkpoint_values, equal_nan=True)
    assert np.array_equal(a.trajectory[0], b.trajectory[0])
    assert np.array_equal(a.trajectory[1], b.trajectory[1])


@compiled
@pytest.mark.parametrize("theta", [-1.0, 1.0, 2.0])
def test_coalescence_identical(theta):
    g = ng.generate(NetworkParams(2.0, 0.5, 300, seed=4))
    a = dy.simulate_coalescing(g, dy.WalkerSet.full(g), theta, 6, sample_every=3, backend="python")
    b = dy.simulate_coalescing(g, dy.WalkerSet.full(g), theta, 6, sample_every=3, backend="cython")
    assert a.time == b.time and a.events == b.events
    assert list(a.final) == list(b.final)
    assert np.array_equal(a.trajectory[1], b.trajectory[1])


@compiled
def test_walk_identical():
    g = _giant(200)
    a = dy.simulate_walk(g, 0, 1.5, 200.0, seed=8, backend="python")
    b = dy.simulate_walk(g, 0, 1.5, 200.0, seed=8, backend="cython")
    assert np.array_equal(a.trajectory[0], b.trajectory[0])
    assert np.array_equal(a.trajectory[1], b.trajectory[1])


@compiled
def test_eccentricities_and_cheeger_identical():
    g = _giant(300)
    assert np.array_equal(PY.eccentricities(g.indptr, g.indices),
                          C().eccentricities(g.indptr, g.indices))
    h = ng.giant(ng.generate(NetworkParams(3.0, 0.3, 14, seed=1)))
    assert PY.cheeger_exhaustive(h.n, h.eu, h.ev) == C().cheeger_exhaustive(h.n, h.eu, h.ev)


@compiled
def test_deadline_status_identical():
    g = _giant(2000)
    for backend in ("python", "cython"):
        op = (dy.stream(1).random(g.n) < 0.5).astype(np.int8)
        rec = dy.VoterSimulator(g, 1.0, "edge", backend).run(op, dy.stream(2), max_events=500)
        assert rec.censored and rec.events == 500
