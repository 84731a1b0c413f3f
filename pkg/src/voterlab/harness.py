"""Experiment orchestration: N-sweeps, exponent fits, mixing-growth studies,
result emission and the exact-oracle check suite."""
from __future__ import annotations

import csv
import dataclasses
import enum
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import chain, dynamics, netgen, theory
from .dynamics import VoterParams, child_seed, stream, summarize
from .netgen import NetworkParams, Variant

DEFAULT_N_VALUES = tuple(2**k for k in range(7, 13))
REPLICA_BUDGET = 2**16
MIN_REPLICAS = 64
MIN_GIANT = 10


class Mode(str, enum.Enum):
    CONSENSUS = "CONSENSUS"
    COALESCENCE = "COALESCENCE"
    MEETING = "MEETING"
    MIXING_PROXY = "MIXING_PROXY"
    DEGREE = "DEGREE"
    REGION = "REGION"


@dataclass
class ExperimentConfig:
    """Sweep description. ``replicas=None`` selects ``max(64, 2**16 // N)``
    replicas per N; ``wall_cap`` is a per-replica limit in seconds."""
    beta: float = 2.0
    gamma: float = 0.3
    theta: float = 1.0
    u: float = 0.5
    variant: str = "SNR"
    n_values: list = field(default_factory=lambda: list(DEFAULT_N_VALUES))
    replicas: int | None = None
    mode: str = "CONSENSUS"
    seed: int = 0
    with_polylog: bool = False
    quenched: bool = False
    engine: str = "naive"
    wall_cap: float | None = 120.0
    beta_max: float = 4.0
    beta_step: float = 0.05
    out_csv: str | None = None
    out_json: str | None = None
    out_svg: str | None = None

    def __post_init__(self):
        self.mode = Mode(self.mode).value
        self.variant = Variant(self.variant).value
        self.n_values = [int(n) for n in self.n_values]
        dynamics.check_theta(self.theta)
        if self.engine not in dynamics.ENGINES:
            raise ValueError(f"engine must be one of {dynamics.ENGINES}")
        if self.replicas is not None and int(self.replicas) < 2:
            raise ValueError("replicas must be at least 2")
        if self.mode != Mode.REGION.value:
            if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
                raise ValueError("n_values must be strictly increasing")
            if len(self.n_values) < (4 if self.with_polylog else 3):
                raise ValueError("a fit needs at least 3 sizes (4 with the polylog term)")

    def replicas_for(self, n: int) -> int:
        if self.replicas is not None:
            return int(self.replicas)
        return max(MIN_REPLICAS, REPLICA_BUDGET // int(n))

    def network(self, n: int, seed: int) -> NetworkParams:
        return NetworkParams(self.beta, self.gamma, int(n), Variant(self.variant), seed)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ScalePoint:
    n: int
    mean: float
    stderr: float
    replicas: int
    censored: int = 0
    skipped: int = 0


@dataclass
class ScalingResult:
    points: list
    fitted_exponent: float
    fit_stderr: float
    polylog_coefficient: float | None
    predicted_exponent: float | None
    mode: str
    seed: int
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["replica_rule"] = f"max({MIN_REPLICAS}, {REPLICA_BUDGET} // N) unless replicas is set"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingResult":
        d = {k: v for k, v in d.items() if k != "replica_rule"}
        d["points"] = [ScalePoint(**p) for p in d["points"]]
        return cls(**d)

    def refit(self) -> tuple[float, float, float | None]:
        with_polylog = self.polylog_coefficient is not None
        return fit_exponent([(p.n, p.mean, p.stderr) for p in self.points], with_polylog)


# ---------------------------------------------------------------- fitting


def fit_exponent(points, with_polylog: bool = False):
    """Weighted least squares of ``log mean`` on ``log N`` (and ``log log N``).

    Weights are inverse relative variances ``(mean/stderr)**2``; when any
    stderr is missing or zero all points get equal weight and the reported
    stderr comes from the residuals. Returns ``(exponent, stderr, coefficient)``
    with ``coefficient=None`` when the polylog term is off.
    """
    pts = [(float(n), float(m), float(s)) for n, m, s in points
           if math.isfinite(m) and m > 0]
    need = 4 if with_polylog else 3
    if len(pts) < need:
        raise ValueError(f"fit needs at least {need} usable points, got {len(pts)}")
    n, m, s = (np.array(c) for c in zip(*pts))
    logn = np.log(n)
    cols = [np.ones_like(logn), logn]
    if with_polylog:
        if (logn <= 0).any():
            raise ValueError("polylog term needs N > e... got N <= 1")
        cols.append(np.log(logn))
    x = np.column_stack(cols)
    y = np.log(m)
    known = bool(np.all(np.isfinite(s)) and np.all(s > 0))
    w = (m / s) ** 2 if known else np.ones_like(y)
    xw = x * np.sqrt(w)[:, None]
    yw = y * np.sqrt(w)
    if np.linalg.matrix_rank(xw) < x.shape[1]:
        raise ValueError("degenerate design matrix")
    coef, *_ = np.linalg.lstsq(xw, yw, rcond=None)
    xtwx_inv = np.linalg.inv(xw.T @ xw)
    if known:
        cov = xtwx_inv
    else:
        dof = len(y) - x.shape[1]
        rss = float(((yw - xw @ coef) ** 2).sum())
        cov = xtwx_inv * (rss / dof if dof > 0 else 0.0)
    se = math.sqrt(max(float(cov[1, 1]), 0.0))
    return float(coef[1]), se, (float(coef[2]) if with_polylog else None)


# ---------------------------------------------------------------- replica jobs


def _graph(cfg: ExperimentConfig, n: int, k: int, r: int):
    return netgen.generate(cfg.network(n, child_seed(cfg.seed, k, r, 0)))


def _job(args):
    """One replica; returns ``(value, censored, skipped)``. Top level so that
    process pools can pickle it."""
    cfg_dict, n, k, r = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    mode = Mode(cfg.mode)
    if mode is Mode.CONSENSUS:
        voter = VoterParams(cfg.theta, cfg.u, child_seed(cfg.seed, k, 1))
        net = cfg.network(n, child_seed(cfg.seed, k, 0))
        fixed = netgen.generate(net) if cfg.quenched else None
        rec = dynamics.consensus_replica(net, voter, r, fixed, cfg.engine, cfg.wall_cap)
        return rec.time, rec.censored, False
    g = _graph(cfg, n, k, r)
    if g.is_multigraph:
        g = g.flatten()
    rng = stream(cfg.seed, k, r, 1)
    if mode is Mode.COALESCENCE:
        sim = dynamics.WalkSimulator(g, cfg.theta)
        rec = sim.coalesce(np.arange(g.n), rng, wall_cap=cfg.wall_cap)
        return rec.time, rec.censored, False
    if mode is Mode.MEETING:
        gg = netgen.giant(g)
        if gg.n < MIN_GIANT:
            return math.nan, False, True
        x, y = rng.integers(0, gg.n, size=2)
        if x == y:
            return 0.0, False, False
        rec = dynamics.WalkSimulator(gg, cfg.theta).coalesce([x, y], rng, wall_cap=cfg.wall_cap)
        return rec.time, rec.censored, False
    if mode is Mode.MIXING_PROXY:
        gg = netgen.giant(g)
        if gg.n < MIN_GIANT:
            return math.nan, False, True
        return chain.relaxation_time_sparse(gg, 1.0), False, False
    if mode is Mode.DEGREE:
        return float(g.degrees.max()) if g.n else 0.0, False, False
    raise ValueError(f"mode {mode.value} has no replica job")


def worker_count() -> int:
    """Worker processes: ``VOTERLAB_THREADS`` caps the CPU count."""
    cpus = os.cpu_count() or 1
    env = os.environ.get("VOTERLAB_THREADS", "").strip()
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(f"VOTERLAB_THREADS must be an integer, got {env!r}") from None
        if cap < 1:
            raise ValueError("VOTERLAB_THREADS must be at least 1")
        return min(cpus, cap)
    return cpus


def _flush_partial(cfg: ExperimentConfig, points) -> None:
    if not cfg.out_json:
        return
    path = Path(cfg.out_json).with_suffix(".partial.json")
    with open(path, "w") as fh:
        json.dump({"config": cfg.to_dict(), "points": [dataclasses.asdict(p) for p in points]},
                  fh, indent=2)


def run_sweep(cfg: ExperimentConfig) -> ScalingResult:
    """Run the configured estimator at every N and fit the growth exponent.

    Seeds depend only on ``(seed, N index, replica index)`` and results are
    aggregated in replica order, so the outcome does not depend on the
    worker count. Each finished N is flushed to ``<out_json>.partial.json``.
    """
    mode = Mode(cfg.mode)
    if mode is Mode.REGION:
        raise ValueError("REGION mode is a grid scan; use run_region")
    workers = worker_count()
    points = []
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for k, n in enumerate(cfg.n_values):
            jobs = [(cfg.to_dict(), n, k, r) for r in range(cfg.replicas_for(n))]
            out = list(pool.map(_job, jobs)) if pool else [_job(j) for j in jobs]
            vals = [v for v, cen, skip in out if not cen and not skip]
            censored = sum(bool(c) for _, c, _ in out)
            skipped = sum(bool(s) for _, _, s in out)
            if censored:
                warnings.warn(f"N={n}: {censored} replicas hit the wall-clock cap and are excluded")
            if skipped:
                warnings.warn(f"N={n}: {skipped} samples had a giant below {MIN_GIANT} vertices")
            mean, se = summarize(vals)
            points.append(ScalePoint(int(n), mean, se, len(vals), censored, skipped))
            _flush_partial(cfg, points)
    except KeyboardInterrupt:
        _flush_partial(cfg, points)
        raise
    finally:
        if pool:
            pool.shutdown()
    expo, se, coef = fit_exponent([(p.n, p.mean, p.stderr) for p in points], cfg.with_polylog)
    result = ScalingResult(points, expo, se, coef,
                           theory.predict_exponent(cfg.beta, cfg.gamma, cfg.theta),
                           cfg.mode, cfg.seed, cfg.to_dict())
    if cfg.out_json:
        Path(cfg.out_json).with_suffix(".partial.json").unlink(missing_ok=True)
    return result


def mixing_proxy_sweep(cfg: ExperimentConfig) -> ScalingResult:
    """VSRW relaxation time on sampled giants against N."""
    if Mode(cfg.mode) is not Mode.MIXING_PROXY:
        raise ValueError("mixing_proxy_sweep needs mode MIXING_PROXY")
    return run_sweep(cfg)


def theta_monotone_spot_check(cfg: ExperimentConfig, n: int, samples: int = 20,
                              thetas=(1.0, 2.0)) -> list:
    """Dual relaxation times at each theta on ``samples`` sampled giants;
    asserts they do not increase with theta."""
    out = []
    lo, hi = sorted(thetas)
    for r in range(samples):
        gg = netgen.giant(_graph(cfg, n, 0, r))
        if gg.n < MIN_GIANT:
            continue
        a = chain.relaxation_time_sparse(gg, lo)
        b = chain.relaxation_time_sparse(gg, hi)
        assert b <= a * (1 + 1e-8), (r, a, b)
        out.append((a, b))
    return out


# ---------------------------------------------------------------- emission


CSV_FIELDS = ("kind", "n", "mean", "stderr", "replicas", "censored", "exponent",
              "exponent_stderr", "polylog_coefficient", "predicted_exponent")


def _num(x):
    return "" if x is None else repr(float(x))


def emit_csv(result: ScalingResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for p in result.points:
            w.writerow(["point", p.n, _num(p.mean), _num(p.stderr), p.replicas, p.censored,
                        "", "", "", ""])
        w.writerow(["fit", "", "", "", "", "", _num(result.fitted_exponent),
                    _num(result.fit_stderr), _num(result.polylog_coefficient),
                    _num(result.predicted_exponent)])


def emit_json(result: ScalingResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path) -> ScalingResult:
    with open(path) as fh:
        return ScalingResult.from_dict(json.load(fh))


def emit_svg(result: ScalingResult, path, width: int = 480, height: int = 360) -> None:
    """Log-log scatter with error bars, the fitted line and a reference line of
    the predicted slope through the data centroid."""
    pts = [p for p in result.points if math.isfinite(p.mean) and p.mean > 0]
    x = np.log10([p.n for p in pts])
    y = np.log10([p.mean for p in pts])
    se = np.array([p.stderr if math.isfinite(p.stderr) else 0.0 for p in pts])
    ylo = np.log10(np.maximum(np.array([p.mean for p in pts]) - se, 1e-300))
    yhi = np.log10(np.array([p.mean for p in pts]) + se)
    pad = 48
    x0, x1 = x.min(), x.max()
    y0, y1 = min(ylo.min(), y.min()), max(yhi.max(), y.max())
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def px(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def py(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    xm, ym = x.mean(), y.mean()
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
             f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">log10 N</text>',
             f'<text x="14" y="{height / 2:.1f}" font-size="12" transform="rotate(-90 14 {height / 2:.1f})" '
             f'text-anchor="middle">log10 mean</text>']

    def line(slope, colour, dash=""):
        a, b = ym + slope * (x0 - xm), ym + slope * (x1 - xm)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        parts.append(f'<line x1="{px(x0):.2f}" y1="{py(a):.2f}" x2="{px(x1):.2f}" y2="{py(b):.2f}" '
                     f'stroke="{colour}"{extra}/>')

    line(result.fitted_exponent, "steelblue")
    if result.predicted_exponent is not None:
        line(result.predicted_exponent, "firebrick", "6,4")
    for xi, yi, lo, hi in zip(x, y, ylo, yhi):
        parts.append(f'<line x1="{px(xi):.2f}" y1="{py(lo):.2f}" x2="{px(xi):.2f}" y2="{py(hi):.2f}" stroke="gray"/>')
        parts.append(f'<circle cx="{px(xi):.2f}" cy="{py(yi):.2f}" r="3" fill="black"/>')
    label = f"fit {result.fitted_exponent:.3f}"
    if result.predicted_exponent is not None:
        label += f", predicted {result.predicted_exponent:.3f}"
    parts.append(f'<text x="{pad + 6}" y="{pad - 8}" font-size="12">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


_EMITTERS = {"CSV": emit_csv, "JSON": emit_json, "SVG": emit_svg}


def emit(result: ScalingResult, fmt: str, path) -> None:
    """Write ``result`` as CSV, JSON or SVG. Empty results are refused
    before any file is created."""
    if result is None or not result.points:
        raise ValueError("nothing to emit: the sweep has no points")
    key = str(fmt).upper()
    if key not in _EMITTERS:
        raise ValueError(f"unknown format {fmt!r}")
    _EMITTERS[key](result, path)


def emit_configured(result: ScalingResult, cfg: ExperimentConfig) -> list:
    written = []
    for fmt, path in (("CSV", cfg.out_csv), ("JSON", cfg.out_json), ("SVG", cfg.out_svg)):
        if path:
            emit(result, fmt, path)
            written.append(path)
    return written


def run_region(cfg: ExperimentConfig, path=None) -> list:
    pts = theory.region_grid(cfg.beta_max, cfg.beta_step)
    target = path or cfg.out_csv
    if target:
        theory.write_region_csv(pts, target)
    return pts


# ---------------------------------------------------------------- check suite


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_connected(rng, n_max: int = 8):
    while True:
        n = int(rng.integers(2, n_max + 1))
        iu, ju = np.triu_indices(n, k=1)
        p = rng.uniform(0.25, 0.9)
        pick = rng.random(iu.size) < p
        g = netgen.Graph.from_edges(n, iu[pick], ju[pick])
        if netgen.components(g).count == 1:
            return g


def _bfs_path(g, a: int, b: int) -> list:
    prev = {a: None}
    frontier = [a]
    while frontier and b not in prev:
        nxt = []
        for v in frontier:
            for w in g.neighbors(v).tolist():
                if w not in prev:
                    prev[w] = v
                    nxt.append(w)
        frontier = nxt
    path = [b]
    while path[-1] != a:
        path.append(prev[path[-1]])
    return path[::-1]


def _bound_checks(g, theta: float) -> tuple[bool, bool, str]:
    gm = chain.build_dual_generator(g, theta)
    ok_path = True
    for a in range(g.n):
        for b in range(a + 1, g.n):
            bound = chain.path_hitting_bound(gm, _bfs_path(g, a, b))
            if bound < chain.commute_time(gm, a, b) * (1 - 1e-10):
                ok_path = False
    ok_meet = chain.meeting_lower_bound(gm) <= chain.stationary_meeting_time(gm) * (1 + 1e-10)
    return ok_path, ok_meet, f"n={g.n} m={g.m} theta={theta}"


THETAS = (0.0, 1.0, 2.0)


def check_duality() -> CheckResult:
    worst = 0.0
    for n in range(2, 5):
        for g in netgen.all_connected_graphs(n):
            for th in THETAS:
                a = chain.exact_consensus_time(g, th, np.arange(n))
                b = chain.exact_coalescence_time(g, th)
                worst = max(worst, abs(a - b))
    return CheckResult("duality E[cons]=E[coal], connected n<=4", worst <= 1e-10, f"max gap {worst:.3g}")


def check_bounds(random_graphs: int = 100, seed: int = 0) -> list:
    graphs = [g for n in range(2, 7) for g in netgen.nonisomorphic_connected_graphs(n)]
    rng = np.random.default_rng(seed)
    graphs += [_random_connected(rng) for _ in range(random_graphs)]
    path_fail, meet_fail = [], []
    for g in graphs:
        for th in THETAS:
            ok_p, ok_m, tag = _bound_checks(g, th)
            if not ok_p:
                path_fail.append(tag)
            if not ok_m:
                meet_fail.append(tag)
    total = len(graphs) * len(THETAS)
    return [CheckResult("path resistance bound >= commute time", not path_fail,
                        f"{total - len(path_fail)}/{total} graph-theta cases"),
            CheckResult("meeting lower bound <= stationary meeting time", not meet_fail,
                        f"{total - len(meet_fail)}/{total} graph-theta cases")]


def check_sandwich() -> CheckResult:
    graphs = [g for n in range(2, 7) for g in netgen.nonisomorphic_connected_graphs(n)]
    bad = 0
    for g in graphs:
        try:
            chain.cheeger_relax_sandwich(g)
        except AssertionError:
            bad += 1
    return CheckResult("Cheeger sandwich on connected n<=6 (up to isomorphism)", bad == 0,
                       f"{len(graphs) - bad}/{len(graphs)} graphs")


def check_coalescence_sandwich(replicas: int = 4000, seed: int = 11) -> list:
    g = netgen.disjoint_union(netgen.complete_graph(3), netgen.path_graph(4),
                              netgen.cycle_graph(5), netgen.star_graph(3))
    cd = netgen.components(g)
    out = []
    for th in THETAS:
        t_meet = max(chain.worst_meeting_time(chain.build_dual_generator(g.subgraph(cd.members(c)), th))
                     for c in range(cd.count))
        sim = dynamics.WalkSimulator(g, th)
        full = np.arange(g.n)
        vals = [sim.coalesce(full, stream(seed, int(th * 10), r)).time for r in range(replicas)]
        mean, se = summarize(vals)
        upper = math.e * (2 + math.log(g.n)) * t_meet
        ok = t_meet <= mean + 3 * se and mean - 3 * se <= upper
        out.append(CheckResult(f"coalescence sandwich, theta={th:g}", ok,
                               f"{t_meet:.4f} <= {mean:.4f}+-{se:.4f} <= {upper:.4f}"))
    return out


def check_martingale(replicas: int = 10_000, seed: int = 5) -> list:
    g = netgen.giant(netgen.gen_snr(NetworkParams(2.0, 0.5, 40, seed=3)))
    checkpoints = np.array([0.05, 0.2, 1.0, 5.0])
    out = []
    for th in THETAS:
        sim = dynamics.VoterSimulator(g, th, "naive")
        diffs, ones = [], []
        for r in range(replicas):
            op = (stream(seed, r, 0).random(g.n) < 0.3).astype(np.int8)
            s0 = int(op.sum())
            rec = sim.run(op, stream(seed, r, 1), checkpoints=checkpoints)
            diffs.append(np.asarray(rec.checkpoint_values, dtype=np.float64) - s0)
            # ``op`` now holds the absorbed state
            ones.append((op.sum() == g.n) - s0 / g.n)
        d = np.array(diffs)
        z = np.abs(d.mean(axis=0)) / (d.std(axis=0, ddof=1) / math.sqrt(replicas))
        out.append(CheckResult(f"martingale sum of opinions, theta={th:g}", bool((z <= 3).all()),
                               "z = " + ", ".join(f"{v:.2f}" for v in z)))
        o = np.array(ones, dtype=np.float64)
        zo = abs(o.mean()) / (o.std(ddof=1) / math.sqrt(replicas))
        out.append(CheckResult(f"consensus direction, theta={th:g}", bool(zo <= 3), f"z = {zo:.2f}"))
    return out


def check_k2(replicas: int = 10_000, seed: int = 7) -> list:
    k2 = netgen.complete_graph(2)
    gm = chain.build_vsrw_generator(k2)
    t_rel = chain.relaxation_time(gm)
    t_mix = chain.tv_mixing_time(gm)
    m_exact = chain.exact_meeting_time(gm, 0, 1)
    sim = dynamics.WalkSimulator(k2, 1.0)
    mean, se = summarize([sim.coalesce([0, 1], stream(seed, r)).time for r in range(replicas)])
    return [CheckResult("K2 relaxation time 1/2", abs(t_rel - 0.5) <= 1e-12, repr(t_rel)),
            CheckResult("K2 mixing time (1-ln 2)/2", abs(t_mix - (1 - math.log(2)) / 2) <= 1e-6, repr(t_mix)),
            CheckResult("K2 meeting time 1/2 (exact)", abs(m_exact - 0.5) <= 1e-12, repr(m_exact)),
            CheckResult("K2 meeting time 1/2 (Monte Carlo)", abs(mean - 0.5) <= 3 * se,
                        f"{mean:.4f} +- {se:.4f}")]


def run_checks(quick: bool = False) -> list:
    """The exact-oracle invariant suite behind ``voterlab check``."""
    reps = 2000 if quick else 10_000
    results = [check_duality()]
    results += check_bounds()
    results.append(check_sandwich())
    results += check_coalescence_sandwich(replicas=reps // 2)
    results += check_martingale(replicas=reps)
    results += check_k2(replicas=reps)
    return results
