"""Ensemble orchestration and the statistical verification suite.

Ensembles are pure functions of (config, master_seed): every sample derives
its randomness from (master_seed, sample_index) alone, aggregation folds in
sample order, and worker count never changes output bytes.

Conformal-map policy for lattice interfaces: on split-centered box domains
the map to the half-plane is approximated by the identity after translating
v_start to the origin.  This is accurate for capacity horizons much smaller
than the squared domain scale; the residual bias is what the two-scale
comparisons measure, so pass bands for lattice ensembles are calibrated
constants recorded in the report, never silent assumptions.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.stats

from . import explorer, kernels, loewner
from .harmonic import SolverConfig, harmonic_extension
from .lattice import (DomainError, LatticeDomain, LatticeVertex,
                      build_box_domain, build_hexagon_domain, embed, inradius)

VERSION = "0.1.0"

N_QV_GRID = 64          # uniform grid used for stored driving snapshots


class EnsembleError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnsembleConfig:
    domain_kind: str                   # box | hexagon
    domain_params: tuple
    process: str                       # harmonic-explorer | percolation | sle
    n_samples: int
    master_seed: int
    horizon_T: Optional[float] = None  # None: run to termination
    dt_max: float = 1e-3
    kappa: float = 4.0
    sle_dt: float = 1e-4
    probes: tuple = ()                 # vertices whose terminal color is kept
    hit_center: Optional[complex] = None
    observables: tuple = ()
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(method="monte-carlo"))

    def __post_init__(self):
        if self.n_samples < 1:
            raise EnsembleError("n_samples must be >= 1")
        if self.horizon_T is not None and self.horizon_T <= 0:
            raise EnsembleError("horizon_T must be positive")
        if self.process not in ("harmonic-explorer", "percolation", "sle"):
            raise EnsembleError(f"unknown process {self.process!r}")


def build_domain(kind: str, params) -> LatticeDomain:
    if kind == "box":
        return build_box_domain(*params)
    if kind == "hexagon":
        return build_hexagon_domain(*params)
    raise DomainError(f"unknown domain kind {kind!r}")


@dataclass(eq=False)
class SampleStore:
    """Per-sample summaries of one ensemble, index-ordered."""

    config: EnsembleConfig
    domain: Optional[LatticeDomain]
    t_grid: Optional[np.ndarray]          # uniform [0, T] grid, horizon runs
    w_grid: Optional[np.ndarray]          # (M, len(t_grid)) driving snapshots
    n_steps: Optional[np.ndarray]
    capacity: Optional[np.ndarray]
    terminal: Optional[np.ndarray]        # (M, len(probes)) 0/1 colors
    hit_distance: Optional[np.ndarray]    # (M,) min distance of path to center
    tips: Optional[np.ndarray] = None     # (M, len(tip_grid)) tip positions
    tip_grid: Optional[np.ndarray] = None

    @property
    def M(self) -> int:
        return self.config.n_samples

    def w_at(self, t: float) -> np.ndarray:
        """Driving value at the largest stored grid time <= t."""
        k = int(np.searchsorted(self.t_grid, t, side="right")) - 1
        return self.w_grid[:, max(k, 0)]

    def grid_csv(self) -> str:
        cols = ["sample"] + ["w_t%r" % float(t) for t in self.t_grid]
        lines = [",".join(cols)]
        for i in range(self.M):
            lines.append(",".join([str(i)] + [repr(float(v)) for v in self.w_grid[i]]))
        return "\n".join(lines) + "\n"


def _stop_height(T: float) -> float:
    # a connected hull reaching height y has capacity at least y^2/4, so
    # stopping at 3 sqrt(T) guarantees capacity >= 2.25 T before extraction
    return 3.0 * math.sqrt(T)


def _interface_sample(domain: LatticeDomain, cfg: EnsembleConfig, i: int,
                      origin: complex, mode: int, tip_grid):
    T = cfg.horizon_T
    stop = None if T is None else _stop_height(T)
    df = None
    for attempt in range(5):
        raw = explorer.run_raw(domain, cfg.master_seed, i, mode, stop)
        if T is None:
            break
        pts = raw.path_points() - origin
        df = loewner.extract_driving(pts, dt_max=cfg.dt_max,
                                     stop_capacity=T * (1 + 1e-9))
        if df.capacity >= T or raw.terminated:
            break
        stop *= 1.7
    else:
        raise EnsembleError(f"sample {i}: horizon {T} unreachable")

    out = {"n_steps": raw.n_steps}
    if T is not None:
        if df.capacity < T:
            raise EnsembleError(f"sample {i}: capacity {df.capacity} < {T}")
        grid = np.linspace(0.0, T, N_QV_GRID + 1)
        out["w_grid"] = np.array([df.value_at(t) for t in grid])
        out["capacity"] = df.capacity
        if tip_grid is not None:
            out["tips"] = loewner.trace_at_times(df, tip_grid)
    if cfg.probes:
        det = raw.terminal_det()
        idx = [domain.index[LatticeVertex(*v)] for v in cfg.probes]
        out["terminal"] = det[idx].astype(np.int8)
    if cfg.hit_center is not None:
        out["hit_distance"] = _min_distance(raw.path_points(), cfg.hit_center)
    return out


def _min_distance(pts: np.ndarray, z: complex) -> float:
    """Min distance from the polyline through pts to the point z."""
    a, b = pts[:-1], pts[1:]
    ab = b - a
    denom = (ab.real ** 2 + ab.imag ** 2)
    t = np.clip(((z - a).real * ab.real + (z - a).imag * ab.imag) / denom, 0.0, 1.0)
    proj = a + t * ab
    return float(np.abs(proj - z).min())


def run_ensemble(cfg: EnsembleConfig, jobs: int = 1, tip_grid=None,
                 domain: Optional[LatticeDomain] = None) -> SampleStore:
    """Generate all samples; reproducible and independent of `jobs`."""
    if cfg.process == "sle":
        return _run_sle_ensemble(cfg)
    if domain is None:
        domain = build_domain(cfg.domain_kind, cfg.domain_params)
    domain.triangles  # materialize shared caches before threading
    explorer._cached_setup(domain)
    origin = domain.v_start.position
    mode = (kernels.MODE_PERCOLATION if cfg.process == "percolation"
            else kernels.MODE_WALK)
    tg = None if tip_grid is None else np.asarray(tip_grid, float)

    def work(i):
        try:
            return _interface_sample(domain, cfg, i, origin, mode, tg)
        except Exception as e:
            raise EnsembleError(f"sample {i} failed: {e}") from e

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            samples = list(ex.map(work, range(cfg.n_samples)))
    else:
        samples = [work(i) for i in range(cfg.n_samples)]

    T = cfg.horizon_T
    return SampleStore(
        config=cfg,
        domain=domain,
        t_grid=None if T is None else np.linspace(0.0, T, N_QV_GRID + 1),
        w_grid=None if T is None else np.stack([s["w_grid"] for s in samples]),
        n_steps=np.array([s["n_steps"] for s in samples]),
        capacity=None if T is None else np.array([s["capacity"] for s in samples]),
        terminal=(np.stack([s["terminal"] for s in samples]) if cfg.probes else None),
        hit_distance=(np.array([s["hit_distance"] for s in samples])
                      if cfg.hit_center is not None else None),
        tips=None if tg is None else np.stack([s["tips"] for s in samples]),
        tip_grid=tg,
    )


def _run_sle_ensemble(cfg: EnsembleConfig, chunk: int = 256) -> SampleStore:
    T = cfg.horizon_T
    if T is None:
        raise EnsembleError("sle ensembles need a horizon")
    m = int(round(T / cfg.sle_dt))
    grid = np.linspace(0.0, T, N_QV_GRID + 1)
    gk = np.clip(np.searchsorted(np.linspace(0.0, T, m + 1), grid,
                                 side="right") - 1, 0, m)
    w_grid = np.empty((cfg.n_samples, len(grid)))
    tips = None
    tg = None
    caps = np.full(cfg.n_samples, float(m * cfg.sle_dt))
    sd = math.sqrt(cfg.kappa * cfg.sle_dt)
    for lo in range(0, cfg.n_samples, chunk):
        hi = min(lo + chunk, cfg.n_samples)
        w = np.empty((hi - lo, m + 1))
        w[:, 0] = 0.0
        for i in range(lo, hi):
            gen = np.random.Generator(np.random.Philox(
                key=[cfg.master_seed & (2**64 - 1), i]))
            np.cumsum(gen.standard_normal(m) * sd, out=w[i - lo, 1:])
        w_grid[lo:hi] = w[:, gk]
    return SampleStore(config=cfg, domain=None, t_grid=grid, w_grid=w_grid,
                       n_steps=np.full(cfg.n_samples, m), capacity=caps,
                       terminal=None, hit_distance=None, tips=tips, tip_grid=tg)


# ---------------------------------------------------------------------------
# report plumbing


@dataclass
class TestEntry:
    __test__ = False          # not a pytest collectable
    name: str
    property: str            # the mathematical statement being exercised
    statistic: float
    expected: float
    tolerance: float
    passed: bool
    samples: int
    seconds: float = 0.0
    gated: bool = True
    extra: dict = field(default_factory=dict)


@dataclass
class TestReport:
    __test__ = False
    preset: str
    master_seed: int
    entries: list
    config: dict = field(default_factory=dict)
    version: str = VERSION

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries if e.gated)

    def to_json(self) -> str:
        doc = {
            "preset": self.preset,
            "version": self.version,
            "master_seed": self.master_seed,
            "passed": self.passed,
            "config": self.config,
            "tests": [asdict(e) for e in self.entries],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def csv(self) -> str:
        lines = ["name,statistic,expected,tolerance,passed"]
        for e in self.entries:
            lines.append("%s,%r,%r,%r,%d" %
                         (e.name, e.statistic, e.expected, e.tolerance, e.passed))
        return "\n".join(lines) + "\n"


def _entry(name, prop, stat, expected, tol, samples, gated=True, **extra):
    return TestEntry(name=name, property=prop, statistic=float(stat),
                     expected=float(expected), tolerance=float(tol),
                     passed=bool(abs(stat - expected) <= tol), samples=samples,
                     gated=gated, extra=extra)


# ---------------------------------------------------------------------------
# statistical tests


def h_martingale_entries(store: SampleStore, h0_values) -> list:
    """Terminal-color frequencies against the initial harmonic values."""
    out = []
    for j, v in enumerate(store.config.probes):
        h0 = float(h0_values[j])
        freq = float(store.terminal[:, j].mean())
        tol = 3.0 * math.sqrt(max(h0 * (1 - h0), 1e-12) / store.M)
        out.append(_entry(
            f"terminal_color_{v[0]}_{v[1]}",
            "conservation of the harmonic coloring value under exploration",
            freq, h0, tol, store.M))
    return out


def test_h_martingale(store: SampleStore, v) -> TestEntry:
    """Terminal-color frequency at one probe vertex vs its exact h_0 value."""
    probes = [tuple(p) for p in store.config.probes]
    if tuple(v) not in probes:
        raise EnsembleError(f"{v} is not a probe of this store")
    d = store.domain
    field = harmonic_extension(d, {u: d.h0[u] for u in d.boundary_cycle},
                               SolverConfig())
    return h_martingale_entries(store, [field.value(p) for p in probes]
                                )[probes.index(tuple(v))]


def test_driving_bm(store: SampleStore, checkpoints, var_band=(0.05, 0.05),
                    ks_level=0.01, qv_tol=0.10, tag="") -> list:
    """Driving-process statistics against the diffusivity-4 Brownian law."""
    out = []
    M = store.M
    for t in checkpoints:
        wt = store.w_at(t)
        sd = float(wt.std(ddof=1))
        out.append(_entry(
            f"mean_W{tag}_t{t:g}", "driftlessness of the driving process",
            float(wt.mean()), 0.0, 3.0 * sd / math.sqrt(M), M))
        lo, hi = 4.0 * (1 - var_band[0]), 4.0 * (1 + var_band[1])
        ratio = float(wt.var(ddof=1) / t)
        out.append(TestEntry(
            name=f"var_W{tag}_t{t:g}",
            property="driving variance grows like 4t",
            statistic=ratio, expected=4.0, tolerance=max(4.0 - lo, hi - 4.0),
            passed=bool(lo <= ratio <= hi), samples=M,
            extra={"band": [lo, hi]}))
    # KS on normalized increments over the checkpoint grid
    ts = [0.0] + list(checkpoints)
    incs = []
    for a, b in zip(ts[:-1], ts[1:]):
        wa = store.w_at(a) if a > 0 else np.zeros(M)
        incs.append((store.w_at(b) - wa) / math.sqrt(4.0 * (b - a)))
    pooled = np.concatenate(incs)
    ks = scipy.stats.kstest(pooled, "norm")
    out.append(TestEntry(
        name=f"ks_increments{tag}",
        property="independent Gaussian driving increments",
        statistic=float(ks.pvalue), expected=1.0, tolerance=1.0 - ks_level,
        passed=bool(ks.pvalue > ks_level), samples=len(pooled),
        extra={"ks_statistic": float(ks.statistic), "level": ks_level}))
    # quadratic variation over the stored uniform grid
    qv = np.square(np.diff(store.w_grid, axis=1)).sum(axis=1)
    ratio = float(qv.mean() / store.t_grid[-1])
    out.append(TestEntry(
        name=f"qv{tag}",
        property="mean quadratic variation of the driving equals 4T",
        statistic=ratio, expected=4.0, tolerance=4.0 * qv_tol,
        passed=bool(abs(ratio - 4.0) <= 4.0 * qv_tol), samples=M))
    return out


def sle_angle_entries(cfg: EnsembleConfig, z: complex, checkpoints,
                      chunk: int = 256) -> list:
    """Constancy of the mean boundary-side probability along SLE(4) growth."""
    T = max(checkpoints)
    m = int(round(T / cfg.sle_dt))
    t_full = np.linspace(0.0, m * cfg.sle_dt, m + 1)
    snap = np.clip(np.searchsorted(t_full, np.asarray(checkpoints),
                                   side="right") - 1, 0, m)
    sd = math.sqrt(cfg.kappa * cfg.sle_dt)
    vals = np.empty((cfg.n_samples, len(checkpoints)))
    for lo in range(0, cfg.n_samples, chunk):
        hi = min(lo + chunk, cfg.n_samples)
        w = np.empty((hi - lo, m + 1))
        w[:, 0] = 0.0
        for i in range(lo, hi):
            gen = np.random.Generator(np.random.Philox(
                key=[cfg.master_seed & (2**64 - 1), i]))
            np.cumsum(gen.standard_normal(m) * sd, out=w[i - lo, 1:])
        g = loewner.evaluate_map_grid(w, np.full(m, cfg.sle_dt), z, snap)
        vals[lo:hi] = 1.0 - np.angle(g - w[:, snap]) / math.pi
    out = []
    base = float(vals[:, 0].mean())
    for j, t in enumerate(checkpoints):
        if j == 0:
            continue
        mean = float(vals[:, j].mean())
        sdj = float(vals[:, j].std(ddof=1))
        out.append(_entry(
            f"angle_mean_t{t:g}",
            "the boundary-side probability of a fixed point is conserved",
            mean, base, 3.0 * sdj / math.sqrt(cfg.n_samples), cfg.n_samples,
            checkpoint=t))
    return out


def test_harmonic_profile(scale: int, r_min_frac: float = 0.25) -> dict:
    """Initial coloring extension against the half-plane angle profile."""
    d = build_box_domain(scale, scale // 2)
    field = harmonic_extension(d, {v: d.h0[v] for v in d.boundary_cycle},
                               SolverConfig())
    origin = d.v_start.position
    r_min = r_min_frac * (scale // 2)
    devs = []
    for i, v in enumerate(d.vertices):
        if v not in d.interior:
            continue
        z = embed(v) - origin
        if z.imag < r_min or inradius(d, embed(v)) < r_min:
            continue
        htilde = 1.0 - np.angle(z) / math.pi
        devs.append(abs(field.values[i] - htilde))
    if not devs:
        raise EnsembleError("no vertices deep enough for the profile test")
    return {"scale": scale, "max_deviation": float(max(devs)),
            "n_vertices": len(devs)}


def check_hit_hypothesis(domain: LatticeDomain, z: complex, R: float) -> None:
    """No component of B(z,R) in the domain may touch both boundary arcs."""
    idx = domain.index
    pos = np.array([embed(v) for v in domain.vertices])
    near = np.abs(pos - z) <= R
    inner = [i for i, v in enumerate(domain.vertices)
             if near[i] and v in domain.interior]
    if not inner:
        return
    sub = {g: k for k, g in enumerate(inner)}
    rows, cols = [], []
    nbr = domain.neighbor_array
    for g in inner:
        for j in nbr[g]:
            if j in sub:
                rows.append(sub[g])
                cols.append(sub[j])
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)),
                        shape=(len(inner), len(inner)))
    ncomp, labels = csgraph.connected_components(adj, directed=False)
    plus, minus = set(domain.arc_plus), set(domain.arc_minus)
    touch = [[False, False] for _ in range(ncomp)]
    for g in inner:
        for j in nbr[g]:
            if j < 0:
                continue
            w = domain.vertices[j]
            if w in plus:
                touch[labels[sub[g]]][0] = True
            elif w in minus:
                touch[labels[sub[g]]][1] = True
    for a, b in touch:
        if a and b:
            raise EnsembleError(
                "hit-probability hypothesis violated: a ball component "
                "touches both boundary arcs")


def hit_frequencies(domain: LatticeDomain, z: complex, rs, R: float,
                    M: int, seed: int, jobs: int = 1):
    """Hit frequency of the interface for each radius, on shared samples."""
    check_hit_hypothesis(domain, z, R)
    cfg = EnsembleConfig(
        domain_kind="box", domain_params=(), process="harmonic-explorer",
        n_samples=M, master_seed=seed, hit_center=z)
    store = run_ensemble(cfg, jobs=jobs, domain=domain)
    dmin = store.hit_distance
    out = []
    for r in rs:
        k = int((dmin <= r).sum())
        p = k / M
        se = math.sqrt(max(p * (1 - p), 1.0 / M) / M)
        out.append({"r": float(r), "frequency": p, "stderr": se, "hits": k})
    return out


def estimate_hit_probability(domain: LatticeDomain, z: complex, r: float,
                             R: float, M: int, seed: int,
                             jobs: int = 1) -> dict:
    """Monte Carlo frequency of the interface entering B(z, r)."""
    if r > R:
        raise EnsembleError("need r <= R")
    return hit_frequencies(domain, z, [r], R, M, seed, jobs)[0]


def compare_he_sle(store_a: SampleStore, store_b: SampleStore, t_grid,
                   level: float = 0.01) -> list:
    """Two-sample KS comparisons of path functionals at each capacity."""
    if store_a.tips is None or store_b.tips is None:
        raise EnsembleError("stores need tip observables for comparison")
    out = []
    for j, t in enumerate(t_grid):
        za, zb = store_a.tips[:, j], store_b.tips[:, j]
        for fname, fa, fb in (
            ("tip_re", za.real, zb.real),
            ("tip_dstar_i", np.abs((za - 1j) / (za + 1j)),
             np.abs((zb - 1j) / (zb + 1j))),
        ):
            ks = scipy.stats.ks_2samp(fa, fb)
            out.append(TestEntry(
                name=f"ks_{fname}_t{t:g}",
                property="equality in law of interface and SLE(4) functionals",
                statistic=float(ks.pvalue), expected=1.0, tolerance=1.0 - level,
                passed=bool(ks.pvalue > level),
                samples=min(len(fa), len(fb)),
                extra={"ks_statistic": float(ks.statistic)}))
    return out
