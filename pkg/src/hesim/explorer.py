"""The harmonic explorer process and its percolation-interface twin.

A state carries the coloring of the determined vertices, the current edge
midpoint, and the polyline through triangle centers.  One step crosses into
the triangle ahead, colors its apex (probability = harmonic extension value
there), and turns so that color 1 stays on the right of the path.

Two probability sources implement the same law:
  * solver mode ("direct-sparse" / "conjugate-gradient" / "gauss-seidel"):
    the apex probability p is computed exactly and compared with the step's
    uniform coin, maintaining the harmonic field incrementally;
  * walk mode ("monte-carlo"): the apex takes the color of the first
    determined vertex hit by one random walk, which draws the same Bernoulli
    exactly and needs no linear solves.  Ensembles default to this.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import kernels, rng
from .harmonic import HarmonicField, SolverConfig, harmonic_extension, refix
from .lattice import (EdgeMidpoint, LatticeDomain, LatticeVertex, Triangle,
                      _cross2, edge_third_vertices, embed, midpoint,
                      triangle_across)


class ExplorerError(RuntimeError):
    pass


@dataclass(frozen=True)
class StepRecord:
    v_next: LatticeVertex
    p: float
    x: Optional[float]           # None for forced branch children
    already_fixed: bool
    chose_double_prime: bool


@dataclass(frozen=True, eq=False)
class ExplorerState:
    domain: LatticeDomain
    n: int
    colors: dict                 # determined set V_n with its 0/1 coloring
    field: Optional[HarmonicField]
    current_mid: EdgeMidpoint
    previous_mid: Optional[EdgeMidpoint]
    prev_triangle: Optional[Triangle]
    path: tuple                  # embedded polyline points (complex)
    terminated: bool
    step_log: tuple

    @property
    def path_points(self) -> np.ndarray:
        return np.asarray(self.path, dtype=complex)

    def harmonic_field(self, cfg: SolverConfig = SolverConfig()) -> HarmonicField:
        """The extension h_n of the current coloring (solved on demand)."""
        if self.field is not None:
            return self.field
        return harmonic_extension(self.domain, self.colors, cfg)

    def terminal_values(self) -> dict:
        """h_N on every vertex of the closure; requires a terminated state.

        After termination the interface separates the undetermined region
        into components whose harmonic value is the 0/1 constant they touch.
        """
        if not self.terminated:
            raise ExplorerError("terminal_values on a running state")
        d = self.domain
        det = np.full(len(d.vertices), kernels.UNDET, dtype=np.uint8)
        for v, c in self.colors.items():
            det[d.index[v]] = c
        kernels.fill_terminal_colors(d.neighbor_array, det)
        return {v: int(det[i]) for i, v in enumerate(d.vertices)}


def init(domain: LatticeDomain, cfg: SolverConfig = SolverConfig()) -> ExplorerState:
    """State at n = 0: boundary coloring in place, path at v_start."""
    colors = {v: int(domain.h0[v]) for v in domain.boundary_cycle}
    field = None
    if cfg.method != "monte-carlo":
        field = harmonic_extension(domain, colors, cfg)
    return ExplorerState(
        domain=domain, n=0, colors=colors, field=field,
        current_mid=domain.v_start, previous_mid=None, prev_triangle=None,
        path=(domain.v_start.position,), terminated=False, step_log=(),
    )


def _oriented_base(tri: Triangle, m: EdgeMidpoint, apex: LatticeVertex):
    """Edge endpoints (P, Q) with (P, Q, apex) counterclockwise."""
    p_v, q_v = m.u, m.v
    if _cross2(p_v, q_v, apex) < 0:
        p_v, q_v = q_v, p_v
    return p_v, q_v


def _advance(s: ExplorerState, x: Optional[float], cfg: SolverConfig,
             forced: Optional[int] = None) -> ExplorerState:
    if s.terminated:
        raise ExplorerError("step on a terminated state")
    d = s.domain
    tri = triangle_across(s.current_mid, s.prev_triangle, d)
    apex = tri.opposite_vertex(s.current_mid)
    p_v, q_v = _oriented_base(tri, s.current_mid, apex)

    already = apex in s.colors
    if already:
        p = float(s.colors[apex])
    else:
        if s.field is None:
            raise ExplorerError("stepwise advance requires a solver-backed field")
        p = min(1.0, max(0.0, s.field.value(apex)))

    if forced is None:
        if x is None or not (0.0 <= x <= 1.0):
            raise ExplorerError(f"coin x must be in [0, 1], got {x}")
        chose = x <= p
    else:
        chose = bool(forced)
        x = None
    color = 1 if chose else 0

    colors = s.colors
    field = s.field
    if not already:
        colors = dict(colors)
        colors[apex] = color
        if field is not None:
            field = refix(field, apex, float(color), cfg)

    # v'' = midpoint on the ccw arc apex -> v_bar, v' = on v_bar -> apex
    new_mid = midpoint(apex, p_v) if chose else midpoint(q_v, apex)
    rec = StepRecord(v_next=apex, p=p, x=x, already_fixed=already,
                     chose_double_prime=chose)
    terminated = new_mid == d.v_end
    if not terminated and new_mid in d.boundary_midpoints:
        raise ExplorerError(f"interface reached the boundary at {new_mid} != v_end")
    return replace(
        s, n=s.n + 1, colors=colors, field=field, current_mid=new_mid,
        previous_mid=s.current_mid, prev_triangle=tri,
        path=s.path + (tri.centroid, new_mid.position),
        terminated=terminated, step_log=s.step_log + (rec,),
    )


def step(s: ExplorerState, x: float, cfg: SolverConfig = SolverConfig()) -> ExplorerState:
    """One explorer step driven by the uniform coin x."""
    return _advance(s, x, cfg)


def branch(s: ExplorerState, cfg: SolverConfig = SolverConfig()):
    """(p, black child, white child): the two one-step continuations.

    For an already-determined apex both children coincide with the
    deterministic step.  Used by the exact one-step martingale checks.
    """
    if s.terminated:
        raise ExplorerError("branch on a terminated state")
    tri = triangle_across(s.current_mid, s.prev_triangle, s.domain)
    apex = tri.opposite_vertex(s.current_mid)
    if apex in s.colors:
        p = float(s.colors[apex])
        child = _advance(s, 0.5, cfg)
        return p, child, child
    if s.field is None:
        raise ExplorerError("branch requires a solver-backed field")
    p = min(1.0, max(0.0, s.field.value(apex)))
    black = _advance(s, None, cfg, forced=1)
    white = _advance(s, None, cfg, forced=0)
    return p, black, white


# ---------------------------------------------------------------------------
# full runs


@dataclass(frozen=True, eq=False)
class RawRun:
    """Array-level record of one kernel run (fast path for ensembles)."""

    domain: LatticeDomain
    mode: int
    master_seed: int
    sample_index: int
    n_steps: int
    status: int
    apex: np.ndarray
    p: np.ndarray
    x: np.ndarray
    already: np.ndarray
    turn: np.ndarray
    mid_u: np.ndarray
    mid_w: np.ndarray
    det: np.ndarray

    @property
    def terminated(self) -> bool:
        return self.status == kernels.RUN_OK

    def path_points(self) -> np.ndarray:
        """Embedded polyline v0, c(T_1), v1, c(T_2), ... for this run."""
        d = self.domain
        ax = d._axial
        pos = ax[:, 0] + 0.5 * ax[:, 1] + 1j * (np.sqrt(3) / 2) * ax[:, 1]
        n = self.n_steps
        su, sw = d.index[d.v_start.u], d.index[d.v_start.v]
        eu = np.concatenate(([su], self.mid_u[:n]))
        ew = np.concatenate(([sw], self.mid_w[:n]))
        mids = (pos[eu] + pos[ew]) / 2.0
        cents = (pos[eu[:-1]] + pos[ew[:-1]] + pos[self.apex[:n]]) / 3.0
        out = np.empty(2 * n + 1, dtype=complex)
        out[0] = mids[0]
        out[1::2] = cents
        out[2::2] = mids[1:]
        return out

    def terminal_det(self) -> np.ndarray:
        if not self.terminated:
            raise ExplorerError("terminal colors on a truncated run")
        det = self.det.copy()
        kernels.fill_terminal_colors(self.domain.neighbor_array, det)
        return det


def _kernel_setup(domain: LatticeDomain):
    d = domain
    det0 = np.full(len(d.vertices), kernels.UNDET, dtype=np.uint8)
    for v in d.boundary_cycle:
        det0[d.index[v]] = d.h0[v]
    ax = d._axial
    x2 = (2 * ax[:, 0] + ax[:, 1]).astype(np.int64)
    y2 = ax[:, 1].astype(np.int64).copy()
    su, sw = d.index[d.v_start.u], d.index[d.v_start.v]
    eu_end, ew_end = d.index[d.v_end.u], d.index[d.v_end.v]
    outside = [t for t in edge_third_vertices(d.v_start)
               if t in d.index and not d.contains_triangle(
                   Triangle.from_vertices((d.v_start.u, d.v_start.v, t)))]
    t_prev0 = d.index[outside[0]] if outside else -2
    return det0, x2, y2, su, sw, t_prev0, eu_end, ew_end


_KERNEL_CACHE: "weakref.WeakKeyDictionary" = None


def _cached_setup(domain: LatticeDomain):
    global _KERNEL_CACHE
    if _KERNEL_CACHE is None:
        import weakref
        _KERNEL_CACHE = weakref.WeakKeyDictionary()
    got = _KERNEL_CACHE.get(domain)
    if got is None:
        got = _kernel_setup(domain)
        _KERNEL_CACHE[domain] = got
    return got


def run_raw(domain: LatticeDomain, master_seed: int, sample_index: int = 0,
            mode: int = kernels.MODE_WALK, stop_height: Optional[float] = None,
            max_steps: Optional[int] = None) -> RawRun:
    """Kernel-backed interface run; the fast path used by ensembles."""
    det0, x2, y2, su, sw, t_prev0, eu_end, ew_end = _cached_setup(domain)
    det = det0.copy()
    if max_steps is None:
        max_steps = len(domain.triangles) + 1
    b_stop = -1
    if stop_height is not None:
        b_stop = int(np.ceil(stop_height / (np.sqrt(3) / 2)))
    m = max_steps
    apex = np.empty(m, dtype=np.int64)
    p = np.empty(m, dtype=np.float64)
    x = np.empty(m, dtype=np.float64)
    already = np.empty(m, dtype=np.bool_)
    turn = np.empty(m, dtype=np.bool_)
    mid_u = np.empty(m, dtype=np.int64)
    mid_w = np.empty(m, dtype=np.int64)
    n, status = kernels.run_interface(
        domain.neighbor_array, x2, y2, det, su, sw, t_prev0, eu_end, ew_end,
        mode, np.uint64(master_seed & (2**64 - 1)), np.uint64(sample_index),
        b_stop, m, apex, p, x, already, turn, mid_u, mid_w)
    if status == kernels.RUN_ERR_NO_APEX:
        raise ExplorerError(f"no triangle ahead at step {n} (corrupt domain)")
    if status == kernels.RUN_ERR_MAXSTEPS and stop_height is None:
        raise ExplorerError(f"run exceeded the triangle bound {max_steps}")
    return RawRun(domain, mode, master_seed, sample_index, n, status,
                  apex, p, x, already, turn, mid_u, mid_w, det)


def _state_from_raw(raw: RawRun, cfg: SolverConfig) -> ExplorerState:
    d = raw.domain
    n = raw.n_steps
    verts = d.vertices
    colors = {v: int(c) for v, c in zip(verts, raw.det) if c != kernels.UNDET}
    log = tuple(
        StepRecord(v_next=verts[raw.apex[i]], p=float(raw.p[i]), x=float(raw.x[i]),
                   already_fixed=bool(raw.already[i]),
                   chose_double_prime=bool(raw.turn[i]))
        for i in range(n)
    )
    last = midpoint(verts[raw.mid_u[n - 1]], verts[raw.mid_w[n - 1]]) if n else d.v_start
    prev_m = (midpoint(verts[raw.mid_u[n - 2]], verts[raw.mid_w[n - 2]])
              if n >= 2 else (d.v_start if n == 1 else None))
    prev_tri = None
    if n:
        prev_tri = Triangle.from_vertices(
            (verts[raw.apex[n - 1]],
             *( (d.v_start.u, d.v_start.v) if n == 1 else
                (verts[raw.mid_u[n - 2]], verts[raw.mid_w[n - 2]]) )))
    return ExplorerState(
        domain=d, n=n, colors=colors, field=None,
        current_mid=last, previous_mid=prev_m, prev_triangle=prev_tri,
        path=tuple(raw.path_points()), terminated=raw.terminated, step_log=log,
    )


#: opt-in configuration for the walk-coloring sampler used by ensembles
WALK = SolverConfig(method="monte-carlo")


def run(domain: LatticeDomain, master_seed: int,
        cfg: SolverConfig = SolverConfig(),
        sample_index: int = 0, stop_height: Optional[float] = None) -> ExplorerState:
    """Run the harmonic explorer to termination (or to the height cap).

    The default solver-backed mode computes each apex probability exactly
    and compares it with the step's coin; cfg Method "monte-carlo" (the
    `WALK` shorthand) instead colors the apex by one random walk, which
    draws the same Bernoulli law with no linear solves and is what the
    ensemble presets use.
    """
    if cfg.method == "monte-carlo":
        raw = run_raw(domain, master_seed, sample_index, kernels.MODE_WALK,
                      stop_height)
        return _state_from_raw(raw, cfg)
    s = init(domain, cfg)
    bound = len(domain.triangles) + 1
    b_stop = None
    if stop_height is not None:
        b_stop = int(np.ceil(stop_height / (np.sqrt(3) / 2)))
    while not s.terminated:
        if s.n >= bound:
            raise ExplorerError(f"run exceeded the triangle bound {bound}")
        x = rng.uniform(master_seed, sample_index, s.n, 0)
        s = _advance(s, x, cfg)
        if b_stop is not None and s.step_log[-1].v_next.b >= b_stop:
            break
    return s


def run_percolation(domain: LatticeDomain, master_seed: int,
                    sample_index: int = 0,
                    stop_height: Optional[float] = None) -> ExplorerState:
    """Interface with fair-coin colors; same machinery, no harmonic solves."""
    raw = run_raw(domain, master_seed, sample_index, kernels.MODE_PERCOLATION,
                  stop_height)
    return _state_from_raw(raw, SolverConfig(method="monte-carlo"))


# ---------------------------------------------------------------------------
# CSV surfaces


def path_to_csv(points) -> str:
    buf = io.StringIO()
    buf.write("step,x,y\n")
    for i, z in enumerate(points):
        buf.write("%d,%r,%r\n" % (i, float(np.real(z)), float(np.imag(z))))
    return buf.getvalue()


def csv_to_path(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split(",")[:3] != ["step", "x", "y"]:
        raise ValueError("path CSV must have header step,x,y")
    pts = []
    for ln in lines[1:]:
        _, xs, ys = ln.split(",")
        pts.append(complex(float(xs), float(ys)))
    return np.asarray(pts, dtype=complex)


def steps_to_csv(log) -> str:
    buf = io.StringIO()
    buf.write("n,va,vb,p,x,fixed,turn\n")
    for i, r in enumerate(log):
        xs = "" if r.x is None else repr(float(r.x))
        buf.write("%d,%d,%d,%r,%s,%d,%d\n" %
                  (i + 1, r.v_next.a, r.v_next.b, float(r.p), xs,
                   int(r.already_fixed), int(r.chose_double_prime)))
    return buf.getvalue()
