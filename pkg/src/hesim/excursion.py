"""Discrete excursion measures and their exact identities.

An excursion enters the domain through a directed edge of E1 (tail on the
absorbing set), walks until it steps back onto the absorbing set, and is
kept when that last step lies in E2.  Each start edge carries weight 1/6
(the law of the walk's first step), so a length-1 excursion along an edge
in E1 and E2 contributes exactly 1/6 to the total mass.  Everything here
is computed by linear solves, never by sampling: the identities being
verified are exact.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Optional

import numpy as np

from . import explorer as _explorer
from .harmonic import (SolverConfig, _absorbing_mask, _green_kernel,
                       exit_measure_all, harmonic_extension)
from .lattice import (DirectedEdge, DomainError, LatticeDomain, LatticeVertex,
                      embed, inradius)


@dataclass(frozen=True, eq=False)
class EdgeSets:
    """Directed edges entering (e_out) and leaving (e_in) the open domain."""

    e_out: tuple
    e_in: tuple

    def __post_init__(self):
        assert tuple(e.rev() for e in self.e_out) == self.e_in


def edge_sets(domain: LatticeDomain, killed: Iterable = ()) -> EdgeSets:
    """All valid start/end edges for (domain minus killed).

    A directed edge qualifies for e_out when its interior runs through the
    open domain (boundary-cycle edges do not; boundary-to-boundary chords
    do) and its tail is absorbing (on the boundary or killed).
    """
    absorbing = _absorbing_mask(domain, killed)
    cyc = set()
    n = len(domain.boundary_cycle)
    for i in range(n):
        u, v = domain.boundary_cycle[i], domain.boundary_cycle[(i + 1) % n]
        cyc.add(tuple(sorted((u, v))))
    out = []
    for (u, v) in domain.closure_edges:
        if (u, v) in cyc:
            continue
        if absorbing[domain.index[u]]:
            out.append(DirectedEdge(u, v))
        if absorbing[domain.index[v]]:
            out.append(DirectedEdge(v, u))
    out = tuple(sorted(out))
    return EdgeSets(out, tuple(e.rev() for e in out))


@dataclass(frozen=True, eq=False)
class ExcursionSpec:
    domain: LatticeDomain
    killed: frozenset
    e1: tuple
    e2: tuple

    @classmethod
    def make(cls, domain: LatticeDomain, killed: Iterable = (),
             e1=None, e2=None) -> "ExcursionSpec":
        killed = frozenset(LatticeVertex(*v) for v in killed)
        sets = edge_sets(domain, killed)
        e1 = sets.e_out if e1 is None else tuple(sorted(
            DirectedEdge(LatticeVertex(*a), LatticeVertex(*b)) for a, b in e1))
        e2 = sets.e_in if e2 is None else tuple(sorted(
            DirectedEdge(LatticeVertex(*a), LatticeVertex(*b)) for a, b in e2))
        bad1 = set(e1) - set(sets.e_out)
        bad2 = set(e2) - set(sets.e_in)
        if bad1 or bad2:
            raise DomainError(f"edges outside the valid sets: {list(bad1 | bad2)[:3]}")
        return cls(domain, killed, e1, e2)

    @cached_property
    def sets(self) -> EdgeSets:
        return edge_sets(self.domain, self.killed)

    @property
    def e2_is_full(self) -> bool:
        return self.e2 == self.sets.e_in


@dataclass(frozen=True)
class ExcursionSummary:
    total_mass: float
    visit_integrals: dict


def total_mass(spec: ExcursionSpec) -> float:
    """Mass of excursions entering through e1 and leaving through e2."""
    d = spec.domain
    absorbing = _absorbing_mask(d, spec.killed)
    q = exit_measure_all(d, spec.killed, spec.e2)
    e2 = set(spec.e2)
    mass = 0.0
    for e in spec.e1:
        iu = d.index[e.head]
        if absorbing[iu]:
            if e in e2:
                mass += 1.0 / 6.0
        else:
            mass += q[iu] / 6.0
    return mass


def visit_integral(spec: ExcursionSpec, v) -> float:
    """Integral of the visit count n_v; requires e2 = all exit edges.

    Equals the harmonic measure H(v, rev(e1)) by the time-reversal identity.
    """
    if not spec.e2_is_full:
        raise DomainError("visit_integral is defined for e2 = full exit set")
    d = spec.domain
    absorbing = _absorbing_mask(d, spec.killed)
    i = d.index.get(LatticeVertex(*v))
    if i is None or absorbing[i]:
        raise DomainError(f"{v} is not a free vertex of the spec")
    rhs = np.zeros(len(absorbing))
    rhs[i] = 6.0
    g = _green_kernel(d, absorbing, rhs)           # green column from v
    out = 0.0
    for e in spec.e1:
        iu = d.index[e.head]
        if not absorbing[iu]:
            out += g[iu] / 6.0
    return out


def ball_hit_mass(spec: ExcursionSpec, center, radius: Optional[float] = None) -> float:
    """Mass of excursions visiting the ball around `center`; e2 must be full.

    Default radius is half the inradius of (domain minus killed) at the
    center, matching the hitting-bound setting.
    """
    if not spec.e2_is_full:
        raise DomainError("ball_hit_mass is defined for e2 = full exit set")
    d = spec.domain
    c = embed(LatticeVertex(*center)) if not isinstance(center, complex) else center
    if radius is None:
        inr = inradius(d, c)
        for v in spec.killed:
            inr = min(inr, abs(embed(v) - c))
        radius = inr / 2.0
    if radius < 1.0:
        raise DomainError(f"ball of radius {radius} is degenerate (< 1 lattice unit)")
    absorbing = _absorbing_mask(d, spec.killed)
    pos = np.array([embed(v) for v in d.vertices])
    in_ball = np.abs(pos - c) <= radius
    fixed = {}
    for i, v in enumerate(d.vertices):
        if absorbing[i]:
            fixed[v] = 1.0 if in_ball[i] else 0.0
        elif in_ball[i]:
            fixed[v] = 1.0
    psi = harmonic_extension(d, fixed, SolverConfig()).values
    mass = 0.0
    for e in spec.e1:
        ib, iu = d.index[e.tail], d.index[e.head]
        if in_ball[ib]:
            mass += 1.0 / 6.0
        elif absorbing[iu]:
            mass += (1.0 / 6.0) if in_ball[iu] else 0.0
        else:
            mass += psi[iu] / 6.0
    return mass


# ---------------------------------------------------------------------------
# interface-coupled mass (the martingale of the hitting-probability bound)


def _interface_spec(domain: LatticeDomain, colors: Mapping, e_minus) -> float:
    """Mass from e_minus to the 1-colored absorbing frontier of the state."""
    killed = [v for v in colors if v not in domain.boundary_set]
    sets = edge_sets(domain, killed)
    e_plus = tuple(e for e in sets.e_in if colors.get(e.head) == 1)
    spec = ExcursionSpec.make(domain, killed, e1=e_minus, e2=e_plus)
    return total_mass(spec)


def nu_martingale_check(domain: LatticeDomain, state, e_minus,
                        cfg: SolverConfig = SolverConfig()) -> tuple[float, float]:
    """One-step conservation of the interface excursion mass.

    lhs: mass from e_minus to the current 1-colored frontier.
    rhs: expectation of the same mass over the two one-step children.
    """
    lhs = _interface_spec(domain, state.colors, e_minus)
    p, black, white = _explorer.branch(state, cfg)
    rhs = (p * _interface_spec(domain, black.colors, e_minus)
           + (1.0 - p) * _interface_spec(domain, white.colors, e_minus))
    return lhs, rhs


# ---------------------------------------------------------------------------
# Dirichlet energy


def _as_value_array(domain: LatticeDomain, f) -> np.ndarray:
    if isinstance(f, np.ndarray):
        if f.shape != (len(domain.vertices),):
            raise DomainError("value array has the wrong length")
        return f.astype(float)
    out = np.empty(len(domain.vertices))
    for i, v in enumerate(domain.vertices):
        try:
            out[i] = f[v]
        except KeyError:
            raise DomainError(f"f is missing vertex {v}") from None
    return out


def dirichlet_energy(domain: LatticeDomain, f) -> float:
    """Sum of squared differences over the edges of the closed domain."""
    vals = _as_value_array(domain, f)
    idx = domain.index
    e = 0.0
    for (u, v) in domain.closure_edges:
        d = vals[idx[u]] - vals[idx[v]]
        e += d * d
    return float(e)


def edge_laplacian(domain: LatticeDomain, f) -> np.ndarray:
    """Delta f(v) = sum over closure edges [v,u] of (f(u) - f(v))."""
    vals = _as_value_array(domain, f)
    idx = domain.index
    out = np.zeros(len(domain.vertices))
    for (u, v) in domain.closure_edges:
        iu, iv = idx[u], idx[v]
        out[iu] += vals[iv] - vals[iu]
        out[iv] += vals[iu] - vals[iv]
    return out


def summary(spec: ExcursionSpec, probes=()) -> ExcursionSummary:
    return ExcursionSummary(
        total_mass=total_mass(spec),
        visit_integrals={LatticeVertex(*v): visit_integral(spec, v) for v in probes},
    )


def summary_to_csv(s: ExcursionSummary) -> str:
    buf = io.StringIO()
    buf.write("quantity,value\n")
    buf.write("total_mass,%r\n" % s.total_mass)
    for v, x in sorted(s.visit_integrals.items()):
        buf.write("visit_integral_%d_%d,%r\n" % (v.a, v.b, x))
    return buf.getvalue()
