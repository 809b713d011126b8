"""Exact-identity verification corpus.

Runs the machine-precision identities of the toolkit over randomized small
domains: the one-step conservation of the harmonic coloring value, the
excursion visit-count integral, reversal symmetry and one-step conservation
of excursion mass, the Dirichlet-energy identity and minimizer property,
and (in oracle mode) equivalence with the dense absorbing-chain oracle.
"""

from __future__ import annotations

import numpy as np

from . import excursion, explorer, harmonic, rng
from .harmonic import SolverConfig
from .lattice import (LatticeDomain, build_box_domain, build_from_cycle,
                      build_hexagon_domain)
from .oracles import ChainOracle
from .stats import TestEntry, TestReport

MART_TOL = 1e-8
EXCURSION_TOL = 1e-9
NU_TOL = 1e-8
GREEN_TOL = 1e-9
ORACLE_TOL = 1e-10


def _exact(name, prop, err, tol, samples=1, **extra):
    return TestEntry(name=name, property=prop, statistic=float(err),
                     expected=0.0, tolerance=float(tol),
                     passed=bool(err <= tol), samples=samples, extra=extra)


def random_domain(gen: np.random.Generator) -> LatticeDomain:
    """Random box/hexagon at scale 6-20 with random split edges."""
    if gen.random() < 0.6:
        w = int(gen.integers(6, 21))
        h = int(gen.integers(4, max(5, w // 2 + 1)))
        base = build_box_domain(w, h)
    else:
        base = build_hexagon_domain(int(gen.integers(3, 8)))
    cyc = base.boundary_cycle
    n = len(cyc)
    while True:
        i, j = int(gen.integers(n)), int(gen.integers(n))
        if i != j:
            break
    return build_from_cycle(
        cyc, (cyc[i], cyc[(i + 1) % n]), (cyc[j], cyc[(j + 1) % n]))


def corpus(seed: int, n_domains: int = 10) -> list:
    gen = np.random.default_rng(seed)
    return [random_domain(gen) for _ in range(n_domains)]


def _random_states(domains, seed, n_states, cfg):
    """Mid-run explorer states spread across the domain corpus."""
    out = []
    k = 0
    while len(out) < n_states:
        d = domains[k % len(domains)]
        s = explorer.init(d, cfg)
        depth = 1 + (k * 7) % 6
        for n in range(depth):
            if s.terminated:
                break
            s = explorer.step(s, rng.uniform(seed, k, n), cfg)
        if not s.terminated:
            out.append((d, s))
        k += 1
    return out


def _random_spec(d, gen, with_killed=True):
    killed = ()
    if with_killed and d.interior and gen.random() < 0.5:
        inner = sorted(d.interior)
        m = int(gen.integers(0, max(1, len(inner) // 4) + 1))
        killed = tuple(inner[i] for i in gen.choice(len(inner), m, replace=False))
        # keep at least one free vertex
        if len(killed) >= len(inner):
            killed = killed[:-1]
    sets = excursion.edge_sets(d, killed)
    k1 = int(gen.integers(1, len(sets.e_out) + 1))
    k2 = int(gen.integers(1, len(sets.e_in) + 1))
    e1 = tuple(sets.e_out[i] for i in sorted(gen.choice(len(sets.e_out), k1, replace=False)))
    e2 = tuple(sets.e_in[i] for i in sorted(gen.choice(len(sets.e_in), k2, replace=False)))
    return killed, e1, e2, sets


def _free_vertex(d, killed, gen):
    free = [v for v in sorted(d.interior) if v not in set(killed)]
    return free[int(gen.integers(len(free)))]


def run_identities(seed: int = 20240, n_domains: int = 10, n_states: int = 20,
                   oracle: bool = False, perturb: bool = False) -> TestReport:
    cfg = SolverConfig()
    gen = np.random.default_rng(seed)
    domains = corpus(seed, n_domains)
    entries = []
    inject = 1e-6 if perturb else 0.0

    # one-step conservation of the harmonic coloring value, every vertex
    states = _random_states(domains[:max(3, min(5, n_domains))], seed, n_states, cfg)
    worst = 0.0
    for d, s in states:
        p, black, white = explorer.branch(s, cfg)
        hb = black.harmonic_field(cfg).values
        hw = white.harmonic_field(cfg).values
        hn = s.harmonic_field(cfg).values
        worst = max(worst, float(np.abs(hn - (p * hb + (1 - p) * hw)).max()))
    entries.append(_exact(
        "h_one_step_martingale",
        "coloring one vertex keeps the expected harmonic value fixed",
        worst + inject, MART_TOL, samples=len(states)))

    # excursion visit integral: full set gives 1, subsets give exit measure
    worst_full, worst_sub, worst_rev = 0.0, 0.0, 0.0
    for d in domains:
        killed, e1, e2, sets = _random_spec(d, gen)
        v = _free_vertex(d, killed, gen)
        full = excursion.ExcursionSpec.make(d, killed)
        worst_full = max(worst_full, abs(excursion.visit_integral(full, v) - 1.0))
        sub = excursion.ExcursionSpec.make(d, killed, e1=e1)
        h = harmonic.harmonic_measure_edges(d, killed, v, [e.rev() for e in e1])
        worst_sub = max(worst_sub, abs(excursion.visit_integral(sub, v) - h))
        m1 = excursion.total_mass(excursion.ExcursionSpec.make(d, killed, e1=e1, e2=e2))
        m2 = excursion.total_mass(excursion.ExcursionSpec.make(
            d, killed, e1=[e.rev() for e in e2], e2=[e.rev() for e in e1]))
        worst_rev = max(worst_rev, abs(m1 - m2))
    entries.append(_exact(
        "visit_integral_full", "every excursion visits a free vertex once on average",
        worst_full, EXCURSION_TOL, samples=len(domains)))
    entries.append(_exact(
        "visit_integral_exit_measure",
        "visit integral equals the reversed-edge exit probability",
        worst_sub, EXCURSION_TOL, samples=len(domains)))
    entries.append(_exact(
        "excursion_reversal", "path reversal preserves total excursion mass",
        worst_rev, EXCURSION_TOL, samples=len(domains)))

    # one-step conservation of interface excursion mass
    worst = 0.0
    for d, s in states:
        sets = excursion.edge_sets(d)
        e_minus = tuple(e for e in sets.e_out if d.h0.get(e.tail) == 0)
        if not e_minus:
            continue
        lhs, rhs = excursion.nu_martingale_check(d, s, e_minus, cfg)
        worst = max(worst, abs(lhs - rhs))
    entries.append(_exact(
        "interface_mass_one_step",
        "expected excursion mass to the 1-colored frontier is conserved",
        worst, NU_TOL, samples=len(states)))

    # Dirichlet energy identity and minimizer property
    worst_id, minim_ok = 0.0, True
    for d in domains:
        vals = gen.standard_normal(len(d.vertices))
        E = excursion.dirichlet_energy(d, vals)
        lap = excursion.edge_laplacian(d, vals)
        worst_id = max(worst_id, abs(E + float(vals @ lap)) / max(1.0, E))
        g = harmonic.harmonic_extension(d, {v: d.h0[v] for v in d.boundary_cycle}, cfg)
        Eg = excursion.dirichlet_energy(d, g.values)
        for _ in range(2):
            tweak = g.values.copy()
            free = g.free_indices
            tweak[free] += 0.05 * gen.standard_normal(len(free))
            if excursion.dirichlet_energy(d, tweak) < Eg - 1e-12:
                minim_ok = False
    entries.append(_exact(
        "dirichlet_identity",
        "edge energy equals minus the inner product with the edge laplacian",
        worst_id, 1e-10, samples=len(domains)))
    entries.append(TestEntry(
        name="dirichlet_minimizer",
        property="the harmonic extension minimizes the edge energy",
        statistic=0.0 if minim_ok else 1.0, expected=0.0, tolerance=0.0,
        passed=minim_ok, samples=len(domains) * 2))

    # Green symmetry
    worst = 0.0
    for d in domains[:5]:
        u = _free_vertex(d, (), gen)
        v = _free_vertex(d, (), gen)
        if u == v:
            continue
        worst = max(worst, abs(harmonic.green(d, (), u)[v]
                               - harmonic.green(d, (), v)[u]))
    entries.append(_exact(
        "green_symmetry", "expected-visit counts are symmetric in their endpoints",
        worst, GREEN_TOL, samples=5))

    if oracle:
        entries.extend(oracle_equivalence(seed))

    return TestReport(preset="verify", master_seed=seed, entries=entries,
                      config={"n_domains": n_domains, "n_states": n_states,
                              "oracle": oracle, "perturb": perturb})


def tiny_corpus() -> list:
    """Domains with at most 12 free vertices for the dense oracle."""
    return [build_box_domain(4, 2), build_box_domain(6, 2),
            build_box_domain(13, 2), build_hexagon_domain(2)]


def oracle_equivalence(seed: int = 7) -> list:
    """Dense fundamental-matrix oracle vs the sparse-solve implementations."""
    gen = np.random.default_rng(seed)
    worst_mass, worst_visit, worst_h = 0.0, 0.0, 0.0
    n = 0
    for d in tiny_corpus():
        for killed in ((), (sorted(d.interior)[0],)):
            free = [v for v in sorted(d.interior) if v not in set(killed)]
            if len(free) < 2 or len(free) > 12:
                continue
            orc = ChainOracle(d, killed)
            sets = excursion.edge_sets(d, killed)
            for _ in range(3):
                k1 = int(gen.integers(1, len(sets.e_out) + 1))
                k2 = int(gen.integers(1, len(sets.e_in) + 1))
                e1 = tuple(sets.e_out[i] for i in
                           sorted(gen.choice(len(sets.e_out), k1, replace=False)))
                e2 = tuple(sets.e_in[i] for i in
                           sorted(gen.choice(len(sets.e_in), k2, replace=False)))
                spec = excursion.ExcursionSpec.make(d, killed, e1=e1, e2=e2)
                worst_mass = max(worst_mass, abs(
                    excursion.total_mass(spec) - orc.excursion_total_mass(e1, e2)))
                v = free[int(gen.integers(len(free)))]
                sub = excursion.ExcursionSpec.make(d, killed, e1=e1)
                worst_visit = max(worst_visit, abs(
                    excursion.visit_integral(sub, v)
                    - orc.excursion_visit_integral(e1, v)))
                worst_h = max(worst_h, abs(
                    harmonic.harmonic_measure_edges(d, killed, v, e2)
                    - orc.exit_edge_probability(v, e2)))
                n += 1
    return [
        _exact("oracle_total_mass",
               "sparse excursion mass equals the dense fundamental-matrix value",
               worst_mass, ORACLE_TOL, samples=n),
        _exact("oracle_visit_integral",
               "sparse visit integral equals the dense fundamental-matrix value",
               worst_visit, ORACLE_TOL, samples=n),
        _exact("oracle_exit_measure",
               "sparse exit probability equals the dense fundamental-matrix value",
               worst_h, ORACLE_TOL, samples=n),
    ]
