import numpy as np
import pytest

from hesim import harmonic
from hesim.harmonic import (SolverConfig, SolverError, green,
                            harmonic_extension, harmonic_measure_edges,
                            mc_hit_estimate, refix)
from hesim.lattice import DomainError, LatticeVertex, build_box_domain
from hesim.excursion import edge_sets
from hesim.oracles import ChainOracle
from hesim.verifysuite import random_domain


def boundary_fixed(d):
    return {v: float(d.h0[v]) for v in d.boundary_cycle}


def test_single_free_vertex_is_neighbor_mean(gen):
    """One free vertex: value is the plain mean of its six neighbors."""
    from hesim.lattice import neighbors
    d = build_box_domain(6, 4)
    inner = sorted(d.interior)
    v = inner[len(inner) // 2]
    fixed = boundary_fixed(d)
    for u in inner:
        if u != v:
            fixed[u] = float(gen.integers(0, 2))
    f = harmonic_extension(d, fixed)
    mean = np.mean([f.value(w) for w in neighbors(v)])
    assert f.value(v) == pytest.approx(mean, abs=1e-12)
    # the half-ones/half-zeros case of the mean rule
    halves = dict(fixed)
    nbrs = neighbors(v)
    for k, w in enumerate(nbrs):
        halves[w] = 1.0 if k < 3 else 0.0
    assert harmonic_extension(d, halves).value(v) == pytest.approx(0.5, abs=1e-12)
    one = dict(fixed)
    for k, w in enumerate(nbrs):
        one[w] = 1.0 if k == 0 else 0.0
    assert harmonic_extension(d, one).value(v) == pytest.approx(1 / 6, abs=1e-12)


def test_two_free_vertices_against_hand_solve(gen):
    """Two adjacent free vertices: solver matches the 2x2 system by hand."""
    from hesim.lattice import adjacent, neighbors
    d = build_box_domain(6, 4)
    inner = sorted(d.interior)
    u, v = None, None
    for a in inner:
        for b in inner:
            if a < b and adjacent(a, b):
                u, v = a, b
    fixed = boundary_fixed(d)
    for w in inner:
        if w not in (u, v):
            fixed[w] = float(gen.random())
    f = harmonic_extension(d, fixed)
    su = sum(f.value(w) for w in neighbors(u) if w != v)
    sv = sum(f.value(w) for w in neighbors(v) if w != u)
    # 6 hu = su + hv ; 6 hv = sv + hu  =>  hu = (6 su + sv) / 35
    hu = (6 * su + sv) / 35.0
    hv = (6 * sv + su) / 35.0
    assert f.value(u) == pytest.approx(hu, abs=1e-10)
    assert f.value(v) == pytest.approx(hv, abs=1e-10)


def test_mean_value_and_maximum_principle(box106, cfg):
    f = harmonic_extension(box106, boundary_fixed(box106), cfg)
    assert f.mean_value_defect() <= cfg.tolerance
    assert f.values.min() >= 0.0 - 1e-12
    assert f.values.max() <= 1.0 + 1e-12


def test_method_equivalence(box106):
    fixed = boundary_fixed(box106)
    ref = harmonic_extension(box106, fixed, SolverConfig("direct-sparse"))
    for method in ("conjugate-gradient", "gauss-seidel"):
        alt = harmonic_extension(box106, fixed, SolverConfig(method))
        assert np.abs(alt.values - ref.values).max() <= 100 * 1e-10


def test_method_equivalence_large():
    """Solver agreement on a domain with thousands of free vertices."""
    d = build_box_domain(100, 50)
    fixed = boundary_fixed(d)
    ref = harmonic_extension(d, fixed, SolverConfig("direct-sparse"))
    for method in ("conjugate-gradient", "gauss-seidel"):
        alt = harmonic_extension(d, fixed, SolverConfig(method))
        assert np.abs(alt.values - ref.values).max() <= 100 * 1e-10


def test_monte_carlo_mode_is_consistent(box84):
    fixed = boundary_fixed(box84)
    ref = harmonic_extension(box84, fixed, SolverConfig("direct-sparse"))
    mc = harmonic_extension(box84, fixed,
                            SolverConfig("monte-carlo", mc_walks=4000, mc_seed=5))
    free = ref.free_indices
    err = np.abs(mc.values[free] - ref.values[free])
    # 4 sigma at p(1-p)/n <= 0.25/4000
    assert err.max() <= 4 * np.sqrt(0.25 / 4000) + 1e-12


def test_linearity(gen, box84, cfg):
    bc = box84.boundary_cycle
    f1 = {v: float(gen.standard_normal()) for v in bc}
    f2 = {v: float(gen.standard_normal()) for v in bc}
    a, b = 0.7, -1.3
    comb = {v: a * f1[v] + b * f2[v] for v in bc}
    e1 = harmonic_extension(box84, f1, cfg).values
    e2 = harmonic_extension(box84, f2, cfg).values
    ec = harmonic_extension(box84, comb, cfg).values
    assert np.abs(ec - (a * e1 + b * e2)).max() <= 10 * cfg.tolerance


def test_refix_identity_and_monotonicity(box106, cfg):
    f = harmonic_extension(box106, boundary_fixed(box106), cfg)
    v = sorted(box106.interior)[7]
    same = refix(f, v, f.value(v), cfg)
    assert np.abs(same.values - f.values).max() <= cfg.tolerance
    up = refix(f, v, 1.0, cfg)
    assert (up.values - f.values).min() >= -1e-9
    with pytest.raises(DomainError):
        refix(up, v, 0.0, cfg)


def test_refix_warm_matches_cold(gen, cfg):
    for _ in range(3):
        d = random_domain(gen)
        f = harmonic_extension(d, boundary_fixed(d), cfg)
        v = sorted(d.interior)[int(gen.integers(len(d.interior)))]
        warm = refix(f, v, 1.0, SolverConfig("conjugate-gradient", warm_start=True))
        cold = harmonic_extension(d, {**boundary_fixed(d), v: 1.0},
                                  SolverConfig("direct-sparse"))
        assert np.abs(warm.values - cold.values).max() <= 10 * cfg.tolerance


def test_green_basics(box84):
    v = sorted(box84.interior)[3]
    g = green(box84, (), v)
    assert g[v] >= 1.0
    assert all(x >= -1e-15 for x in g.values())
    with pytest.raises(DomainError):
        green(box84, (), box84.boundary_cycle[0])


def test_green_symmetry(gen):
    for _ in range(5):
        d = random_domain(gen)
        inner = sorted(d.interior)
        u = inner[int(gen.integers(len(inner)))]
        v = inner[int(gen.integers(len(inner)))]
        if u == v:
            continue
        assert green(d, (), u)[v] == pytest.approx(green(d, (), v)[u], abs=1e-9)


def test_green_all_neighbors_absorbing():
    """A free vertex whose entire neighborhood absorbs is visited once."""
    d = build_box_domain(6, 2)
    inner = sorted(d.interior)
    v = inner[2]
    killed = [u for u in inner if u != v]
    g = green(d, killed, v)
    assert g[v] == pytest.approx(1.0, abs=1e-12)


def test_harmonic_measure_edges_total_and_empty(box84):
    v = sorted(box84.interior)[0]
    sets = edge_sets(box84)
    all_exit = [e.rev() for e in sets.e_out]
    assert harmonic_measure_edges(box84, (), v, all_exit) == pytest.approx(1.0, abs=1e-9)
    assert harmonic_measure_edges(box84, (), v, []) == 0.0


def test_harmonic_measure_symmetry_axis():
    d = build_box_domain(10, 4)
    sets = edge_sets(d)
    minus = set(d.arc_minus)
    E = [e for e in sets.e_in if e.head in minus]
    # axis vertices have x = 1/2: a + b/2 = 1/2
    v = LatticeVertex(0, 1)
    assert v in d.interior
    assert harmonic_measure_edges(d, (), v, E) == pytest.approx(0.5, abs=1e-9)


def test_harmonic_measure_vs_oracle(gen):
    for _ in range(3):
        d = build_box_domain(int(gen.integers(5, 9)), 2)
        orc = ChainOracle(d)
        sets = edge_sets(d)
        k = int(gen.integers(1, len(sets.e_in)))
        E = [sets.e_in[i] for i in gen.choice(len(sets.e_in), k, replace=False)]
        v = sorted(d.interior)[0]
        assert harmonic_measure_edges(d, (), v, E) == pytest.approx(
            orc.exit_edge_probability(v, E), abs=1e-10)


def test_mc_hit_estimate_agrees(gen):
    for _ in range(3):
        d = random_domain(gen)
        sets = edge_sets(d)
        k = int(gen.integers(1, len(sets.e_in)))
        E = [sets.e_in[i] for i in gen.choice(len(sets.e_in), k, replace=False)]
        inner = sorted(d.interior)
        v = inner[int(gen.integers(len(inner)))]
        exact = harmonic_measure_edges(d, (), v, E)
        est, se = mc_hit_estimate(d, (), v, E, n_walks=20000, seed=int(gen.integers(2**31)))
        assert abs(est - exact) <= 4 * max(se, 1e-4)


def test_mc_hit_estimate_full_set_is_one(box84):
    sets = edge_sets(box84)
    v = sorted(box84.interior)[0]
    est, _ = mc_hit_estimate(box84, (), v, [e.rev() for e in sets.e_out],
                             n_walks=500, seed=3)
    assert est == 1.0
    with pytest.raises(ValueError):
        mc_hit_estimate(box84, (), v, [], n_walks=0, seed=3)


def test_solver_failure_carries_residual(box106):
    with pytest.raises(SolverError) as ei:
        harmonic_extension(box106, boundary_fixed(box106),
                           SolverConfig("conjugate-gradient", max_iterations=1,
                                        warm_start=False))
    assert ei.value.residual is not None and ei.value.residual > 1e-10


def test_boundary_must_be_fixed(box84):
    with pytest.raises(DomainError):
        harmonic_extension(box84, {sorted(box84.interior)[0]: 1.0})


def test_field_dump_format(box84, cfg):
    f = harmonic_extension(box84, boundary_fixed(box84), cfg)
    text = harmonic.field_to_text(f)
    assert text.startswith("HEFIELD 1\n")
    assert len(text.splitlines()) == 1 + len(box84.vertices)
