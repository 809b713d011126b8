import numpy as np
import pytest

from hesim import excursion, explorer, harmonic, rng
from hesim.excursion import (ExcursionSpec, ball_hit_mass, dirichlet_energy,
                             edge_laplacian, edge_sets, nu_martingale_check,
                             summary, summary_to_csv, total_mass,
                             visit_integral)
from hesim.lattice import (DomainError, build_box_domain,
                           build_hexagon_domain, embed)
from hesim.oracles import ChainOracle
from hesim.verifysuite import random_domain


def test_edge_sets_reverse_involution(hex3):
    sets = edge_sets(hex3)
    assert tuple(e.rev() for e in sets.e_out) == sets.e_in
    assert tuple(e.rev() for e in sets.e_in) == sets.e_out


def test_edge_sets_brute_force_count():
    """Independent scan of boundary-incident edges crossing the domain."""
    d = build_hexagon_domain(3)
    sets = edge_sets(d)
    from hesim.lattice import neighbors
    boundary = set(d.boundary_cycle)
    cyc_edges = set()
    n = len(d.boundary_cycle)
    for i in range(n):
        cyc_edges.add(frozenset((d.boundary_cycle[i],
                                 d.boundary_cycle[(i + 1) % n])))
    count = 0
    for b in boundary:
        for w in neighbors(b):
            if w not in d.vertex_set or frozenset((b, w)) in cyc_edges:
                continue
            if w in d.interior:
                count += 1
            else:
                m = (embed(b) + embed(w)) / 2
                from shapely import contains_xy
                if contains_xy(d.polygon, m.real, m.imag):
                    count += 1
    assert len(sets.e_out) == count


def test_edge_sets_killed_everything(box84):
    killed = sorted(box84.interior)[:-1]
    sets = edge_sets(box84, killed)
    # tails absorbing on both ends are allowed; heads may be the lone free vertex
    assert all(e.tail in box84.boundary_set or e.tail in set(killed)
               for e in sets.e_out)


def test_total_mass_full_sets(hex3):
    sets = edge_sets(hex3)
    spec = ExcursionSpec.make(hex3)
    assert total_mass(spec) == pytest.approx(len(sets.e_out) / 6.0, abs=1e-9)
    empty = ExcursionSpec.make(hex3, e1=[])
    assert total_mass(empty) == 0.0


def test_total_mass_reversal(gen):
    for _ in range(10):
        d = random_domain(gen)
        sets = edge_sets(d)
        k1 = int(gen.integers(1, len(sets.e_out) + 1))
        k2 = int(gen.integers(1, len(sets.e_in) + 1))
        e1 = [sets.e_out[i] for i in gen.choice(len(sets.e_out), k1, replace=False)]
        e2 = [sets.e_in[i] for i in gen.choice(len(sets.e_in), k2, replace=False)]
        m1 = total_mass(ExcursionSpec.make(d, e1=e1, e2=e2))
        m2 = total_mass(ExcursionSpec.make(d, e1=[e.rev() for e in e2],
                                           e2=[e.rev() for e in e1]))
        assert m1 == pytest.approx(m2, abs=1e-9)


def test_visit_integral_identities(gen, hex3):
    spec = ExcursionSpec.make(hex3)
    for v in sorted(hex3.interior)[:4]:
        assert visit_integral(spec, v) == pytest.approx(1.0, abs=1e-9)
    for _ in range(10):
        d = random_domain(gen)
        sets = edge_sets(d)
        k = int(gen.integers(1, len(sets.e_out) + 1))
        e1 = [sets.e_out[i] for i in gen.choice(len(sets.e_out), k, replace=False)]
        inner = sorted(d.interior)
        v = inner[int(gen.integers(len(inner)))]
        lhs = visit_integral(ExcursionSpec.make(d, e1=e1), v)
        rhs = harmonic.harmonic_measure_edges(d, (), v, [e.rev() for e in e1])
        assert lhs == pytest.approx(rhs, abs=1e-9)
    with pytest.raises(DomainError):
        visit_integral(ExcursionSpec.make(hex3, e2=edge_sets(hex3).e_in[:2]),
                       sorted(hex3.interior)[0])


def test_visit_integral_empty(hex3):
    spec = ExcursionSpec.make(hex3, e1=[])
    assert visit_integral(spec, sorted(hex3.interior)[0]) == 0.0


def test_oracle_equivalence_small_domains(gen):
    for d in (build_box_domain(6, 2), build_hexagon_domain(2)):
        orc = ChainOracle(d)
        sets = edge_sets(d)
        for _ in range(4):
            k1 = int(gen.integers(1, len(sets.e_out) + 1))
            k2 = int(gen.integers(1, len(sets.e_in) + 1))
            e1 = [sets.e_out[i] for i in gen.choice(len(sets.e_out), k1, replace=False)]
            e2 = [sets.e_in[i] for i in gen.choice(len(sets.e_in), k2, replace=False)]
            assert total_mass(ExcursionSpec.make(d, e1=e1, e2=e2)) == pytest.approx(
                orc.excursion_total_mass(e1, e2), abs=1e-10)
            v = sorted(d.interior)[int(gen.integers(len(d.interior)))]
            assert visit_integral(ExcursionSpec.make(d, e1=e1), v) == pytest.approx(
                orc.excursion_visit_integral(e1, v), abs=1e-10)


def test_ball_hit_mass_bounds():
    d = build_hexagon_domain(5)
    spec = ExcursionSpec.make(d)
    center = (0, 0)
    m = ball_hit_mass(spec, center)
    assert 0.0 <= m <= total_mass(spec) + 1e-12
    # visiting the ball is rarer than exiting anywhere through a sub-family
    sets = edge_sets(d)
    e1 = sets.e_out[: len(sets.e_out) // 3]
    spec_sub = ExcursionSpec.make(d, e1=e1)
    m_sub = ball_hit_mass(spec_sub, center)
    assert m_sub <= ball_hit_mass(spec, center) + 1e-12
    # empirical two-sided comparability with the exit measure
    h = harmonic.harmonic_measure_edges(d, (), center, [e.rev() for e in e1])
    assert m_sub > 0 and m_sub / h < 1e3 and h / m_sub < 1e3


def test_ball_hit_mass_blocked():
    """A killed moat between the entry edges and the ball kills the mass."""
    d = build_box_domain(14, 8)
    inner = sorted(d.interior)
    moat = [v for v in inner if v.b == 4]
    center_candidates = [v for v in inner if v.b > 5]
    center = center_candidates[len(center_candidates) // 2]
    sets = edge_sets(d, moat)
    e1 = [e for e in sets.e_out if e.tail.b == 0]
    spec = ExcursionSpec.make(d, killed=moat, e1=e1)
    assert ball_hit_mass(spec, center, radius=1.0) == pytest.approx(0.0, abs=1e-12)


def test_ball_hit_degenerate(hex3):
    spec = ExcursionSpec.make(hex3)
    with pytest.raises(DomainError):
        ball_hit_mass(spec, (0, 0), radius=0.25)


def test_nu_martingale_identity(gen, cfg):
    checked = 0
    while checked < 8:
        d = random_domain(gen)
        sets = edge_sets(d)
        e_minus = tuple(e for e in sets.e_out if d.h0.get(e.tail) == 0)
        if not e_minus:
            continue
        s = explorer.init(d, cfg)
        for n in range(int(gen.integers(1, 5))):
            if s.terminated:
                break
            s = explorer.step(s, rng.uniform(17, checked, n), cfg)
        if s.terminated:
            continue
        lhs, rhs = nu_martingale_check(d, s, e_minus, cfg)
        assert lhs == pytest.approx(rhs, abs=1e-8)
        checked += 1


def test_nu_martingale_empty_and_deterministic(box106, cfg):
    s = explorer.init(box106, cfg)
    lhs, rhs = nu_martingale_check(box106, s, (), cfg)
    assert lhs == rhs == 0.0


def test_dirichlet_energy_identities(gen):
    for _ in range(5):
        d = random_domain(gen)
        vals = gen.standard_normal(len(d.vertices))
        E = dirichlet_energy(d, vals)
        lap = edge_laplacian(d, vals)
        assert abs(E + float(vals @ lap)) <= 1e-10 * max(1.0, E)
    d = build_box_domain(6, 4)
    const = np.ones(len(d.vertices)) * 0.7
    assert dirichlet_energy(d, const) == 0.0
    with pytest.raises(DomainError):
        dirichlet_energy(d, {v: 0.0 for v in list(d.vertices)[:-1]})


def test_dirichlet_minimizer(gen, cfg):
    for _ in range(3):
        d = random_domain(gen)
        g = harmonic.harmonic_extension(
            d, {v: d.h0[v] for v in d.boundary_cycle}, cfg)
        Eg = dirichlet_energy(d, g.values)
        for _ in range(20):
            tweak = g.values.copy()
            free = g.free_indices
            tweak[free] += 0.1 * gen.standard_normal(len(free))
            assert dirichlet_energy(d, tweak) >= Eg - 1e-12


def test_summary_csv(hex3):
    spec = ExcursionSpec.make(hex3)
    s = summary(spec, probes=[(0, 0)])
    text = summary_to_csv(s)
    assert text.splitlines()[0] == "quantity,value"
    assert "total_mass" in text and "visit_integral_0_0" in text
