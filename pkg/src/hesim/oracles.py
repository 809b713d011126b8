"""Independent cross-check oracles.

These deliberately avoid the production code paths: the absorbing-chain
oracle rebuilds transition matrices from raw neighbor offsets and uses the
dense fundamental matrix N = (I - Q)^{-1}; the Loewner oracle integrates
the chordal ODE with fixed-step RK4 instead of slit composition.  They are
used by tests and by the --oracle mode of the verifier.
"""

from __future__ import annotations

import numpy as np

from .lattice import NEIGHBOR_OFFSETS, LatticeDomain, LatticeVertex


class ChainOracle:
    """Dense absorbing-chain computations on a small domain."""

    def __init__(self, domain: LatticeDomain, killed=()):
        killed = {LatticeVertex(*v) for v in killed}
        self.domain = domain
        self.absorbing = set(domain.boundary_cycle) | killed
        self.free = [v for v in sorted(domain.interior) if v not in self.absorbing]
        self.pos = {v: i for i, v in enumerate(self.free)}
        n = len(self.free)
        if n > 400:
            raise ValueError("chain oracle is meant for small domains")
        Q = np.zeros((n, n))
        for v in self.free:
            for da, db in NEIGHBOR_OFFSETS:
                w = LatticeVertex(v.a + da, v.b + db)
                if w in self.pos:
                    Q[self.pos[v], self.pos[w]] += 1.0 / 6.0
        self.N = np.linalg.inv(np.eye(n) - Q)   # expected visits u -> v

    def green(self, u, v) -> float:
        """Expected visits to v of a walk from u before absorption."""
        return float(self.N[self.pos[LatticeVertex(*u)], self.pos[LatticeVertex(*v)]])

    def exit_edge_probability(self, v, edges) -> float:
        """P(the first exit step of a walk from v is one of `edges`)."""
        edges = {(LatticeVertex(*a), LatticeVertex(*b)) for a, b in edges}
        i = self.pos[LatticeVertex(*v)]
        p = 0.0
        for (tail, head) in edges:
            if tail in self.pos and head in self.absorbing:
                p += self.N[i, self.pos[tail]] / 6.0
        return p

    def excursion_total_mass(self, e1, e2) -> float:
        """Mass of walks entering through e1 and exiting through e2."""
        e1 = [(LatticeVertex(*a), LatticeVertex(*b)) for a, b in e1]
        e2 = {(LatticeVertex(*a), LatticeVertex(*b)) for a, b in e2}
        total = 0.0
        for (b_, u) in e1:
            if u in self.pos:
                total += self.exit_edge_probability(u, e2) / 6.0
            elif (b_, u) in e2:
                total += 1.0 / 6.0              # length-1 excursion
        return total

    def excursion_visit_integral(self, e1, v) -> float:
        """Integral of the visit count n_v against the excursion measure."""
        v = LatticeVertex(*v)
        total = 0.0
        for (b_, u) in ((LatticeVertex(*a), LatticeVertex(*c)) for a, c in e1):
            if u in self.pos:
                total += self.N[self.pos[u], self.pos[v]] / 6.0
        return total


def rk4_loewner(driving, T: float, z: complex, n_sub: int = 64) -> complex:
    """Integrate dg/dt = 2/(g - W(t)) with fixed-substep RK4 per driving step.

    Independent of the slit-map composition used by evaluate_map.
    """
    g = complex(z)
    t = 0.0
    for step in driving.steps(upto=T):
        w = step.w
        h = step.dt / n_sub
        for _ in range(n_sub):
            k1 = 2.0 / (g - w)
            k2 = 2.0 / (g + 0.5 * h * k1 - w)
            k3 = 2.0 / (g + 0.5 * h * k2 - w)
            k4 = 2.0 / (g + h * k3 - w)
            g = g + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += step.dt
    return g
