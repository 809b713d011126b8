"""Discrete harmonic extensions, Green functions and harmonic measure.

The Dirichlet problem is posed on the free vertices (interior minus fixed)
of a LatticeDomain: 6*h(v) - sum of neighbor values = 0, which is symmetric
positive definite, so a sparse direct factorization and conjugate gradient
are both applicable.  All probabilistic quantities (Green function, exit
probabilities) reduce to solves with this matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .lattice import DirectedEdge, DomainError, LatticeDomain, LatticeVertex

METHODS = ("direct-sparse", "conjugate-gradient", "gauss-seidel", "monte-carlo")


class SolverError(RuntimeError):
    """Iterative solve failed to converge; carries the final residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SolverConfig:
    method: str = "direct-sparse"
    tolerance: float = 1e-10
    max_iterations: int = 100_000
    warm_start: bool = True
    mc_walks: int = 2000          # monte-carlo oracle mode only
    mc_seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True, eq=False)
class HarmonicField:
    """Values on the closed domain, split into fixed and harmonic vertices."""

    domain: LatticeDomain
    values: np.ndarray        # float64 over domain.vertices, read-only
    fixed_mask: np.ndarray    # bool over domain.vertices, read-only

    def value(self, v) -> float:
        return float(self.values[self.domain.index[LatticeVertex(*v)]])

    def is_fixed(self, v) -> bool:
        return bool(self.fixed_mask[self.domain.index[LatticeVertex(*v)]])

    @property
    def fixed(self) -> dict:
        verts = self.domain.vertices
        return {verts[i]: float(self.values[i]) for i in np.where(self.fixed_mask)[0]}

    @property
    def free_indices(self) -> np.ndarray:
        return np.where(~self.fixed_mask)[0]

    def mean_value_defect(self) -> float:
        """Max deviation of a free value from its 6-neighbor mean."""
        free = self.free_indices
        if free.size == 0:
            return 0.0
        nbr = self.domain.neighbor_array[free]
        return float(np.abs(self.values[free] - self.values[nbr].mean(axis=1)).max())

    def as_dict(self) -> dict:
        return {v: float(self.values[i]) for i, v in enumerate(self.domain.vertices)}


def _seal(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _fixed_arrays(domain: LatticeDomain, fixed: Mapping) -> tuple[np.ndarray, np.ndarray]:
    if not fixed:
        raise DomainError("fixed set must be nonempty")
    mask = np.zeros(len(domain.vertices), dtype=bool)
    vals = np.zeros(len(domain.vertices), dtype=np.float64)
    for v, x in fixed.items():
        i = domain.index.get(LatticeVertex(*v))
        if i is None:
            raise DomainError(f"fixed vertex {v} not in the domain closure")
        mask[i] = True
        vals[i] = float(x)
    missing = [v for v in domain.boundary_cycle if not mask[domain.index[v]]]
    if missing:
        raise DomainError(f"boundary vertices must be fixed; missing {missing[:3]}")
    return mask, vals


def _free_system(domain: LatticeDomain, fixed_mask: np.ndarray,
                 values: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    """SPD system (6I - A_ff) x = b over the free vertices."""
    free = np.where(~fixed_mask)[0]
    pos = -np.ones(len(fixed_mask), dtype=np.int64)
    pos[free] = np.arange(free.size)
    nbr = domain.neighbor_array[free]            # all interior: no -1 entries
    b = np.zeros(free.size)
    rows, cols, data = [], [], []
    for k in range(6):
        heads = nbr[:, k]
        f = ~fixed_mask[heads]
        rows.append(np.where(f)[0])
        cols.append(pos[heads[f]])
        data.append(-np.ones(f.sum()))
        np.add.at(b, np.where(~f)[0], values[heads[~f]])
    rows.append(np.arange(free.size))
    cols.append(np.arange(free.size))
    data.append(np.full(free.size, 6.0))
    A = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(free.size, free.size))
    return A, b, free


def _cg(A: sp.csr_matrix, b: np.ndarray, x0: np.ndarray, tol: float,
        max_iterations: int) -> tuple[np.ndarray, float, int]:
    # plain CG with an absolute infinity-norm stopping rule on the residual/6
    x = x0.copy()
    r = b - A @ x
    d = r.copy()
    rs = r @ r
    it = 0
    res = np.abs(r).max() / 6.0
    while res > tol and it < max_iterations:
        Ad = A @ d
        alpha = rs / (d @ Ad)
        x += alpha * d
        r -= alpha * Ad
        rs_new = r @ r
        d = r + (rs_new / rs) * d
        rs = rs_new
        res = np.abs(r).max() / 6.0
        it += 1
    return x, res, it


def _solve_free(domain: LatticeDomain, fixed_mask: np.ndarray, values: np.ndarray,
                cfg: SolverConfig, warm: Optional[np.ndarray] = None) -> np.ndarray:
    out = values.copy()
    free = np.where(~fixed_mask)[0]
    if free.size == 0:
        return out
    # solution error amplifies the residual by roughly the domain size, so
    # iterative methods target a tighter internal defect to keep the
    # cross-method agreement at the configured tolerance
    target = max(cfg.tolerance / max(1.0, free.size / 50.0), 5e-14)
    if cfg.method == "gauss-seidel":
        if warm is not None and cfg.warm_start:
            out[free] = warm[free]
        else:
            out[free] = values[fixed_mask].mean() if fixed_mask.any() else 0.0
        defect, sweeps = kernels.gauss_seidel(domain.neighbor_array, free, out,
                                              target, cfg.max_iterations)
        if defect > cfg.tolerance:
            raise SolverError(f"gauss-seidel defect {defect:.3e} after {sweeps} sweeps",
                              residual=defect)
        return out
    if cfg.method == "monte-carlo":
        # cross-check oracle mode: walk-average of the fixed values
        est = kernels.mc_harmonic_values(domain.neighbor_array,
                                         np.where(fixed_mask, np.uint8(0), np.uint8(kernels.UNDET)),
                                         values, free, cfg.mc_walks,
                                         np.uint64(cfg.mc_seed & (2**64 - 1)))
        out[free] = est
        return out
    A, b, _ = _free_system(domain, fixed_mask, values)
    if cfg.method == "direct-sparse":
        out[free] = spla.spsolve(A.tocsc(), b)
        return out
    x0 = warm[free].copy() if (warm is not None and cfg.warm_start) else np.zeros(free.size)
    x, res, _ = _cg(A, b, x0, target, cfg.max_iterations)
    if res > cfg.tolerance:
        raise SolverError(f"conjugate-gradient residual {res:.3e} "
                          f"after {cfg.max_iterations} iterations", residual=res)
    out[free] = x
    return out


def harmonic_extension(domain: LatticeDomain, fixed: Mapping,
                       cfg: SolverConfig = SolverConfig()) -> HarmonicField:
    """Unique bounded extension that is 6-neighbor harmonic off the fixed set."""
    mask, vals = _fixed_arrays(domain, fixed)
    out = _solve_free(domain, mask, vals, cfg)
    return HarmonicField(domain, _seal(out), _seal(mask))


def refix(field: HarmonicField, v, value: float,
          cfg: SolverConfig = SolverConfig()) -> HarmonicField:
    """Move one vertex into the fixed set and re-solve (warm-started)."""
    i = field.domain.index[LatticeVertex(*v)]
    if field.fixed_mask[i]:
        if abs(field.values[i] - value) > 10 * cfg.tolerance:
            raise DomainError(f"contradictory refix at {v}: "
                              f"{field.values[i]} vs {value}")
        return field
    mask = field.fixed_mask.copy()
    mask[i] = True
    vals = np.where(mask, field.values, 0.0)
    vals[i] = float(value)
    warm = field.values if cfg.warm_start else None
    out = _solve_free(field.domain, mask, vals, cfg, warm=warm)
    return HarmonicField(field.domain, _seal(out), _seal(mask))


# ---------------------------------------------------------------------------
# random-walk quantities


def _absorbing_mask(domain: LatticeDomain, killed: Iterable) -> np.ndarray:
    mask = np.zeros(len(domain.vertices), dtype=bool)
    for v in domain.boundary_cycle:
        mask[domain.index[v]] = True
    for v in killed or ():
        i = domain.index.get(LatticeVertex(*v))
        if i is None:
            raise DomainError(f"killed vertex {v} not in the domain")
        mask[i] = True
    return mask


def _green_kernel(domain: LatticeDomain, absorbing: np.ndarray,
                  rhs: np.ndarray) -> np.ndarray:
    """Solve (6I - A_ff) g = rhs over free vertices; zero elsewhere."""
    A, _, free = _free_system(domain, absorbing, np.zeros(len(absorbing)))
    out = np.zeros(len(absorbing))
    if free.size:
        out[free] = spla.spsolve(A.tocsc(), rhs[free])
    return out


def green(domain: LatticeDomain, killed: Iterable, v) -> dict:
    """Expected visits (counting time 0) to each free vertex from v."""
    absorbing = _absorbing_mask(domain, killed)
    i = domain.index.get(LatticeVertex(*v))
    if i is None or absorbing[i]:
        raise DomainError(f"green source {v} must be a free vertex")
    rhs = np.zeros(len(absorbing))
    rhs[i] = 6.0
    g = _green_kernel(domain, absorbing, rhs)
    verts = domain.vertices
    return {verts[j]: float(g[j]) for j in np.where(~absorbing)[0]}


def _check_edges(domain: LatticeDomain, absorbing: np.ndarray, edges) -> list[DirectedEdge]:
    out = []
    for e in edges:
        e = DirectedEdge(LatticeVertex(*e[0]), LatticeVertex(*e[1]))
        it = domain.index.get(e.tail)
        ih = domain.index.get(e.head)
        if it is None or ih is None:
            raise DomainError(f"edge {e} leaves the domain closure")
        if domain.neighbor_array[it].tolist().count(ih) == 0:
            raise DomainError(f"edge {e} endpoints not adjacent")
        if not absorbing[ih]:
            raise DomainError(f"edge head {e.head} is not boundary/killed")
        out.append(e)
    return out


def exit_measure_all(domain: LatticeDomain, killed: Iterable, edges) -> np.ndarray:
    """P(exit step is in `edges`) as an array over all vertices (free entries)."""
    absorbing = _absorbing_mask(domain, killed)
    checked = _check_edges(domain, absorbing, edges)
    rhs = np.zeros(len(absorbing))
    for e in checked:
        it = domain.index[e.tail]
        if not absorbing[it]:
            rhs[it] += 1.0
    return _green_kernel(domain, absorbing, rhs)


def harmonic_measure_edges(domain: LatticeDomain, killed: Iterable, v, edges) -> float:
    """Probability that a walk from v first exits through an edge of `edges`."""
    absorbing = _absorbing_mask(domain, killed)
    i = domain.index.get(LatticeVertex(*v))
    if i is None or absorbing[i]:
        raise DomainError(f"start vertex {v} must be free")
    h = exit_measure_all(domain, killed, edges)
    return float(h[i])


def mc_hit_estimate(domain: LatticeDomain, killed: Iterable, v, edges,
                    n_walks: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of harmonic_measure_edges with standard error."""
    if n_walks < 1:
        raise ValueError("n_walks must be >= 1")
    absorbing = _absorbing_mask(domain, killed)
    checked = _check_edges(domain, absorbing, edges)
    i = domain.index[LatticeVertex(*v)]
    if absorbing[i]:
        raise DomainError(f"start vertex {v} must be free")
    flags = np.zeros_like(domain.neighbor_array, dtype=bool)
    for e in checked:
        it = domain.index[e.tail]
        ih = domain.index[e.head]
        for k in range(6):
            if domain.neighbor_array[it, k] == ih:
                flags[it, k] = True
    hits = kernels.mc_exit_flags(domain.neighbor_array, absorbing, flags, i,
                                 n_walks, np.uint64(seed & (2**64 - 1)), 0)
    p = hits / n_walks
    return p, float(np.sqrt(max(p * (1 - p), 1.0 / n_walks) / n_walks))


def field_to_text(field: HarmonicField) -> str:
    lines = ["HEFIELD 1"]
    for i, v in enumerate(field.domain.vertices):
        lines.append("%d %d %r" % (v.a, v.b, float(field.values[i])))
    return "\n".join(lines) + "\n"
