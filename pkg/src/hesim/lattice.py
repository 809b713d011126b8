"""Triangular grid geometry and marked lattice domains.

Vertices live on the lattice spanned by 1 and e^{i*pi/3}, stored as exact
integer axial pairs (a, b); floating point only appears when embedding into
the plane.  A domain is a simply connected region whose boundary is a simple
closed cycle of lattice edges, with two marked boundary edge midpoints
(v_start, v_end) splitting the boundary into the arcs arc_plus / arc_minus
that carry the 1/0 boundary coloring.

Orientation conventions, fixed once so runs are reproducible:
  * boundary cycles are stored counterclockwise;
  * arc_plus is the ccw arc from v_start to v_end, exclusive of the vertices
    u0 / w1 that trail the split midpoints (each split edge contributes its
    ccw-forward endpoint to arc_plus at the start edge and its ccw-backward
    endpoint at the end edge), so the two arcs partition the boundary;
  * h0 = 1 on arc_plus and 0 on arc_minus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from shapely import contains_xy
from shapely.geometry import Point, Polygon

SQRT3_2 = math.sqrt(3.0) / 2.0

# axial offsets of the six lattice neighbors, ccw starting from +1
NEIGHBOR_OFFSETS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


class DomainError(ValueError):
    """Invalid domain construction or file."""


class LatticeVertex(NamedTuple):
    a: int
    b: int

    def __add__(self, other):
        return LatticeVertex(self.a + other[0], self.b + other[1])


class DirectedEdge(NamedTuple):
    tail: LatticeVertex
    head: LatticeVertex

    def rev(self) -> "DirectedEdge":
        return DirectedEdge(self.head, self.tail)


class EdgeMidpoint(NamedTuple):
    """Unordered lattice edge identified by its canonically sorted endpoints."""

    u: LatticeVertex
    v: LatticeVertex

    @property
    def position(self) -> complex:
        return (embed(self.u) + embed(self.v)) / 2.0


def embed(v: LatticeVertex | tuple) -> complex:
    """Planar position a + b*e^{i*pi/3} of an axial vertex."""
    a, b = v
    return complex(a + 0.5 * b, SQRT3_2 * b)


def adjacent(u: LatticeVertex, v: LatticeVertex) -> bool:
    return (v[0] - u[0], v[1] - u[1]) in NEIGHBOR_OFFSETS


def neighbors(v: LatticeVertex) -> list[LatticeVertex]:
    a, b = v
    return [LatticeVertex(a + da, b + db) for da, db in NEIGHBOR_OFFSETS]


def midpoint(u, v) -> EdgeMidpoint:
    u, v = LatticeVertex(*u), LatticeVertex(*v)
    if not adjacent(u, v):
        raise DomainError(f"{u} and {v} are not lattice-adjacent")
    return EdgeMidpoint(*sorted((u, v)))


def _xy2(v) -> tuple[int, int]:
    # integer plane coordinates (2x, y/(sqrt3/2)); exact for orientation tests
    a, b = v
    return 2 * a + b, b


def _cross2(o, p, q) -> int:
    ox, oy = _xy2(o)
    px, py = _xy2(p)
    qx, qy = _xy2(q)
    return (px - ox) * (qy - oy) - (py - oy) * (qx - ox)


class Triangle(NamedTuple):
    """Lattice triangle keyed by base vertex and up/down orientation."""

    base: LatticeVertex
    up: bool

    @property
    def vertices(self) -> tuple[LatticeVertex, LatticeVertex, LatticeVertex]:
        a, b = self.base
        if self.up:
            return (LatticeVertex(a, b), LatticeVertex(a + 1, b), LatticeVertex(a, b + 1))
        return (LatticeVertex(a, b), LatticeVertex(a + 1, b), LatticeVertex(a + 1, b - 1))

    @property
    def midpoints(self) -> tuple[EdgeMidpoint, EdgeMidpoint, EdgeMidpoint]:
        p, q, r = self.vertices
        return (midpoint(p, q), midpoint(q, r), midpoint(r, p))

    @property
    def centroid(self) -> complex:
        p, q, r = self.vertices
        return (embed(p) + embed(q) + embed(r)) / 3.0

    @classmethod
    def from_vertices(cls, verts: Iterable) -> "Triangle":
        vs = [LatticeVertex(*v) for v in verts]
        if len(vs) != 3 or len(set(vs)) != 3:
            raise DomainError(f"not a triangle: {verts}")
        for i in range(3):
            for j in range(i + 1, 3):
                if not adjacent(vs[i], vs[j]):
                    raise DomainError(f"vertices not mutually adjacent: {verts}")
        bs = [v.b for v in vs]
        if bs.count(min(bs)) == 2:
            base = min((v for v in vs if v.b == min(bs)))
            return cls(base, True)
        base = min((v for v in vs if v.b == max(bs)))
        return cls(base, False)

    def opposite_vertex(self, m: EdgeMidpoint) -> LatticeVertex:
        (rest,) = [v for v in self.vertices if v not in (m.u, m.v)]
        return rest


def edge_third_vertices(m: EdgeMidpoint) -> tuple[LatticeVertex, LatticeVertex]:
    """The two apexes completing m's edge to a triangle (one on each side)."""
    common = [w for w in neighbors(m.u) if adjacent(w, m.v)]
    assert len(common) == 2
    return common[0], common[1]


def triangle_across(m: EdgeMidpoint, previous: Optional[Triangle],
                    domain: Optional["LatticeDomain"] = None) -> Triangle:
    """Triangle on m's edge other than `previous`.

    With previous=None the domain is required and the triangle on the
    interior side of the boundary edge is returned (the first explorer step).
    """
    t1, t2 = edge_third_vertices(m)
    if previous is not None:
        if m not in previous.midpoints:
            raise DomainError(f"midpoint {m} not on triangle {previous}")
        prev_apex = previous.opposite_vertex(m)
        apex = t2 if t1 == prev_apex else t1
        return Triangle.from_vertices((m.u, m.v, apex))
    if domain is None:
        raise DomainError("triangle_across with previous=None needs the domain")
    for apex in (t1, t2):
        tri = Triangle.from_vertices((m.u, m.v, apex))
        if domain.contains_triangle(tri):
            return tri
    raise DomainError(f"edge {m} has no triangle inside the domain")


@dataclass(frozen=True, eq=False)
class LatticeDomain:
    """Simply connected lattice domain with split boundary coloring."""

    boundary_cycle: tuple[LatticeVertex, ...]
    interior: frozenset[LatticeVertex]
    v_start: EdgeMidpoint
    v_end: EdgeMidpoint
    arc_plus: tuple[LatticeVertex, ...]
    arc_minus: tuple[LatticeVertex, ...]
    h0: dict = field(repr=False)

    # ---- derived, cached geometry ----

    @cached_property
    def boundary_set(self) -> frozenset:
        return frozenset(self.boundary_cycle)

    @cached_property
    def vertex_set(self) -> frozenset:
        return self.interior | self.boundary_set

    @cached_property
    def vertices(self) -> tuple[LatticeVertex, ...]:
        """All vertices of the closed domain: interior first, then boundary."""
        inner = sorted(self.interior)
        return tuple(inner) + tuple(self.boundary_cycle)

    @cached_property
    def index(self) -> dict:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def polygon(self) -> Polygon:
        pts = [(embed(v).real, embed(v).imag) for v in self.boundary_cycle]
        return Polygon(pts)

    @cached_property
    def _axial(self) -> np.ndarray:
        return np.array(self.vertices, dtype=np.int64)

    @cached_property
    def _grid(self) -> tuple[np.ndarray, int, int]:
        """Dense (a, b) -> vertex index lookup table (-1 for absent)."""
        ax = self._axial
        amin, bmin = ax[:, 0].min() - 1, ax[:, 1].min() - 1
        grid = np.full((ax[:, 0].max() - amin + 2, ax[:, 1].max() - bmin + 2),
                       -1, dtype=np.int64)
        grid[ax[:, 0] - amin, ax[:, 1] - bmin] = np.arange(len(self.vertices))
        return grid, int(amin), int(bmin)

    @cached_property
    def neighbor_array(self) -> np.ndarray:
        """(n, 6) int32 neighbor indices in offset order; -1 outside the closure."""
        grid, amin, bmin = self._grid
        ax = self._axial
        out = np.empty((len(self.vertices), 6), dtype=np.int32)
        for k, (da, db) in enumerate(NEIGHBOR_OFFSETS):
            out[:, k] = grid[ax[:, 0] + da - amin, ax[:, 1] + db - bmin]
        return out

    def embedded(self, pairs: np.ndarray) -> np.ndarray:
        """Embed an (n, 2) axial array as complex plane positions."""
        return pairs[:, 0] + 0.5 * pairs[:, 1] + 1j * SQRT3_2 * pairs[:, 1]

    @cached_property
    def triangles(self) -> tuple[Triangle, ...]:
        """Grid triangles contained in the closed domain (interior side)."""
        nbr = self.neighbor_array
        cand: list[Triangle] = []
        cents: list[complex] = []
        verts = self.vertices
        for i, v in enumerate(verts):
            for up, need in ((True, (0, 1)), (False, (0, 5))):
                # offsets (1,0)&(0,1) close an up triangle, (1,0)&(1,-1) a down one
                if nbr[i, need[0]] >= 0 and nbr[i, need[1]] >= 0:
                    tri = Triangle(v, up)
                    cand.append(tri)
                    cents.append(tri.centroid)
        cents = np.asarray(cents, dtype=complex)
        keep = contains_xy(self.polygon, cents.real, cents.imag)
        return tuple(sorted(t for t, k in zip(cand, keep) if k))

    def contains_triangle(self, tri: Triangle) -> bool:
        if any(w not in self.vertex_set for w in tri.vertices):
            return False
        c = tri.centroid
        return bool(contains_xy(self.polygon, c.real, c.imag))

    @cached_property
    def closure_edges(self) -> tuple[tuple[LatticeVertex, LatticeVertex], ...]:
        """Undirected lattice edges lying in the closed domain.

        Boundary-cycle edges are included; chords between boundary vertices
        count only when the open edge runs through the domain (midpoint test).
        """
        cyc = set()
        n = len(self.boundary_cycle)
        for i in range(n):
            u, v = self.boundary_cycle[i], self.boundary_cycle[(i + 1) % n]
            cyc.add(tuple(sorted((u, v))))
        out = set(cyc)
        undecided = []
        mids = []
        verts = self.vertices
        nbr = self.neighbor_array
        for i, v in enumerate(verts):
            for k in range(3):           # offsets 0..2 cover each edge once (v < w side)
                j = nbr[i, k]
                if j < 0:
                    continue
                w = verts[j]
                e = tuple(sorted((v, w)))
                if e in cyc:
                    continue
                if v in self.interior or w in self.interior:
                    out.add(e)
                else:
                    undecided.append(e)
                    mids.append((embed(v) + embed(w)) / 2.0)
        if undecided:
            mids = np.asarray(mids, dtype=complex)
            keep = contains_xy(self.polygon, mids.real, mids.imag)
            out.update(e for e, k in zip(undecided, keep) if k)
        return tuple(sorted(out))

    @cached_property
    def boundary_midpoints(self) -> frozenset:
        n = len(self.boundary_cycle)
        return frozenset(midpoint(self.boundary_cycle[i], self.boundary_cycle[(i + 1) % n])
                         for i in range(n))

    @cached_property
    def split_edges(self) -> tuple[tuple[LatticeVertex, LatticeVertex], ...]:
        return (tuple(sorted((self.v_start.u, self.v_start.v))),
                tuple(sorted((self.v_end.u, self.v_end.v))))

    def h0_value(self, v) -> int:
        try:
            return self.h0[LatticeVertex(*v)]
        except KeyError:
            raise DomainError(f"{v} is not a boundary vertex") from None

    def checked(self) -> "LatticeDomain":
        validate_domain(self)
        return self


def inradius(domain: LatticeDomain, z: complex) -> float:
    """Euclidean distance from z to the complement of the open domain."""
    p = Point(z.real, z.imag)
    if not domain.polygon.contains(p):
        return 0.0
    return p.distance(domain.polygon.exterior)


# ---------------------------------------------------------------------------
# construction


def _enclosed_vertices(cycle: Sequence[LatticeVertex]) -> set[LatticeVertex]:
    """Lattice vertices strictly inside the cycle polygon.

    Strictly interior lattice points sit at least sqrt(3)/2 away from the
    boundary polygon, so the float point-in-polygon test is unambiguous.
    """
    cyc = set(cycle)
    amin = min(v.a for v in cycle)
    amax = max(v.a for v in cycle)
    bmin = min(v.b for v in cycle)
    bmax = max(v.b for v in cycle)
    aa, bb = np.meshgrid(np.arange(amin, amax + 1), np.arange(bmin, bmax + 1),
                         indexing="ij")
    aa, bb = aa.ravel(), bb.ravel()
    xs = aa + 0.5 * bb
    ys = SQRT3_2 * bb
    poly = Polygon([(embed(v).real, embed(v).imag) for v in cycle])
    inside = contains_xy(poly, xs, ys)
    return {LatticeVertex(int(a), int(b))
            for a, b in zip(aa[inside], bb[inside])
            if (int(a), int(b)) not in cyc}


def _signed_area2(cycle: Sequence[LatticeVertex]) -> int:
    # twice the signed area in (_xy2) integer coordinates; > 0 for ccw
    s = 0
    n = len(cycle)
    for i in range(n):
        x1, y1 = _xy2(cycle[i])
        x2, y2 = _xy2(cycle[(i + 1) % n])
        s += x1 * y2 - x2 * y1
    return s


def build_from_cycle(cycle: Sequence, start_edge, end_edge) -> LatticeDomain:
    """Assemble a domain from a simple ccw lattice cycle and two split edges.

    `start_edge` / `end_edge` are vertex pairs naming boundary edges; the
    cycle is reoriented ccw if given clockwise.
    """
    cycle = [LatticeVertex(*v) for v in cycle]
    if len(cycle) < 3 or len(set(cycle)) != len(cycle):
        raise DomainError("boundary cycle must be simple")
    for i, v in enumerate(cycle):
        if not adjacent(v, cycle[(i + 1) % len(cycle)]):
            raise DomainError(f"cycle vertices {v} and {cycle[(i+1)%len(cycle)]} not adjacent")
    if _signed_area2(cycle) < 0:
        cycle = cycle[::-1]

    v_start = midpoint(*start_edge)
    v_end = midpoint(*end_edge)
    if v_start == v_end:
        raise DomainError("v_start and v_end must lie on distinct edges")

    n = len(cycle)
    cycle_edges = {tuple(sorted((cycle[i], cycle[(i + 1) % n]))): i for i in range(n)}
    for m in (v_start, v_end):
        if (m.u, m.v) not in cycle_edges:
            raise DomainError(f"split edge {m} is not a boundary edge")

    i0 = cycle_edges[(v_start.u, v_start.v)]   # edge cycle[i0] -> cycle[i0+1]
    i1 = cycle_edges[(v_end.u, v_end.v)]
    # ccw arc from v_start to v_end: vertices after the start edge up to and
    # including the first endpoint of the end edge
    plus = []
    j = (i0 + 1) % n
    while True:
        plus.append(cycle[j])
        if j == i1:
            break
        j = (j + 1) % n
    minus = []
    j = (i1 + 1) % n
    while True:
        minus.append(cycle[j])
        if j == i0:
            break
        j = (j + 1) % n

    interior = _enclosed_vertices(cycle)
    if not interior:
        raise DomainError("domain has empty interior")

    h0 = {v: 1 for v in plus}
    h0.update({v: 0 for v in minus})
    dom = LatticeDomain(
        boundary_cycle=tuple(cycle),
        interior=frozenset(interior),
        v_start=v_start,
        v_end=v_end,
        arc_plus=tuple(plus),
        arc_minus=tuple(minus),
        h0=h0,
    )
    return dom.checked()


def validate_domain(d: LatticeDomain) -> None:
    cyc = d.boundary_cycle
    if len(set(cyc)) != len(cyc):
        raise DomainError("boundary cycle revisits a vertex")
    if set(d.arc_plus) | set(d.arc_minus) != set(cyc) or set(d.arc_plus) & set(d.arc_minus):
        raise DomainError("arcs do not partition the boundary cycle")
    if d.interior & d.boundary_set:
        raise DomainError("interior and boundary overlap")
    n_int = len(d.interior)
    nbr_int = d.neighbor_array[:n_int]     # interior comes first in `vertices`
    if (nbr_int < 0).any():
        bad = d.vertices[int(np.where((nbr_int < 0).any(axis=1))[0][0])]
        raise DomainError(f"interior vertex {bad} has a neighbor outside the closure")
    # interior connectivity via union over interior-interior edges
    import scipy.sparse as _sp
    import scipy.sparse.csgraph as _csg
    rows, cols = [], []
    for k in range(6):
        heads = nbr_int[:, k]
        m = heads < n_int
        rows.append(np.where(m)[0])
        cols.append(heads[m])
    adj = _sp.csr_matrix((np.ones(sum(len(r) for r in rows)),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n_int, n_int))
    ncomp = _csg.connected_components(adj, directed=False)[0]
    if ncomp != 1:
        raise DomainError("interior is not connected")
    plus = set(d.arc_plus)
    for v in cyc:
        if d.h0[v] != (1 if v in plus else 0):
            raise DomainError(f"h0 inconsistent with arcs at {v}")


def build_box_domain(width: int, height: int, split_offset: int = 0) -> LatticeDomain:
    """Parallelogram-free 'box': rows b = 0..height clipped to |x - 1/2| <= width/2.

    Mirror-symmetric about the vertical through v_start when split_offset = 0
    and height is even.  v_start sits on the bottom edge (s,0)-(s+1,0) with
    s = split_offset; v_end on the top edge directly above.
    """
    if width < 4 or height < 2:
        raise DomainError(f"box too small: {width}x{height} (need width>=4, height>=2)")

    def row_range(b):
        # integer a with 1-width <= 2a+b <= 1+width
        lo = math.ceil((1 - width - b) / 2)
        hi = math.floor((1 + width - b) / 2)
        return lo, hi

    s = split_offset
    lo0, hi0 = row_range(0)
    if not (lo0 <= s and s + 1 <= hi0):
        raise DomainError(f"split offset {s} outside bottom row [{lo0},{hi0}]")

    cycle: list[LatticeVertex] = []
    for a in range(lo0, hi0 + 1):                      # bottom, left -> right
        cycle.append(LatticeVertex(a, 0))
    for b in range(1, height + 1):                     # right side going up
        cycle.append(LatticeVertex(row_range(b)[1], b))
    lot, hit = row_range(height)
    for a in range(hit - 1, lot - 1, -1):              # top, right -> left
        cycle.append(LatticeVertex(a, height))
    for b in range(height - 1, 0, -1):                 # left side going down
        cycle.append(LatticeVertex(row_range(b)[0], b))

    t = s - height // 2
    if not (lot <= t and t + 1 <= hit):
        raise DomainError(f"no top edge above split offset {s}")
    return build_from_cycle(
        cycle,
        (LatticeVertex(s, 0), LatticeVertex(s + 1, 0)),
        (LatticeVertex(t, height), LatticeVertex(t + 1, height)),
    )


def build_hexagon_domain(radius: int) -> LatticeDomain:
    """Regular lattice hexagon of the given radius centered at the origin."""
    if radius < 2:
        raise DomainError(f"hexagon radius must be >= 2, got {radius}")
    r = radius
    corners = [(r, 0), (0, r), (-r, r), (-r, 0), (0, -r), (r, -r)]
    cycle: list[LatticeVertex] = []
    for k in range(6):
        ca, cb = corners[k]
        na, nb = corners[(k + 1) % 6]
        da, db = (na - ca) // r, (nb - cb) // r
        for j in range(r):
            cycle.append(LatticeVertex(ca + j * da, cb + j * db))
    s = (r - 1) // 2
    return build_from_cycle(
        cycle,
        (LatticeVertex(s, -r), LatticeVertex(s + 1, -r)),
        (LatticeVertex(-s - 1, r), LatticeVertex(-s, r)),
    )


# ---------------------------------------------------------------------------
# domain description files (HEDOM 1)


def domain_to_text(d: LatticeDomain) -> str:
    lines = ["HEDOM 1"]
    lines.append("VSTART %d %d %d %d" % (d.v_start.u.a, d.v_start.u.b, d.v_start.v.a, d.v_start.v.b))
    lines.append("VEND %d %d %d %d" % (d.v_end.u.a, d.v_end.u.b, d.v_end.v.a, d.v_end.v.b))
    for v in d.boundary_cycle:
        lines.append("%d %d %d" % (v.a, v.b, d.h0[v]))
    return "\n".join(lines) + "\n"


def domain_from_text(text: str) -> LatticeDomain:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "HEDOM 1":
        raise DomainError("missing HEDOM 1 header")
    vstart = vend = None
    cycle: list[LatticeVertex] = []
    h0_file: dict[LatticeVertex, int] = {}
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "VSTART" or parts[0] == "VEND":
            if len(parts) != 5:
                raise DomainError(f"malformed split line: {ln}")
            a1, b1, a2, b2 = map(int, parts[1:])
            edge = (LatticeVertex(a1, b1), LatticeVertex(a2, b2))
            if parts[0] == "VSTART":
                vstart = edge
            else:
                vend = edge
        else:
            if len(parts) != 3:
                raise DomainError(f"malformed vertex record: {ln}")
            a, b, h = int(parts[0]), int(parts[1]), int(parts[2])
            if h not in (0, 1):
                raise DomainError(f"h0 must be 0/1, got {h}")
            v = LatticeVertex(a, b)
            cycle.append(v)
            h0_file[v] = h
    if vstart is None or vend is None:
        raise DomainError("missing VSTART/VEND")
    d = build_from_cycle(cycle, vstart, vend)
    if d.h0 != h0_file:
        raise DomainError("h0 column disagrees with the arc convention")
    return d


def save_domain(d: LatticeDomain, path) -> None:
    with open(path, "w") as f:
        f.write(domain_to_text(d))


def load_domain(path) -> LatticeDomain:
    with open(path) as f:
        return domain_from_text(f.read())
