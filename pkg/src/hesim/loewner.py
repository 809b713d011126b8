"""Chordal Loewner machinery in the upper half-plane.

Hulls are grown/unzipped with the elementary vertical-slit solution of
dg/dt = 2/(g - W) for piecewise-constant W: one step of driving value w and
capacity increment dt is g(z) = w + sqrt((z-w)^2 + 4 dt), branch chosen in
the closed upper half-plane and asymptotic to z at infinity.  Driving
extraction composes these maps against a sampled curve, emitting one
(w, dt) pair per consumed point and refining oversized steps so each
increment stays below dt_max.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np
from numba import njit
from scipy.spatial import cKDTree

IM_FLOOR = 1e-12        # boundary points are nudged this far into the plane
PINCH_TOL = 1e-11       # pending points this close to the axis are frozen
SWALLOW_TOL = 1e-9      # imaginary part below this counts as swallowed
ADMISSIBLE_TOL = 1e-9   # negative imaginary part beyond this is an error


class LoewnerError(ValueError):
    pass


class SwallowedPoint(LoewnerError):
    pass


@dataclass(frozen=True)
class SlitStep:
    w: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise LoewnerError(f"slit step needs dt > 0, got {self.dt}")


def slit_forward(z: complex, step: SlitStep) -> complex:
    """Elementary map removing a vertical slit of capacity dt at w."""
    dz = z - step.w
    s = np.sqrt(complex(dz * dz + 4.0 * step.dt))
    if s.imag < 0:
        s = -s
    return step.w + s


def slit_inverse(z: complex, step: SlitStep) -> complex:
    dz = z - step.w
    s = np.sqrt(complex(dz * dz - 4.0 * step.dt))
    if s.imag < 0:
        s = -s
    return step.w + s


@dataclass(frozen=True, eq=False)
class DrivingFunction:
    """Capacity-parameterized driving record: W(t) = w[k] on [t[k], t[k+1])."""

    t: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        t, w = np.asarray(self.t, float), np.asarray(self.w, float)
        if t.shape != w.shape or t.ndim != 1 or len(t) < 1:
            raise LoewnerError("t and w must be 1-d arrays of equal length")
        if t[0] != 0.0 or (np.diff(t) <= 0).any():
            raise LoewnerError("t must be strictly increasing from 0")
        if not np.isfinite(w).all():
            raise LoewnerError("w must be finite")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "w", w)

    @property
    def capacity(self) -> float:
        return float(self.t[-1])

    def value_at(self, t: float) -> float:
        if t < 0 or t > self.capacity:
            raise LoewnerError(f"t={t} outside [0, {self.capacity}]")
        k = int(np.searchsorted(self.t, t, side="right")) - 1
        return float(self.w[k])

    def steps(self, upto: Optional[float] = None):
        """SlitStep sequence (with a partial last step when `upto` is set)."""
        T = self.capacity if upto is None else float(upto)
        if T < 0 or T > self.capacity + 1e-15:
            raise LoewnerError(f"horizon {T} exceeds capacity {self.capacity}")
        out = []
        for k in range(1, len(self.t)):
            if self.t[k] <= T:
                out.append(SlitStep(float(self.w[k]), float(self.t[k] - self.t[k - 1])))
            else:
                if T > self.t[k - 1]:
                    out.append(SlitStep(float(self.w[k]), float(T - self.t[k - 1])))
                break
        return out

    def truncated(self, T: float) -> "DrivingFunction":
        if T >= self.capacity:
            return self
        k = int(np.searchsorted(self.t, T, side="right"))   # t[k-1] <= T < t[k]
        if self.t[k - 1] == T:
            return DrivingFunction(self.t[:k].copy(), self.w[:k].copy())
        t = np.concatenate([self.t[:k], [T]])
        w = np.concatenate([self.w[:k], [self.w[k]]])
        return DrivingFunction(t, w)


def validate_hcurve(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=complex)
    if pts.ndim != 1 or len(pts) < 2:
        raise LoewnerError("curve needs at least two points")
    if abs(pts[0]) > 1e-12:
        raise LoewnerError(f"curve must start at 0, got {pts[0]}")
    if (pts.imag[1:] <= 0).any():
        k = int(np.where(pts.imag[1:] <= 0)[0][0]) + 1
        raise LoewnerError(f"curve point {k} not in the open half-plane: {pts[k]}")
    if (np.abs(np.diff(pts)) == 0).any():
        raise LoewnerError("consecutive curve points must be distinct")
    return pts


def resample_polyline(points: np.ndarray, max_seg: float) -> np.ndarray:
    """Insert points along segments so no segment exceeds max_seg."""
    pts = np.asarray(points, dtype=complex)
    out = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil(abs(b - a) / max_seg)))
        ts = np.arange(1, n + 1) / n
        out.append(a + ts * (b - a))
    return np.concatenate(out)


@njit(cache=True, nogil=True, inline="always")
def _compose_raw(z, w_arr, dt_arr, m):
    # from-scratch composition; nan real part flags inadmissibility
    for j in range(m):
        dz = z - w_arr[j]
        s = np.sqrt(dz * dz + 4.0 * dt_arr[j])
        if s.imag < 0:
            s = -s
        z = w_arr[j] + s
        if z.imag < -ADMISSIBLE_TOL:
            return complex(np.nan, 0.0)
        if z.imag < IM_FLOOR:
            z = complex(z.real, IM_FLOOR)
    return z


@njit(cache=True, nogil=True)
def _extract_kernel_curve(pts, dt_max, dt_min, min_seg, w_out, dt_out):
    """Reference extraction: oversized steps bisect the input curve itself.

    Every candidate is composed from scratch, so this is slower than the
    chord-welding kernel but follows the sampled curve exactly; it serves
    as the cross-check route for the fast path.
    """
    cap = w_out.shape[0]
    n = pts.shape[0]
    stack = np.empty(128, dtype=numba.complex128)
    top = 0
    m = 0
    i = 1
    t_acc = 0.0
    z_prev = pts[0]
    while i < n or top > 0:
        z_next = stack[top - 1] if top > 0 else pts[i]
        u = z_next if z_next.imag > 0 else complex(z_next.real, IM_FLOOR)
        u = _compose_raw(u, w_out, dt_out, m)
        if np.isnan(u.real):
            return m, i
        dt = 0.25 * u.imag * u.imag
        if dt > dt_max and abs(z_next - z_prev) > min_seg and top < 127:
            stack[top] = 0.5 * (z_prev + z_next)
            top += 1
            continue
        if dt >= dt_min and t_acc + dt > t_acc:
            if m >= cap:
                return -1, i
            w_out[m] = u.real
            dt_out[m] = dt
            m += 1
            t_acc += dt
        z_prev = z_next
        if top > 0:
            top -= 1
        else:
            i += 1
    return m, -1


@njit(cache=True, nogil=True)
def _extract_kernel(pts, dt_max, dt_min, t_stop, w_out, dt_out):
    """Returns (count, error_index); count = -1 when the buffers overflow.

    Images of the pending curve points are maintained incrementally.  A
    point whose image sits higher than the dt_max budget is consumed in
    several slit steps welded along the straight image chord from the
    current base point, each of capacity exactly dt_max; this keeps the
    whole extraction O(n * steps) with O(1) work per refinement piece.
    """
    cap = w_out.shape[0]
    n = pts.shape[0] - 1
    imgs = pts[1:].copy()
    for i in range(n):
        if imgs[i].imag <= 0.0:
            imgs[i] = complex(imgs[i].real, IM_FLOOR)
    m = 0
    t_acc = 0.0
    base = 0.0                       # image of the current tip, on the axis
    two_rt = 2.0 * np.sqrt(dt_max)
    for i in range(n):
        seg_start = m
        u = imgs[i]
        if u.imag <= PINCH_TOL:      # pinched against the hull: no capacity
            continue
        while True:
            y = u.imag
            dt = 0.25 * y * y
            if dt <= dt_max:
                # consume the point itself
                if dt >= dt_min and t_acc + dt > t_acc:
                    if m >= cap:
                        return -1, i + 1
                    w_out[m] = u.real
                    dt_out[m] = dt
                    m += 1
                    t_acc += dt
                    base = u.real
                    if t_stop > 0 and t_acc >= t_stop:
                        return m, -1
                break
            # weld an intermediate slit on the chord from the base to u
            s = two_rt / y
            p = complex(base + s * (u.real - base), s * y)
            if m >= cap:
                return -1, i + 1
            w_out[m] = p.real
            dt_out[m] = dt_max
            m += 1
            t_acc += dt_max
            base = p.real
            if t_stop > 0 and t_acc >= t_stop:
                return m, -1
            dz = u - p.real
            sq = np.sqrt(dz * dz + 4.0 * dt_max)
            if sq.imag < 0:
                sq = -sq
            # the imaginary part is monotone decreasing under forward maps
            u = complex(p.real + sq.real, min(sq.imag, y))
            if u.imag <= PINCH_TOL:
                break
        # push the segment's maps onto the remaining images
        for j in range(seg_start, m):
            wj = w_out[j]
            dj = dt_out[j]
            for k in range(i + 1, n):
                prev_im = imgs[k].imag
                if prev_im <= PINCH_TOL:
                    continue
                dz = imgs[k] - wj
                sq = np.sqrt(dz * dz + 4.0 * dj)
                if sq.imag < 0:
                    sq = -sq
                z = wj + sq
                if z.imag < -ADMISSIBLE_TOL:
                    return m, k + 1
                imgs[k] = complex(z.real, min(z.imag, prev_im))
    return m, -1


def extract_driving(curve, dt_max: float = 1e-3, dt_min: Optional[float] = None,
                    pre_resample: bool = True, refine: str = "image-chord",
                    stop_capacity: Optional[float] = None) -> DrivingFunction:
    """Loewner driving function of a half-plane curve, O(n^2) slit composition.

    Steps that would add more than dt_max of capacity are refined: the
    default "image-chord" mode welds intermediate slits along the image
    chord (fast); "curve" mode bisects the input curve and recomposes each
    candidate (slow reference route used for cross-checks).  Points adding
    less than dt_min (default 1e-9 * dt_max, i.e. pinched against the hull
    beyond float resolution) are consumed silently.  Raises naming the
    offending input point if the curve is not admissible (an image
    collapses below the real line).
    """
    pts = validate_hcurve(curve)
    if dt_max <= 0:
        raise LoewnerError("dt_max must be positive")
    if dt_min is None:
        dt_min = 1e-9 * dt_max
    if refine not in ("image-chord", "curve"):
        raise LoewnerError(f"unknown refinement mode {refine!r}")
    if pre_resample:
        pts = resample_polyline(pts, 2.0 * math.sqrt(dt_max))
    scale = float(np.abs(pts).max())
    # half-plane hulls within radius R have capacity at most R^2/2
    cap = int(len(pts) + 64 + 0.75 * scale * scale / dt_max)
    for _ in range(8):
        w_out = np.empty(cap)
        dt_out = np.empty(cap)
        if refine == "image-chord":
            m, err = _extract_kernel(pts, float(dt_max), float(dt_min),
                                     -1.0 if stop_capacity is None
                                     else float(stop_capacity), w_out, dt_out)
        else:
            m, err = _extract_kernel_curve(pts, float(dt_max), float(dt_min),
                                           1e-9 * max(1.0, scale), w_out, dt_out)
        if m == -1:
            cap *= 2
            continue
        if err >= 0:
            raise LoewnerError(f"curve not admissible near input point {err}: "
                               "image collapsed below the real axis")
        break
    else:
        raise LoewnerError("extraction buffer kept overflowing; dt_max too small")
    t = np.concatenate([[0.0], np.cumsum(dt_out[:m])])
    w = np.concatenate([[0.0], w_out[:m]])
    return DrivingFunction(t, w)


# ---------------------------------------------------------------------------
# SLE generation and map evaluation


@njit(cache=True, nogil=True)
def _trace_kernel(w, dt):
    m = dt.shape[0]
    tips = np.empty(m + 1, dtype=numba.complex128)
    tips[0] = 0.0 + 0.0j
    for k in range(1, m + 1):
        tips[k] = complex(w[k], 0.0)
    for j in range(m, 0, -1):
        wj = w[j]
        dj = dt[j - 1]
        for k in range(j, m + 1):
            dz = tips[k] - wj
            s = np.sqrt(dz * dz - 4.0 * dj)
            if s.imag < 0:
                s = -s
            tips[k] = wj + s
    return tips


def trace_from_driving(df: DrivingFunction) -> np.ndarray:
    """Tip positions at every grid time of the driving record."""
    return _trace_kernel(df.w, np.diff(df.t))


@njit(cache=True, nogil=True)
def _trace_at_kernel(w, dt, ks):
    out = np.empty(ks.shape[0], dtype=numba.complex128)
    for i in range(ks.shape[0]):
        k = ks[i]
        z = complex(w[k], 0.0)
        for j in range(k, 0, -1):
            dz = z - w[j]
            s = np.sqrt(dz * dz - 4.0 * dt[j - 1])
            if s.imag < 0:
                s = -s
            z = w[j] + s
        out[i] = z
    return out


def trace_at_times(df: DrivingFunction, times) -> np.ndarray:
    """Tip positions at selected capacities (nearest grid step at or below)."""
    times = np.asarray(times, dtype=float)
    if (times < 0).any() or (times > df.capacity + 1e-12).any():
        raise LoewnerError("trace times outside the driving record")
    ks = np.searchsorted(df.t, np.minimum(times, df.capacity), side="right") - 1
    return _trace_at_kernel(df.w, np.diff(df.t), ks.astype(np.int64))


def sle_path(kappa: float, dt: float, T: float, seed,
             sample_index: int = 0) -> tuple[DrivingFunction, np.ndarray]:
    """Sample W = sqrt(kappa) * B on a uniform grid and trace the path."""
    if kappa < 0:
        raise LoewnerError("kappa must be nonnegative")
    if not (0 < dt <= T):
        raise LoewnerError("need 0 < dt <= T")
    m = int(round(T / dt))
    gen = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), sample_index]))
    incr = gen.standard_normal(m) * math.sqrt(kappa * dt)
    w = np.concatenate([[0.0], np.cumsum(incr)])
    t = np.linspace(0.0, m * dt, m + 1)
    df = DrivingFunction(t, w)
    return df, trace_from_driving(df)


def evaluate_map(df: DrivingFunction, t: float, z: complex) -> complex:
    """g_t(z) via slit composition; raises SwallowedPoint when z is eaten."""
    if z.imag < 0:
        raise LoewnerError(f"z must be in the closed half-plane, got {z}")
    g = complex(z.real, max(z.imag, IM_FLOOR))
    for stp in df.steps(upto=t):
        g = slit_forward(g, stp)
        if g.imag < SWALLOW_TOL:
            raise SwallowedPoint(f"z={z} swallowed before t={t}")
    return g


def angle_observable(df: DrivingFunction, t: float, z: complex) -> float:
    """1 - arg(g_t(z) - W(t)) / pi: harmonic, 1 near the right of the path."""
    g = evaluate_map(df, t, z)
    return 1.0 - np.angle(g - df.value_at(t)) / math.pi


def evaluate_map_grid(w: np.ndarray, dt: np.ndarray, z: complex,
                      snap_at: np.ndarray) -> np.ndarray:
    """g_{t_k}(z) for an ensemble: w is (M, m+1), snapshots at grid indices."""
    M, m1 = w.shape
    out = np.empty((M, len(snap_at)), dtype=complex)
    zs = np.full(M, complex(z.real, max(z.imag, IM_FLOOR)))
    snap = {int(k): j for j, k in enumerate(snap_at)}
    if 0 in snap:
        out[:, snap[0]] = zs
    for k in range(1, m1):
        d = zs - w[:, k]
        s = np.sqrt(d * d + 4.0 * dt[k - 1])
        np.negative(s, where=s.imag < 0, out=s)
        zs = w[:, k] + s
        if k in snap:
            out[:, snap[k]] = zs
    return out


# ---------------------------------------------------------------------------
# metrics


def psi(z) -> complex:
    """Compactifying map (z - i)/(z + i); infinity goes to 1."""
    if z is None:
        return 1.0 + 0.0j
    z = complex(z)
    if np.isinf(z.real) or np.isinf(z.imag):
        return 1.0 + 0.0j
    return (z - 1j) / (z + 1j)


def dstar(z, w) -> float:
    return abs(psi(z) - psi(w))


def hausdorff(A, B, metric: str = "euclidean") -> float:
    """Hausdorff distance between finite point sets."""
    A = np.asarray(A, dtype=complex).ravel()
    B = np.asarray(B, dtype=complex).ravel()
    if len(A) == 0 or len(B) == 0:
        raise LoewnerError("hausdorff needs nonempty sets")
    if metric == "dstar":
        A = np.array([psi(z) for z in A])
        B = np.array([psi(z) for z in B])
    elif metric != "euclidean":
        raise LoewnerError(f"unknown metric {metric!r}")
    ra = np.column_stack([A.real, A.imag])
    rb = np.column_stack([B.real, B.imag])
    d_ab = cKDTree(rb).query(ra)[0].max()
    d_ba = cKDTree(ra).query(rb)[0].max()
    return float(max(d_ab, d_ba))


# ---------------------------------------------------------------------------
# fixtures and CSV surfaces


def alpha_fixture(eps: float, n_teeth: int = 10, samples_per_seg: int = 40) -> np.ndarray:
    """Zigzag test path through i*eps*(1 - 1/j) and i*j*eps -+ eps.

    Its driving function tends to 0 locally uniformly as eps -> 0 while the
    capacity-parameterized path converges to the vertical ray.
    """
    nodes = [0.0 + 0.0j]
    for j in range(1, n_teeth + 1):
        sign = 1.0 if j % 2 == 1 else -1.0
        nodes.append(1j * j * eps + sign * eps)
        if j < n_teeth:
            nodes.append(1j * eps * (1.0 - 1.0 / (j + 1)))
    pts = [nodes[0]]
    for a, b in zip(nodes[:-1], nodes[1:]):
        ts = np.arange(1, samples_per_seg + 1) / samples_per_seg
        seg = a + ts * (b - a)
        # interior sampling: keep strictly above the axis
        seg = np.where(seg.imag <= 0, seg + 1j * IM_FLOOR, seg)
        pts.append(seg)
    return np.concatenate([[pts[0]], *pts[1:]])


def vertical_segment(height: float, n: int = 100) -> np.ndarray:
    return 1j * np.linspace(0.0, height, n + 1)


def driving_to_csv(df: DrivingFunction) -> str:
    buf = io.StringIO()
    buf.write("t,w\n")
    for t, w in zip(df.t, df.w):
        buf.write("%r,%r\n" % (float(t), float(w)))
    return buf.getvalue()


def driving_from_csv(text: str) -> DrivingFunction:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "t,w":
        raise LoewnerError("driving CSV must have header t,w")
    rows = [ln.split(",") for ln in lines[1:]]
    return DrivingFunction(np.array([float(r[0]) for r in rows]),
                           np.array([float(r[1]) for r in rows]))


def trace_to_csv(df: DrivingFunction, tips: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("t,x,y\n")
    for t, z in zip(df.t, tips):
        buf.write("%r,%r,%r\n" % (float(t), float(z.real), float(z.imag)))
    return buf.getvalue()
