"""Compiled inner loops shared by the harmonic solver and the explorer.

All kernels work on the flat vertex indexing of a LatticeDomain (interior
first, then boundary) with the (n, 6) neighbor-index table; -1 marks a
neighbor outside the closed domain.  Randomness comes exclusively from the
counter stream in hesim.rng, addressed per (master_seed, sample, step, draw).

Vertex color/state codes in `det` arrays: 0 = fixed white, 1 = fixed black,
2 = undetermined.
"""

import numba
import numpy as np
from numba import njit

from .rng import counter_bits, counter_uniform

U64 = np.uint64
UNDET = 2

# explorer run outcome codes
RUN_OK = 0
RUN_TRUNCATED = 1          # stopped by the height cap before reaching v_end
RUN_ERR_NO_APEX = -1
RUN_ERR_MAXSTEPS = -2

# probability source codes
MODE_WALK = 0              # color from a single random-walk hit (HE law)
MODE_PERCOLATION = 1       # fair coin


@njit(cache=True, nogil=True, inline="always")
def _rand6(master, sample, step, draw):
    # unbiased residue: 2**64 % 6 == 4, reject the top 4 values
    while True:
        bits = counter_bits(master, sample, step, draw)
        draw += U64(1)
        if bits < U64(0xFFFFFFFFFFFFFFFC):
            return numba.int64(bits % U64(6)), draw


@njit(cache=True, nogil=True)
def walk_color(nbr, det, start, master, sample, step):
    """Color of the first determined vertex hit by a walk from `start`.

    Walk draws use counters (step, 1), (step, 2), ...; draw 0 is reserved
    for the step's coin.
    """
    pos = start
    draw = U64(1)
    while det[pos] == UNDET:
        k, draw = _rand6(master, sample, step, draw)
        pos = nbr[pos, k]
    return det[pos]


@njit(cache=True, nogil=True)
def run_interface(nbr, x2, y2, det, e_u, e_w, t_prev, end_u, end_w,
                  mode, master, sample, b_stop, max_steps,
                  step_apex, step_p, step_x, step_already, step_turn,
                  mid_u, mid_w):
    """Trace one interface (harmonic-explorer or percolation law).

    The current state is the directed data (edge (e_u, e_w), previous apex
    t_prev); each step finds the apex across the edge, decides its color,
    and turns so that color 1 stays on the right of the path.  Returns
    (n_steps, status); per-step records land in the preallocated arrays.
    Stops with RUN_TRUNCATED once the apex row exceeds b_stop (< 0 disables).
    """
    n = 0
    status = RUN_ERR_MAXSTEPS
    while n < max_steps:
        # apex of the next triangle: common neighbor of e_u, e_w besides t_prev
        apex = numba.int64(-1)
        for i in range(6):
            c = nbr[e_u, i]
            if c == -1 or c == t_prev:
                continue
            for j in range(6):
                if nbr[e_w, j] == c:
                    apex = c
                    break
            if apex != -1:
                break
        if apex == -1:
            return n, RUN_ERR_NO_APEX

        # order edge endpoints so (p_v, q_v, apex) is counterclockwise
        p_v, q_v = e_u, e_w
        cross = ((x2[q_v] - x2[p_v]) * (y2[apex] - y2[p_v])
                 - (y2[q_v] - y2[p_v]) * (x2[apex] - x2[p_v]))
        if cross < 0:
            p_v, q_v = q_v, p_v

        x = counter_uniform(master, sample, U64(n), U64(0))
        if det[apex] != UNDET:
            already = True
            p = numba.float64(det[apex])
        else:
            already = False
            if mode == MODE_PERCOLATION:
                p = 0.5
                det[apex] = 1 if x <= p else 0
            else:
                c = walk_color(nbr, det, apex, master, sample, U64(n))
                p = numba.float64(c)
                det[apex] = c
        chose = x <= p

        step_apex[n] = apex
        step_p[n] = p
        step_x[n] = x
        step_already[n] = already
        step_turn[n] = chose
        if chose:
            e_u, e_w, t_prev = apex, p_v, q_v    # edge (apex, P), 1 on the right
        else:
            e_u, e_w, t_prev = q_v, apex, p_v    # edge (Q, apex)
        mid_u[n] = e_u
        mid_w[n] = e_w
        n += 1

        if (e_u == end_u and e_w == end_w) or (e_u == end_w and e_w == end_u):
            status = RUN_OK
            break
        if b_stop >= 0 and y2[apex] >= b_stop:
            status = RUN_TRUNCATED
            break
    return n, status


@njit(cache=True, nogil=True)
def fill_terminal_colors(nbr, det):
    """Color remaining undetermined vertices after the interface closes.

    Each undetermined component touches fixed vertices of one color only,
    so its harmonic value is that constant.  Modifies det in place.
    """
    n = det.shape[0]
    stack = np.empty(n, dtype=np.int64)
    comp = np.empty(n, dtype=np.int64)
    for s in range(n):
        if det[s] != UNDET:
            continue
        top = 0
        csize = 0
        stack[top] = s
        top += 1
        det[s] = 3  # visiting marker
        color = numba.int64(-1)
        while top > 0:
            top -= 1
            v = stack[top]
            comp[csize] = v
            csize += 1
            for k in range(6):
                w = nbr[v, k]
                if w == -1:
                    continue
                if det[w] == UNDET:
                    det[w] = 3
                    stack[top] = w
                    top += 1
                elif det[w] != 3:
                    color = det[w]
        for i in range(csize):
            det[comp[i]] = color


@njit(cache=True, nogil=True)
def gauss_seidel(nbr, free_idx, values, tol, max_sweeps):
    """In-place mean-value sweeps over the free vertices.

    Returns (defect, sweeps) where defect is the final max deviation from
    the 6-neighbor mean.
    """
    sweeps = 0
    defect = 1.0e300
    while sweeps < max_sweeps:
        defect = 0.0
        for t in range(free_idx.shape[0]):
            i = free_idx[t]
            s = 0.0
            for k in range(6):
                s += values[nbr[i, k]]
            s /= 6.0
            d = abs(values[i] - s)
            if d > defect:
                defect = d
            values[i] = s
        sweeps += 1
        if defect <= tol:
            break
    return defect, sweeps


@njit(cache=True, nogil=True)
def mc_exit_flags(nbr, absorbing, flags, start, n_walks, master, sample):
    """Fraction of walks from `start` whose exit step is a flagged edge.

    flags[v, k] marks the directed edge (v, nbr[v, k]).  Walk i uses the
    counter stream at step = i.
    """
    hits = 0
    for i in range(n_walks):
        pos = start
        draw = U64(0)
        while True:
            k, draw = _rand6(master, U64(sample), U64(i), draw)
            nxt = nbr[pos, k]
            if absorbing[nxt]:
                if flags[pos, k]:
                    hits += 1
                break
            pos = nxt
    return hits


@njit(cache=True, nogil=True)
def mc_harmonic_values(nbr, det, fixed_values, targets, n_walks, master):
    """Monte Carlo estimate of the harmonic extension at the target vertices."""
    out = np.empty(targets.shape[0], dtype=np.float64)
    for t in range(targets.shape[0]):
        acc = 0.0
        for i in range(n_walks):
            pos = targets[t]
            draw = U64(1)
            while det[pos] == UNDET:
                k, draw = _rand6(master, U64(t), U64(i), draw)
                pos = nbr[pos, k]
            acc += fixed_values[pos]
        out[t] = acc / n_walks
    return out
