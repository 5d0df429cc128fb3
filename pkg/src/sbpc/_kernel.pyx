# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled branch-and-bound search over blocked input sequences.

Mirrors ``sbpc._fallback.bnb_search`` operation for operation so both return
the same argmin and node count.
"""
import math

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isnan, INFINITY

cnp.import_array()


cdef struct Ctx:
    int model
    double dt
    int quad
    double v_max
    double mass
    double A
    double B
    double C
    double ft_max
    double p_max
    double fb_max
    double eps_v
    int nseg
    double* starts
    double* rg
    double* limits
    double c0
    double c1
    double h0
    double h1
    double w0
    double w1
    double* actions
    int nact
    long long* lengths
    int nblk
    int mode
    double gamma_limit
    double omega
    double best
    int has_best
    long long* best_seq
    long long* cur
    long long nodes


cdef inline int segment(Ctx* c, double x1) noexcept nogil:
    cdef int lo = 0
    cdef int hi = c.nseg
    cdef int mid
    while lo < hi:
        mid = (lo + hi) // 2
        if x1 < c.starts[mid]:
            hi = mid
        else:
            lo = mid + 1
    lo -= 1
    return lo if lo > 0 else 0


cdef inline double traction(Ctx* c, double x2, double u) noexcept nogil:
    cdef double q
    if u > 0.0:
        q = c.p_max / (x2 if x2 > c.eps_v else c.eps_v)
        return u * (q if q < c.ft_max else c.ft_max)
    return 0.0


cdef inline double braking(Ctx* c, double x2, double u) noexcept nogil:
    if u < 0.0 and x2 > 0.0:
        return -u * c.fb_max
    return 0.0


cdef inline double resistance(Ctx* c, double x1, double x2) noexcept nogil:
    return c.A + c.B * x2 + c.C * x2 * x2 + c.rg[segment(c, x1)]


cdef double cruise(Ctx* c, double x1, double x2) noexcept nogil:
    cdef double fr = resistance(c, x1, x2)
    cdef double lo, hi, mid, target
    cdef int it
    if fr == 0.0:
        return 0.0
    if fr > 0.0:
        if traction(c, x2, 1.0) <= fr:
            return 1.0
        lo = 0.0
        hi = 1.0
        for it in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if traction(c, x2, mid) < fr:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)
    target = -fr
    if braking(c, x2, -1.0) <= target:
        return -1.0
    lo = -1.0
    hi = 0.0
    for it in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if braking(c, x2, mid) < target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


cdef inline double stage_cost(Ctx* c, double x1, double x2, double u) noexcept nogil:
    if c.model == 0:
        return fabs(u) if c.quad == 0 else u * u
    return fabs(traction(c, x2, u) * x2)


cdef inline void model_step(Ctx* c, double x1, double x2, double u, double* y1, double* y2) noexcept nogil:
    cdef double ft, fb, fr
    if c.model == 0:
        y1[0] = x1 + c.dt * x2
        y2[0] = x2 + c.dt * u
        return
    ft = traction(c, x2, u)
    fb = braking(c, x2, u)
    fr = resistance(c, x1, x2)
    y1[0] = x1 + c.dt * x2
    y2[0] = x2 + c.dt * (ft - fb - fr) / c.mass


cdef inline bint violated(Ctx* c, double x1, double x2) noexcept nogil:
    cdef double excess
    if c.model == 0:
        excess = fabs(x2) - c.v_max
        return excess > 0.0
    if x2 < 0.0:
        return True
    return x2 - c.limits[segment(c, x1)] > 0.0


cdef inline double delta(Ctx* c, double y1, double y2) noexcept nogil:
    cdef double d = 0.0
    cdef double e, v
    e = fabs(y1 - c.c0) - c.h0
    if e > 0.0:
        v = c.w0 * e
        if v > d:
            d = v
    e = fabs(y2 - c.c1) - c.h1
    if e > 0.0:
        v = c.w1 * e
        if v > d:
            d = v
    return d


cdef inline int prefix_cmp(Ctx* c, int depth) noexcept nogil:
    cdef int i
    for i in range(depth):
        if c.cur[i] != c.best_seq[i]:
            return -1 if c.cur[i] < c.best_seq[i] else 1
    return 0


cdef void dfs(Ctx* c, int depth, double x1, double x2, double partial) noexcept nogil:
    cdef int a, s, ccmp, i
    cdef int has_best
    cdef double lb, y1, y2, n1, n2, cost, u, d, obj
    cdef bint ok
    for a in range(c.nact):
        has_best = c.has_best
        ccmp = 0
        if has_best:
            ccmp = prefix_cmp(c, depth)
            if ccmp == 0:
                if a < c.best_seq[depth]:
                    ccmp = -1
                elif a > c.best_seq[depth]:
                    ccmp = 1
            lb = partial if c.mode != 1 else 0.0
            if lb > c.best or (lb == c.best and ccmp > 0):
                continue
        c.nodes += 1
        y1 = x1
        y2 = x2
        cost = partial
        ok = True
        for s in range(c.lengths[depth]):
            if isnan(c.actions[a]):
                if not y2 > 0.0:
                    ok = False
                    break
                u = cruise(c, y1, y2)
            else:
                u = c.actions[a]
            cost += stage_cost(c, y1, y2, u)
            model_step(c, y1, y2, u, &n1, &n2)
            y1 = n1
            y2 = n2
            if violated(c, y1, y2):
                ok = False
                break
        if not ok:
            continue
        if has_best:
            lb = cost if c.mode != 1 else 0.0
            if lb > c.best or (lb == c.best and ccmp > 0):
                continue
        c.cur[depth] = a
        if depth == c.nblk - 1:
            cost += stage_cost(c, y1, y2, 0.0)
            d = delta(c, y1, y2)
            if c.mode == 0:
                if d > c.gamma_limit:
                    continue
                obj = cost
            elif c.mode == 1:
                obj = d
            else:
                obj = cost + c.omega * d
            if (not has_best) or obj < c.best or (obj == c.best and ccmp < 0):
                c.best = obj
                for i in range(c.nblk):
                    c.best_seq[i] = c.cur[i]
                c.has_best = 1
        else:
            dfs(c, depth + 1, y1, y2, cost)


def bnb_search(spec):
    """Return ``(best_objective, best_index_sequence | None, nodes_explored)``."""
    cdef Ctx c
    cdef cnp.ndarray[cnp.float64_t, ndim=1] fparams = np.ascontiguousarray(spec.fparams, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] starts = np.ascontiguousarray(spec.starts, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rg = np.ascontiguousarray(spec.rg, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] limits = np.ascontiguousarray(spec.limits, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] actions = np.ascontiguousarray(spec.actions, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] lengths = np.ascontiguousarray(spec.lengths, dtype=np.int64)
    cdef int nblk = lengths.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] best_seq = np.zeros(max(nblk, 1), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cur = np.zeros(max(nblk, 1), dtype=np.int64)
    cdef double x1 = float(spec.x0[0])
    cdef double x2 = float(spec.x0[1])
    cdef int i

    c.model = int(spec.model_code)
    c.dt = fparams[0]
    if c.model == 0:
        c.quad = 1 if fparams[1] != 0.0 else 0
        c.v_max = fparams[2]
    else:
        c.mass = fparams[1]
        c.A = fparams[2]
        c.B = fparams[3]
        c.C = fparams[4]
        c.ft_max = fparams[5]
        c.p_max = fparams[6]
        c.fb_max = fparams[7]
        c.eps_v = fparams[8]
    c.nseg = starts.shape[0]
    c.starts = <double*> starts.data
    c.rg = <double*> rg.data
    c.limits = <double*> limits.data
    c.c0 = float(spec.center[0])
    c.c1 = float(spec.center[1])
    c.h0 = float(spec.halfw[0])
    c.h1 = float(spec.halfw[1])
    c.w0 = float(spec.weights[0])
    c.w1 = float(spec.weights[1])
    c.actions = <double*> actions.data
    c.nact = actions.shape[0]
    c.lengths = <long long*> lengths.data
    c.nblk = nblk
    c.mode = int(spec.mode)
    c.gamma_limit = float(spec.gamma_limit)
    c.omega = float(spec.omega)
    c.best_seq = <long long*> best_seq.data
    c.cur = <long long*> cur.data
    c.nodes = 0
    if spec.inc_seq is not None:
        c.has_best = 1
        c.best = float(spec.inc_obj)
        for i in range(nblk):
            best_seq[i] = spec.inc_seq[i]
    else:
        c.has_best = 0
        c.best = INFINITY

    with nogil:
        dfs(&c, 0, x1, x2, 0.0)

    if not c.has_best:
        return math.inf, None, c.nodes
    out = []
    for i in range(nblk):
        out.append(int(best_seq[i]))
    return c.best, tuple(out), c.nodes
