# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in :mod:`rbmokit._kernels_py`.

Results are bit-identical to the fallback: sums are accumulated in the same
order as ``numpy.cumsum``.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t

cnp.import_array()


def maximal_profile(dist, weights, absf, double cap=np.inf):
    cdef const double[:, ::1] D = np.ascontiguousarray(dist, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] af = np.ascontiguousarray(absf, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0]
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    cdef double[::1] ds = np.empty(n)
    cdef double[::1] cw = np.empty(n)
    cdef double[::1] cwf = np.empty(n)
    cdef double[::1] ratio = np.empty(n)
    cdef double[::1] bp = np.empty(n)
    cdef cnp.intp_t[::1] order
    cdef Py_ssize_t c, i, k, nb, j5
    cdef double sw, swf, lim, v
    for c in range(n):
        order = np.argsort(D[c], kind="stable")
        sw = 0.0
        swf = 0.0
        for i in range(n):
            ds[i] = D[c, order[i]]
            sw += w[order[i]]
            swf += w[order[i]] * af[order[i]]
            cw[i] = sw
            cwf[i] = swf
        # distinct breakpoints; ratio uses the last index of each run
        nb = 0
        j5 = 0
        i = 0
        while i < n:
            k = i
            while k + 1 < n and ds[k + 1] == ds[i]:
                k += 1
            bp[nb] = ds[i]
            lim = 5.0 * ds[i]
            while j5 + 1 < n and ds[j5 + 1] <= lim:
                j5 += 1
            if ds[i] < cap:
                ratio[nb] = cwf[k] / cw[j5]
            else:
                ratio[nb] = 0.0
            nb += 1
            i = k + 1
        for k in range(nb - 2, -1, -1):
            if ratio[k + 1] > ratio[k]:
                ratio[k] = ratio[k + 1]
        # map each point to the breakpoint equal to its distance from c
        k = 0
        for i in range(n):
            while bp[k] < ds[i]:
                k += 1
            v = ratio[k]
            if v > out[order[i]]:
                out[order[i]] = v
    return out_arr


cdef int _popcount(uint64_t x) nogil:
    cdef int c = 0
    while x:
        x &= x - 1
        c += 1
    return c


cdef int _lowbit(uint64_t x) nogil:
    cdef int i = 0
    while not (x >> i) & 1:
        i += 1
    return i


cdef void _search(uint64_t avail, int size, uint64_t* nbr, int* best) nogil:
    cdef int v
    if avail == 0:
        if size > best[0]:
            best[0] = size
        return
    if size + _popcount(avail) <= best[0]:
        return
    v = _lowbit(avail)
    _search(avail & ~(<uint64_t>1 << v) & ~nbr[v], size + 1, nbr, best)
    _search(avail & ~(<uint64_t>1 << v), size, nbr, best)


def max_independent_set(conflict):
    C = np.asarray(conflict, dtype=bool)
    cdef Py_ssize_t m = C.shape[0]
    if m > 64:
        raise ValueError("exhaustive packing supports at most 64 vertices")
    cdef uint64_t nbr[64]
    cdef Py_ssize_t i, j
    cdef const cnp.uint8_t[:, ::1] cv = np.ascontiguousarray(C, dtype=np.uint8)
    for i in range(m):
        nbr[i] = 0
        for j in range(m):
            if i != j and cv[i, j]:
                nbr[i] |= (<uint64_t>1) << j
    cdef int best = 0
    cdef uint64_t full = (~(<uint64_t>0)) if m == 64 else (((<uint64_t>1) << m) - 1)
    _search(full, 0, nbr, &best)
    return best


def greedy_independent(conflict):
    cdef const cnp.uint8_t[:, ::1] cv = np.ascontiguousarray(np.asarray(conflict, dtype=bool), dtype=np.uint8)
    cdef Py_ssize_t m = cv.shape[0]
    cdef cnp.uint8_t[::1] blocked = np.zeros(m, dtype=np.uint8)
    cdef Py_ssize_t i, j
    chosen = []
    for i in range(m):
        if not blocked[i]:
            chosen.append(i)
            for j in range(m):
                if cv[i, j]:
                    blocked[j] = 1
            blocked[i] = 1
    return chosen
