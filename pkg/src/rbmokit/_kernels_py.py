"""Pure-Python/numpy reference implementations of the hot kernels.

The compiled module ``_ckernels`` exposes the same functions with the same
signatures; :mod:`rbmokit.kernels` picks one at import time.
"""
from __future__ import annotations

import numpy as np


def maximal_profile(dist, weights, absf, cap=np.inf):
    """Right-limit maximal function ``sup (1/mu(5B)) int_B |f|`` at every point.

    For a center ``c`` and breakpoint ``rho`` (a distance from ``c``) the balls
    ``B(c, r)`` with ``r`` just above ``rho`` share the member set of the
    closed ball of radius ``rho``; ``mu(5B)`` decreases to the closed-ball mass
    at ``5 rho`` as ``r`` decreases, so that right limit is the supremum over
    the whole radius interval.  Only breakpoints ``rho < cap`` are admissible.
    """
    dist = np.asarray(dist, dtype=float)
    w = np.asarray(weights, dtype=float)
    wf = w * np.asarray(absf, dtype=float)
    n = w.shape[0]
    out = np.zeros(n)
    for c in range(n):
        order = np.argsort(dist[c], kind="stable")
        ds = dist[c][order]
        cw = np.cumsum(w[order])
        cwf = np.cumsum(wf[order])
        bp, first = np.unique(ds, return_index=True)
        last = np.append(first[1:], n) - 1
        m5 = cw[np.searchsorted(ds, 5.0 * bp, side="right") - 1]
        ratio = np.where(bp < cap, cwf[last] / m5, 0.0)
        suffix = np.maximum.accumulate(ratio[::-1])[::-1]
        k_of = np.searchsorted(bp, dist[c])
        np.maximum(out, suffix[k_of], out=out)
    return out


def max_independent_set(conflict):
    """Size of a maximum independent set of a small graph (adjacency matrix).

    Exhaustive branch and bound over bitmasks; intended for at most a dozen
    vertices.
    """
    conflict = np.asarray(conflict, dtype=bool)
    m = conflict.shape[0]
    nbr = [0] * m
    for i in range(m):
        for j in range(m):
            if i != j and conflict[i, j]:
                nbr[i] |= 1 << j
    best = 0

    def search(avail, size):
        nonlocal best
        if avail == 0:
            best = max(best, size)
            return
        if size + bin(avail).count("1") <= best:
            return
        v = (avail & -avail).bit_length() - 1
        search(avail & ~(1 << v) & ~nbr[v], size + 1)
        search(avail & ~(1 << v), size)

    search((1 << m) - 1, 0)
    return best


def greedy_independent(conflict):
    """Greedy independent set in index order; returns selected indices."""
    conflict = np.asarray(conflict, dtype=bool)
    chosen = []
    blocked = np.zeros(conflict.shape[0], dtype=bool)
    for i in range(conflict.shape[0]):
        if not blocked[i]:
            chosen.append(i)
            blocked |= conflict[i]
            blocked[i] = True
    return chosen
