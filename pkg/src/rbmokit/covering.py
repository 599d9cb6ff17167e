"""Separated nets, greedy 5r-covering selection and geometric-doubling diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .space import Ball, FiniteMetricMeasureSpace

__all__ = [
    "DoublingDiagnostics",
    "Packing",
    "doubling_diagnostics",
    "packing_bound",
    "separated_net",
    "vitali_select",
]

EXACT_PACKING_LIMIT = 12
DIAGNOSTIC_DELTAS = (0.5, 0.25, 0.125)


def separated_net(space: FiniteMetricMeasureSpace, candidates: Iterable[int], r: float) -> list[int]:
    """Greedy maximal ``r``-separated subset, scanning candidates in index order.

    Selected points are pairwise at distance ``>= r``; every rejected candidate
    lies at distance ``< r`` from some selected point.
    """
    cand = sorted({int(c) for c in candidates})
    if not cand:
        raise ValueError("separated_net needs at least one candidate")
    chosen: list[int] = []
    for c in cand:
        if not chosen or space.dist[c, chosen].min() >= r:
            chosen.append(c)
    return chosen


def vitali_select(space: FiniteMetricMeasureSpace, balls: Sequence[Ball]) -> list[Ball]:
    """Basic covering theorem, greedy form.

    Balls are scanned by decreasing radius (ties by center index) and kept
    when ``d(c, c') >= r + r'`` against every ball already kept.  A rejected
    ball meets a kept ball of at least its own radius, hence lies inside its
    3-dilation and a fortiori its 5-dilation.
    """
    if not balls:
        raise ValueError("vitali_select needs at least one ball")
    order = sorted(set(balls), key=lambda b: (-b.radius, b.center))
    chosen: list[Ball] = []
    for b in order:
        if all(space.dist[b.center, s.center] >= b.radius + s.radius for s in chosen):
            chosen.append(b)
    return chosen


@dataclass(frozen=True)
class Packing:
    """Maximum packing count, exact when ``lower == upper``."""

    lower: int
    upper: int

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    @property
    def value(self) -> int:
        if not self.exact:
            raise ValueError(f"packing only bracketed: [{self.lower}, {self.upper}]")
        return self.lower


def _conflicts(space, members: np.ndarray, sep: float, closed: bool) -> np.ndarray:
    # y, y' conflict iff some point of X lies in both separation balls
    near = space.dist[:, members] <= sep if closed else space.dist[:, members] < sep
    nz = near.astype(np.int64)
    return (nz.T @ nz) > 0


def _packing(space, members: np.ndarray, sep: float, closed: bool, limit: int) -> Packing:
    m = members.shape[0]
    if m <= 1:
        return Packing(m, m)
    conflict = _conflicts(space, members, sep, closed)
    if m <= limit:
        k = int(kernels.max_independent_set(conflict))
        return Packing(k, k)
    lower = len(kernels.greedy_independent(conflict))
    # a sep-net of the members bounds any packing: each net point sits in at
    # most one separation ball of a packing
    net: list[int] = []
    sub = space.dist[np.ix_(members, members)]
    for i in range(m):
        if not net or (sub[i, net].min() > sep if closed else sub[i, net].min() >= sep):
            net.append(i)
    return Packing(lower, len(net))


def packing_bound(
    space: FiniteMetricMeasureSpace,
    ball: Ball,
    delta: float,
    *,
    closed: bool = False,
    limit: int = EXACT_PACKING_LIMIT,
) -> Packing:
    """Max number of centres in ``ball`` carrying pairwise disjoint ``delta*r`` balls.

    Exact (exhaustive) for at most ``limit`` members; otherwise a bracket from
    a greedy packing (lower) and a greedy ``delta*r``-net (upper).  With
    ``closed=True`` the members are the closed ball of radius ``r`` and the
    separation balls are closed, which is the supremum over radii just above
    ``r``.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    mask = space.closed_mask(ball.center, ball.radius) if closed else space.members_mask(
        ball.center, ball.radius
    )
    return _packing(space, np.flatnonzero(mask), delta * ball.radius, closed, limit)


@dataclass
class DoublingDiagnostics:
    """Geometric and measure doubling constants of a finite space.

    ``N_bound`` is the quarter-radius packing constant (supremum over all
    balls, not only canonical ones); ``n_exponent = log2(N_bound)``.
    ``C_mu`` is ``sup mu(2B)/mu(B)`` over all balls with its witness.
    """

    N_bound: int
    n_exponent: float
    per_delta_packing: dict
    C_mu: float
    C_mu_witness: Ball
    N_witness: Ball
    exact: bool
    condition: str = "quarter_radius_packing"
    notes: list = field(default_factory=list)

    def to_json(self, space: FiniteMetricMeasureSpace | None = None) -> dict:
        lab = (lambda i: space.labels[i]) if space is not None else (lambda i: i)
        return {
            "N_bound": self.N_bound,
            "n_exponent": self.n_exponent,
            "N_condition": self.condition,
            "N_exact": self.exact,
            "per_delta_packing": {repr(d): list(v) for d, v in self.per_delta_packing.items()},
            "C_mu": self.C_mu,
            "witnesses": {
                "N_bound": {"center": lab(self.N_witness.center), "radius": self.N_witness.radius},
                "C_mu": {"center": lab(self.C_mu_witness.center), "radius": self.C_mu_witness.radius},
            },
            "notes": list(self.notes),
        }


def measure_doubling_constant(space: FiniteMetricMeasureSpace) -> tuple[float, Ball]:
    """``sup_B mu(2B)/mu(B)`` over all open balls, with a maximising ball.

    On the radius interval ``(rho_k, rho_{k+1}]`` the member set is fixed and
    ``mu(2B)`` grows with the radius, so the supremum sits at ``rho_{k+1}``.
    """
    best, witness = 1.0, Ball(0, 2 * space.min_positive_distance)
    for c in range(space.n):
        bp = np.unique(space.dist[c])
        for k in range(bp.shape[0] - 1):
            r = float(bp[k + 1])
            ratio = space.open_mass(c, 2 * r) / space.open_mass(c, r)
            if ratio > best:
                best, witness = ratio, Ball(c, r)
    return best, witness


def sup_packing(space: FiniteMetricMeasureSpace, delta: float, limit: int = EXACT_PACKING_LIMIT):
    """Supremum over all balls of the ``delta`` packing count, as (Packing, witness)."""
    best, witness = Packing(1, 1), Ball(0, 2 * space.min_positive_distance)
    for c in range(space.n):
        for rho in np.unique(space.dist[c])[1:]:
            p = packing_bound(space, Ball(c, float(rho)), delta, closed=True, limit=limit)
            if p.upper > best.upper or (p.upper == best.upper and p.lower > best.lower):
                best, witness = p, Ball(c, float(rho))
    return best, witness


def doubling_diagnostics(space: FiniteMetricMeasureSpace, limit: int = EXACT_PACKING_LIMIT) -> DoublingDiagnostics:
    """Quarter-radius packing constant, packing table and measure-doubling constant.

    Packing counts are suprema over every radius (closed right limits at
    breakpoints), so ``N_bound`` bounds the quarter packing of every ball in
    the space, not only of the canonical ones.
    """
    quarter, n_wit = sup_packing(space, 0.25, limit)
    table = {}
    for d in DIAGNOSTIC_DELTAS:
        p = quarter if d == 0.25 else sup_packing(space, d, limit)[0]
        table[d] = (p.lower, p.upper)
    N = quarter.upper
    c_mu, c_wit = measure_doubling_constant(space)
    notes = []
    if not quarter.exact:
        notes.append(f"quarter packing bracketed [{quarter.lower}, {quarter.upper}]; N_bound uses the upper end")
    return DoublingDiagnostics(
        N_bound=N,
        n_exponent=math.log2(N) if N > 1 else 0.0,
        per_delta_packing=table,
        C_mu=c_mu,
        C_mu_witness=c_wit,
        N_witness=n_wit,
        exact=quarter.exact,
        notes=notes,
    )
