"""Dominating functions, upper-doubling checks, the regularity kernel and doubling balls.

A dominating function ``lam(x, r)`` majorises ball masses, is non-decreasing
in ``r`` and satisfies ``lam(x, 2r) <= C_lambda * lam(x, r)``.  Three
representations are provided:

* :class:`PowerLaw` -- ``C r**d``.  Finite atomic measures are never dominated
  by a power law down to scale zero, so a power law carries a *scale floor*
  (the smallest positive distance of the space) below which domination is not
  claimed.  Every radius the kernel ever evaluates is a positive distance,
  hence above the floor.
* :class:`BallMeasure` -- ``mu(B(x, r))`` itself, with ``C_lambda`` the
  measure-doubling constant of the space.
* :class:`Envelope` -- the pointwise least function satisfying the three
  axioms for a prescribed ``C_lambda``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .covering import measure_doubling_constant
from .space import Ball, FiniteMetricMeasureSpace, SpaceError, canonical_balls

__all__ = [
    "AncestorResult",
    "BadPointReport",
    "BallMeasure",
    "DoublingParams",
    "Envelope",
    "PowerLaw",
    "UpperDoublingReport",
    "bad_points",
    "default_params",
    "doubling_ancestor",
    "dominating_from_json",
    "evaluate",
    "fit_power_law",
    "is_doubling",
    "kernel",
    "kernel_log_bound_check",
    "minimal_envelope",
    "small_doubling_ball",
    "verify_upper_doubling",
]

# axioms other than domination are compared with this relative slack; they
# involve products like C * r**d that round differently on both sides
AXIOM_RTOL = 1e-12


class HypothesisError(ValueError):
    """A lemma hypothesis (e.g. ``beta > C_lambda**log2(alpha)``) is violated."""


class _SortedRows:
    """Per-center sorted distances and cumulative weights for fast ball masses."""

    def __init__(self, space: FiniteMetricMeasureSpace):
        order = np.argsort(space.dist, axis=1, kind="stable")
        self.ds = np.take_along_axis(space.dist, order, axis=1)
        self.cw = np.concatenate(
            [np.zeros((space.n, 1)), np.cumsum(space.weights[order], axis=1)], axis=1
        )

    def open_mass(self, x: int, r):
        return self.cw[x][np.searchsorted(self.ds[x], r, side="left")]

    def closed_mass(self, x: int, r):
        return self.cw[x][np.searchsorted(self.ds[x], r, side="right")]


@dataclass(frozen=True)
class PowerLaw:
    C: float
    d: float
    floor: float = 0.0
    variant = "power"

    def __post_init__(self):
        if not (self.C > 0 and self.d > 0):
            raise ValueError("PowerLaw needs C > 0 and d > 0")

    @property
    def C_lambda(self) -> float:
        return 2.0**self.d

    def evaluate_many(self, x: int, r) -> np.ndarray:
        return self.C * np.asarray(r, dtype=float) ** self.d

    def __call__(self, x: int, r: float) -> float:
        return float(self.C * r**self.d)

    def to_json(self) -> dict:
        return {"variant": self.variant, "C": self.C, "d": self.d, "floor": self.floor,
                "C_lambda": self.C_lambda}


class BallMeasure:
    """``lam(x, r) = mu(B(x, r))``; ``C_lambda`` is the sup of ``mu(2B)/mu(B)``."""

    variant = "ballmeasure"
    floor = 0.0

    def __init__(self, space: FiniteMetricMeasureSpace):
        self.space = space
        self._rows = _SortedRows(space)
        self.C_lambda, self.witness = measure_doubling_constant(space)

    def evaluate_many(self, x: int, r) -> np.ndarray:
        return np.asarray(self._rows.open_mass(x, np.asarray(r, dtype=float)), dtype=float)

    def __call__(self, x: int, r: float) -> float:
        return float(self._rows.open_mass(x, r))

    def to_json(self) -> dict:
        return {"variant": self.variant, "C_lambda": self.C_lambda}


def _doublings_needed(s: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Least ``k >= 0`` with ``r * 2**k > s`` (elementwise, exact)."""
    s, r = np.broadcast_arrays(np.asarray(s, float), np.asarray(r, float))
    with np.errstate(divide="ignore"):
        k = np.where(s < r, 0, np.floor(np.log2(np.where(s > 0, s, 1) / r)) + 1).astype(np.int64)
    k = np.maximum(k, 0)
    # repair floating log2 at exact powers of two; ldexp is exact
    for _ in range(3):
        low = np.ldexp(r, k) <= s
        k = np.where(low, k + 1, k)
        high = (k > 0) & (np.ldexp(r, np.maximum(k - 1, 0)) > s)
        k = np.where(high, k - 1, k)
    return k


class Envelope:
    """Least dominating function for a given doubling constant.

    ``lam(x, r) = max_k mu(B(x, 2**k r)) * C_lambda**(-k)`` over ``k >= 0``,
    evaluated over the breakpoint masses of ``x``: a breakpoint ``s`` with
    closed-ball mass ``m`` contributes ``m * C_lambda**(-k)`` where ``k`` is
    the least integer with ``2**k r > s``.
    """

    variant = "envelope"
    floor = 0.0

    def __init__(self, space: FiniteMetricMeasureSpace, C_lambda: float):
        if not C_lambda > 1:
            raise ValueError("Envelope needs C_lambda > 1")
        self.space = space
        self.C_lambda = float(C_lambda)
        rows = _SortedRows(space)
        self.breaks = [np.unique(space.dist[x]) for x in range(space.n)]
        self.masses = [rows.closed_mass(x, bp) for x, bp in enumerate(self.breaks)]

    def evaluate_many(self, x: int, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        s, m = self.breaks[x], self.masses[x]
        k = _doublings_needed(s[None, :], r[:, None])
        return (m[None, :] / self.C_lambda ** k).max(axis=1)

    def __call__(self, x: int, r: float) -> float:
        return float(self.evaluate_many(x, [r])[0])

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "C_lambda": self.C_lambda,
            "breakpoints": [bp.tolist() for bp in self.breaks],
            "masses": [m.tolist() for m in self.masses],
        }


def dominating_from_json(doc: dict, space: FiniteMetricMeasureSpace):
    variant = doc.get("variant")
    if variant == "power":
        return PowerLaw(float(doc["C"]), float(doc["d"]), float(doc.get("floor", space.min_positive_distance)))
    if variant == "ballmeasure":
        return BallMeasure(space)
    if variant == "envelope":
        return Envelope(space, float(doc["C_lambda"]))
    raise ValueError(f"unknown dominating function variant {variant!r}")


def evaluate(lam, x: int, r: float) -> float:
    """``lam(x, r)`` for ``r > 0``."""
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r!r}")
    return lam(x, r)


def scale_floor(space: FiniteMetricMeasureSpace, lam) -> float:
    """Radius below which domination is not claimed (power laws only)."""
    if isinstance(lam, PowerLaw):
        return lam.floor if lam.floor > 0 else space.min_positive_distance
    return 0.0


@dataclass
class UpperDoublingReport:
    passed: bool
    C_lambda: float
    scale_floor: float
    checked: int
    failures: list = field(default_factory=list)

    def first_failure(self) -> Optional[dict]:
        return self.failures[0] if self.failures else None

    def to_json(self) -> dict:
        return {"passed": self.passed, "C_lambda": self.C_lambda, "scale_floor": self.scale_floor,
                "checked": self.checked, "failures": self.failures[:20]}


def verify_upper_doubling(space: FiniteMetricMeasureSpace, lam, max_failures: int = 50) -> UpperDoublingReport:
    """Check the upper-doubling axioms of ``lam`` on the breakpoint grid.

    Per center, the grid holds the canonical radii and the positive
    breakpoints.  Checked: monotonicity along the grid, ``lam(x, 2r) <=
    C_lambda lam(x, r)``, domination ``mu(B(x, r)) <= lam(x, r)`` (exact, no
    slack) and the off-center bound ``mu(B(y, r)) <= C_lambda lam(x, r)`` for
    ``d(x, y) <= r``.  Radii below the scale floor are skipped.
    """
    fam = canonical_balls(space)
    rows = _SortedRows(space)
    floor = scale_floor(space, lam)
    C = lam.C_lambda
    fails: list = []
    checked = 0

    def fail(kind, x, r, lhs, rhs):
        if len(fails) < max_failures:
            fails.append({"check": kind, "center": space.labels[x], "radius": float(r),
                          "lhs": float(lhs), "rhs": float(rhs)})

    grids = []
    for x in range(space.n):
        grid = np.union1d(fam.radii[x], fam.breakpoints[x][1:])
        grid = grid[grid >= floor] if floor > 0 else grid
        grids.append(grid)
        if grid.size == 0:
            continue
        vals = lam.evaluate_many(x, grid)
        dbl = lam.evaluate_many(x, 2 * grid)
        mu = rows.open_mass(x, grid)
        checked += 3 * grid.size
        for i in np.flatnonzero(np.diff(vals) < -AXIOM_RTOL * np.abs(vals[1:])):
            fail("monotone", x, grid[i + 1], vals[i], vals[i + 1])
        for i in np.flatnonzero(dbl > C * vals * (1 + AXIOM_RTOL)):
            fail("doubling", x, grid[i], dbl[i], C * vals[i])
        for i in np.flatnonzero(mu > vals):
            fail("domination", x, grid[i], mu[i], vals[i])

    # mu(B(y, r)) <= C_lambda lam(x, r) whenever d(x, y) <= r
    for b in fam.balls:
        y, r = b.center, b.radius
        if r < floor:
            continue
        mu_y = rows.open_mass(y, r)
        for x in np.flatnonzero(space.dist[y] <= r):
            checked += 1
            rhs = C * lam(int(x), r)
            if mu_y > rhs * (1 + AXIOM_RTOL):
                fail("off_center", int(x), r, mu_y, rhs)
    return UpperDoublingReport(not fails, C, floor, checked, fails)


def fit_power_law(space: FiniteMetricMeasureSpace, d: float) -> PowerLaw:
    """Least ``C`` such that ``C r**d`` dominates every ball of radius ``>= floor``.

    Uses closed-ball masses at the positive breakpoints (right limits of the
    open-ball masses) plus the atoms at the floor scale; the floor is the
    smallest positive distance (1 for a single point).
    """
    if not d > 0:
        raise ValueError("exponent d must be positive")
    floor = space.min_positive_distance
    rows = _SortedRows(space)
    C = float(space.weights.max() / floor**d)
    for x in range(space.n):
        bp = np.unique(space.dist[x])[1:]
        if bp.size:
            C = max(C, float((rows.closed_mass(x, bp) / bp**d).max()))
    return PowerLaw(C, float(d), floor)


def minimal_envelope(space: FiniteMetricMeasureSpace, C_lambda: float) -> Envelope:
    return Envelope(space, C_lambda)


def _check_pair(space, B: Ball, B1: Ball):
    inner = space.members_mask(B.center, B.radius)
    outer = space.members_mask(B1.center, B1.radius)
    if np.any(inner & ~outer) or B.radius > B1.radius:
        raise ValueError(f"kernel needs members({B}) within members({B1}) and r_B <= r_B1")
    return inner


def kernel(space: FiniteMetricMeasureSpace, lam, B: Ball, B1: Ball) -> float:
    """Regularity kernel ``1 + sum_{y in 2B1 minus B} w_y / lam(c_B, d(y, c_B))``."""
    inner = _check_pair(space, B, B1)
    excess = space.members_mask(B1.center, 2 * B1.radius) & ~inner
    idx = np.flatnonzero(excess)
    if idx.size == 0:
        return 1.0
    vals = lam.evaluate_many(B.center, space.dist[B.center, idx])
    return 1.0 + float((space.weights[idx] / vals).sum())


def kernel_log_bound(lam, B: Ball, B1: Ball) -> float:
    return lam.C_lambda * math.log2(4 * B1.radius / B.radius)


def kernel_log_bound_check(space: FiniteMetricMeasureSpace, lam, B: Ball, B1: Ball) -> dict:
    """Compare ``K(B, B1) - 1`` with ``C_lambda log2(4 r_B1 / r_B)``."""
    lhs = kernel(space, lam, B, B1) - 1.0
    rhs = kernel_log_bound(lam, B, B1)
    return {"passed": bool(lhs <= rhs), "lhs": lhs, "rhs": rhs}


@dataclass(frozen=True)
class DoublingParams:
    """Parameters of ``(alpha, beta)``-doubling: ``mu(alpha B) <= beta mu(B)``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 1 and self.beta > 1):
            raise ValueError("DoublingParams needs alpha > 1 and beta > 1")


def default_params(rho: float, C_lambda: float, n_exponent: float) -> DoublingParams:
    alpha = 5.0 * rho
    beta = 2.0 * max(C_lambda ** math.log2(alpha), alpha**n_exponent)
    return DoublingParams(alpha, beta)


def is_doubling(space: FiniteMetricMeasureSpace, ball: Ball, params: DoublingParams) -> bool:
    return space.open_mass(ball.center, params.alpha * ball.radius) <= params.beta * space.open_mass(
        ball.center, ball.radius
    )


@dataclass
class AncestorResult:
    ball: Ball
    j: int
    ratios: list  # mu(alpha^{i+1} B) / mu(alpha^i B) for i = 0..j


def doubling_ancestor(space: FiniteMetricMeasureSpace, B: Ball, params: DoublingParams, C_lambda: float) -> AncestorResult:
    """Smallest ``alpha**j B`` that is ``(alpha, beta)``-doubling.

    Every smaller power is certified non-doubling by its recorded ratio.
    Requires ``beta > C_lambda**log2(alpha)``.
    """
    gamma = C_lambda ** math.log2(params.alpha)
    if not params.beta > gamma:
        raise HypothesisError(f"beta={params.beta:g} must exceed C_lambda^log2(alpha)={gamma:g}")
    ratios = []
    r = B.radius
    j = 0
    # once alpha^j B holds every point, mu(alpha B) = mu(B) and the chain stops
    while True:
        m = space.open_mass(B.center, r)
        m_up = space.open_mass(B.center, params.alpha * r)
        ratios.append(m_up / m)
        if m_up <= params.beta * m:
            return AncestorResult(Ball(B.center, r), j, ratios)
        r *= params.alpha
        j += 1


def small_doubling_ball(
    space: FiniteMetricMeasureSpace,
    x: int,
    r: float,
    params: DoublingParams,
    j_max: int,
    predicate: Optional[Callable[[Ball], bool]] = None,
):
    """Largest doubling ball ``B(x, alpha**-j r)``, ``0 <= j <= j_max``, passing ``predicate``.

    Returns ``(ball, j)`` or ``None``.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    for j in range(j_max + 1):
        ball = Ball(x, r * params.alpha ** (-j))
        if is_doubling(space, ball, params) and (predicate is None or predicate(ball)):
            return ball, j
    return None


@dataclass
class BadPointReport:
    k: int
    points: list
    measure: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.measure <= self.bound


def bad_points(
    space: FiniteMetricMeasureSpace,
    B0: Ball,
    params: DoublingParams,
    k: int,
    N_bound: int,
    n_exponent: float,
) -> BadPointReport:
    """``k``-bad points of ``B0`` and the bound ``N 2**n mu(3 B0) (alpha**n / beta)**k``.

    ``x`` is ``k``-bad when none of ``alpha**j B(x, alpha**-k r)``,
    ``j = 0..k``, is ``(alpha, beta)``-doubling.  Requires ``beta > alpha**n``.
    """
    a, b = params.alpha, params.beta
    if not b > a**n_exponent:
        raise HypothesisError(f"beta={b:g} must exceed alpha^n={a**n_exponent:g}")
    r = B0.radius
    bad = []
    for x in np.flatnonzero(space.members_mask(B0.center, r)):
        x = int(x)
        if not any(is_doubling(space, Ball(x, r * a ** (j - k)), params) for j in range(k + 1)):
            bad.append(x)
    measure = float(space.weights[bad].sum()) if bad else 0.0
    bound = N_bound * 2.0**n_exponent * space.open_mass(B0.center, 3 * r) * (a**n_exponent / b) ** k
    return BadPointReport(k, bad, measure, bound)
