"""The 5B-normalised maximal operator, its weak (1,1) bound and the differentiation check.

The maximal function is ``sup over balls B containing x of (1/mu(5B)) int_B |f|``.
For a fixed center and member set, shrinking the radius towards the largest
member distance ``rho`` keeps the numerator and drives ``mu(5B)`` down to the
closed-ball mass at ``5 rho``.  The supremum over all open balls is therefore
the maximum, over centers ``c`` and breakpoints ``rho`` of ``c`` with
``d(x, c) <= rho``, of

    (closed-ball integral of |f| at rho) / (closed-ball mass at 5 rho).

It is a supremum, not a maximum: no single open ball attains it exactly, but
balls with radius slightly above ``rho`` come arbitrarily close.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .dominating import DoublingParams, HypothesisError, is_doubling
from .space import Ball, FiniteMetricMeasureSpace

__all__ = [
    "MaximalProfile",
    "differentiation_check",
    "maximal_function",
    "weak_type_check",
]


@dataclass
class MaximalProfile:
    values: np.ndarray
    R: Optional[float] = None

    def rows(self, space: FiniteMetricMeasureSpace):
        for label, v in zip(space.labels, self.values):
            yield label, repr(float(v))


def maximal_function(space: FiniteMetricMeasureSpace, f, R: Optional[float] = None) -> MaximalProfile:
    """Exact maximal function, optionally restricted to balls of radius at most ``R``."""
    absf = np.abs(np.asarray(f, dtype=float))
    if absf.shape != (space.n,):
        raise ValueError(f"function has {absf.shape} values, space has {space.n} points")
    cap = np.inf if R is None else float(R)
    vals = np.asarray(kernels.maximal_profile(space.dist, space.weights, absf, cap))
    return MaximalProfile(vals, R)


@dataclass
class WeakTypeReport:
    passed: bool
    l1_norm: float
    rows: list = field(default_factory=list)  # (t, lhs, rhs)
    tightest_ratio: float = 0.0
    witness_t: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "l1_norm": self.l1_norm,
            "tightest_ratio": self.tightest_ratio,
            "witness_t": self.witness_t,
            "rows": [{"t": t, "lhs": a, "rhs": b} for t, a, b in self.rows],
        }


def weak_type_check(space: FiniteMetricMeasureSpace, f, t_grid: Sequence[float], profile=None) -> WeakTypeReport:
    """Check ``mu({Mf > t}) <= ||f||_1 / t`` with constant 1 on every grid value."""
    t_grid = [float(t) for t in t_grid]
    if any(not t > 0 for t in t_grid):
        raise ValueError("t_grid must be positive")
    prof = profile if profile is not None else maximal_function(space, f)
    norm1 = float(space.weights @ np.abs(np.asarray(f, dtype=float)))
    rows, ok = [], True
    best, wit = 0.0, None
    for t in t_grid:
        lhs = float(space.weights @ (prof.values > t))
        rhs = norm1 / t
        ok &= lhs <= rhs
        rows.append((t, lhs, rhs))
        ratio = lhs / rhs if rhs > 0 else (math.inf if lhs > 0 else 0.0)
        if ratio > best or wit is None:
            best, wit = ratio, t
    return WeakTypeReport(bool(ok), norm1, rows, best, wit)


@dataclass
class DifferentiationReport:
    passed: bool
    radii: np.ndarray
    averages: np.ndarray
    values: np.ndarray
    note: str = (
        "atomic measure: the decreasing net of doubling balls reaches the singleton, "
        "so the limit is checked as an exact equality"
    )


def differentiation_check(
    space: FiniteMetricMeasureSpace, f, params: DoublingParams, n_exponent: float
) -> DifferentiationReport:
    """Averages over small ``(5, beta)``-doubling balls recover ``f`` at every point.

    For each ``x`` the qualifying ball is ``B(x, rho1/10)`` with ``rho1`` the
    nearest-neighbour distance: it and its 5-dilation are both ``{x}``, so it
    is ``(5, beta)``-doubling and every doubling ball inside it is ``{x}``.
    The comparison allows only the rounding of ``(w f) / w``.
    """
    if params.alpha != 5:
        raise ValueError("differentiation_check uses alpha = 5")
    if not params.beta > 5**n_exponent:
        raise HypothesisError(f"beta={params.beta:g} must exceed 5^n={5**n_exponent:g}")
    f = np.asarray(f, dtype=float)
    radii = np.empty(space.n)
    avgs = np.empty(space.n)
    ok = True
    for x in range(space.n):
        others = space.dist[x][space.dist[x] > 0]
        rho1 = float(others.min()) if others.size else 1.0
        ball = Ball(x, rho1 / 10)
        mask = space.members_mask(x, ball.radius)
        radii[x] = ball.radius
        avgs[x] = float(space.weights[mask] @ f[mask] / space.weights[mask].sum())
        ok &= is_doubling(space, ball, params) and math.isclose(avgs[x], f[x], rel_tol=4e-16, abs_tol=0.0)
    return DifferentiationReport(bool(ok), radii, avgs, f.copy())
