"""Finite metric measure spaces, open balls and the canonical ball family.

A space is a weighted point cloud with an explicit distance matrix.  Every
integral against the measure is a finite sum over atoms, so all quantities
below are computed exactly up to floating point summation.

Balls are ``(center, radius)`` pairs with strict membership
``d(y, center) < radius``.  Two balls with the same point set are still
different balls when their radii differ, because dilations act on the radius.

The canonical family enumerates, per center, one representative for every
distinct point set an open ball around that center can have.  Radii sit at
midpoints between consecutive distinct distances, so no membership test ever
lands on a boundary.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Ball",
    "CanonicalBallFamily",
    "FiniteMetricMeasureSpace",
    "SpaceError",
    "average",
    "ball_measure",
    "ball_members",
    "canonical_balls",
    "canonicalize",
    "dilate",
    "integrate",
    "load_space",
    "restrict",
    "space_from_document",
]

# Relative slack for the triangle check only; Euclidean distances computed in
# floating point violate collinear triangles by an ulp or so.
TRIANGLE_RTOL = 1e-12


class SpaceError(ValueError):
    """Raised when a space document or a space operation is invalid."""


@dataclass(frozen=True)
class Ball:
    """Open ball ``B(center, radius)`` identified by its defining pair."""

    center: int
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise SpaceError(f"ball radius must be positive, got {self.radius!r}")

    def __repr__(self):
        return f"B({self.center}, {self.radius:g})"


def dilate(ball: Ball, factor: float) -> Ball:
    """Concentric dilation ``factor * ball``."""
    if not factor > 0:
        raise SpaceError(f"dilation factor must be positive, got {factor!r}")
    if factor == 1:
        return ball
    return Ball(ball.center, ball.radius * factor)


@dataclass(frozen=True, eq=False)
class FiniteMetricMeasureSpace:
    """Weighted finite point cloud with an explicit metric.

    Parameters
    ----------
    dist : array_like, shape (n, n)
        Symmetric distance matrix with zero diagonal obeying the triangle
        inequality.
    weights : array_like, shape (n,)
        Strictly positive point masses.
    labels : sequence of str, optional
        Point identifiers; defaults to ``p0 .. p{n-1}``.
    name : str, optional
        Free-form name used in reports.
    """

    dist: np.ndarray
    weights: np.ndarray
    labels: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        dist = np.array(self.dist, dtype=float)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        n = weights.shape[0]
        labels = tuple(self.labels) if self.labels else tuple(f"p{i}" for i in range(n))
        object.__setattr__(self, "labels", labels)
        _validate(dist, weights, labels)
        dist.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.weights.shape[0]

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"<FiniteMetricMeasureSpace{tag} n={len(self)} mass={self.total_mass:g}>"

    @property
    def n(self) -> int:
        return len(self)

    @cached_property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    @cached_property
    def min_positive_distance(self) -> float:
        """Smallest nonzero distance; 1.0 for a one-point space."""
        pos = self.dist[self.dist > 0]
        return float(pos.min()) if pos.size else 1.0

    def index(self, point) -> int:
        """Resolve a label or integer index to an index."""
        if isinstance(point, (int, np.integer)):
            if not 0 <= point < self.n:
                raise SpaceError(f"unknown point index {point}")
            return int(point)
        try:
            return self.labels.index(point)
        except ValueError:
            raise SpaceError(f"unknown point {point!r}") from None

    def members_mask(self, center: int, radius: float) -> np.ndarray:
        """Boolean membership mask of the open ball ``B(center, radius)``."""
        return self.dist[center] < radius

    def closed_mask(self, center: int, radius: float) -> np.ndarray:
        return self.dist[center] <= radius

    def mass(self, mask: np.ndarray) -> float:
        return float(self.weights @ mask)

    def open_mass(self, center: int, radius: float) -> float:
        return self.mass(self.members_mask(center, radius))

    def closed_mass(self, center: int, radius: float) -> float:
        return self.mass(self.closed_mask(center, radius))

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "labels": list(self.labels),
            "metric": "matrix",
            "coords": None,
            "dist": self.dist.tolist(),
            "weights": self.weights.tolist(),
        }


def _validate(dist: np.ndarray, weights: np.ndarray, labels: Sequence[str]) -> None:
    n = weights.shape[0]
    if n == 0:
        raise SpaceError("a space needs at least one point")
    if dist.shape != (n, n):
        raise SpaceError(f"distance matrix shape {dist.shape} does not match {n} weights")
    if len(labels) != n or len(set(labels)) != n:
        raise SpaceError("labels must be unique, one per point")
    if not np.all(np.isfinite(dist)) or not np.all(np.isfinite(weights)):
        raise SpaceError("distances and weights must be finite")
    bad = np.flatnonzero(weights <= 0)
    if bad.size:
        raise SpaceError(f"nonpositive weight at {labels[bad[0]]}: {weights[bad[0]]}")
    if np.any(np.diag(dist) != 0):
        raise SpaceError("distance matrix must have a zero diagonal")
    if np.any(dist < 0):
        raise SpaceError("distances must be nonnegative")
    asym = np.argwhere(dist != dist.T)
    if asym.size:
        i, j = asym[0]
        raise SpaceError(f"asymmetric matrix at ({labels[i]},{labels[j]})")
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] == 0):
        i, j = np.argwhere((dist == 0) & off)[0]
        raise SpaceError(f"distinct points at distance zero: ({labels[i]},{labels[j]})")
    # d(i,k) <= d(i,j) + d(j,k), one middle point at a time to bound memory
    for j in range(n):
        via = dist[:, j][:, None] + dist[j, :][None, :]
        viol = dist > via * (1 + TRIANGLE_RTOL)
        if viol.any():
            i, k = np.argwhere(viol)[0]
            raise SpaceError(f"triangle violation ({labels[i]},{labels[j]},{labels[k]})")


def space_from_document(doc: dict) -> FiniteMetricMeasureSpace:
    """Build a space from a parsed space document.

    The document carries ``weights`` plus either ``coords`` (Euclidean metric)
    or a full ``dist`` matrix, selected by ``metric``.
    """
    if "weights" not in doc:
        raise SpaceError("space document needs 'weights'")
    metric = doc.get("metric") or ("euclidean" if doc.get("coords") is not None else "matrix")
    if metric == "euclidean":
        coords = doc.get("coords")
        if coords is None:
            raise SpaceError("metric 'euclidean' requires 'coords'")
        pts = np.asarray(coords, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=-1))
    elif metric == "matrix":
        if doc.get("dist") is None:
            raise SpaceError("metric 'matrix' requires 'dist'")
        dist = np.asarray(doc["dist"], dtype=float)
    else:
        raise SpaceError(f"unknown metric {metric!r}")
    return FiniteMetricMeasureSpace(
        dist, doc["weights"], labels=tuple(doc.get("labels") or ()), name=doc.get("name") or ""
    )


def load_space(source) -> FiniteMetricMeasureSpace:
    """Load a space from a JSON file path, JSON text, or an already parsed dict."""
    if isinstance(source, dict):
        return space_from_document(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        path = Path(source)
        doc = json.loads(path.read_text())
        doc.setdefault("name", path.stem)
        return space_from_document(doc)
    return space_from_document(json.loads(source))


def restrict(space: FiniteMetricMeasureSpace, subset: Iterable) -> FiniteMetricMeasureSpace:
    """Induced metric measure space on ``subset`` (labels or indices)."""
    idx = sorted({space.index(p) for p in subset})
    if not idx:
        raise SpaceError("cannot restrict to an empty subset")
    sel = np.asarray(idx)
    return FiniteMetricMeasureSpace(
        space.dist[np.ix_(sel, sel)],
        space.weights[sel],
        labels=tuple(space.labels[i] for i in idx),
        name=f"{space.name}|{len(idx)}" if space.name else "",
    )


def _center(space: FiniteMetricMeasureSpace, ball: Ball) -> int:
    if not 0 <= ball.center < space.n:
        raise SpaceError(f"unknown center {ball.center}")
    return ball.center


def ball_members(space: FiniteMetricMeasureSpace, ball: Ball) -> frozenset[int]:
    """Indices of points strictly closer than ``ball.radius`` to the center."""
    c = _center(space, ball)
    return frozenset(np.flatnonzero(space.members_mask(c, ball.radius)).tolist())


def ball_measure(space: FiniteMetricMeasureSpace, ball: Ball) -> float:
    c = _center(space, ball)
    return space.open_mass(c, ball.radius)


def integrate(space: FiniteMetricMeasureSpace, f, ball: Ball) -> float:
    """Integral of ``f`` over ``ball``: sum of ``w_y f(y)`` over members."""
    mask = space.members_mask(_center(space, ball), ball.radius)
    return float((space.weights * np.asarray(f, dtype=float)) @ mask)


def average(space: FiniteMetricMeasureSpace, f, ball: Ball) -> float:
    return integrate(space, f, ball) / ball_measure(space, ball)


@dataclass(frozen=True, eq=False)
class CanonicalBallFamily:
    """Per-center canonical balls of a finite space.

    Attributes
    ----------
    breakpoints : list of ndarray
        ``breakpoints[c]`` are the sorted distinct distances from ``c``
        (starting with 0).
    radii : list of ndarray
        ``radii[c][k]`` is the canonical radius whose ball is the closed ball
        of radius ``breakpoints[c][k]``.
    balls : list of Ball
        All canonical balls, grouped by center in increasing radius.
    """

    space: FiniteMetricMeasureSpace
    breakpoints: list
    radii: list
    balls: list = field(repr=False)
    offsets: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.balls)

    def index_of(self, center: int, k: int) -> int:
        return int(self.offsets[center]) + k

    @cached_property
    def masks(self) -> np.ndarray:
        """Membership matrix, shape ``(len(balls), n)``."""
        sp = self.space
        return np.stack([sp.members_mask(b.center, b.radius) for b in self.balls])

    @cached_property
    def measures(self) -> np.ndarray:
        return self.masks @ self.space.weights

    def lookup(self, ball: Ball) -> int:
        """Index of the canonical ball with the same center and point set."""
        c = ball.center
        bp = self.breakpoints[c]
        # number of breakpoints strictly below the radius, minus one
        k = int(np.searchsorted(bp, ball.radius, side="left")) - 1
        return self.index_of(c, max(k, 0))

    def to_rows(self):
        """Rows ``(center, radius, members, measure)`` for CSV export."""
        sp = self.space
        for b, mask, m in zip(self.balls, self.masks, self.measures):
            members = " ".join(sp.labels[i] for i in np.flatnonzero(mask))
            yield sp.labels[b.center], repr(float(b.radius)), members, repr(float(m))


def canonical_balls(space: FiniteMetricMeasureSpace) -> CanonicalBallFamily:
    """Enumerate one canonical ball per (center, realisable point set)."""
    breakpoints, radii, balls, offsets = [], [], [], []
    for c in range(space.n):
        bp = np.unique(space.dist[c])
        top = max(float(bp[-1]), 1.0) if bp.size == 1 else float(bp[-1])
        rad = np.concatenate([(bp[:-1] + bp[1:]) / 2, [2 * top]])
        breakpoints.append(bp)
        radii.append(rad)
        offsets.append(len(balls))
        balls.extend(Ball(c, float(r)) for r in rad)
    return CanonicalBallFamily(space, breakpoints, radii, balls, np.asarray(offsets))


def canonicalize(space: FiniteMetricMeasureSpace, family: CanonicalBallFamily, ball: Ball) -> Ball:
    """Canonical representative of ``ball`` (same center, same point set)."""
    _center(space, ball)
    return family.balls[family.lookup(ball)]
