"""Deterministic test-space generators.

``segment_plus_cluster`` is the standard non-doubling example: a unit-spaced
segment plus one far, heavy atom.  Measure doubling fails at the gap scale,
while a power law ``C r^d`` still dominates ball masses above the atomic
scale floor.
"""
from __future__ import annotations

import itertools
import re

import numpy as np

from .space import FiniteMetricMeasureSpace, SpaceError, space_from_document

__all__ = ["GENERATORS", "generate_space", "parse_generator"]


def uniform_grid(n: int, dim: int = 1) -> FiniteMetricMeasureSpace:
    """``n**dim`` unit-weight points on the integer lattice ``{0..n-1}^dim``."""
    n, dim = int(n), int(dim)
    if n < 1 or dim < 1:
        raise SpaceError("uniform_grid needs n >= 1 and dim >= 1")
    coords = list(itertools.product(range(n), repeat=dim))
    return space_from_document(
        {"coords": coords, "weights": [1.0] * len(coords), "metric": "euclidean",
         "name": f"uniform_grid({n},{dim})"}
    )


def cantor_dust(level: int) -> FiniteMetricMeasureSpace:
    """Left endpoints of the level-``level`` triadic Cantor intervals, mass ``2**-level`` each."""
    level = int(level)
    if level < 0:
        raise SpaceError("cantor_dust needs level >= 0")
    left = [0.0]
    for k in range(1, level + 1):
        step = 2.0 / 3.0**k
        left = [x for a in left for x in (a, a + step)]
    return space_from_document(
        {"coords": [[x] for x in left], "weights": [2.0**-level] * len(left),
         "metric": "euclidean", "name": f"cantor_dust({level})"}
    )


def segment_plus_cluster(n: int, gap: float, heavy: float = 1000.0) -> FiniteMetricMeasureSpace:
    """``n`` unit points at ``0..n-1`` plus one atom of mass ``heavy`` at ``n-1+gap``."""
    n = int(n)
    if n < 1 or not gap > 0:
        raise SpaceError("segment_plus_cluster needs n >= 1 and gap > 0")
    coords = [[float(i)] for i in range(n)] + [[n - 1 + float(gap)]]
    return space_from_document(
        {"coords": coords, "weights": [1.0] * n + [float(heavy)], "metric": "euclidean",
         "name": f"segment_plus_cluster({n},{gap:g})"}
    )


def random_euclidean(n: int, seed: int = 0, dim: int = 2) -> FiniteMetricMeasureSpace:
    """``n`` uniform points in the unit cube with weights drawn from ``[0.5, 2)``."""
    rng = np.random.default_rng(int(seed))
    pts = rng.random((int(n), int(dim)))
    w = rng.uniform(0.5, 2.0, int(n))
    return space_from_document(
        {"coords": pts.tolist(), "weights": w.tolist(), "metric": "euclidean",
         "name": f"random_euclidean({int(n)},{int(seed)})"}
    )


GENERATORS = {
    "uniform_grid": uniform_grid,
    "cantor_dust": cantor_dust,
    "segment_plus_cluster": segment_plus_cluster,
    "random_euclidean": random_euclidean,
}

_CALL = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$")


def parse_generator(text: str):
    """Split ``"name(a, b)"`` into ``("name", [a, b])`` with numeric args."""
    m = _CALL.match(text)
    if not m:
        raise SpaceError(f"cannot parse generator spec {text!r}")
    name, argstr = m.group(1), m.group(2) or ""
    args = []
    for tok in filter(None, (t.strip() for t in argstr.split(","))):
        try:
            args.append(int(tok))
        except ValueError:
            args.append(float(tok))
    return name, args


def generate_space(spec) -> FiniteMetricMeasureSpace:
    """Build a generated space from ``"name(args)"`` or ``(name, args)``."""
    name, args = parse_generator(spec) if isinstance(spec, str) else (spec[0], list(spec[1]))
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise SpaceError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None
    return gen(*args)
