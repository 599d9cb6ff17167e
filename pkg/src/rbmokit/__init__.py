"""Upper doubling metric measure spaces, RBMO norms and John-Nirenberg checks on finite point clouds."""
from .space import (
    Ball,
    CanonicalBallFamily,
    FiniteMetricMeasureSpace,
    SpaceError,
    average,
    ball_measure,
    ball_members,
    canonical_balls,
    canonicalize,
    dilate,
    integrate,
    load_space,
    restrict,
)
from .generate import generate_space

__version__ = "0.1.0"
