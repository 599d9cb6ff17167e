"""Stopping-ball decomposition and the exponential distribution tail of RBMO functions.

Starting from a ball ``B0`` and a threshold ``L``, every point whose residual
``|f(x) - f_B0|`` exceeds ``2L`` picks the largest ``(alpha, beta)``-doubling
ball ``B(x, alpha**-i r0)`` inside ``sqrt(rho) B0`` whose constant differs
from ``f_B0`` by more than ``L``.  A disjoint subfamily is selected greedily
and the 5-dilations become the balls of the next level.  When the selected
balls carry at most half the ``rho``-dilated mass at every node, the level-n
mass decays like ``2**-n`` and so does the tail at ``2nL``.

Constants of non-canonical balls (dilations, ``sqrt(rho) B0``, ``alpha``
powers) are read through the canonical representative of each ball.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .covering import vitali_select
from .dominating import DoublingParams, is_doubling
from .rbmo import AdmissibleFamily
from .space import Ball, FiniteMetricMeasureSpace

__all__ = [
    "JNNode",
    "JNReport",
    "L_search",
    "jn_decompose",
    "lp_oscillation",
    "lp_oscillation_bound",
    "tail_distribution",
    "verify_jn",
]

DEPTH_CAP = 60
L_GRID_CAP = 20


def tail_distribution(space: FiniteMetricMeasureSpace, f, family: AdmissibleFamily, B0: Ball, t: float) -> float:
    """``mu({x in B0 : |f(x) - f_B0| > t})`` with ``f_B0`` from the family."""
    f = np.asarray(f, dtype=float)
    mask = space.members_mask(B0.center, B0.radius)
    resid = np.abs(f - family.value(B0))
    return float(space.weights[mask & (resid > t)].sum())


def _rho_mass(space, ball: Ball, rho: float) -> float:
    return space.open_mass(ball.center, rho * ball.radius)


@dataclass
class JNNode:
    """One application of the stopping rule to a ball."""

    ball: Ball
    depth: int
    f_ball: float
    rho_mass: float
    stopping: list = field(default_factory=list)  # selected B_i
    children: list = field(default_factory=list)  # 5 B_i as JNNode
    failures: list = field(default_factory=list)  # points with no admissible stopping ball
    child_mass: float = 0.0  # sum of mu(alpha B_i)
    halving: bool = True
    containment: bool = True
    snaps: list = field(default_factory=list)  # (raw ball, canonical ball)
    stop_gap: list = field(default_factory=list)  # |f_Bi - f_B| / L per stopping ball
    stop_average: list = field(default_factory=list)  # average residual / L per stopping ball

    @property
    def ok(self) -> bool:
        return not self.failures and self.halving and self.containment

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


def _stopping_ball(space, family, f_node, x, r0, params, L, inner_mask, snaps):
    """Largest doubling ``B(x, alpha**-i r0)`` inside ``inner_mask`` whose constant is ``L``-far."""
    fam = family.problem.family
    i = 0
    while True:
        r = r0 * params.alpha ** (-i)
        ball = Ball(x, r)
        mask = space.members_mask(x, r)
        if not np.any(mask & ~inner_mask) and is_doubling(space, ball, params):
            canon = fam.balls[fam.lookup(ball)]
            if abs(family.value(ball) - f_node) > L:
                if canon != ball:
                    snaps.append((ball, canon))
                return ball
        # once B and alpha B are both {x}, every smaller candidate repeats the test
        if space.open_mass(x, params.alpha * r) == space.weights[x]:
            return None
        i += 1


def jn_decompose(
    space: FiniteMetricMeasureSpace,
    lam,
    f,
    family: AdmissibleFamily,
    B0: Ball,
    rho: float,
    params: DoublingParams,
    L: float,
    *,
    depth: int = 0,
    recurse: bool = True,
) -> JNNode:
    """Stopping balls for ``B0`` at threshold ``L``, recursively on the 5-dilations."""
    if not math.isclose(params.alpha, 5 * rho):
        raise ValueError(f"alpha must be 5*rho = {5 * rho:g}, got {params.alpha:g}")
    if not L > 0:
        raise ValueError("L must be positive")
    f = np.asarray(f, dtype=float)
    w = space.weights
    f0 = family.value(B0)
    node = JNNode(B0, depth, f0, _rho_mass(space, B0, rho))
    mask0 = space.members_mask(B0.center, B0.radius)
    resid = np.abs(f - f0)
    high = np.flatnonzero(mask0 & (resid > 2 * L))
    if high.size == 0:
        return node
    inner = space.members_mask(B0.center, math.sqrt(rho) * B0.radius)
    found = []
    for x in high:
        b = _stopping_ball(space, family, f0, int(x), B0.radius, params, L, inner, node.snaps)
        if b is None:
            node.failures.append(int(x))
        else:
            found.append(b)
    if node.failures:
        return node
    chosen = vitali_select(space, found)
    node.stopping = chosen
    node.child_mass = float(sum(space.open_mass(b.center, params.alpha * b.radius) for b in chosen))
    node.halving = node.child_mass <= 0.5 * node.rho_mass
    for b in chosen:
        fb = family.value(b)
        node.stop_gap.append(abs(fb - f0) / L)
        m = space.members_mask(b.center, b.radius)
        node.stop_average.append(float(w[m] @ resid[m] / w[m].sum()) / L)
    # containment at n = 2: high points are caught by a child where f differs from its constant
    covered = np.zeros(space.n, dtype=bool)
    for b in chosen:
        big = Ball(b.center, 5 * b.radius)
        covered |= space.members_mask(big.center, big.radius) & (np.abs(f - family.value(big)) > 0)
    node.containment = bool(np.all(covered[high]))
    if not (recurse and node.ok):
        return node
    if depth + 1 >= DEPTH_CAP:
        node.failures.append(-1)
        return node
    for b in chosen:
        node.children.append(
            jn_decompose(space, lam, f, family, Ball(b.center, 5 * b.radius), rho, params, L, depth=depth + 1)
        )
    return node


def _tree_ok(root: JNNode) -> bool:
    return all(n.ok for n in root.walk())


def _level_masses(root: JNNode) -> list:
    """``sum mu(rho B)`` over the balls of each depth, depth 0 being ``B0``."""
    out: dict = {}
    for n in root.walk():
        out[n.depth] = out.get(n.depth, 0.0) + n.rho_mass
    return [out[k] for k in sorted(out)]


def _tail_bounds_ok(space, f, family, B0, L, root_mass) -> bool:
    n = 1
    while True:
        tail = tail_distribution(space, f, family, B0, 2 * n * L)
        if tail > root_mass * 2.0**-n:
            return False
        if tail == 0:
            return True
        n += 1


def L_search(space, lam, f, family: AdmissibleFamily, B0: Ball, rho: float, params: DoublingParams):
    """Smallest ``L`` in ``A, 2A, 4A, ...`` for which the full decomposition succeeds.

    Returns ``(L, root, trace)`` with ``trace`` a list of ``(L, ok)``; ``L`` is
    ``None`` when the grid cap ``2**20 A`` is reached without success.
    """
    A = family.A
    if A == 0:
        return 0.0, JNNode(B0, 0, family.value(B0), _rho_mass(space, B0, rho)), [(0.0, True)]
    trace = []
    root_mass = _rho_mass(space, B0, rho)
    for k in range(L_GRID_CAP + 1):
        L = A * 2.0**k
        root = jn_decompose(space, lam, f, family, B0, rho, params, L)
        levels = _level_masses(root)
        ok = (
            _tree_ok(root)
            and all(m <= root_mass * 2.0**-i for i, m in enumerate(levels))
            and _tail_bounds_ok(space, f, family, B0, L, root_mass)
        )
        trace.append((L, ok))
        if ok:
            return L, root, trace
    return None, root, trace


@dataclass
class JNReport:
    B0: Ball
    rho: float
    A: float
    L: Optional[float]
    levels: list  # per depth: {"balls", "mass", "bound", "halving"}
    tail: list  # (t, tail, envelope)
    c_fit: float
    c_required: float
    passed: bool
    trace: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    stop_gap_max: float = 0.0
    stop_gap_min: float = math.inf
    stop_average_min: float = math.inf
    snaps: list = field(default_factory=list)

    @property
    def L_over_A(self) -> Optional[float]:
        if self.L is None or self.A == 0:
            return None
        return self.L / self.A

    def to_json(self, space: FiniteMetricMeasureSpace) -> dict:
        lab = space.labels

        def b(ball):
            return {"center": lab[ball.center], "radius": ball.radius}

        def num(x):
            return "inf" if x == math.inf else x

        return {
            "B0": b(self.B0),
            "rho": self.rho,
            "A": self.A,
            "L": self.L,
            "L_over_A": self.L_over_A,
            "c_fit": num(self.c_fit),
            "c_required": num(self.c_required),
            "passed": self.passed,
            "levels": [
                {**lv, "balls": [b(x) for x in lv["balls"]]} for lv in self.levels
            ],
            "tail": [{"t": t, "tail": v, "envelope": e} for t, v, e in self.tail],
            "L_trace": [{"L": L, "ok": ok} for L, ok in self.trace],
            "failures": [lab[x] if x >= 0 else "depth_cap" for x in self.failures],
            "stopping_gap_over_L": {"min": num(self.stop_gap_min), "max": self.stop_gap_max},
            "stopping_average_over_L_min": num(self.stop_average_min),
            "snaps": [{"raw": b(r), "canonical": b(c)} for r, c in self.snaps],
        }

    def tail_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", "tail", "envelope"])
        for t, v, e in self.tail:
            wr.writerow([repr(t), repr(v), repr(e)])
        return buf.getvalue()


def verify_jn(
    space: FiniteMetricMeasureSpace,
    lam,
    f,
    family: AdmissibleFamily,
    B0: Ball,
    rho: float,
    params: DoublingParams,
    t_grid: Sequence[float],
) -> JNReport:
    """Decomposition at the searched ``L``, level masses, tail table and fitted rate."""
    if not math.isclose(family.problem.rho, rho):
        raise ValueError(f"family solved with rho={family.problem.rho:g}, expected {rho:g}")
    f = np.asarray(f, dtype=float)
    A = family.A
    root_mass = _rho_mass(space, B0, rho)
    L, root, trace = L_search(space, lam, f, family, B0, rho, params)

    levels = []
    by_depth: dict = {}
    for nd in root.walk():
        by_depth.setdefault(nd.depth, []).append(nd)
    for d in sorted(by_depth):
        nodes = by_depth[d]
        mass = sum(n.rho_mass for n in nodes)
        bound = root_mass * 2.0**-d
        levels.append({
            "depth": d,
            "balls": [n.ball for n in nodes],
            "mass": mass,
            "bound": bound,
            "halving": bool(mass <= bound),
        })

    ts = sorted({float(t) for t in t_grid} | ({2 * n * L for n in range(1, 2 * len(levels) + 3)} if L else set()))
    if A == 0:
        tail = [(t, tail_distribution(space, f, family, B0, t), 0.0) for t in ts]
        c_fit = math.inf
        c_req = 0.0
        ok = all(v == 0 for t, v, _ in tail if t > 0)
    else:
        tail = []
        c_fit = math.inf
        for t in ts:
            v = tail_distribution(space, f, family, B0, t)
            tail.append([t, v, 0.0])
            if t > 0 and v > 0:
                c_fit = min(c_fit, A / t * math.log(2 * root_mass / v))
        c_req = A * math.log(2) / (2 * L) if L else math.inf
        for row in tail:
            row[2] = 2 * root_mass * math.exp(-c_req * row[0] / A) if L else math.nan
        tail = [tuple(r) for r in tail]
        ok = L is not None and c_fit >= c_req and all(lv["halving"] for lv in levels)
    gaps = [g for n in root.walk() for g in n.stop_gap]
    avgs = [a for n in root.walk() for a in n.stop_average]
    return JNReport(
        B0=B0,
        rho=rho,
        A=A,
        L=L,
        levels=levels,
        tail=tail,
        c_fit=c_fit,
        c_required=c_req,
        passed=bool(ok),
        trace=trace,
        failures=[x for n in root.walk() for x in n.failures],
        stop_gap_max=max(gaps, default=0.0),
        stop_gap_min=min(gaps, default=math.inf),
        stop_average_min=min(avgs, default=math.inf),
        snaps=[s for n in root.walk() for s in n.snaps],
    )


def lp_oscillation(space: FiniteMetricMeasureSpace, f, family: AdmissibleFamily, B0: Ball, p: float, rho: float) -> float:
    """``((1/mu(rho B0)) int_B0 |f - f_B0|**p)**(1/p)``."""
    if not p >= 1:
        raise ValueError("p must be at least 1")
    f = np.asarray(f, dtype=float)
    mask = space.members_mask(B0.center, B0.radius)
    resid = np.abs(f[mask] - family.value(B0))
    integral = float(space.weights[mask] @ resid**p)
    return (integral / _rho_mass(space, B0, rho)) ** (1 / p)


def lp_oscillation_bound(p: float, L: float, A: float) -> float:
    """``C_p A`` with ``C_p = 2 (Gamma(p+1) (2L/(A ln 2))**p)**(1/p)``.

    Layer-cake integration of the tail envelope ``2 mu(rho B0) 2**(-t/(2L))``.
    """
    if A == 0:
        return 0.0
    Cp = 2 * (math.gamma(p + 1) * (2 * L / (A * math.log(2))) ** p) ** (1 / p)
    return Cp * A
