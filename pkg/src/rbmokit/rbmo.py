"""The RBMO norm of a function on a finite space as a linear program.

Variables are the norm bound ``A``, one constant ``f_B`` per ball of the
problem, and auxiliary residuals ``t_{B,y} >= |f(y) - f_B|`` for every member
``y`` of ``B``.  Minimise ``A`` subject to

* oscillation:  ``sum_y w_y t_{B,y} <= A mu(rho B)`` for every ball,
* regularity:   ``|f_B - f_B1| <= A K(B, B1)`` for every inclusion pair.

The optimum is found at a vertex (dual simplex); a second stage picks the
least Euclidean norm ``f_B`` vector on the optimal face.  The reported ``A``
is always recomputed from the returned constants, so the returned family is
admissible by construction.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .covering import doubling_diagnostics
from .dominating import (
    BallMeasure,
    DoublingParams,
    HypothesisError,
    doubling_ancestor,
    is_doubling,
    kernel,
)
from .space import Ball, CanonicalBallFamily, FiniteMetricMeasureSpace, canonical_balls

log = logging.getLogger(__name__)

__all__ = [
    "AdmissibleFamily",
    "RBMOProblem",
    "bmo_norm",
    "build_problem",
    "check_section5",
    "compare_bmo",
    "compare_rho",
    "implied_norm",
    "one_ball_lower_bound",
    "refinement_stability",
    "constraint_triplets",
    "kernel_matrix",
    "solve_rbmo",
]

SCALE_CAP = 20
SOLVER_RTOL = 1e-9


@dataclass(eq=False)
class RBMOProblem:
    """Constraint data of one RBMO norm computation.

    ``balls`` starts with the canonical family; ``extra_radii > 0`` appends
    further radii per member-set interval (refinement).  ``pairs`` holds the
    proper inclusion pairs ``(i, j)`` with ``members(B_i) <= members(B_j)`` and
    ``r_i <= r_j``; ``K`` their kernel values.
    """

    space: FiniteMetricMeasureSpace
    lam: object
    f: np.ndarray
    rho: float
    family: CanonicalBallFamily
    balls: list
    masks: np.ndarray
    rho_measures: np.ndarray
    pairs: np.ndarray
    K: np.ndarray
    self_pairs: int

    @property
    def n_balls(self) -> int:
        return len(self.balls)

    @property
    def pair_count(self) -> int:
        return int(self.pairs.shape[0])

    def ball_index(self, ball: Ball) -> int:
        """Index of the canonical representative of ``ball``."""
        return self.family.lookup(ball)


def _refined_radii(family: CanonicalBallFamily, c: int, extra: int) -> list:
    bp = family.breakpoints[c]
    out = []
    hi = np.append(bp[1:], 4 * max(float(bp[-1]), 1.0))
    for lo, up in zip(bp, hi):
        for i in range(1, extra + 1):
            # avoid the midpoint, which the canonical family already uses
            frac = i / (extra + 1) * 0.5 if i <= extra // 2 + extra % 2 else 0.5 + (i - extra // 2 - extra % 2) / (extra + 1) * 0.5
            r = lo + (up - lo) * frac
            if r > lo:
                out.append(float(r))
    return out


def kernel_matrix(space: FiniteMetricMeasureSpace, lam, balls: Sequence[Ball], masks: np.ndarray) -> np.ndarray:
    """``K[i, j] = 1 + sum over 2B_j minus B_i of w_y / lam(c_i, d(y, c_i))`` for all ball pairs."""
    n = space.n
    g = np.zeros((n, n))
    for c in range(n):
        d = space.dist[c]
        pos = d > 0
        if pos.any():
            g[c, pos] = space.weights[pos] / lam.evaluate_many(c, d[pos])
    centers = np.array([b.center for b in balls])
    radii = np.array([b.radius for b in balls])
    G = g[centers] * ~masks
    double = space.dist[centers] < 2 * radii[:, None]
    return 1.0 + G @ double.T.astype(float)


def build_problem(
    space: FiniteMetricMeasureSpace,
    lam,
    f,
    rho: float,
    *,
    extra_radii: int = 0,
    force: bool = False,
) -> RBMOProblem:
    if not rho > 1:
        raise ValueError(f"rho must exceed 1, got {rho!r}")
    if space.n > SCALE_CAP and not force:
        raise ValueError(f"{space.n} points exceeds the scale cap of {SCALE_CAP}; pass force=True")
    f = np.asarray(f, dtype=float)
    if f.shape != (space.n,) or not np.all(np.isfinite(f)):
        raise ValueError("function must have one finite value per point")
    fam = canonical_balls(space)
    balls = list(fam.balls)
    if extra_radii:
        for c in range(space.n):
            balls.extend(Ball(c, r) for r in _refined_radii(fam, c, extra_radii))
    centers = np.array([b.center for b in balls])
    radii = np.array([b.radius for b in balls])
    masks = space.dist[centers] < radii[:, None]
    rho_measures = (space.dist[centers] < rho * radii[:, None]) @ space.weights
    mi = masks.astype(np.int64)
    outside = mi @ (1 - mi).T  # members of B_i outside B_j
    incl = (outside == 0) & (radii[:, None] <= radii[None, :])
    self_pairs = int(np.trace(incl))
    np.fill_diagonal(incl, False)
    pairs = np.argwhere(incl)
    K = kernel_matrix(space, lam, balls, masks)[pairs[:, 0], pairs[:, 1]] if pairs.size else np.zeros(0)
    return RBMOProblem(space, lam, f, float(rho), fam, balls, masks, rho_measures,
                       pairs.reshape(-1, 2), K, self_pairs)


@dataclass(eq=False)
class AdmissibleFamily:
    """Norm bound ``A`` and one constant per problem ball."""

    A: float
    values: np.ndarray
    problem: RBMOProblem = field(repr=False)
    lp_A: float = 0.0
    tie_break: str = "vertex"

    def value(self, ball: Ball) -> float:
        """``f_B`` of an arbitrary ball through its canonical representative."""
        return float(self.values[self.problem.ball_index(ball)])

    def slacks(self):
        """``(oscillation_slack, regularity_slack)`` arrays; nonnegative when admissible."""
        return _slacks(self.problem, self.values, self.A)

    def min_slack(self) -> float:
        osc, reg = self.slacks()
        return float(min(osc.min(initial=np.inf), reg.min(initial=np.inf)))

    def to_json(self) -> dict:
        pb = self.problem
        sp_ = pb.space
        return {
            "A": self.A,
            "lp_A": self.lp_A,
            "rho": pb.rho,
            "tie_break": self.tie_break,
            "pair_count": pb.pair_count,
            "balls": [
                {"center": sp_.labels[b.center], "radius": b.radius, "f_B": float(v)}
                for b, v in zip(pb.balls, self.values)
            ],
        }


def _oscillations(problem: RBMOProblem, values: np.ndarray) -> np.ndarray:
    resid = np.abs(problem.f[None, :] - values[:, None]) * problem.masks
    return resid @ problem.space.weights


def _slacks(problem, values, A):
    osc = A * problem.rho_measures - _oscillations(problem, values)
    if problem.pair_count:
        i, j = problem.pairs.T
        reg = A * problem.K - np.abs(values[i] - values[j])
    else:
        reg = np.zeros(0)
    return osc, reg


def implied_norm(problem: RBMOProblem, values: np.ndarray) -> float:
    """Least ``A`` for which the given constants are admissible."""
    values = np.asarray(values, dtype=float)
    a = float((_oscillations(problem, values) / problem.rho_measures).max())
    if problem.pair_count:
        i, j = problem.pairs.T
        a = max(a, float((np.abs(values[i] - values[j]) / problem.K).max()))
    return max(a, 0.0)


def _lp_matrices(problem: RBMOProblem):
    m = problem.n_balls
    w = problem.space.weights
    ball_idx, member_idx = np.nonzero(problem.masks)
    T = ball_idx.shape[0]
    nv = 1 + m + T
    t_col = 1 + m + np.arange(T)
    rows, cols, vals, rhs = [], [], [], []
    r = 0
    # f(y) - f_B <= t  and  f_B - f(y) <= t
    fy = problem.f[member_idx]
    rows += [np.arange(T), np.arange(T)]
    cols += [1 + ball_idx, t_col]
    vals += [-np.ones(T), -np.ones(T)]
    rhs.append(-fy)
    rows += [T + np.arange(T), T + np.arange(T)]
    cols += [1 + ball_idx, t_col]
    vals += [np.ones(T), -np.ones(T)]
    rhs.append(fy)
    r = 2 * T
    # sum_y w_y t_{B,y} - mu(rho B) A <= 0
    rows += [r + ball_idx, r + np.arange(m)]
    cols += [t_col, np.zeros(m, dtype=int)]
    vals += [w[member_idx], -problem.rho_measures]
    rhs.append(np.zeros(m))
    r += m
    P = problem.pair_count
    if P:
        i, j = problem.pairs.T
        for sgn in (1.0, -1.0):
            rr = r + np.arange(P)
            rows += [rr, rr, rr]
            cols += [1 + i, 1 + j, np.zeros(P, dtype=int)]
            vals += [sgn * np.ones(P), -sgn * np.ones(P), -problem.K]
            rhs.append(np.zeros(P))
            r += P
    A_ub = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(r, nv)
    )
    return A_ub, np.concatenate(rhs), T


def constraint_triplets(problem: RBMOProblem):
    """Rows ``(row, col, value)`` of the inequality matrix plus the right-hand side.

    Column 0 is ``A``, columns ``1..m`` the ball constants, the rest the
    residual variables.
    """
    A_ub, b_ub, _ = _lp_matrices(problem)
    coo = A_ub.tocoo()
    return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())), b_ub


def _least_norm(problem: RBMOProblem, A_target: float, T: int) -> Optional[np.ndarray]:
    try:
        import cvxpy as cp
    except ImportError:  # pragma: no cover - optional stage
        return None
    m = problem.n_balls
    ball_idx, member_idx = np.nonzero(problem.masks)
    v = cp.Variable(m)
    t = cp.Variable(T, nonneg=True)
    fy = problem.f[member_idx]
    S = sp.csr_matrix((problem.space.weights[member_idx], (ball_idx, np.arange(T))), shape=(m, T))
    cons = [t >= fy - v[ball_idx], t >= v[ball_idx] - fy, S @ t <= A_target * problem.rho_measures]
    if problem.pair_count:
        i, j = problem.pairs.T
        cons.append(cp.abs(v[i] - v[j]) <= A_target * problem.K)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(v)), cons)
    try:
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    except Exception as exc:  # solver failure falls back to the vertex
        log.debug("least-norm stage failed: %s", exc)
        return None
    if v.value is None:
        return None
    return np.asarray(v.value, dtype=float)


def solve_rbmo(problem: RBMOProblem, *, least_norm: bool = True, candidates: Sequence[np.ndarray] = ()) -> AdmissibleFamily:
    """Minimal admissible ``A`` with its constants.

    ``candidates`` are extra constant vectors (e.g. a solution at another
    ``rho``); one of them is returned instead when it certifies a smaller
    ``A`` than the solver output.
    """
    f = problem.f
    if np.ptp(f) == 0:
        return AdmissibleFamily(0.0, np.full(problem.n_balls, f[0]), problem, 0.0, "constant")
    A_ub, b_ub, T = _lp_matrices(problem)
    m = problem.n_balls
    c = np.zeros(A_ub.shape[1])
    c[0] = 1.0
    lo, hi = float(f.min()), float(f.max())
    bounds = [(0, None)] + [(lo, hi)] * m + [(0, None)] * T
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"LP solve failed: {res.message}")
    lp_A = float(res.x[0])
    vertex = np.clip(res.x[1:1 + m], lo, hi)
    best_vals, best_A, how = vertex, implied_norm(problem, vertex), "vertex"
    if least_norm:
        ln = _least_norm(problem, lp_A, T)
        if ln is not None:
            ln = np.clip(ln, lo, hi)
            ln_A = implied_norm(problem, ln)
            if ln_A <= max(lp_A, best_A) * (1 + SOLVER_RTOL) + 1e-15:
                best_vals, best_A, how = ln, ln_A, "least_norm"
                # interior-point noise: snap near-zero constants when it costs nothing
                tiny = np.abs(ln) <= 1e-11 * max(abs(lo), abs(hi))
                if tiny.any():
                    snapped = np.where(tiny, 0.0, ln)
                    s_A = implied_norm(problem, snapped)
                    if s_A <= best_A * (1 + 1e-12):
                        best_vals, best_A = snapped, s_A
    for cand in candidates:
        cand = np.asarray(cand, dtype=float)
        a = implied_norm(problem, cand)
        if a < best_A:
            best_vals, best_A, how = cand, a, "candidate"
    return AdmissibleFamily(best_A, best_vals, problem, lp_A, how)


def one_ball_lower_bound(problem: RBMOProblem) -> float:
    """``max_B min_c int_B |f - c| / mu(rho B)``, attained at a weighted median."""
    best = 0.0
    w, f = problem.space.weights, problem.f
    for mask, mr in zip(problem.masks, problem.rho_measures):
        fy, wy = f[mask], w[mask]
        order = np.argsort(fy)
        cw = np.cumsum(wy[order])
        med = fy[order][np.searchsorted(cw, cw[-1] / 2)]
        best = max(best, float(wy @ np.abs(fy - med)) / mr)
    return best


def bmo_norm(space: FiniteMetricMeasureSpace, f) -> float:
    """Classical BMO norm ``max_B (1/mu(B)) int_B |f - <f>_B|`` over canonical balls."""
    f = np.asarray(f, dtype=float)
    fam = canonical_balls(space)
    masks, mu = fam.masks, fam.measures
    avg = (masks @ (space.weights * f)) / mu
    osc = (np.abs(f[None, :] - avg[:, None]) * masks) @ space.weights / mu
    return float(osc.max())


def refinement_stability(space, lam, f, rho: float, levels: Sequence[int] = (0, 1, 2), force: bool = False) -> dict:
    """Norms with extra radii per member-set interval; the canonical value is level 0."""
    norms = {int(k): solve_rbmo(build_problem(space, lam, f, rho, extra_radii=k, force=force),
                                least_norm=False).A for k in levels}
    base = norms[min(norms)]
    spread = max(norms.values()) - min(norms.values())
    return {"norms": norms, "relative_spread": spread / base if base > 0 else 0.0}


def compare_rho(space, lam, f, rho: float, sigma: float, N_bound: Optional[int] = None,
                n_exponent: Optional[float] = None) -> dict:
    """Norms at two parameters ``rho > sigma > 1`` and the comparison constant.

    ``A_rho <= A_sigma`` since the sigma constants are rho-admissible.  The
    reverse constant covers a ball by ``N delta**-n`` balls of radius
    ``delta r`` with ``delta = (sigma - 1)/rho`` and bounds the constant drift
    by the logarithmic kernel bound::

        C = (1 + 2 + C_l log2(4 sigma / delta) + C_l log2(4 sigma)) * N delta**-n
    """
    if not rho > sigma > 1:
        raise ValueError(f"need rho > sigma > 1, got rho={rho}, sigma={sigma}")
    if N_bound is None or n_exponent is None:
        diag = doubling_diagnostics(space)
        N_bound, n_exponent = diag.N_bound, diag.n_exponent
    fam_s = solve_rbmo(build_problem(space, lam, f, sigma))
    fam_r = solve_rbmo(build_problem(space, lam, f, rho), candidates=[fam_s.values])
    delta = (sigma - 1) / rho
    Cl = lam.C_lambda
    drift = 2 + Cl * math.log2(4 * sigma / delta) + Cl * math.log2(4 * sigma)
    cover = N_bound * delta ** (-n_exponent)
    C = max(1.0, (1 + drift) * cover)
    ratio = fam_s.A / fam_r.A if fam_r.A > 0 else (0.0 if fam_s.A == 0 else math.inf)
    return {
        "rho": rho,
        "sigma": sigma,
        "A_rho": fam_r.A,
        "A_sigma": fam_s.A,
        "ratio": ratio,
        "C": C,
        "monotone": fam_r.A <= fam_s.A,
        "bounded": fam_s.A <= C * fam_r.A,
        "passed": fam_r.A <= fam_s.A and fam_s.A <= C * fam_r.A,
    }


def doubling_chain_constants(C_mu: float, rho: float) -> dict:
    """Constants of the RBMO/BMO comparison for a doubling measure.

    ``c1``: ``||f||_BMO <= c1 A`` because averages are within twice the
    oscillation of any constant and ``mu(rho B) <= C_mu**ceil(log2 rho) mu(B)``.
    ``C_L``, ``C_R``: the two sides of the logarithmic comparison of averages
    on nested balls, from the chain of balls ``B^i`` whose masses more than
    double, ``2**i0 mu(B) <= mu(B^i0) <= (2 C_mu)**i0 mu(B)``::

        |<f>_B - <f>_B1| <= (2 C_mu (i0 + 1) + 4 C_mu**3) ||f||_BMO
        i0 - 1 <= log2(mu(B1)/mu(B)) + 2 log2 C_mu ,   K - 1 >= i0 - 1

    ``c2 = C_L C_R`` then bounds ``A`` by the BMO norm with ``f_B = <f>_B``.
    """
    c1 = 2 * C_mu ** math.ceil(math.log2(rho))
    C_L = (2 * C_mu + 4 * C_mu**3) * (3 + 2 * math.log2(C_mu))
    C_R = 1 + 2 * math.log2(2 * C_mu)
    return {"c1": c1, "C_L": C_L, "C_R": C_R, "c2": max(1.0, C_L * C_R)}


def compare_bmo(space: FiniteMetricMeasureSpace, f, rho: float = 2.0, max_C_mu: float = 64.0) -> dict:
    """RBMO (with ``lam = mu(B)``) versus classical BMO on a doubling space."""
    lam = BallMeasure(space)
    C_mu = lam.C_lambda
    if C_mu > max_C_mu:
        raise HypothesisError(f"space is not usefully measure doubling: C_mu={C_mu:g} > {max_C_mu:g}")
    f = np.asarray(f, dtype=float)
    problem = build_problem(space, lam, f, rho)
    fam = solve_rbmo(problem)
    b = bmo_norm(space, f)
    k = doubling_chain_constants(C_mu, rho)
    A = fam.A
    # two-sided logarithmic comparison on every inclusion pair
    mu = problem.masks @ space.weights
    avg = (problem.masks @ (space.weights * f)) / mu
    worst_left, worst_right, ok_pairs = 0.0, 0.0, True
    if problem.pair_count:
        i, j = problem.pairs.T
        logterm = 1 + np.log2(mu[j] / mu[i])
        left = np.abs(avg[i] - avg[j])
        left_rhs = k["C_L"] * b * logterm
        right_rhs = k["C_R"] * problem.K
        ok_pairs = bool(np.all(left <= left_rhs) and np.all(logterm <= right_rhs))
        with np.errstate(divide="ignore", invalid="ignore"):
            worst_left = float(np.nanmax(np.where(left_rhs > 0, left / left_rhs, 0.0)))
        worst_right = float((logterm / right_rhs).max())
    lower = b <= k["c1"] * A
    upper = A <= k["c2"] * b
    return {
        "A": A,
        "bmo": b,
        "C_mu": C_mu,
        **k,
        "lower_ok": bool(lower),
        "upper_ok": bool(upper),
        "pairs_ok": ok_pairs,
        "worst_left_ratio": worst_left,
        "worst_right_ratio": worst_right,
        "passed": bool(lower and upper and ok_pairs),
    }


def check_section5(
    space: FiniteMetricMeasureSpace,
    lam,
    f,
    family: AdmissibleFamily,
    params: DoublingParams,
    C1: float = 1.0,
    C2: float = 2.0,
) -> dict:
    """Doubling-ancestor, neighbour and average-versus-constant bounds.

    (a) ``|f_B - f_B'| <= A K(B, B')`` and ``K(B, B') <= C_l c(beta, gamma)``
        with ``gamma = C_l**log2(alpha)`` and
        ``c(beta, gamma) = 1 + gamma sum_{i=1..j} (gamma/beta)**(j-i)``;
    (b) for balls with ``d(c1, c2) <= C1 max(r) <= C2 min(r)``:
        ``|f_B1 - f_B2| <= A (2 + C_l**(log2(2m)+1) + C_l**(log2(M)+1))`` where
        ``B1 u B2 <= m B1`` and ``2m B1 <= M B2``;
    (c) ``|<f>_B - f_B| <= beta A`` on every doubling canonical ball.

    The family must have been solved with ``rho = alpha``.
    """
    pb = family.problem
    if not math.isclose(pb.rho, params.alpha):
        raise ValueError(f"family solved with rho={pb.rho:g}; section-5 checks need rho=alpha={params.alpha:g}")
    f = np.asarray(f, dtype=float)
    A = family.A
    Cl = lam.C_lambda
    gamma = Cl ** math.log2(params.alpha)
    if not params.beta > gamma:
        raise HypothesisError(f"beta={params.beta:g} must exceed gamma={gamma:g}")
    fam = pb.family
    vals = family.values
    out = {"A": A, "gamma": gamma, "C_lambda": Cl}

    # (a) doubling ancestors
    worst_a, ok_a, worst_k = 0.0, True, 0.0
    for idx, B in enumerate(fam.balls):
        anc = doubling_ancestor(space, B, params, Cl)
        j = anc.j
        cbg = 1 + gamma * sum((gamma / params.beta) ** (j - i) for i in range(1, j + 1))
        k_raw = kernel(space, lam, B, anc.ball)
        canon = fam.lookup(anc.ball)
        lhs = abs(vals[idx] - vals[canon])
        k_can = kernel(space, lam, B, fam.balls[canon]) if canon != idx else 1.0
        ok_a &= lhs <= A * k_can and k_raw <= Cl * cbg
        worst_k = max(worst_k, k_raw / (Cl * cbg))
        if A > 0:
            worst_a = max(worst_a, lhs / (A * k_can))
    out["ancestor"] = {"passed": bool(ok_a), "worst_ratio": worst_a, "worst_kernel_ratio": worst_k}

    # (b) neighbours
    ok_b, worst_b, count_b = True, 0.0, 0
    balls = fam.balls
    for p, B1 in enumerate(balls):
        for q, B2 in enumerate(balls):
            if p == q:
                continue
            d = space.dist[B1.center, B2.center]
            rmax, rmin = max(B1.radius, B2.radius), min(B1.radius, B2.radius)
            if not (d <= C1 * rmax <= C2 * rmin):
                continue
            count_b += 1
            m = (B1.radius + d + B2.radius) / B1.radius
            M = (2 * m * B1.radius + d) / B2.radius
            bound = A * (2 + Cl ** (math.log2(2 * m) + 1) + Cl ** (math.log2(M) + 1))
            lhs = abs(vals[p] - vals[q])
            ok_b &= lhs <= bound
            if bound > 0:
                worst_b = max(worst_b, lhs / bound)
    out["neighbours"] = {"passed": bool(ok_b), "pairs": count_b, "worst_ratio": worst_b, "C1": C1, "C2": C2}

    # (c) average versus constant on doubling balls
    ok_c, worst_c, count_c = True, 0.0, 0
    for idx, B in enumerate(fam.balls):
        if not is_doubling(space, B, params):
            continue
        count_c += 1
        mask = pb.masks[idx]
        avg = float(space.weights[mask] @ f[mask] / space.weights[mask].sum())
        lhs = abs(avg - vals[idx])
        ok_c &= lhs <= params.beta * A
        if A > 0:
            worst_c = max(worst_c, lhs / (params.beta * A))
    out["ave_vs_const"] = {"passed": bool(ok_c), "balls": count_c, "worst_ratio": worst_c}
    out["passed"] = bool(ok_a and ok_b and ok_c)
    return out
