"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Lines are printed as the tests run and repeated in the terminal summary.  The
module also runs standalone: ``python tests/test_acceptance.py``.
"""
import functools
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES, jn_cases, medium_spaces, small_spaces  # noqa: E402
from oracles import rbmo_oracle  # noqa: E402
from rbmokit.covering import doubling_diagnostics, separated_net, vitali_select  # noqa: E402
from rbmokit.dominating import (  # noqa: E402
    BallMeasure,
    DoublingParams,
    bad_points,
    default_params,
    fit_power_law,
    kernel,
    kernel_log_bound,
    minimal_envelope,
)
from rbmokit.generate import cantor_dust, random_euclidean, segment_plus_cluster, uniform_grid  # noqa: E402
from rbmokit.johnnirenberg import lp_oscillation, lp_oscillation_bound, verify_jn  # noqa: E402
from rbmokit.operators import maximal_function, weak_type_check  # noqa: E402
from rbmokit.rbmo import build_problem, check_section5, compare_bmo, compare_rho, solve_rbmo  # noqa: E402
from rbmokit.space import Ball, canonical_balls  # noqa: E402


def report(num, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num:>2}: {title}" + (f" ({detail})" if detail else "")
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def all_test_spaces():
    return small_spaces() + medium_spaces()[1:]


def test_criterion_01_weak_type():
    spaces = [uniform_grid(200, 1), uniform_grid(14, 2), cantor_dust(7), segment_plus_cluster(150, 100)]
    checks, worst, ok = 0, 0.0, True
    for sp in spaces:
        rng = np.random.default_rng(1)
        for _ in range(20):
            f = rng.normal(size=sp.n) * rng.exponential(size=sp.n)
            prof = maximal_function(sp, f)
            hi = float(prof.values.max())
            t_grid = np.geomspace(hi / 50, hi * 1.1, 20)
            rep = weak_type_check(sp, f, t_grid, prof)
            ok &= all(lhs <= rhs for _, lhs, rhs in rep.rows)
            checks += len(rep.rows)
            worst = max(worst, rep.tightest_ratio)
    report(1, "weak (1,1) with constant 1", ok, f"{checks} inequalities, tightest ratio {worst:.4f}")


def test_criterion_02_oracle():
    worst, ok = 0.0, True
    for sp in small_spaces():
        f = np.random.default_rng(sp.n * 7 + 1).normal(size=sp.n)
        lam = fit_power_law(sp, 1.0)
        A = solve_rbmo(build_problem(sp, lam, f, 2)).A
        ref = rbmo_oracle(sp.dist.tolist(), sp.weights.tolist(), f, lam, 2)
        err = abs(A - ref) / (1 + ref)
        worst = max(worst, err)
        ok &= err <= 1e-3
    report(2, "solver against brute-force oracle", ok, f"10 spaces, worst scaled error {worst:.2e}")


def test_criterion_03_certificate():
    ok, count, worst = True, 0, math.inf
    const_ok = True
    for sp in all_test_spaces():
        rng = np.random.default_rng(sp.n)
        for lam in (fit_power_law(sp, 1.0), BallMeasure(sp)):
            for rho in (1.5, 2.0, 4.0):
                for f in (rng.normal(size=sp.n), np.eye(sp.n)[0]):
                    fam = solve_rbmo(build_problem(sp, lam, f, rho))
                    s = fam.min_slack()
                    ok &= s >= -1e-9 * (1 + fam.A)
                    worst = min(worst, s / (1 + fam.A))
                    count += 1
                c = float(rng.normal())
                const_ok &= solve_rbmo(build_problem(sp, lam, np.full(sp.n, c), rho)).A == 0.0
    report(3, "admissibility certificate and constant functions", ok and const_ok,
           f"{count} solves, worst scaled slack {worst:.2e}, constants exact: {const_ok}")


def test_criterion_04_kernel_bound():
    ok, pairs, worst = True, 0, -math.inf
    for sp in all_test_spaces():
        C_mu = doubling_diagnostics(sp).C_mu
        pb = build_problem(sp, BallMeasure(sp), np.zeros(sp.n), 2)
        for lam in (fit_power_law(sp, 1.0), BallMeasure(sp), minimal_envelope(sp, max(C_mu, 2.0))):
            for i, j in pb.pairs:
                B, B1 = pb.balls[i], pb.balls[j]
                lhs = kernel(sp, lam, B, B1) - 1.0
                rhs = kernel_log_bound(lam, B, B1)
                ok &= lhs <= rhs
                worst = max(worst, lhs - rhs)
                pairs += 1
    report(4, "kernel log bound on inclusion pairs", ok, f"{pairs} pairs, largest lhs - rhs {worst:.3f}")


def test_criterion_05_rho_independence():
    spaces = [uniform_grid(12, 1), random_euclidean(10, 0), random_euclidean(12, 1), cantor_dust(3)]
    ok, worst, runs = True, 0.0, 0
    rng = np.random.default_rng(5)
    for k in range(20):
        sp = spaces[k % len(spaces)]
        lam = fit_power_law(sp, 1.0)
        rho, sigma = ((2.0, 1.5), (3.0, 2.0), (4.0, 1.25))[k % 3]
        rep = compare_rho(sp, lam, rng.normal(size=sp.n), rho, sigma)
        ok &= rep["A_rho"] <= rep["A_sigma"] and rep["A_sigma"] <= rep["C"] * rep["A_rho"]
        worst = max(worst, rep["ratio"] / rep["C"])
        runs += 1
    report(5, "independence of the dilation parameter", ok, f"{runs} functions, largest ratio/C {worst:.3f}")


def test_criterion_06_doubling_comparison():
    ok, runs = True, 0
    lo, hi = math.inf, 0.0
    for sp in (uniform_grid(8, 1), uniform_grid(16, 1), uniform_grid(4, 2)):
        rng = np.random.default_rng(6)
        fs = [(np.arange(sp.n) % 4).astype(float), np.eye(sp.n)[sp.n // 2]] + [rng.normal(size=sp.n) for _ in range(3)]
        for f in fs:
            rep = compare_bmo(sp, f)
            ok &= rep["lower_ok"] and rep["upper_ok"] and rep["pairs_ok"]
            r = rep["A"] / rep["bmo"]
            lo, hi = min(lo, r * rep["c1"]), max(hi, r / rep["c2"])
            runs += 1
    report(6, "equivalence with BMO on doubling grids", ok,
           f"{runs} functions, min c1*A/bmo {lo:.3g}, max A/(c2*bmo) {hi:.3g}")


def test_criterion_07_bad_points():
    ok, checks = True, 0
    for sp in all_test_spaces():
        diag = doubling_diagnostics(sp)
        n = diag.n_exponent
        fam = canonical_balls(sp)
        roots = [fam.balls[fam.lookup(Ball(0, 10 * max(sp.diameter, 1.0)))],
                 fam.balls[fam.lookup(Ball(sp.n // 2, max(sp.diameter, 1.0) / 2))]]
        for alpha in (2.0, 10.0):
            for excess in (1.01, 1.5, 4.0):
                params = DoublingParams(alpha, excess * alpha**n)
                for B0 in roots:
                    for k in range(11):
                        rep = bad_points(sp, B0, params, k, diag.N_bound, n)
                        ok &= rep.measure <= rep.bound
                        checks += 1
    report(7, "bad-point measure bound", ok, f"{checks} (space, ball, params, k) checks")


def test_criterion_08_doubling_balls():
    ok, runs, ancestors = True, 0, 0.0
    for sp in medium_spaces():
        diag = doubling_diagnostics(sp)
        lam = fit_power_law(sp, 1.0)
        base = default_params(2.0, lam.C_lambda, diag.n_exponent)
        gamma = lam.C_lambda ** math.log2(base.alpha)
        rng = np.random.default_rng(8)
        for params in (base, DoublingParams(base.alpha, 1.01 * gamma)):
            for f in (rng.normal(size=sp.n), np.eye(sp.n)[sp.n // 2]):
                fam = solve_rbmo(build_problem(sp, lam, f, params.alpha))
                rep = check_section5(sp, lam, f, fam, params)
                ok &= rep["passed"]
                ancestors = max(ancestors, rep["ancestor"]["worst_kernel_ratio"])
                runs += 1
    report(8, "doubling-ball averages and ancestor/neighbour kernels", ok,
           f"{runs} runs, largest ancestor kernel ratio {ancestors:.3f}")


@functools.lru_cache(maxsize=1)
def jn_matrix():
    out = []
    for sp, lam, rho, params, f, fam, B0 in jn_cases():
        rep = verify_jn(sp, lam, f, fam, B0, rho, params, np.linspace(0, 3, 20)[1:])
        lp = [(lp_oscillation(sp, f, fam, B0, p, rho), lp_oscillation_bound(p, rep.L, fam.A) if rep.L else 0.0)
              for p in (1, 2, 4)]
        out.append((sp, rho, B0, fam, rep, lp))
    return out


def test_criterion_09_john_nirenberg():
    ok, ratios = True, set()
    for sp, rho, B0, fam, rep, _ in jn_matrix():
        root_mass = sp.open_mass(B0.center, rho * B0.radius)
        masses = [lv["mass"] for lv in rep.levels]
        ok &= rep.L is not None and all(b <= a / 2 for a, b in zip(masses, masses[1:]))
        if fam.A > 0 and rep.L:
            n = 1
            while True:
                tail = next(v for t, v, _ in rep.tail if t == 2 * n * rep.L)
                ok &= tail <= root_mass * 2.0**-n
                if tail == 0:
                    break
                n += 1
            ok &= rep.c_fit >= math.log(2) / (2 * rep.L / fam.A)
            ratios.add(rep.L / fam.A)
        ok &= rep.passed
    report(9, "stopping-ball decomposition and exponential tail", ok,
           f"{len(jn_matrix())} cases, L/A in {sorted(ratios)}")


def test_criterion_10_lp():
    ok, worst = True, 0.0
    for *_, rep, lp in jn_matrix():
        for v, bound in lp:
            ok &= v <= bound
            if bound > 0:
                worst = max(worst, v / bound)
    report(10, "L^p oscillation bound for p = 1, 2, 4", ok, f"largest value/bound {worst:.3f}")


def test_criterion_11_vitali_and_nets():
    ok, families = True, 0
    for sp in all_test_spaces():
        fam = canonical_balls(sp)
        masks = {b: sp.members_mask(b.center, b.radius) for b in fam.balls}
        rng = np.random.default_rng(11)
        for _ in range(10):
            pick = rng.choice(len(fam.balls), size=min(len(fam.balls), int(rng.integers(1, 12))), replace=False)
            balls = [fam.balls[i] for i in pick]
            chosen = vitali_select(sp, balls)
            for a_i, a in enumerate(chosen):
                for b in chosen[a_i + 1:]:
                    ok &= sp.dist[a.center, b.center] >= a.radius + b.radius
                    ok &= not np.any(masks[a] & masks[b])
            for b in balls:
                ok &= any(np.all(~masks[b] | sp.members_mask(c.center, 5 * c.radius)) for c in chosen)
            families += 1
        for r in np.unique(sp.dist)[1:][:6]:
            net = separated_net(sp, range(sp.n), r)
            ok &= all(sp.dist[a, b] >= r for a in net for b in net if a != b)
            ok &= all(sp.dist[x, net].min() < r for x in range(sp.n))
    report(11, "Vitali selection and maximal nets", ok, f"{families} families")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
