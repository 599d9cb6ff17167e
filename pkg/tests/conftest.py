import numpy as np
import pytest

from rbmokit.generate import cantor_dust, random_euclidean, segment_plus_cluster, uniform_grid
from rbmokit.space import space_from_document

S3_DOC = {"name": "S3", "metric": "euclidean", "coords": [[0], [1], [3]], "weights": [1, 1, 1]}


def make_s3():
    return space_from_document(S3_DOC)


def small_spaces():
    """Ten spaces with at most four points, used against the brute-force oracle."""
    out = [
        make_s3(),
        space_from_document({"metric": "matrix", "dist": [[0, 1], [1, 0]], "weights": [2, 3], "name": "pair"}),
        space_from_document({"metric": "matrix", "dist": [[0]], "weights": [1.5], "name": "single"}),
        uniform_grid(4, 1),
        cantor_dust(2),
        uniform_grid(2, 2),
        segment_plus_cluster(3, 10.0, heavy=50.0),
        space_from_document({
            "metric": "matrix", "name": "star",
            "dist": [[0, 1, 1, 1], [1, 0, 2, 2], [1, 2, 0, 2], [1, 2, 2, 0]],
            "weights": [1, 2, 0.5, 1],
        }),
    ]
    out += [random_euclidean(4, seed) for seed in (0, 1)]
    return out


def medium_spaces():
    return [
        make_s3(),
        uniform_grid(8, 1),
        uniform_grid(16, 1),
        uniform_grid(4, 2),
        cantor_dust(3),
        segment_plus_cluster(8, 100),
        random_euclidean(10, 0),
        random_euclidean(12, 1),
    ]


@pytest.fixture
def s3():
    return make_s3()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def jn_cases(spaces=None, rhos=(2, 3), n_random=3, seed=0):
    """Yield ``(space, lam, rho, params, f, family, B0)`` over the decomposition matrix.

    Functions per space: a spike at the middle point, a period-3 sawtooth and
    ``n_random`` Gaussian draws.  Two roots per function: the full ball
    around point 0 and a half-diameter ball around the middle point.
    """
    from rbmokit.covering import doubling_diagnostics
    from rbmokit.dominating import BallMeasure, default_params, fit_power_law
    from rbmokit.rbmo import build_problem, solve_rbmo
    from rbmokit.space import Ball

    if spaces is None:
        spaces = [make_s3(), uniform_grid(8, 1), uniform_grid(16, 1), cantor_dust(3),
                  segment_plus_cluster(8, 100), random_euclidean(10, 0)]
    rng = np.random.default_rng(seed)
    for sp in spaces:
        diag = doubling_diagnostics(sp)
        for lam in (fit_power_law(sp, 1.0), BallMeasure(sp)):
            for rho in rhos:
                params = default_params(rho, lam.C_lambda, diag.n_exponent)
                fs = [np.eye(sp.n)[sp.n // 2], (np.arange(sp.n) % 3).astype(float)]
                fs += [rng.normal(size=sp.n) for _ in range(n_random)]
                for f in fs:
                    fam = solve_rbmo(build_problem(sp, lam, f, rho))
                    fb = fam.problem.family
                    roots = [fb.balls[fb.lookup(Ball(0, 10 * sp.diameter))],
                             fb.balls[fb.lookup(Ball(sp.n // 2, sp.diameter / 2))]]
                    for B0 in roots:
                        yield sp, lam, rho, params, f, fam, B0


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
