import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_s3, medium_spaces
from oracles import max_packing, measure_doubling_sweep
from rbmokit.covering import (
    doubling_diagnostics,
    measure_doubling_constant,
    packing_bound,
    separated_net,
    vitali_select,
)
from rbmokit.generate import random_euclidean, segment_plus_cluster, uniform_grid
from rbmokit.space import Ball, ball_members, space_from_document


def test_separated_net_examples(s3):
    assert separated_net(s3, range(3), 0.5) == [0, 1, 2]
    assert separated_net(s3, range(3), 10) == [0]
    assert separated_net(s3, range(3), 1.5) == [0, 2]
    with pytest.raises(ValueError):
        separated_net(s3, [], 1.0)


def test_vitali_examples(s3):
    got = vitali_select(s3, [Ball(0, 2), Ball(1, 1), Ball(2, 0.5)])
    assert got == [Ball(0, 2), Ball(2, 0.5)]
    assert vitali_select(s3, [Ball(1, 1)]) == [Ball(1, 1)]
    # same member set {p0, p1}: the larger one wins
    assert vitali_select(s3, [Ball(0, 1.5), Ball(0, 2.5)]) == [Ball(0, 2.5)]


def test_packing_examples(s3):
    assert packing_bound(s3, Ball(1, 2.5), 0.1).value == 3
    assert packing_bound(s3, Ball(0, 0.5), 0.9).value == 1
    g = uniform_grid(8, 1)
    full = Ball(0, 16)
    exact = packing_bound(g, full, 0.5)
    assert exact.exact
    assert exact.value == max_packing(g.dist.tolist(), range(8), 0.5 * 16)
    for delta in (0.5, 0.2, 0.1):
        forced = packing_bound(g, full, delta, limit=0)
        truth = packing_bound(g, full, delta).value
        assert forced.lower <= truth <= forced.upper
    with pytest.raises(ValueError):
        packing_bound(s3, full, 1.5)


def test_diagnostics_small():
    one = space_from_document({"metric": "matrix", "dist": [[0]], "weights": [1]})
    d = doubling_diagnostics(one)
    assert d.N_bound == 1 and d.C_mu == 1
    d3 = doubling_diagnostics(make_s3())
    assert d3.N_bound == 3 and d3.C_mu == 3
    assert d3.to_json()["N_condition"] == "quarter_radius_packing"


def test_grid_measure_doubling():
    g = uniform_grid(16, 1)
    c, _ = measure_doubling_constant(g)
    assert c == 3.0
    assert c == pytest.approx(measure_doubling_sweep(g.dist.tolist(), g.weights.tolist()))


def test_segment_cluster_measure_doubling():
    sp = segment_plus_cluster(8, 100)
    c, wit = measure_doubling_constant(sp)
    assert c == pytest.approx(measure_doubling_sweep(sp.dist.tolist(), sp.weights.tolist()))
    # the doubled witness reaches the heavy atom: (8 + 1000) / 8
    assert c == 126.0
    assert c >= 100
    assert 8 in ball_members(sp, Ball(wit.center, 2 * wit.radius))
    assert 8 not in ball_members(sp, wit)


@pytest.mark.parametrize("sp", medium_spaces(), ids=lambda s: s.name)
def test_diagnostic_table_consistent(sp):
    d = doubling_diagnostics(sp)
    assert d.n_exponent == (math.log2(d.N_bound) if d.N_bound > 1 else 0.0)
    for delta, (lo, hi) in d.per_delta_packing.items():
        assert lo <= hi
    # packing counts do not increase with delta
    ds = sorted(d.per_delta_packing)
    his = [d.per_delta_packing[x][1] for x in ds]
    assert his == sorted(his, reverse=True)


@pytest.mark.parametrize("sp", [make_s3(), uniform_grid(8, 1), random_euclidean(9, 2)], ids=lambda s: s.name)
def test_packing_iteration_bound(sp):
    d = doubling_diagnostics(sp)
    for k in (1, 2, 3):
        delta = 2.0**-k
        for c in range(sp.n):
            for rho in np.unique(sp.dist[c])[1:]:
                p = packing_bound(sp, Ball(c, float(rho)), delta, closed=True)
                assert p.value <= d.N_bound**k


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(0, 10_000), st.sampled_from([0.5, 0.25, 0.2]))
def test_packing_matches_enumeration(n, seed, delta):
    sp = random_euclidean(n, seed)
    for c in range(n):
        for r in (0.3, 0.7, 2.0):
            mem = sorted(ball_members(sp, Ball(c, r)))
            assert packing_bound(sp, Ball(c, r), delta).value == max_packing(sp.dist.tolist(), mem, delta * r)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 15), st.integers(0, 10_000), st.lists(st.floats(0.05, 1.5), min_size=1, max_size=12))
def test_vitali_properties(n, seed, radii):
    sp = random_euclidean(n, seed)
    balls = [Ball(i % n, r) for i, r in enumerate(radii)]
    chosen = vitali_select(sp, balls)
    for a in range(len(chosen)):
        for b in range(a + 1, len(chosen)):
            A, B = chosen[a], chosen[b]
            assert sp.dist[A.center, B.center] >= A.radius + B.radius
            assert not (ball_members(sp, A) & ball_members(sp, B))
    for b in balls:
        assert any(ball_members(sp, b) <= ball_members(sp, Ball(s.center, 5 * s.radius)) for s in chosen)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 15), st.integers(0, 10_000), st.floats(0.05, 1.0))
def test_net_properties(n, seed, r):
    sp = random_euclidean(n, seed)
    net = separated_net(sp, range(n), r)
    for a in net:
        for b in net:
            if a != b:
                assert sp.dist[a, b] >= r
    for x in set(range(n)) - set(net):
        assert sp.dist[x, net].min() < r  # adding x would break separation
