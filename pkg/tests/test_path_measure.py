from __future__ import annotations

import math
import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import built, random_walk
from inverse_limits.graph_core import PLFunction
from inverse_limits.inverse_step import identity_step
from inverse_limits.graph_core import path_graph
from inverse_limits.path_measure import (
    GuardExceeded,
    PathError,
    VertexPath,
    adjacent_average_check,
    composite_edge_map,
    edge_marginal,
    edge_path,
    enumerate_lifts,
    omega,
    omega_multilevel,
    sample_lift,
    sample_lifts,
    verify_pushforward,
)

F = Fraction
H = F(1, 2)


def full_interval(step):
    """The subdivided unit interval as a path 0 -> midpoint -> 1 in the target."""
    return edge_path(step.target_parent, 0)


def test_identity_step_single_lift():
    step = identity_step(path_graph(3))
    path = VertexPath.from_edges(step.target, 0, (0, 1, 2))
    lm = omega(step, path)
    assert lm.lifts == ((0, 1, 2),) and lm.omega == (1,)


def test_wedge_full_interval(wedge_step):
    lm = omega(wedge_step, full_interval(wedge_step))
    assert len(lm) == 4 and set(lm.omega) == {F(1, 4)}


def test_wedge_half_interval(wedge_step):
    T = wedge_step.target
    path = VertexPath.from_edges(T, T.ends[0][0], (0,))
    lm = omega(wedge_step, path)
    assert len(lm) == 2 and set(lm.omega) == {H}
    for lift, w in zip(lm.lifts, lm.omega):
        assert w == wedge_step.source.measure[lift[0]] / T.measure[0]


def test_edge_marginals(wedge_step, parallel_system):
    lm = omega(wedge_step, full_interval(wedge_step))
    for e in wedge_step.edge_fibers[0]:
        assert edge_marginal(lm, e) == H
    step = parallel_system.steps[0]
    lm = omega(step, full_interval(step))
    for e in step.edge_fibers[0]:
        assert edge_marginal(lm, e) == F(1, 4)
    ident = identity_step(path_graph(1))
    assert edge_marginal(omega(ident, full_interval(ident)), 0) == 1


def test_laakso_two_levels():
    system = built("laakso_like", 2)
    lm = omega_multilevel(system, 0, 2, edge_path(system.levels[0], 0))
    # 2 x 2 choices at level 1, then 2 x 2 and 1 x 2 along the two halves
    assert len(lm) == 32 and set(lm.omega) == {F(1, 32)}
    single = omega_multilevel(system, 0, 1, edge_path(system.levels[0], 0))
    assert single == omega(system.steps[0], edge_path(system.levels[0], 0))


def test_identity_tower_lifts(identity_system):
    lm = omega_multilevel(identity_system, 0, 3, edge_path(identity_system.levels[0], 0))
    assert lm.omega == (1,)


def test_guard():
    system = built("laakso_like", 3)
    with pytest.raises(GuardExceeded):
        omega_multilevel(system, 0, 3, edge_path(system.levels[0], 0), guard=10)


def test_invalid_path_rejected(wedge_step):
    with pytest.raises(PathError):
        enumerate_lifts(wedge_step, VertexPath((0, 1), (0,)))


@pytest.mark.parametrize("name,depth", [("identity", 3), ("laakso_like", 1), ("laakso_like", 2), ("parallel", 2)])
def test_pushforward_examples(name, depth):
    system = built(name, depth)
    for i in range(1, depth + 1):
        res = verify_pushforward(system, 0, i, 0)
        assert res.passed and res.max_discrepancy == 0
    if name == "laakso_like" and depth == 2:
        assert len(res.rhs) == 16


def test_composite_edge_map_covers_everything():
    system = built("mixed_random", 3)
    emap = composite_edge_map(system, 0, 3)
    assert set(emap) == {0}
    emap = composite_edge_map(system, 1, 3)
    assert set(emap) == set(range(system.levels[1].n_edges))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["laakso_like", "parallel", "mixed_random", "degenerate"]), st.integers(0, 2), st.integers(0, 10**6))
def test_lift_measure_identities(name, k, seed):
    system = built(name, 3)
    step, section = system.steps[k], system.fuzzy[k]
    rng = random.Random(seed)
    path = random_walk(step.target, rng, rng.randint(1, 5))
    lm = omega(step, path, section)
    assert lm.total == 1
    # reversing the path reverses each lift and keeps its weight
    rev = omega(step, path.reversed(), section).as_dict()
    assert {tuple(reversed(l)): w for l, w in lm.as_dict().items()} == rev
    # marginal of each edge at each position is its fuzzy weight
    for j, t in enumerate(path.edges):
        for e in step.edge_fibers[t]:
            assert edge_marginal(lm, e, j) == section.edge_weight[e]
    # extending at either end and summing over the new edge gives back the old measure
    T = step.target
    for at_end in (True, False):
        v = path.vertices[-1] if at_end else path.vertices[0]
        ext = [e for e in T.incident[v] if e != (path.edges[-1] if at_end else path.edges[0])]
        if not ext:
            continue
        e = ext[0]
        if at_end:
            longer = VertexPath(path.vertices + (T.other_end(e, v),), path.edges + (e,))
        else:
            longer = VertexPath((T.other_end(e, v),) + path.vertices, (e,) + path.edges)
        big = omega(step, longer, section)
        summed = Counter()
        for lift, w in zip(big.lifts, big.omega):
            summed[lift[:-1] if at_end else lift[1:]] += w
        assert dict(summed) == lm.as_dict()


def test_sampler_matches_omega(wedge_step):
    path = full_interval(wedge_step)
    n = 4000
    counts = Counter(sample_lifts(wedge_step, path, n, seed=11))
    exact = omega(wedge_step, path).as_dict()
    assert set(counts) <= set(exact)
    for lift, p in exact.items():
        p = float(p)
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(counts[lift] - n * p) <= 4 * sigma
    assert counts == Counter(sample_lifts(wedge_step, path, n, seed=11))


def test_sampler_single_edge(wedge_step):
    T = wedge_step.target
    path = VertexPath.from_edges(T, T.ends[1][0], (1,))
    n = 4000
    counts = Counter(lift[0] for lift in sample_lifts(wedge_step, path, n, seed=5))
    for e in wedge_step.edge_fibers[1]:
        p = float(wedge_step.source.measure[e] / T.measure[1])
        assert abs(counts[e] - n * p) <= 4 * math.sqrt(n * p * (1 - p))


def test_sampler_identity_is_deterministic():
    step = identity_step(path_graph(2))
    path = VertexPath.from_edges(step.target, 0, (0, 1, 2, 3))
    assert {sample_lift(step, path, s) for s in range(20)} == {(0, 1, 2, 3)}


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["laakso_like", "mixed_random"]), st.data())
def test_adjacent_averages(name, data):
    system = built(name, 3)
    k = data.draw(st.integers(1, 2))
    i = data.draw(st.integers(k + 1, 3))
    Gk, Xi = system.levels[k], system.levels[i]
    inner = [v for v in range(Gk.n_vertices) if Gk.degree(v) >= 2]
    inc = Gk.incident[data.draw(st.sampled_from(inner))]
    e0, e1 = inc[0], inc[1]
    u = PLFunction(Xi, tuple(F(data.draw(st.integers(-30, 30))) for _ in range(Xi.n_vertices)))
    res = adjacent_average_check(system, k, i, e0, e1, u)
    assert res.holds
    assert res.constant <= 1 + system.params.C
