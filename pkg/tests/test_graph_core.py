from __future__ import annotations

from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inverse_limits.graph_core import (
    GraphError,
    MetricMeasureGraph,
    PLFunction,
    ball_measure,
    cycle_graph,
    from_subdivision,
    integrate_deviation,
    lip_integral,
    path_graph,
    pointwise_lip,
    shortest_distance,
    subdivide,
    to_subdivision,
)

F = Fraction


def nx_distances(G: MetricMeasureGraph, source: int) -> dict[int, Fraction]:
    H = nx.MultiGraph()
    H.add_nodes_from(range(G.n_vertices))
    for a, b in G.ends:
        H.add_edge(a, b, weight=G.edge_length)
    return nx.single_source_dijkstra_path_length(H, source)


def midpoint_ball_measure(G: MetricMeasureGraph, center: int, r: Fraction, refinements: int) -> Fraction:
    """Approximate ball measure: sum cells of a fine subdivision whose midpoint is inside."""
    fine = G
    for _ in range(refinements):
        fine = subdivide(fine)
    dist = nx_distances(fine, center)
    h = fine.edge_length / 2
    total = F(0)
    for e, (a, b) in enumerate(fine.ends):
        if min(dist[a], dist[b]) + h < r:
            total += fine.measure[e]
    return total


@st.composite
def random_graphs(draw):
    n = draw(st.integers(2, 6))
    ends = [(i, draw(st.integers(0, i - 1))) for i in range(1, n)]
    for _ in range(draw(st.integers(0, 4))):
        a, b = draw(st.integers(0, n - 1)), draw(st.integers(0, n - 1))
        if a != b:
            ends.append((a, b))
    measure = [F(draw(st.integers(1, 9)), draw(st.integers(1, 9))) for _ in ends]
    return MetricMeasureGraph(2, draw(st.integers(0, 2)), n, tuple(ends), tuple(measure))


# -- subdivide ----------------------------------------------------------------


def test_subdivide_unit_edge():
    sub = subdivide(path_graph(1))
    assert sub.n_edges == 2 and sub.n_vertices == 3
    assert sub.measure == (F(1, 2), F(1, 2))
    assert sub.edge_length == F(1, 2)


def test_subdivide_triangle_m3():
    sub = subdivide(cycle_graph(3, m=3))
    assert sub.n_edges == 9
    assert set(sub.measure) == {F(1, 3)}


def test_subdivide_wedge_level_one(wedge_graph):
    assert wedge_graph.n_edges == 4 and set(wedge_graph.measure) == {F(1, 4)}
    sub = subdivide(wedge_graph)
    assert sub.n_edges == 8 and set(sub.measure) == {F(1, 8)}


@settings(max_examples=40, deadline=None)
@given(random_graphs())
def test_subdivide_preserves_measure_and_distances(G):
    sub = subdivide(G)
    assert sub.total_measure == G.total_measure
    assert sub.n_edges == G.m * G.n_edges
    for v in range(G.n_vertices):
        for w in range(G.n_vertices):
            p, q = G.vertex_point(v), G.vertex_point(w)
            assert shortest_distance(sub, to_subdivision(sub, p), to_subdivision(sub, q)) == shortest_distance(G, p, q)
    for e in range(G.n_edges):
        p = G.point(e, G.edge_length / 3)
        assert from_subdivision(sub, to_subdivision(sub, p)) == p


# -- distances ----------------------------------------------------------------


def test_interval_distances():
    G = path_graph(1)
    assert shortest_distance(G, G.vertex_point(0), G.vertex_point(1)) == 1
    assert shortest_distance(G, G.point(0, F(1, 3)), G.point(0, F(1, 3))) == 0


def test_wedge_left_endpoints(wedge_graph, wedge_step):
    left = wedge_step.vertex_fibers[0]
    assert len(left) == 2
    p, q = (wedge_graph.vertex_point(v) for v in left)
    assert shortest_distance(wedge_graph, p, q) == 1


@settings(max_examples=40, deadline=None)
@given(random_graphs(), st.data())
def test_distance_matches_dijkstra(G, data):
    v = data.draw(st.integers(0, G.n_vertices - 1))
    ref = nx_distances(G, v)
    for w in range(G.n_vertices):
        assert shortest_distance(G, G.vertex_point(v), G.vertex_point(w)) == ref[w]


@settings(max_examples=40, deadline=None)
@given(random_graphs(), st.data())
def test_distance_is_a_metric_on_edge_points(G, data):
    def pt():
        e = data.draw(st.integers(0, G.n_edges - 1))
        return G.point(e, G.edge_length * F(data.draw(st.integers(0, 8)), 8))

    p, q, r = pt(), pt(), pt()
    d = lambda x, y: shortest_distance(G, x, y)
    assert d(p, q) == d(q, p)
    assert d(p, r) <= d(p, q) + d(q, r)
    assert (d(p, q) == 0) == (p == q)


# -- balls --------------------------------------------------------------------


def test_interval_ball():
    G = path_graph(1)
    assert ball_measure(G, G.point(0, F(1, 2)), F(1, 4)) == F(1, 2)
    assert ball_measure(G, G.point(0, F(1, 2)), 5) == 1


def test_wedge_ball_at_middle(wedge_graph):
    hub = max(range(wedge_graph.n_vertices), key=wedge_graph.degree)
    assert ball_measure(wedge_graph, wedge_graph.vertex_point(hub), F(1, 4)) == F(1, 2)


@settings(max_examples=25, deadline=None)
@given(random_graphs(), st.data())
def test_ball_measure_against_fine_grid(G, data):
    c = data.draw(st.integers(0, G.n_vertices - 1))
    r = G.edge_length * F(data.draw(st.integers(1, 12)), 4)
    exact = ball_measure(G, G.vertex_point(c), r)
    approx = midpoint_ball_measure(G, c, r, 3)
    # r is a multiple of the cell length, so midpoints decide every cell exactly
    assert exact == approx


@settings(max_examples=30, deadline=None)
@given(random_graphs(), st.data())
def test_ball_measure_monotone(G, data):
    e = data.draw(st.integers(0, G.n_edges - 1))
    c = G.point(e, G.edge_length * F(data.draw(st.integers(0, 6)), 6))
    r1 = F(data.draw(st.integers(1, 20)), 8)
    r2 = r1 + F(data.draw(st.integers(0, 20)), 8)
    assert 0 < ball_measure(G, c, r1) <= ball_measure(G, c, r2) <= G.total_measure


# -- piecewise linear functions ------------------------------------------------


def test_pointwise_lip_identity():
    G = path_graph(1)
    f = PLFunction(G, (0, 1))
    assert pointwise_lip(G, f, G.point(0, F(1, 3))) == 1
    assert pointwise_lip(G, PLFunction.constant(G, 5), G.point(0, F(1, 3))) == 0


def test_distance_function_has_unit_slope(wedge_graph):
    G = wedge_graph
    f = PLFunction(G, tuple(h * G.edge_length for h in G.hops_from(0)))
    for e in range(G.n_edges):
        assert pointwise_lip(G, f, G.point(e, G.edge_length / 2)) == 1
    assert lip_integral(G, f, G.vertex_point(0), 10) == 1


def test_integrate_deviation_interval():
    G = path_graph(1)
    f = PLFunction(G, (0, 1))
    assert integrate_deviation(G, f, G.point(0, F(1, 2)), 10) == F(1, 4)
    assert integrate_deviation(G, f, G.point(0, F(1, 2)), F(1, 4)) == F(1, 16)
    assert integrate_deviation(G, PLFunction.constant(G, 3), G.point(0, F(1, 2)), 1) == 0


def test_lip_integral_interval():
    G = path_graph(1)
    assert lip_integral(G, PLFunction(G, (0, 1)), G.vertex_point(0), 2) == 1
    assert lip_integral(G, PLFunction.constant(G, 2), G.vertex_point(0), 2) == 0


@settings(max_examples=30, deadline=None)
@given(random_graphs(), st.data())
def test_deviation_invariances(G, data):
    vals = tuple(F(data.draw(st.integers(-9, 9))) for _ in range(G.n_vertices))
    f = PLFunction(G, vals)
    c = G.vertex_point(data.draw(st.integers(0, G.n_vertices - 1)))
    r = F(data.draw(st.integers(1, 12)), 4)
    base = integrate_deviation(G, f, c, r)
    assert integrate_deviation(G, f + 7, c, r) == base
    assert integrate_deviation(G, 3 * f, c, r) == 3 * base
    assert lip_integral(G, -2 * f, c, r) == 2 * lip_integral(G, f, c, r)
    # refining the domain does not change the function
    fr = f.refine()
    assert integrate_deviation(fr.base, fr, to_subdivision(fr.base, c), r) == base


def test_invalid_graphs_rejected():
    with pytest.raises(GraphError, match="edge 0"):
        MetricMeasureGraph(2, 0, 2, ((0, 1),), (F(-1),))
    with pytest.raises(GraphError, match="self-loop"):
        MetricMeasureGraph(2, 0, 2, ((0, 1), (1, 1)), (1, 1))
    with pytest.raises(GraphError, match="connected"):
        MetricMeasureGraph(2, 0, 4, ((0, 1), (2, 3)), (1, 1))
    with pytest.raises(TypeError):
        MetricMeasureGraph(2, 0, 2, ((0, 1),), (0.5,))
