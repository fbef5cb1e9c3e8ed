from __future__ import annotations

import itertools
import time
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inverse_limits.graph_core import PLFunction, path_graph, shortest_distance
from inverse_limits.inverse_step import (
    AxiomParams,
    Infeasible,
    MeasureSolution,
    ProjectionError,
    Projection,
    average_at,
    average_function,
    check_axioms,
    fiber_cardinality_bound,
    fiber_diameters,
    fuzzy_section,
    identity_step,
    nontrivial_example,
    solve_measure,
)
from helpers import built

F = Fraction
LOOSE = AxiomParams(2, 8, F(8), F(8))


def brute_fiber_diameter(step: Projection) -> Fraction:
    """Sample fibers at vertices and at quarter points of every target edge."""
    src, tgt = step.source, step.target
    L = src.edge_length
    best = F(0)
    for fib in step.vertex_fibers:
        pts = [src.vertex_point(w) for w in fib]
        for p, q in itertools.combinations(pts, 2):
            best = max(best, shortest_distance(src, p, q))
    for t, fib in enumerate(step.edge_fibers):
        for k in (1, 2, 3):
            s = L * F(k, 4)
            pts = [src.point(e, s if step.aligned(e) else L - s) for e in fib]
            for p, q in itertools.combinations(pts, 2):
                best = max(best, shortest_distance(src, p, q))
    return best / L


def test_wedge_step_passes(wedge_system, wedge_step):
    report = check_axioms(wedge_step, wedge_system.params)
    assert report.passed, report.render()
    assert [r.number for r in report.results] == [1, 2, 3, 4, 5, 6]


def test_identity_step_passes():
    step = identity_step(path_graph(1))
    assert check_axioms(step, AxiomParams(2, 2, F(0), F(1))).passed
    fs = fuzzy_section(step)
    assert set(fs.edge_weight) == {1} and set(fs.vertex_weight) == {1}


def test_report_renders_each_axiom(wedge_step, wedge_system):
    text = check_axioms(wedge_step, wedge_system.params).render()
    assert text.count("PASS") == 6


def test_axiom_failures_are_named():
    step = nontrivial_example()
    report = check_axioms(step, AxiomParams(2, 3, F(2), F(2)))
    failed = {r.number for r in report.failures()}
    assert 6 in failed and 3 in failed
    assert report[3].value == 4
    assert "vertex" in report[6].witness


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_nontrivial_example_fails_star_consistency_for_any_measure(data):
    step = nontrivial_example()
    m = step.source.m
    measure = [F(0)] * step.source.n_edges
    for t, fib in enumerate(step.edge_fibers):
        raw = [data.draw(st.integers(1, 50)) for _ in fib]
        for e, x in zip(fib, raw):
            measure[e] = F(x, sum(raw)) * step.target.measure[t]
    step = step.with_source_measure(measure)
    report = check_axioms(step, AxiomParams(m, 3, F(4), F(100)))
    assert report[5].passed
    assert not report[6].passed


def test_fuzzy_section_wedge(wedge_step):
    fs = fuzzy_section(wedge_step)
    assert set(fs.edge_weight) == {F(1, 2)}
    hub = max(range(wedge_step.source.n_vertices), key=wedge_step.source.degree)
    assert fs.vertex_weight[hub] == 1
    for v in (0, 1):  # the ends of [0, 1]; the midpoint is vertex 2
        for w in wedge_step.vertex_fibers[v]:
            assert fs.vertex_weight[w] == F(1, 2)


def test_fuzzy_section_parallel(parallel_system):
    step = parallel_system.steps[0]
    fs = fuzzy_section(step)
    assert set(fs.edge_weight) == {F(1, 4)}
    for v in (0, 1):
        assert {fs.vertex_weight[w] for w in step.vertex_fibers[v]} == {F(1, 2)}


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["laakso_like", "parallel", "mixed_random"]), st.integers(0, 2))
def test_fuzzy_weights_sum_to_one(name, k):
    system = built(name, 3)
    step = system.steps[k]
    fs = system.fuzzy[k]
    for t, fib in enumerate(step.edge_fibers):
        assert sum(fs.edge_weight[e] for e in fib) == 1
    for v, fib in enumerate(step.vertex_fibers):
        assert sum(fs.vertex_weight[w] for w in fib) == 1


def test_average_constant_and_identity(wedge_step):
    f = PLFunction.constant(wedge_step.source, F(7, 3))
    assert set(average_function(wedge_step, f).values) == {F(7, 3)}
    step = identity_step(path_graph(2))
    g = PLFunction(step.source, tuple(F(v * v) for v in range(step.source.n_vertices)))
    assert average_function(step, g).values == g.values


def test_average_of_opposite_strands(wedge_step):
    src = wedge_step.source
    p, q = wedge_step.vertex_fibers[0]
    vals = [F(0)] * src.n_vertices
    vals[p], vals[q] = F(1), F(-1)
    g = average_function(wedge_step, PLFunction(src, tuple(vals)))
    assert g.values[0] == 0
    assert set(g.values) == {0}


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["laakso_like", "parallel", "mixed_random"]), st.integers(0, 1), st.data())
def test_average_is_linear_and_matches_fiber_sum(name, k, data):
    system = built(name, 2)
    step = system.steps[k]
    n = step.source.n_vertices
    f = PLFunction(step.source, tuple(F(data.draw(st.integers(-20, 20))) for _ in range(n)))
    h = PLFunction(step.source, tuple(F(data.draw(st.integers(-20, 20))) for _ in range(n)))
    assert average_function(step, f + 2 * h).values == (average_function(step, f) + 2 * average_function(step, h)).values
    t = data.draw(st.integers(0, step.target.n_edges - 1))
    s = step.target.edge_length * F(data.draw(st.integers(1, 7)), 8)
    g = average_function(step, f)
    assert g(step.target.point(t, s)) == average_at(step, f, t, s)


def test_solve_measure_identity():
    step = identity_step(path_graph(1))
    sol = solve_measure(step)
    assert isinstance(sol, MeasureSolution)
    assert sol.measure == step.target.measure and sol.min_weight == 1


def test_solve_measure_wedge_against_grid(wedge_step):
    sol = solve_measure(wedge_step)
    assert isinstance(sol, MeasureSolution)
    assert set(sol.measure) == {F(1, 4)} and sol.min_weight == F(1, 2)
    # independent search over every measure on a 1/32 grid that meets the fiber sums
    fibers = [fib for fib in wedge_step.edge_fibers]
    assert all(len(f) == 2 for f in fibers)
    best = F(0)
    grid = [F(k, 32) for k in range(1, 16)]
    for choice in itertools.product(grid, repeat=len(fibers)):
        meas = [F(0)] * wedge_step.source.n_edges
        for fib, a, t in zip(fibers, choice, range(len(fibers))):
            meas[fib[0]] = a
            meas[fib[1]] = wedge_step.target.measure[t] - a
        cand = wedge_step.with_source_measure(meas)
        if check_axioms(cand, LOOSE).passed:
            best = max(best, fuzzy_section(cand).min_weight)
    assert best == sol.min_weight


def test_solve_measure_nontrivial_is_infeasible():
    start = time.perf_counter()
    res = solve_measure(nontrivial_example())
    elapsed = time.perf_counter() - start
    assert isinstance(res, Infeasible) and not res
    assert res.forced_zero
    assert elapsed < 1.0


def test_solve_measure_result_is_admissible():
    system = built("mixed_random", 2, seed=3)
    for step in system.steps:
        sol = solve_measure(step)
        assert isinstance(sol, MeasureSolution)
        cand = step.with_source_measure(sol.measure)
        assert check_axioms(cand, system.params)[5].passed
        assert check_axioms(cand, system.params)[6].passed
        assert sol.min_weight >= system.fuzzy[step.target_parent.level].min_weight


@pytest.mark.parametrize("name", ["laakso_like", "parallel", "mixed_random", "degenerate"])
def test_fiber_diameter_matches_sampling(name):
    system = built(name, 3)
    for step in system.steps:
        assert fiber_diameters(step)[0] == brute_fiber_diameter(step)


def test_fiber_cardinality_bound():
    assert fiber_cardinality_bound(4, 2) == 64
    assert fiber_cardinality_bound(3, F(1, 2)) == 9


def test_non_simplicial_map_rejected():
    base = path_graph(1)
    src = path_graph(2, level=1)
    with pytest.raises(ProjectionError):
        Projection.over(src, base, (0, 1, 2), (0, 1))
