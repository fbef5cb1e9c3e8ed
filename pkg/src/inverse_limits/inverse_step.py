"""One projection step from a level-(i+1) graph onto the subdivided level-i graph.

Contains the axiom checker, the fuzzy section induced by the measures, the
fiber-averaging operator on piecewise linear functions, and an exact linear
program that searches for measures compatible with a bare combinatorial step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

from .graph_core import (
    GraphError,
    GraphPoint,
    MetricMeasureGraph,
    PLFunction,
    as_fraction,
    subdivide,
    subdivision_vertex,
)


class ProjectionError(ValueError):
    """Structural problem with a projection (not simplicial, wrong sizes)."""


class AxiomViolation(ValueError):
    """Raised when a construction needs an axiom that does not hold."""


@dataclass(frozen=True)
class Projection:
    source: MetricMeasureGraph
    target_parent: MetricMeasureGraph
    target: MetricMeasureGraph
    vertex_map: tuple[int, ...]
    edge_map: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertex_map", tuple(self.vertex_map))
        object.__setattr__(self, "edge_map", tuple(self.edge_map))
        src, tgt = self.source, self.target
        if len(self.vertex_map) != src.n_vertices or len(self.edge_map) != src.n_edges:
            raise ProjectionError("vertex_map/edge_map sizes do not match the source graph")
        if tgt.parent_edge is None or tgt.n_edges != self.target_parent.n_edges * self.target_parent.m:
            raise ProjectionError("target must be the subdivision of target_parent")
        for w, v in enumerate(self.vertex_map):
            if not 0 <= v < tgt.n_vertices:
                raise ProjectionError(f"vertex {w} maps outside the target")
        for e, (a, b) in enumerate(src.ends):
            t = self.edge_map[e]
            if not 0 <= t < tgt.n_edges:
                raise ProjectionError(f"edge {e} maps outside the target")
            if {self.vertex_map[a], self.vertex_map[b]} != set(tgt.ends[t]) or self.vertex_map[a] == self.vertex_map[b]:
                raise ProjectionError(f"edge {e} is not mapped simplicially onto target edge {t}")

    @classmethod
    def over(cls, source: MetricMeasureGraph, target_parent: MetricMeasureGraph, vertex_map, edge_map) -> Projection:
        return cls(source, target_parent, subdivide(target_parent), tuple(vertex_map), tuple(edge_map))

    @cached_property
    def vertex_fibers(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.target.n_vertices)]
        for w, v in enumerate(self.vertex_map):
            out[v].append(w)
        return tuple(tuple(x) for x in out)

    @cached_property
    def edge_fibers(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.target.n_edges)]
        for e, t in enumerate(self.edge_map):
            out[t].append(e)
        return tuple(tuple(x) for x in out)

    def aligned(self, e: int) -> bool:
        """True when source edge ``e`` and its image are oriented the same way."""
        return self.vertex_map[self.source.ends[e][0]] == self.target.ends[self.edge_map[e]][0]

    def oriented_ends(self, e: int) -> tuple[int, int]:
        """Ends of source edge ``e`` listed in the orientation of its image."""
        a, b = self.source.ends[e]
        return (a, b) if self.aligned(e) else (b, a)

    def star_sum(self, w: int, target_edge: int) -> Fraction:
        """Measure of the source edges at ``w`` lying over ``target_edge``."""
        return sum(
            (self.source.measure[e] for e in self.source.incident[w] if self.edge_map[e] == target_edge),
            Fraction(0),
        )

    def with_source_measure(self, measure: Sequence) -> Projection:
        src = self.source
        new_src = MetricMeasureGraph(src.m, src.level, src.n_vertices, src.ends, tuple(measure), src.parent_edge, src.parent)
        return Projection(new_src, self.target_parent, self.target, self.vertex_map, self.edge_map)


def project_point(step: Projection, p: GraphPoint) -> GraphPoint:
    if p.is_vertex:
        return GraphPoint(vertex=step.vertex_map[p.vertex])
    t = step.edge_map[p.edge]
    off = p.offset if step.aligned(p.edge) else step.target.edge_length - p.offset
    return step.target.point(t, off)


def identity_step(G: MetricMeasureGraph) -> Projection:
    """The step whose source is a copy of ``subdivide(G)`` one level deeper, mapped identically."""
    sub = subdivide(G)
    src = MetricMeasureGraph(G.m, G.level + 1, sub.n_vertices, sub.ends, sub.measure)
    return Projection(src, G, sub, tuple(range(sub.n_vertices)), tuple(range(sub.n_edges)))


# -- axioms ------------------------------------------------------------------


@dataclass(frozen=True)
class AxiomParams:
    m: int
    delta: int
    theta: Fraction
    C: Fraction

    @classmethod
    def coerce(cls, params) -> AxiomParams:
        if isinstance(params, AxiomParams):
            return params
        get = params.__getitem__ if isinstance(params, Mapping) else lambda k: getattr(params, k)
        return cls(int(get("m")), int(get("delta")), as_fraction(get("theta")), as_fraction(get("C")))


@dataclass(frozen=True)
class AxiomResult:
    number: int
    name: str
    passed: bool
    witness: str = ""
    value: Fraction | None = None


@dataclass(frozen=True)
class AxiomReport:
    level: int
    results: tuple[AxiomResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, number: int) -> AxiomResult:
        return self.results[number - 1]

    def failures(self) -> list[AxiomResult]:
        return [r for r in self.results if not r.passed]

    def render(self) -> str:
        lines = []
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            extra = f" value={r.value}" if r.value is not None else ""
            wit = f" witness={r.witness}" if r.witness else ""
            lines.append(f"level {self.level} axiom {r.number} ({r.name}): {status}{extra}{wit}")
        return "\n".join(lines)


def check_graph(G: MetricMeasureGraph, params) -> list[AxiomResult]:
    """Degree and adjacent-ratio conditions for a single graph."""
    p = AxiomParams.coerce(params)
    out = []
    deg = G.max_degree
    bad = next((v for v in range(G.n_vertices) if G.degree(v) > p.delta), None)
    ok_len = G.m == p.m
    out.append(
        AxiomResult(
            1,
            "bounded degree, edge length",
            bad is None and ok_len,
            "" if bad is None else f"vertex {bad} has degree {G.degree(bad)}",
            Fraction(deg),
        )
    )
    ratio, wit = max_adjacent_ratio(G)
    out.append(AxiomResult(4, "adjacent measure ratio", ratio <= p.C, "" if ratio <= p.C else wit, ratio))
    return out


def max_adjacent_ratio(G: MetricMeasureGraph) -> tuple[Fraction, str]:
    best, wit = Fraction(1), ""
    for v, inc in enumerate(G.incident):
        ms = [G.measure[e] for e in inc]
        r = max(ms) / min(ms)
        if r > best:
            best, wit = r, f"vertex {v}"
    return best, wit


def _fiber_vertex_diameter(G: MetricMeasureGraph, members: Sequence[int]) -> tuple[int, tuple[int, int]]:
    # max pairwise hop distance inside one vertex fiber
    if len(members) < 2:
        return 0, (members[0], members[0]) if members else (0, 0)
    best, wit = 0, (members[0], members[0])
    for i, a in enumerate(members[:-1]):
        dist = G.hops_to(a, members[i + 1 :])
        for b in members[i + 1 :]:
            if dist[b] > best:
                best, wit = dist[b], (a, b)
    return best, wit


def _edge_pair_sup(A: int, B: int, Cx: int, D: int) -> Fraction:
    # sup over t in [0,1] of min(2t+A, 2(1-t)+B, 1+Cx, 1+D), all in edge lengths
    t = Fraction(B - A + 2, 4)
    t = min(max(t, Fraction(0)), Fraction(1))
    return min(2 * t + A, 2 * (1 - t) + B, Fraction(1 + Cx), Fraction(1 + D))


def fiber_diameters(step: Projection) -> tuple[Fraction, str]:
    """Largest fiber diameter in units of the source edge length, with a witness.

    Vertex fibers are measured directly.  For an edge of the target the fiber
    over an interior point is one point per source edge over it; the supremum of
    the pairwise distances over the whole edge interior is computed exactly.
    """
    src = step.source
    best, wit = Fraction(0), ""
    for v, fib in enumerate(step.vertex_fibers):
        d, (a, b) = _fiber_vertex_diameter(src, fib)
        if d > best:
            best, wit = Fraction(d), f"vertex fiber over {v}: {a},{b}"
    for t, fib in enumerate(step.edge_fibers):
        if len(fib) < 2:
            continue
        oriented = [step.oriented_ends(e) for e in fib]
        for i in range(len(fib)):
            a1, b1 = oriented[i]
            rest = {x for pair in oriented[i + 1 :] for x in pair}
            ha, hb = src.hops_to(a1, rest), src.hops_to(b1, rest)
            for j in range(i + 1, len(fib)):
                a2, b2 = oriented[j]
                d = _edge_pair_sup(ha[a2], hb[b2], ha[b2], hb[a2])
                if d > best:
                    best, wit = d, f"edge fiber over {t}: edges {fib[i]},{fib[j]}"
    return best, wit


def check_axioms(step: Projection, params) -> AxiomReport:
    p = AxiomParams.coerce(params)
    src, tgt = step.source, step.target
    results: list[AxiomResult] = []

    # (1)
    graph_res = {r.number: r for r in check_graph(src, p)}
    r1 = graph_res[1]
    if src.level != step.target_parent.level + 1 or src.m != step.target_parent.m:
        r1 = AxiomResult(1, r1.name, False, "source level/m inconsistent with target", r1.value)
    results.append(r1)

    # (2) openness and surjectivity; simpliciality is enforced on construction
    wit = ""
    for w in range(src.n_vertices):
        v = step.vertex_map[w]
        have = {step.edge_map[e] for e in src.incident[w]}
        missing = [t for t in tgt.incident[v] if t not in have]
        if missing:
            wit = f"vertex {w} has no edge over target edge {missing[0]}"
            break
    if not wit:
        unhit = [t for t, fib in enumerate(step.edge_fibers) if not fib]
        if unhit:
            wit = f"target edge {unhit[0]} not covered"
    results.append(AxiomResult(2, "open simplicial surjection", not wit, wit))

    # (3)
    diam, wit = fiber_diameters(step)
    ok = diam <= p.theta
    results.append(AxiomResult(3, "fiber diameter", ok, "" if ok else wit, diam))

    # (4)
    results.append(graph_res[4])

    # (5)
    wit = ""
    for t, fib in enumerate(step.edge_fibers):
        s = sum((src.measure[e] for e in fib), Fraction(0))
        if s != tgt.measure[t]:
            wit = f"target edge {t}: fiber measure {s} != {tgt.measure[t]}"
            break
    results.append(AxiomResult(5, "fiber measure", not wit, wit))

    # (6)
    w6 = star_consistency_violation(step)
    results.append(AxiomResult(6, "star consistency", w6 is None, w6 or ""))
    return AxiomReport(src.level, tuple(results))


def star_consistency_violation(step: Projection) -> str | None:
    tgt = step.target
    for w in range(step.source.n_vertices):
        v = step.vertex_map[w]
        vals = {t: step.star_sum(w, t) / tgt.measure[t] for t in tgt.incident[v]}
        if len(set(vals.values())) > 1:
            desc = ", ".join(f"{t}:{x}" for t, x in vals.items())
            return f"vertex {w} star ratios {desc}"
    return None


# -- fuzzy section and averaging ----------------------------------------------


@dataclass(frozen=True)
class FuzzySection:
    edge_weight: tuple[Fraction, ...]
    vertex_weight: tuple[Fraction, ...]

    @property
    def min_weight(self) -> Fraction:
        return min(min(self.edge_weight), min(self.vertex_weight))


def fuzzy_section(step: Projection) -> FuzzySection:
    src, tgt = step.source, step.target
    ew = tuple(src.measure[e] / tgt.measure[step.edge_map[e]] for e in range(src.n_edges))
    vw = []
    for w in range(src.n_vertices):
        v = step.vertex_map[w]
        vals = {step.star_sum(w, t) / tgt.measure[t] for t in tgt.incident[v]}
        if len(vals) != 1:
            raise AxiomViolation(f"star sums at vertex {w} are inconsistent: {sorted(vals)}")
        vw.append(vals.pop())
    return FuzzySection(ew, tuple(vw))


def average_function(step: Projection, f: PLFunction, section: FuzzySection | None = None) -> PLFunction:
    """Fiber average of ``f`` (piecewise linear on the source) as a function on the target."""
    if f.base != step.source:
        raise GraphError("function must be defined on the source graph of the step")
    if section is None:
        section = fuzzy_section(step)
    vals = []
    for fib in step.vertex_fibers:
        vals.append(sum((section.vertex_weight[w] * f.values[w] for w in fib), Fraction(0)))
    return PLFunction(step.target, tuple(vals))


def average_at(step: Projection, f: PLFunction, target_edge: int, offset, section: FuzzySection | None = None) -> Fraction:
    """Direct fiber average at a point of ``target_edge`` (no vertex interpolation)."""
    if section is None:
        section = fuzzy_section(step)
    offset = as_fraction(offset)
    total = Fraction(0)
    L = step.source.edge_length
    for e in step.edge_fibers[target_edge]:
        a, b = step.oriented_ends(e)
        val = f.values[a] + (f.values[b] - f.values[a]) * offset / L
        total += section.edge_weight[e] * val
    return total


# -- measure feasibility ------------------------------------------------------


@dataclass(frozen=True)
class MeasureSolution:
    measure: tuple[Fraction, ...]
    min_weight: Fraction


@dataclass(frozen=True)
class Infeasible:
    reason: str
    forced_zero: tuple[int, ...] = ()
    best_min_weight: Fraction = Fraction(0)

    def __bool__(self) -> bool:
        return False


def _target_measure(step: Projection, target_measure) -> tuple[Fraction, ...]:
    if target_measure is None:
        return step.target.measure
    tm = tuple(as_fraction(x) for x in target_measure)
    if len(tm) == step.target.n_edges:
        return tm
    if len(tm) == step.target_parent.n_edges:
        m = step.target_parent.m
        return tuple(tm[step.target.parent_edge[t]] / m for t in range(step.target.n_edges))
    raise ProjectionError("target measure has the wrong number of entries")


def _constraints(step: Projection, tm: Sequence[Fraction]):
    src, tgt = step.source, step.target
    n = src.n_edges
    eq_rows, eq_rhs = [], []
    for t, fib in enumerate(step.edge_fibers):
        row = [Fraction(0)] * (n + 1)
        for e in fib:
            row[e] = Fraction(1)
        eq_rows.append(row)
        eq_rhs.append(tm[t])
    for w in range(src.n_vertices):
        star = tgt.incident[step.vertex_map[w]]
        for t1, t2 in zip(star, star[1:]):
            row = [Fraction(0)] * (n + 1)
            for e in src.incident[w]:
                if step.edge_map[e] == t1:
                    row[e] += 1 / tm[t1]
                elif step.edge_map[e] == t2:
                    row[e] -= 1 / tm[t2]
            if any(row):
                eq_rows.append(row)
                eq_rhs.append(Fraction(0))
    return eq_rows, eq_rhs


def _frac(v) -> Fraction:
    from sympy import Rational

    v = Rational(v)
    return Fraction(int(v.p), int(v.q))


def _linprog(c, A, b, A_eq, b_eq):
    from sympy import Matrix, Rational
    from sympy.solvers.simplex import InfeasibleLPError, linprog

    def mat(rows):
        return Matrix([[Rational(x.numerator, x.denominator) for x in r] for r in rows])

    def vec(xs):
        return Matrix([Rational(x.numerator, x.denominator) for x in xs])

    if not A:
        A, b = [[Fraction(0)] * len(c)], [Fraction(0)]
    try:
        opt, x = linprog(vec(c), mat(A), vec(b), mat(A_eq), vec(b_eq))
    except InfeasibleLPError:
        return None
    return _frac(opt), [_frac(v) for v in x]


def solve_measure(step: Projection, target_measure=None, floor=0) -> MeasureSolution | Infeasible:
    """Source measures maximising the smallest fuzzy weight, or an infeasibility witness.

    Variables are the source edge measures plus a slack ``t``; the program
    maximises ``t`` subject to the fiber-sum and star-consistency equalities
    and ``measure(e) / target(e) >= t`` for every edge.
    """
    floor = as_fraction(floor)
    tm = _target_measure(step, target_measure)
    n = step.source.n_edges
    eq_rows, eq_rhs = _constraints(step, tm)
    A, b = [], []
    for e in range(n):
        row = [Fraction(0)] * (n + 1)
        row[e] = -1 / tm[step.edge_map[e]]
        row[n] = Fraction(1)
        A.append(row)
        b.append(Fraction(0))
    c = [Fraction(0)] * n + [Fraction(-1)]
    res = _linprog(c, A, b, eq_rows, eq_rhs)
    if res is None:
        return Infeasible("fiber-sum and star-consistency equalities have no nonnegative solution")
    opt, x = res
    best = -opt
    if best > 0 and best >= floor:
        measure = tuple(x[:n])
        sol = MeasureSolution(measure, best)
        return sol
    forced = []
    for e in range(n):
        ce = [Fraction(0)] * (n + 1)
        ce[e] = Fraction(-1)
        r = _linprog(ce, [], [], eq_rows, eq_rhs)
        if r is not None and r[0] == 0:
            forced.append(e)
    if best <= 0:
        reason = "every admissible measure vanishes on some source edge"
    else:
        reason = f"best achievable minimum weight {best} is below the floor {floor}"
    return Infeasible(reason, tuple(forced), best)


# -- a step whose combinatorics admits no measure ----------------------------


def nontrivial_example(m: int = 2) -> Projection:
    """Two parallel unit edges ``e``, ``f`` between ``x`` and ``y`` covered by five strands.

    Fibers are ``{p, q}`` over ``x`` and ``{r, s}`` over ``y``; strands run
    p-r and q-s over ``e`` and p-r, q-r, q-s over ``f``.  Any measure with the
    right fiber sums breaks star consistency, since at ``r`` the q-r strand
    would need zero measure.
    """
    base = MetricMeasureGraph(m, 0, 2, ((0, 1), (0, 1)), (Fraction(1), Fraction(1)))
    target = subdivide(base)
    p, q, r, s = 0, 1, 2, 3
    strands = [(0, p, r), (0, q, s), (1, p, r), (1, q, r), (1, q, s)]
    per_edge = {0: Fraction(1, 2), 1: Fraction(1, 3)}
    ends, measure, emap = [], [], []
    vmap = [0, 0, 1, 1]
    n = 4
    for parent, a, b in strands:
        chain = [a] + list(range(n, n + m - 1)) + [b]
        for j in range(1, m):
            vmap.append(subdivision_vertex(base, parent, j))
        n += m - 1
        for j in range(m):
            ends.append((chain[j], chain[j + 1]))
            measure.append(per_edge[parent] / m)
            emap.append(parent * m + j)
    src = MetricMeasureGraph(m, 1, n, tuple(ends), tuple(measure))
    return Projection(src, base, target, tuple(vmap), tuple(emap))


def fiber_cardinality_bound(delta: int, theta) -> int:
    return delta ** (math.ceil(as_fraction(theta)) + 1)
