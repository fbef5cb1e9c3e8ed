"""Lifts of vertex paths through projection steps and the probability measure on them.

A lift of a vertex path in the subdivided target is an edge path in the source
that projects edge by edge onto it.  The lift measure of a lift is the product
of its fuzzy edge weights divided by the product of the fuzzy weights of its
interior vertices; it can equivalently be sampled by a Markov chain whose
transition probabilities are ratios of edge measures.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .graph_core import MetricMeasureGraph, PLFunction, edge_integral
from .inverse_step import FuzzySection, Projection, fuzzy_section


class PathError(ValueError):
    pass


class GuardExceeded(RuntimeError):
    """Raised when a lift enumeration would exceed the configured size guard."""


def lift_weight(edge_weights: Iterable[Fraction], vertex_weights: Iterable[Fraction]) -> Fraction:
    num = Fraction(1)
    for w in edge_weights:
        num *= w
    den = Fraction(1)
    for w in vertex_weights:
        den *= w
    return num / den


@dataclass(frozen=True)
class VertexPath:
    vertices: tuple[int, ...]
    edges: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))
        if len(self.vertices) != len(self.edges) + 1 or not self.edges:
            raise PathError("a vertex path needs at least one edge and one more vertex than edges")

    def validate(self, G: MetricMeasureGraph) -> None:
        for j, e in enumerate(self.edges):
            if set(G.ends[e]) != {self.vertices[j], self.vertices[j + 1]}:
                raise PathError(f"edge {e} does not join {self.vertices[j]} and {self.vertices[j + 1]}")

    @classmethod
    def from_edges(cls, G: MetricMeasureGraph, start: int, edges: Sequence[int]) -> VertexPath:
        verts = [start]
        for e in edges:
            verts.append(G.other_end(e, verts[-1]))
        return cls(tuple(verts), tuple(edges))

    @classmethod
    def from_vertices(cls, G: MetricMeasureGraph, vertices: Sequence[int]) -> VertexPath:
        """Path through ``vertices``; fails if some consecutive pair is joined by parallel edges."""
        edges = []
        for a, b in zip(vertices, vertices[1:]):
            cands = [e for e in G.incident[a] if G.other_end(e, a) == b]
            if len(cands) != 1:
                raise PathError(f"vertices {a},{b} are joined by {len(cands)} edges; give edges explicitly")
            edges.append(cands[0])
        return cls(tuple(vertices), tuple(edges))

    def reversed(self) -> VertexPath:
        return VertexPath(self.vertices[::-1], self.edges[::-1])

    def __len__(self) -> int:
        return len(self.edges)


def subdivided_path(G: MetricMeasureGraph, path: VertexPath) -> VertexPath:
    """The same path in ``subdivide(G)``, following the sub-edge numbering."""
    from .graph_core import subdivision_vertex

    m = G.m
    verts = [path.vertices[0]]
    edges = []
    for j, e in enumerate(path.edges):
        forward = G.ends[e][0] == path.vertices[j]
        order = range(m) if forward else range(m - 1, -1, -1)
        for k in order:
            edges.append(e * m + k)
            verts.append(subdivision_vertex(G, e, k + 1 if forward else k))
    return VertexPath(tuple(verts), tuple(edges))


def edge_path(G: MetricMeasureGraph, e: int) -> VertexPath:
    """The single edge ``e`` of ``G`` subdivided once, traversed from ``ends[e][0]``."""
    a, _ = G.ends[e]
    return subdivided_path(G, VertexPath((a, G.other_end(e, a)), (e,)))


# -- single step --------------------------------------------------------------


def _start_vertex(step: Projection, e: int, target_vertex: int) -> int:
    a, b = step.source.ends[e]
    return a if step.vertex_map[a] == target_vertex else b


def enumerate_lifts(step: Projection, path: VertexPath, guard: int | None = None) -> list[tuple[int, ...]]:
    """All source edge paths over ``path``, in lexicographic order of edge ids."""
    path.validate(step.target)
    src = step.source
    partial = [((e,), src.other_end(e, _start_vertex(step, e, path.vertices[0]))) for e in step.edge_fibers[path.edges[0]]]
    for j in range(1, len(path.edges)):
        t = path.edges[j]
        nxt = []
        for lift, w in partial:
            for e in src.incident[w]:
                if step.edge_map[e] == t:
                    nxt.append((lift + (e,), src.other_end(e, w)))
        if guard is not None and len(nxt) > guard:
            raise GuardExceeded(f"more than {guard} partial lifts")
        partial = nxt
    return sorted(lift for lift, _ in partial)


def lift_vertices(step: Projection, path: VertexPath, lift: Sequence[int]) -> tuple[int, ...]:
    src = step.source
    verts = [_start_vertex(step, lift[0], path.vertices[0])]
    for e in lift:
        verts.append(src.other_end(e, verts[-1]))
    return tuple(verts)


@dataclass(frozen=True)
class LiftMeasure:
    path: VertexPath
    lifts: tuple[tuple[int, ...], ...]
    omega: tuple[Fraction, ...]

    def __len__(self) -> int:
        return len(self.lifts)

    @property
    def total(self) -> Fraction:
        return sum(self.omega, Fraction(0))

    def as_dict(self) -> dict[tuple[int, ...], Fraction]:
        return dict(zip(self.lifts, self.omega))


def omega(step: Projection, path: VertexPath, section: FuzzySection | None = None, guard: int | None = None) -> LiftMeasure:
    if section is None:
        section = fuzzy_section(step)
    lifts = enumerate_lifts(step, path, guard)
    values = []
    for lift in lifts:
        verts = lift_vertices(step, path, lift)
        values.append(lift_weight((section.edge_weight[e] for e in lift), (section.vertex_weight[w] for w in verts[1:-1])))
    return LiftMeasure(path, tuple(lifts), tuple(values))


def edge_marginal(lm: LiftMeasure, edge: int, position: int | None = None) -> Fraction:
    """Total lift measure of the lifts that use ``edge`` (at ``position`` if given)."""
    if position is None:
        positions = {j for lift in lm.lifts for j, e in enumerate(lift) if e == edge}
        if not positions:
            raise PathError(f"edge {edge} does not lie on any lift of the path")
        if len(positions) > 1:
            raise PathError(f"edge {edge} occurs at several positions; pass position explicitly")
        position = positions.pop()
    if not 0 <= position < len(lm.path.edges):
        raise PathError("position outside the path")
    return sum((w for lift, w in zip(lm.lifts, lm.omega) if lift[position] == edge), Fraction(0))


# -- several steps -------------------------------------------------------------


def omega_multilevel(system, k: int, i: int, path: VertexPath, guard: int = 10**6) -> LiftMeasure:
    """Lift measure on lifts into ``X_i`` of a vertex path in the subdivided ``X_k``.

    Built by conditional chaining: each lift into ``X_{j+1}`` is subdivided and
    lifted again through the next step, multiplying the lift measures.
    """
    if not 0 <= k < i <= len(system.steps):
        raise PathError(f"need 0 <= k < i <= {len(system.steps)}")
    step = system.steps[k]
    lm = omega(step, path, system.fuzzy[k] if system.fuzzy else None, guard)
    current = [(lift, w, lift_vertices(step, path, lift)[0]) for lift, w in zip(lm.lifts, lm.omega)]
    for j in range(k + 1, i):
        step = system.steps[j]
        G = system.levels[j]
        section = system.fuzzy[j] if system.fuzzy else None
        nxt = []
        for lift, w, start in current:
            sub = subdivided_path(G, VertexPath.from_edges(G, start, lift))
            inner = omega(step, sub, section, guard)
            for l2, w2 in zip(inner.lifts, inner.omega):
                nxt.append((l2, w * w2, lift_vertices(step, sub, l2)[0]))
            if len(nxt) > guard:
                raise GuardExceeded(f"more than {guard} lifts into level {j + 1}")
        current = nxt
    current.sort(key=lambda x: x[0])
    return LiftMeasure(path, tuple(x[0] for x in current), tuple(x[1] for x in current))


def composite_edge_map(system, k: int, i: int) -> tuple[int, ...]:
    """Edge of ``X_k`` under each edge of ``X_i`` (identity when ``i == k``)."""
    emap = tuple(range(system.levels[i].n_edges))
    for j in range(i - 1, k - 1, -1):
        step = system.steps[j]
        down = tuple(step.target.parent_edge[step.edge_map[e]] for e in range(step.source.n_edges))
        emap = tuple(down[x] for x in emap)
    return emap


@dataclass(frozen=True)
class PushforwardResult:
    passed: bool
    lhs: dict[int, Fraction]
    rhs: dict[int, Fraction]
    n_lifts: int

    @property
    def max_discrepancy(self) -> Fraction:
        return max((abs(self.lhs[e] - self.rhs[e]) for e in self.rhs), default=Fraction(0))


def verify_pushforward(system, k: int, i: int, e: int, path: VertexPath | None = None, guard: int = 10**6) -> PushforwardResult:
    """Compare the lift-measure pushforward with the normalised measure on the preimage of ``e``.

    For every edge ``f`` of ``X_i`` over ``e`` the left side is the lift
    measure of the lifts through ``f`` (with multiplicity) times the edge
    length ``m**-i``; the right side is ``m**-k * mu_i(f) / mu_i(preimage of e)``.
    ``path`` defaults to ``e`` itself; any path in the subdivided ``X_k``
    crossing ``e`` exactly once may be given instead.
    """
    Gk = system.levels[k]
    if path is None:
        path = edge_path(Gk, e)
    m = Gk.m
    lm = omega_multilevel(system, k, i, path, guard)
    emap = composite_edge_map(system, k, i)
    Xi = system.levels[i]
    fiber = [f for f in range(Xi.n_edges) if emap[f] == e]
    total = sum((Xi.measure[f] for f in fiber), Fraction(0))
    length = Fraction(1, m**i)
    lhs = {f: Fraction(0) for f in fiber}
    for lift, w in zip(lm.lifts, lm.omega):
        for f in lift:
            if f in lhs:
                lhs[f] += w * length
    rhs = {f: Fraction(1, m**k) * Xi.measure[f] / total for f in fiber}
    return PushforwardResult(lhs == rhs, lhs, rhs, len(lm))


# -- sampling ------------------------------------------------------------------


def _uniform(rng: random.Random) -> Fraction:
    return Fraction(rng.getrandbits(64), 1 << 64)


def _choose(rng: random.Random, options: Sequence[int], weights: Sequence[Fraction]) -> int:
    total = sum(weights, Fraction(0))
    u = _uniform(rng) * total
    acc = Fraction(0)
    for e, w in zip(options, weights):
        acc += w
        if u < acc:
            return e
    return options[-1]


def sample_lift(step: Projection, path: VertexPath, seed: int | random.Random = 0) -> tuple[int, ...]:
    """Draw one lift; the first edge by fuzzy edge weight, then by ratios of edge measures."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    src = step.source
    first = step.edge_fibers[path.edges[0]]
    e = _choose(rng, first, [src.measure[x] for x in first])
    lift = [e]
    w = src.other_end(e, _start_vertex(step, e, path.vertices[0]))
    for t in path.edges[1:]:
        cands = [x for x in src.incident[w] if step.edge_map[x] == t]
        e = _choose(rng, cands, [src.measure[x] for x in cands])
        lift.append(e)
        w = src.other_end(e, w)
    return tuple(lift)


def sample_lifts(step: Projection, path: VertexPath, n: int, seed: int = 0) -> list[tuple[int, ...]]:
    rng = random.Random(seed)
    return [sample_lift(step, path, rng) for _ in range(n)]


# -- averages over adjacent fibers ----------------------------------------------


@dataclass(frozen=True)
class AdjacentAverage:
    difference: Fraction
    bound: Fraction
    constant: Fraction

    @property
    def holds(self) -> bool:
        return self.difference <= self.bound


def adjacent_average_check(system, k: int, i: int, e0: int, e1: int, u: PLFunction) -> AdjacentAverage:
    """Difference of the averages of ``u`` over the preimages of two adjacent edges of ``X_k``.

    ``u`` is piecewise linear on ``X_i``; its absolute slope is used as the
    upper gradient.  The bound is ``const * m**-k`` times the average of the
    gradient over both preimages, with ``const = (mu(Z0) + mu(Z1)) / min(mu(Z0), mu(Z1))``.
    """
    Xi = system.levels[i]
    if u.base != Xi:
        raise PathError("function must live on X_i")
    if not set(system.levels[k].ends[e0]) & set(system.levels[k].ends[e1]) or e0 == e1:
        raise PathError("edges must be distinct and share a vertex")
    emap = composite_edge_map(system, k, i)
    Z = [[f for f in range(Xi.n_edges) if emap[f] == e] for e in (e0, e1)]
    mass = [sum((Xi.measure[f] for f in z), Fraction(0)) for z in Z]
    avg = [sum((edge_integral(u, f) for f in z), Fraction(0)) / mu for z, mu in zip(Z, mass)]
    g_avg = sum((abs(u.slope(f)) * Xi.measure[f] for z in Z for f in z), Fraction(0)) / sum(mass)
    const = sum(mass) / min(mass)
    m = Xi.m
    return AdjacentAverage(abs(avg[0] - avg[1]), const * Fraction(1, m**k) * g_avg, const)
