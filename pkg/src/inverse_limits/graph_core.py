"""Metric measure graphs with exact rational geometry.

A level-``i`` graph has every edge of length ``m**-i``; the measure restricted
to an edge is a constant multiple of arclength.  Vertices and edges are plain
integers, so parallel edges are distinct simply because they have distinct
indices.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence


class GraphError(ValueError):
    """Raised when a graph violates a structural invariant."""


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floats are not accepted; pass an int, Fraction or 'p/q' string")
    return Fraction(x)


@dataclass(frozen=True)
class GraphPoint:
    """A point of a graph: either a vertex, or an edge plus an interior offset.

    Build these through :meth:`MetricMeasureGraph.point` so that offsets at the
    ends of an edge collapse to the vertex; two spellings of one vertex then
    compare equal.
    """

    vertex: int | None = None
    edge: int | None = None
    offset: Fraction = Fraction(0)

    @property
    def is_vertex(self) -> bool:
        return self.vertex is not None

    def __repr__(self) -> str:
        if self.vertex is not None:
            return f"GraphPoint(vertex={self.vertex})"
        return f"GraphPoint(edge={self.edge}, offset={self.offset})"


@dataclass(frozen=True)
class MetricMeasureGraph:
    m: int
    level: int
    n_vertices: int
    ends: tuple[tuple[int, int], ...]
    measure: tuple[Fraction, ...]
    # set on graphs produced by subdivide(): sub-edge -> edge of `parent`
    parent_edge: tuple[int, ...] | None = None
    parent: MetricMeasureGraph | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ends", tuple((int(a), int(b)) for a, b in self.ends))
        object.__setattr__(self, "measure", tuple(as_fraction(x) for x in self.measure))
        if self.m < 2:
            raise GraphError(f"subdivision parameter m={self.m} must be >= 2")
        if self.level < 0:
            raise GraphError("level must be >= 0")
        if len(self.ends) != len(self.measure):
            raise GraphError("one measure per edge required")
        if self.n_vertices < 1 or not self.ends:
            raise GraphError("graph must have at least one edge")
        for e, (a, b) in enumerate(self.ends):
            if not (0 <= a < self.n_vertices and 0 <= b < self.n_vertices):
                raise GraphError(f"edge {e} has an endpoint outside the vertex range")
            if a == b:
                raise GraphError(f"edge {e} is a self-loop")
        for e, mu in enumerate(self.measure):
            if mu <= 0:
                raise GraphError(f"edge {e} has non-positive measure {mu}")
        if any(not inc for inc in self.incident):
            v = next(v for v, inc in enumerate(self.incident) if not inc)
            raise GraphError(f"vertex {v} has degree 0")
        if -1 in self.hops_from(0):
            raise GraphError("graph is not connected")

    # -- combinatorics -------------------------------------------------

    @property
    def n_edges(self) -> int:
        return len(self.ends)

    @property
    def edge_length(self) -> Fraction:
        return Fraction(1, self.m**self.level)

    @cached_property
    def incident(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for e, (a, b) in enumerate(self.ends):
            inc[a].append(e)
            inc[b].append(e)
        return tuple(tuple(x) for x in inc)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(self.other_end(e, v) for e in inc) for v, inc in enumerate(self.incident))

    def degree(self, v: int) -> int:
        return len(self.incident[v])

    @property
    def max_degree(self) -> int:
        return max(len(inc) for inc in self.incident)

    def other_end(self, e: int, v: int) -> int:
        a, b = self.ends[e]
        if v == a:
            return b
        if v == b:
            return a
        raise GraphError(f"vertex {v} is not an end of edge {e}")

    @property
    def total_measure(self) -> Fraction:
        return sum(self.measure, Fraction(0))

    def density(self, e: int) -> Fraction:
        return self.measure[e] / self.edge_length

    # -- points ----------------------------------------------------------

    def point(self, edge: int, offset) -> GraphPoint:
        """Point at ``offset`` along ``edge`` measured from ``ends[edge][0]``."""
        offset = as_fraction(offset)
        if not 0 <= offset <= self.edge_length:
            raise GraphError(f"offset {offset} outside edge {edge}")
        a, b = self.ends[edge]
        if offset == 0:
            return GraphPoint(vertex=a)
        if offset == self.edge_length:
            return GraphPoint(vertex=b)
        return GraphPoint(edge=edge, offset=offset)

    def vertex_point(self, v: int) -> GraphPoint:
        if not 0 <= v < self.n_vertices:
            raise GraphError(f"no vertex {v}")
        return GraphPoint(vertex=v)

    def midpoint(self, e: int) -> GraphPoint:
        return self.point(e, self.edge_length / 2)

    # -- metric ----------------------------------------------------------

    def hops_from(self, v: int) -> list[int]:
        """Breadth-first hop counts from ``v``; ``-1`` marks unreachable vertices."""
        cache = self._hop_cache
        if v not in cache:
            dist = [-1] * self.n_vertices
            dist[v] = 0
            queue = deque([v])
            nbrs = self.neighbors
            while queue:
                x = queue.popleft()
                dx = dist[x] + 1
                for y in nbrs[x]:
                    if dist[y] < 0:
                        dist[y] = dx
                        queue.append(y)
            if len(cache) > 4096:
                cache.clear()
            cache[v] = dist
        return cache[v]

    @cached_property
    def _hop_cache(self) -> dict[int, list[int]]:
        return {}

    def hops_to(self, v: int, targets) -> dict[int, int]:
        """Hop counts from ``v`` to each of ``targets``; the search stops once all are found."""
        want = set(targets)
        found = {}
        if v in want:
            found[v] = 0
        if len(found) == len(want):
            return found
        seen = {v: 0}
        queue = deque([v])
        nbrs = self.neighbors
        while queue:
            x = queue.popleft()
            dx = seen[x] + 1
            for y in nbrs[x]:
                if y not in seen:
                    seen[y] = dx
                    if y in want:
                        found[y] = dx
                        if len(found) == len(want):
                            return found
                    queue.append(y)
        return found

    def vertex_distances(self, p: GraphPoint) -> list[Fraction]:
        """Exact path-metric distance from ``p`` to every vertex."""
        L = self.edge_length
        if p.is_vertex:
            return [h * L for h in self.hops_from(p.vertex)]
        a, b = self.ends[p.edge]
        ha, hb = self.hops_from(a), self.hops_from(b)
        t = p.offset
        return [min(t + x * L, (L - t) + y * L) for x, y in zip(ha, hb)]

    def distance(self, p: GraphPoint, q: GraphPoint) -> Fraction:
        return shortest_distance(self, p, q)

    @cached_property
    def diameter(self) -> Fraction:
        """Diameter over all points (the supremum is attained on vertices or edge points)."""
        best = Fraction(0)
        L = self.edge_length
        hops = [self.hops_from(v) for v in range(self.n_vertices)]
        for e, (a, b) in enumerate(self.ends):
            for f, (c, d) in enumerate(self.ends):
                # farthest pair of points on e x f; distance is the min of four
                # tent functions, maximised over the square
                dac, dad, dbc, dbd = hops[a][c], hops[a][d], hops[b][c], hops[b][d]
                best = max(best, _edge_pair_max(dac, dad, dbc, dbd, e == f) * L)
        return best


def _edge_pair_max(dac: int, dad: int, dbc: int, dbd: int, same: bool) -> Fraction:
    # Max over s,t in [0,1] of a concave piecewise-affine function.  Every piece
    # has the form +-s +-t + integer, so the maximum sits at a point whose
    # coordinates are multiples of 1/4.
    best = Fraction(0)
    grid = [Fraction(k, 4) for k in range(5)]
    for s in grid:
        for t in grid:
            d = min(dac + s + t, dad + s + 1 - t, dbc + 1 - s + t, dbd + 2 - s - t)
            if same:
                d = min(d, abs(s - t))
            best = max(best, d)
    return best


# -- subdivision ---------------------------------------------------------


def subdivision_vertex(G: MetricMeasureGraph, e: int, j: int) -> int:
    """Vertex of ``subdivide(G)`` at index ``j`` (0..m) along edge ``e``."""
    a, b = G.ends[e]
    if j == 0:
        return a
    if j == G.m:
        return b
    return G.n_vertices + e * (G.m - 1) + (j - 1)


def subdivide(G: MetricMeasureGraph) -> MetricMeasureGraph:
    """Split every edge into ``m`` edges of length ``m**-(level+1)``.

    Sub-edge ``e*m + j`` is the ``j``-th piece of ``e`` counted from
    ``ends[e][0]`` and carries measure ``measure[e] / m``.
    """
    m = G.m
    ends = []
    measure = []
    parent = []
    for e in range(G.n_edges):
        piece = G.measure[e] / m
        for j in range(m):
            ends.append((subdivision_vertex(G, e, j), subdivision_vertex(G, e, j + 1)))
            measure.append(piece)
            parent.append(e)
    return MetricMeasureGraph(
        m=m,
        level=G.level + 1,
        n_vertices=G.n_vertices + G.n_edges * (m - 1),
        ends=tuple(ends),
        measure=tuple(measure),
        parent_edge=tuple(parent),
        parent=G,
    )


def to_subdivision(sub: MetricMeasureGraph, p: GraphPoint) -> GraphPoint:
    """Re-express a point of ``sub.parent`` as a point of ``sub``."""
    if sub.parent is None:
        raise GraphError("graph is not a subdivision")
    if p.is_vertex:
        return GraphPoint(vertex=p.vertex)
    L = sub.edge_length
    j = int(p.offset // L)
    j = min(j, sub.m - 1)
    return sub.point(p.edge * sub.m + j, p.offset - j * L)


def from_subdivision(sub: MetricMeasureGraph, p: GraphPoint) -> GraphPoint:
    """Re-express a point of ``sub`` as a point of ``sub.parent``."""
    parent = sub.parent
    if parent is None:
        raise GraphError("graph is not a subdivision")
    L = sub.edge_length
    if p.is_vertex:
        v = p.vertex
        if v < parent.n_vertices:
            return GraphPoint(vertex=v)
        k = v - parent.n_vertices
        e, j = divmod(k, sub.m - 1)
        return parent.point(e, (j + 1) * L)
    e, j = divmod(p.edge, sub.m)
    return parent.point(e, j * L + p.offset)


def descend(G: MetricMeasureGraph, base: MetricMeasureGraph, p: GraphPoint) -> GraphPoint:
    """Map a point of ``G`` to ``base``, where ``base`` is an iterated subdivision of ``G``."""
    chain = []
    g = base
    while g is not G and g != G:
        chain.append(g)
        g = g.parent
        if g is None:
            raise GraphError("base is not a subdivision of G")
    for sub in reversed(chain):
        p = to_subdivision(sub, p)
    return p


# -- shortest paths and balls ----------------------------------------------


def shortest_distance(G: MetricMeasureGraph, p: GraphPoint, q: GraphPoint) -> Fraction:
    if p == q:
        return Fraction(0)
    dist = G.vertex_distances(p)
    if q.is_vertex:
        return dist[q.vertex]
    a, b = G.ends[q.edge]
    L = G.edge_length
    best = min(dist[a] + q.offset, dist[b] + L - q.offset)
    if not p.is_vertex and p.edge == q.edge:
        best = min(best, abs(p.offset - q.offset))
    return best


def _merge(intervals: Iterable[tuple[Fraction, Fraction]]) -> list[tuple[Fraction, Fraction]]:
    out: list[list[Fraction]] = []
    for lo, hi in sorted(iv for iv in intervals if iv[1] > iv[0]):
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(lo, hi) for lo, hi in out]


def ball_pieces(G: MetricMeasureGraph, center: GraphPoint, r) -> list[tuple[int, Fraction, Fraction]]:
    """Intersection of the open ball ``B_r(center)`` with each edge.

    Returns ``(edge, s0, s1)`` triples, offsets measured from ``ends[edge][0]``.
    Endpoints are irrelevant for measure, so pieces are reported closed.
    """
    r = as_fraction(r)
    if r <= 0:
        raise GraphError("radius must be positive")
    L = G.edge_length
    dist = G.vertex_distances(center)
    out = []
    for e, (a, b) in enumerate(G.ends):
        da, db = dist[a], dist[b]
        ivs = []
        if r > da:
            ivs.append((Fraction(0), min(L, r - da)))
        if r > db:
            ivs.append((max(Fraction(0), L - (r - db)), L))
        if not center.is_vertex and center.edge == e:
            t = center.offset
            ivs.append((max(Fraction(0), t - r), min(L, t + r)))
        for lo, hi in _merge(ivs):
            out.append((e, lo, hi))
    return out


def ball_measure(G: MetricMeasureGraph, center: GraphPoint, r) -> Fraction:
    L = G.edge_length
    return sum((G.measure[e] * (s1 - s0) / L for e, s0, s1 in ball_pieces(G, center, r)), Fraction(0))


# -- piecewise linear functions --------------------------------------------


@dataclass(frozen=True)
class PLFunction:
    """Continuous function, affine on every edge of ``base``."""

    base: MetricMeasureGraph
    values: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(as_fraction(v) for v in self.values))
        if len(self.values) != self.base.n_vertices:
            raise GraphError("PLFunction needs one value per vertex of its base")

    @classmethod
    def from_callable(cls, base: MetricMeasureGraph, fn) -> PLFunction:
        return cls(base, tuple(fn(v) for v in range(base.n_vertices)))

    @classmethod
    def constant(cls, base: MetricMeasureGraph, c) -> PLFunction:
        return cls(base, (as_fraction(c),) * base.n_vertices)

    def slope(self, e: int) -> Fraction:
        """Signed slope along ``e`` in the direction ``ends[e][0] -> ends[e][1]``."""
        a, b = self.base.ends[e]
        return (self.values[b] - self.values[a]) / self.base.edge_length

    def __call__(self, p: GraphPoint) -> Fraction:
        if p.is_vertex:
            return self.values[p.vertex]
        a, _ = self.base.ends[p.edge]
        return self.values[a] + self.slope(p.edge) * p.offset

    def _check(self, other: PLFunction) -> None:
        if other.base != self.base:
            raise GraphError("functions live on different graphs")

    def __add__(self, other):
        if isinstance(other, PLFunction):
            self._check(other)
            return PLFunction(self.base, tuple(x + y for x, y in zip(self.values, other.values)))
        c = as_fraction(other)
        return PLFunction(self.base, tuple(x + c for x in self.values))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, PLFunction):
            return self + (-1) * other
        return self + (-as_fraction(other))

    def __mul__(self, c):
        c = as_fraction(c)
        return PLFunction(self.base, tuple(c * x for x in self.values))

    __rmul__ = __mul__

    def refine(self) -> PLFunction:
        """The same function expressed on ``subdivide(base)``."""
        sub = subdivide(self.base)
        G = self.base
        vals = list(self.values)
        for e, (a, b) in enumerate(G.ends):
            for j in range(1, G.m):
                vals.append(self.values[a] + (self.values[b] - self.values[a]) * Fraction(j, G.m))
        return PLFunction(sub, tuple(vals))


def pointwise_lip(G: MetricMeasureGraph, f: PLFunction, p: GraphPoint) -> Fraction:
    """Pointwise Lipschitz constant: |slope| inside an edge, max incident |slope| at a vertex."""
    q = descend(G, f.base, p)
    base = f.base
    if q.is_vertex:
        return max(abs(f.slope(e)) for e in base.incident[q.vertex])
    return abs(f.slope(q.edge))


def _piece_integral(f: PLFunction, e: int, s0: Fraction, s1: Fraction, shift: Fraction) -> Fraction:
    # integral of |f - shift| d(arclength) over [s0, s1] on edge e
    a, _ = f.base.ends[e]
    k = f.slope(e)
    g0 = f.values[a] + k * s0 - shift
    g1 = f.values[a] + k * s1 - shift
    length = s1 - s0
    if (g0 >= 0) == (g1 >= 0) or g0 == 0 or g1 == 0:
        return abs(g0 + g1) / 2 * length
    return (g0 * g0 + g1 * g1) / (2 * abs(g1 - g0)) * length


def _ball_on_base(G: MetricMeasureGraph, f: PLFunction, center: GraphPoint, r):
    base = f.base
    return base, ball_pieces(base, descend(G, base, center), r)


def ball_mean(G: MetricMeasureGraph, f: PLFunction, center: GraphPoint, r) -> Fraction:
    base, pieces = _ball_on_base(G, f, center, r)
    mass = Fraction(0)
    integral = Fraction(0)
    for e, s0, s1 in pieces:
        dens = base.density(e)
        a, _ = base.ends[e]
        k = f.slope(e)
        mass += dens * (s1 - s0)
        integral += dens * (f.values[a] * (s1 - s0) + k * (s1 * s1 - s0 * s0) / 2)
    if mass == 0:
        raise GraphError("ball has zero measure")
    return integral / mass


def integrate_deviation(G: MetricMeasureGraph, f: PLFunction, center: GraphPoint, r) -> Fraction:
    """Exact value of the integral of |f - f_B| over the open ball B = B_r(center)."""
    mean = ball_mean(G, f, center, r)
    base, pieces = _ball_on_base(G, f, center, r)
    return sum(
        (base.density(e) * _piece_integral(f, e, s0, s1, mean) for e, s0, s1 in pieces),
        Fraction(0),
    )


def lip_integral(G: MetricMeasureGraph, f: PLFunction, center: GraphPoint, r) -> Fraction:
    """Exact integral of ``Lip f`` over ``B_r(center)``; vertices are null sets."""
    base, pieces = _ball_on_base(G, f, center, r)
    return sum(
        (abs(f.slope(e)) * base.density(e) * (s1 - s0) for e, s0, s1 in pieces),
        Fraction(0),
    )


def edge_integral(f: PLFunction, e: int) -> Fraction:
    """Integral of ``f`` over the whole edge ``e`` against the graph measure."""
    a, b = f.base.ends[e]
    return f.base.measure[e] * (f.values[a] + f.values[b]) / 2


def path_graph(n_edges: int, m: int = 2, level: int = 0, measure: Sequence | None = None) -> MetricMeasureGraph:
    """Path ``0 - 1 - ... - n_edges``; unit-length edges at level 0."""
    if measure is None:
        measure = [Fraction(1, m**level)] * n_edges
    return MetricMeasureGraph(m, level, n_edges + 1, tuple((i, i + 1) for i in range(n_edges)), tuple(measure))


def cycle_graph(n_edges: int, m: int = 2, level: int = 0) -> MetricMeasureGraph:
    ends = tuple((i, (i + 1) % n_edges) for i in range(n_edges))
    return MetricMeasureGraph(m, level, n_edges, ends, (Fraction(1, m**level),) * n_edges)
