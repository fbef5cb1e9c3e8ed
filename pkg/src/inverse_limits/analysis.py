"""Level-by-level measurements: doubling ratios, Poincare quotients, distance growth,
certified intervals for limit distances and the degeneracy profile.

Ball computations run on an exact integer engine: every center offset and
radius is expressed in units of ``L / K`` for a common integer ``K`` and edge
densities are scaled to integers, so only the final ratios are rationals.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

from .graph_core import GraphPoint, MetricMeasureGraph, PLFunction, as_fraction, edge_integral
from .inverse_step import Projection, average_at, average_function, fiber_diameters, fuzzy_section


def _lcm(values: Iterable[int]) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), values, 1)


# -- integer ball engine ---------------------------------------------------------


class BallEngine:
    """Exact ball pieces for a fixed graph and a fixed set of rational radii.

    Positions along an edge are integers in ``0..K`` (``K`` units per edge).
    """

    def __init__(self, G: MetricMeasureGraph, radii: Iterable[Fraction], centers: Iterable[GraphPoint] = ()):
        self.G = G
        L = G.edge_length
        fracs = [as_fraction(r) / L for r in radii]
        fracs += [p.offset / L for p in centers if not p.is_vertex]
        self.K = _lcm([2] + [x.denominator for x in fracs])
        ws = _lcm(x.denominator for x in G.measure)
        self.weight = [int(x * ws) for x in G.measure]

    def units(self, r: Fraction) -> int:
        x = as_fraction(r) / self.G.edge_length * self.K
        if x.denominator != 1:
            raise ValueError(f"radius {r} is not on the engine grid")
        return int(x)

    def vertex_dist(self, center: GraphPoint) -> list[int]:
        G, K = self.G, self.K
        if center.is_vertex:
            return [h * K for h in G.hops_from(center.vertex)]
        a, b = G.ends[center.edge]
        t = int(center.offset / G.edge_length * K)
        ha, hb = G.hops_from(a), G.hops_from(b)
        return [min(t + x * K, K - t + y * K) for x, y in zip(ha, hb)]

    def pieces(self, center: GraphPoint, R: int, dist: list[int] | None = None) -> list[tuple[int, int, int]]:
        G, K = self.G, self.K
        if dist is None:
            dist = self.vertex_dist(center)
        t = None if center.is_vertex else int(center.offset / G.edge_length * K)
        out = []
        for e, (a, b) in enumerate(G.ends):
            da, db = dist[a], dist[b]
            ivs = []
            if R > da:
                ivs.append((0, min(K, R - da)))
            if R > db:
                ivs.append((max(0, K - (R - db)), K))
            if t is not None and center.edge == e:
                ivs.append((max(0, t - R), min(K, t + R)))
            if not ivs:
                continue
            ivs.sort()
            lo, hi = ivs[0]
            for x, y in ivs[1:]:
                if x <= hi:
                    hi = max(hi, y)
                else:
                    out.append((e, lo, hi))
                    lo, hi = x, y
            out.append((e, lo, hi))
        return out

    def mass(self, pieces) -> int:
        w = self.weight
        return sum(w[e] * (s1 - s0) for e, s0, s1 in pieces)


def _integer_values(f: PLFunction) -> list[int]:
    d = _lcm(x.denominator for x in f.values)
    return [int(x * d) for x in f.values]


def _quotient_parts(engine: BallEngine, fv: Sequence[int], small, big, R: int) -> tuple[Fraction, int]:
    """Numerator (scaled) and denominator (scaled) of the Poincare quotient."""
    G, K, W = engine.G, engine.K, engine.weight
    ends = G.ends
    A = 0
    Bm = 0
    vals = []
    for e, s0, s1 in small:
        a, b = ends[e]
        fa, df = fv[a], fv[b] - fv[a]
        g0 = K * fa + df * s0
        g1 = K * fa + df * s1
        vals.append((W[e], s1 - s0, g0, g1))
        A += W[e] * (g0 + g1) * (s1 - s0)
        Bm += 2 * W[e] * (s1 - s0)
    T = Fraction(0)
    for w, ln, g0, g1 in vals:
        h0 = Bm * g0 - A
        h1 = Bm * g1 - A
        if (h0 >= 0) == (h1 >= 0) or h0 == 0 or h1 == 0:
            T += w * ln * abs(h0 + h1)
        else:
            T += Fraction(w * ln * (h0 * h0 + h1 * h1), abs(h1 - h0))
    J = 0
    for e, s0, s1 in big:
        a, b = ends[e]
        J += W[e] * abs(fv[b] - fv[a]) * (s1 - s0)
    return T / (2 * Bm * R), J


# -- reports -------------------------------------------------------------------------


@dataclass
class ConstantsReport:
    level: int
    doubling_max: Fraction | None = None
    poincare_max: Fraction | None = None
    sample_spec: str = ""
    witness: str = ""
    violations: list[str] = field(default_factory=list)

    def render(self) -> str:
        parts = [f"level={self.level}"]
        if self.doubling_max is not None:
            parts.append(f"doubling_max={self.doubling_max}")
        if self.poincare_max is not None:
            parts.append(f"poincare_max={self.poincare_max}")
        if self.witness:
            parts.append(f"witness={self.witness}")
        if self.sample_spec:
            parts.append(f"sample={self.sample_spec}")
        if self.violations:
            parts.append(f"violations={len(self.violations)}")
        return " ".join(parts)


def theta_witness(system) -> Fraction:
    """Smallest theta compatible with every built step (largest fiber diameter in edge lengths)."""
    return max((fiber_diameters(step)[0] for step in system.steps), default=Fraction(0))


def default_centers(G: MetricMeasureGraph) -> list[GraphPoint]:
    return [G.vertex_point(v) for v in range(G.n_vertices)] + [G.midpoint(e) for e in range(G.n_edges)]


def doubling_radii(system, level: int, theta: Fraction | None = None) -> list[Fraction]:
    m = system.params.m
    if theta is None:
        theta = theta_witness(system)
    R = system.levels[0].diameter
    rs = set()
    for j in range(level + 1):
        s = Fraction(1, m**j)
        rs.update({s, 2 * s, s / (1 + 2 * theta)})
    return sorted(r for r in rs if r <= R)


def doubling_profile(system, level: int, centers=None, radii=None) -> ConstantsReport:
    G = system.levels[level]
    if centers is None:
        centers = default_centers(G)
    if radii is None:
        radii = doubling_radii(system, level)
    radii = [as_fraction(r) for r in radii]
    engine = BallEngine(G, radii + [2 * r for r in radii], centers)
    best, wit = None, ""
    for c in centers:
        dist = engine.vertex_dist(c)
        for r in radii:
            R = engine.units(r)
            small = engine.mass(engine.pieces(c, R, dist))
            big = engine.mass(engine.pieces(c, 2 * R, dist))
            if small == 0:
                raise ValueError(f"ball of radius {r} at {c} has zero measure")
            q = Fraction(big, small)
            if best is None or q > best:
                best, wit = q, f"center={c} r={r}"
    grid = f"centers={len(centers)} radii={','.join(str(r) for r in radii)}"
    return ConstantsReport(level, doubling_max=best, sample_spec=grid, witness=wit)


def poincare_radii(system, level: int) -> list[Fraction]:
    m = system.params.m
    R = system.levels[0].diameter
    rs = set()
    for j in range(level + 1):
        s = Fraction(1, m**j)
        rs.update({s, s / 2})
    return sorted(r for r in rs if r <= R)


def sample_centers(G: MetricMeasureGraph, count: int, seed: int) -> list[GraphPoint]:
    pool = default_centers(G)
    if count >= len(pool):
        return pool
    rng = random.Random(seed)
    idx = sorted(rng.sample(range(len(pool)), count))
    return [pool[i] for i in idx]


def poincare_profile(
    system,
    level: int,
    corpus: Sequence[PLFunction],
    lam=None,
    centers=None,
    radii=None,
    seed: int = 0,
    n_centers: int = 12,
) -> ConstantsReport:
    """Largest observed ratio of mean oscillation to ``r`` times the gradient integral on the enlarged ball."""
    G = system.levels[level]
    if lam is None:
        lam = 2 * (1 + theta_witness(system))
    lam = as_fraction(lam)
    if lam < 1:
        raise ValueError("the enlargement factor must be >= 1")
    if centers is None:
        centers = sample_centers(G, n_centers, seed)
    if radii is None:
        radii = poincare_radii(system, level)
    radii = [as_fraction(r) for r in radii]
    engine = BallEngine(G, radii + [lam * r for r in radii], centers)
    fvals = []
    for f in corpus:
        if f.base != G:
            raise ValueError("corpus functions must live on the chosen level")
        fvals.append(_integer_values(f))
    best, wit = None, ""
    violations = []
    for c in centers:
        dist = engine.vertex_dist(c)
        for r in radii:
            R = engine.units(r)
            small = engine.pieces(c, R, dist)
            big = engine.pieces(c, engine.units(lam * r), dist)
            for n, fv in enumerate(fvals):
                num, den = _quotient_parts(engine, fv, small, big, R)
                if den == 0:
                    if num > 0:
                        violations.append(f"f#{n} center={c} r={r}")
                    continue
                q = num / den
                if best is None or q > best:
                    best, wit = q, f"f#{n} center={c} r={r}"
    grid = f"lambda={lam} centers={len(centers)} seed={seed} radii={','.join(str(r) for r in radii)} corpus={len(corpus)}"
    return ConstantsReport(level, poincare_max=best, sample_spec=grid, witness=wit, violations=violations)


# -- corpora -------------------------------------------------------------------------


CORPUS_KINDS = ("random_vertex_values", "distance_functions", "coordinate_pullbacks", "bump_functions")


def corpus_generate(G: MetricMeasureGraph, kind: str, count: int | None = None, seed: int = 0, system=None) -> list[PLFunction]:
    """Deterministic corpus of piecewise linear functions on ``G``.

    ``distance_functions`` interpolate the distance to a vertex at the vertices
    (all vertices when ``count`` is None).  ``coordinate_pullbacks`` need the
    system ``G`` belongs to and pull back the hat function of every vertex of
    ``X_0``; on a single-edge base this gives the coordinate and its mirror.
    """
    rng = random.Random(f"{kind}:{seed}")
    L = G.edge_length
    if kind == "random_vertex_values":
        return [PLFunction(G, tuple(rng.randint(-100, 100) for _ in range(G.n_vertices))) for _ in range(count or 0)]
    if kind == "distance_functions":
        if count is None:
            sources = list(range(G.n_vertices))
        else:
            sources = [rng.randrange(G.n_vertices) for _ in range(count)]
        return [PLFunction(G, tuple(h * L for h in G.hops_from(v))) for v in sources]
    if kind == "bump_functions":
        out = []
        for _ in range(count or 0):
            v = rng.randrange(G.n_vertices)
            width = rng.randint(1, 4)
            out.append(PLFunction(G, tuple(Fraction(max(0, width - h), width) for h in G.hops_from(v))))
        return out
    if kind == "coordinate_pullbacks":
        if system is None:
            raise ValueError("coordinate pullbacks need the inverse system")
        level = next(i for i, X in enumerate(system.levels) if X is G or X == G)
        X0 = system.levels[0]
        images = [system.project_down(G.vertex_point(v), level, 0) for v in range(G.n_vertices)]
        out = []
        for c in range(X0.n_vertices):
            dist = [X0.vertex_distances(p)[c] for p in images]
            out.append(PLFunction(G, tuple(max(Fraction(0), 1 - d) for d in dist)))
        return out
    raise ValueError(f"unknown corpus kind {kind!r}; choose from {', '.join(CORPUS_KINDS)}")


# -- distances across levels ------------------------------------------------------------


@dataclass(frozen=True)
class DistanceGrowth:
    passed: bool
    worst_pair: tuple[int, int] | None
    max_excess: Fraction
    pairs: int


def distance_growth_check(system, i: int, theta=None) -> DistanceGrowth:
    """Check ``d_{i-1}(pi x, pi y) <= d_i(x, y) <= d_{i-1}(pi x, pi y) + 2 theta m^-i`` for all vertex pairs."""
    if i < 1:
        raise ValueError("level must be >= 1")
    if theta is None:
        theta = system.params.theta
    theta = as_fraction(theta)
    step: Projection = system.steps[i - 1]
    X, T = step.source, step.target
    L = X.edge_length
    ok = True
    worst, worst_pair = None, None
    count = 0
    tcache: dict[int, list[int]] = {}
    for x in range(X.n_vertices):
        hx = X.hops_from(x)
        px = step.vertex_map[x]
        if px not in tcache:
            tcache[px] = T.hops_from(px)
        ht = tcache[px]
        for y in range(x + 1, X.n_vertices):
            count += 1
            d_low = ht[step.vertex_map[y]]
            d = hx[y]
            excess = (d - d_low) * L
            if d < d_low or excess > 2 * theta * L:
                if ok:
                    worst_pair = (x, y)
                ok = False
            if worst is None or excess > worst:
                worst = excess
                if ok:
                    worst_pair = (x, y)
    return DistanceGrowth(ok, worst_pair, worst if worst is not None else Fraction(0), count)


def dinf_interval(system, p: GraphPoint, q: GraphPoint, N: int | None = None, theta=None) -> tuple[Fraction, Fraction]:
    """Certified interval for the limit distance of the compatible sequences through ``p`` and ``q``.

    ``p`` and ``q`` are points of ``X_N``.  Each later level can add at most
    ``2 theta m^-(j+1)`` going from level ``j`` to ``j+1``; summing from ``j = N``
    gives the width ``2 theta m^-N / (m - 1)``.
    """
    if N is None:
        N = system.depth
    if theta is None:
        theta = system.params.theta
    theta = as_fraction(theta)
    G = system.levels[N]
    m = G.m
    lo = G.distance(p, q)
    return lo, lo + 2 * theta * Fraction(1, m**N) / (m - 1)


# -- degeneracy ------------------------------------------------------------------------------


def _distance_to_set(G: MetricMeasureGraph, targets: set[int]) -> list[int] | None:
    if not targets:
        return None
    dist = [-1] * G.n_vertices
    queue = deque()
    for v in targets:
        dist[v] = 0
        queue.append(v)
    while queue:
        x = queue.popleft()
        for y in G.neighbors[x]:
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


@dataclass(frozen=True)
class DegeneracyProfile:
    """Rescaled distances ``m^i d_i(x_i, V_i^{>=3})`` per level; None means no such vertex."""

    values: tuple[Fraction | None, ...]

    def max_from(self, start: int = 1) -> Fraction | None:
        vals = self.values[start:]
        if any(v is None for v in vals) or not vals:
            return None
        return max(vals)


def degeneracy_profile(system, x: GraphPoint, depth: int | None = None) -> DegeneracyProfile:
    """Profile along the compatible sequence determined by a point ``x`` of ``X_depth``."""
    if depth is None:
        depth = system.depth
    out = []
    for i in range(depth + 1):
        G = system.levels[i]
        p = system.project_down(x, depth, i)
        high = {v for v in range(G.n_vertices) if G.degree(v) >= 3}
        dist = _distance_to_set(G, high)
        if dist is None:
            out.append(None)
            continue
        scale = G.m**i
        if p.is_vertex:
            out.append(Fraction(dist[p.vertex]))
        else:
            a, b = G.ends[p.edge]
            L = G.edge_length
            d = min(p.offset + dist[a] * L, L - p.offset + dist[b] * L)
            out.append(d * scale)
    return DegeneracyProfile(tuple(out))


@dataclass(frozen=True)
class DegeneracySummary:
    nondegenerate: bool
    bounded_fraction: Fraction
    max_bounded: Fraction | None
    bound: Fraction


def degeneracy_summary(system, depth: int | None = None, bound=1) -> DegeneracySummary:
    """Classify a built system by the profiles of all vertices of ``X_depth``.

    Level 0 is skipped (a single-edge base has no branch points).  The system
    counts as nondegenerate when at least half of the vertices have a profile
    bounded by ``bound`` on levels ``1..depth``.
    """
    if depth is None:
        depth = system.depth
    bound = as_fraction(bound)
    G = system.levels[depth]
    good = 0
    worst = None
    for v in range(G.n_vertices):
        mx = degeneracy_profile(system, G.vertex_point(v), depth).max_from(1)
        if mx is not None and mx <= bound:
            good += 1
            worst = mx if worst is None else max(worst, mx)
    frac = Fraction(good, G.n_vertices)
    return DegeneracySummary(frac >= Fraction(1, 2), frac, worst, bound)


# -- averaging and gradients ------------------------------------------------------------------


def averaging_lip_check(step: Projection, f: PLFunction) -> tuple[bool, int | None]:
    """Per target edge, the gradient integral of the fiber average is at most that of ``f`` over the fiber."""
    section = fuzzy_section(step)
    g = average_function(step, f, section)
    T, S = step.target, step.source
    for t, fib in enumerate(step.edge_fibers):
        lhs = abs(g.slope(t)) * T.measure[t]
        rhs = sum((abs(f.slope(e)) * S.measure[e] for e in fib), Fraction(0))
        if lhs > rhs:
            return False, t
    return True, None


@dataclass(frozen=True)
class AveragingCheck:
    continuous: bool
    lipschitz: bool
    integrals: bool
    witness: str = ""

    @property
    def passed(self) -> bool:
        return self.continuous and self.lipschitz and self.integrals


def averaging_pointwise_check(step: Projection, f: PLFunction, section=None) -> AveragingCheck:
    """Exact checks of the fiber average ``g`` of ``f`` at every vertex and edge of the target.

    * continuity: the direct fiber average at either end of each target edge
      agrees with the vertex value of ``g``;
    * Lipschitz: the pointwise Lipschitz constant of ``g`` at each vertex and
      inside each edge is at most the fiber average of that of ``f``;
    * integrals: ``g`` and ``f`` have the same integral over each target edge
      and its preimage.
    """
    if section is None:
        section = fuzzy_section(step)
    g = average_function(step, f, section)
    T, S = step.target, step.source
    L = T.edge_length
    cont = lip = integ = True
    witness = []
    for t in range(T.n_edges):
        a, b = T.ends[t]
        if average_at(step, f, t, 0, section) != g.values[a] or average_at(step, f, t, L, section) != g.values[b]:
            cont = False
            witness.append(f"discontinuous at an end of edge {t}")
        fib = step.edge_fibers[t]
        if abs(g.slope(t)) > sum((section.edge_weight[e] * abs(f.slope(e)) for e in fib), Fraction(0)):
            lip = False
            witness.append(f"slope bound fails inside edge {t}")
        if edge_integral(g, t) != sum((edge_integral(f, e) for e in fib), Fraction(0)):
            integ = False
            witness.append(f"integral mismatch on edge {t}")
    for v in range(T.n_vertices):
        lhs = max(abs(g.slope(t)) for t in T.incident[v])
        rhs = sum(
            (section.vertex_weight[w] * max(abs(f.slope(e)) for e in S.incident[w]) for w in step.vertex_fibers[v]),
            Fraction(0),
        )
        if lhs > rhs:
            lip = False
            witness.append(f"slope bound fails at vertex {v}")
    return AveragingCheck(cont, lip, integ, "; ".join(witness[:3]))
