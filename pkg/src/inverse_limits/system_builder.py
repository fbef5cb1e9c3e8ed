"""Inductive construction of inverse systems by gluing edge inverses.

Every vertex ``v`` of ``X_k`` receives a fiber ``{v} x {0..n(v)-1}`` with a
probability distribution; every edge receives an edge inverse whose endpoint
fibers and endpoint weights match the data at its two ends.  The edge is
identified with ``[0, 1]`` so that its lower-numbered vertex sits over 0.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .edge_inverse import (
    EdgeInverse,
    ProbabilityMatrix,
    identity_inverse,
    parallel_inverse,
    quotient,
    special_from_matrix,
    wedge_inverse,
)
from .graph_core import GraphPoint, MetricMeasureGraph, from_subdivision, path_graph, subdivision_vertex
from .inverse_step import (
    AxiomReport,
    FuzzySection,
    Projection,
    check_axioms,
    check_graph,
    fiber_diameters,
    fuzzy_section,
    max_adjacent_ratio,
    project_point,
)
from .graph_core import subdivide


class BuildError(RuntimeError):
    pass


@dataclass(frozen=True)
class SystemParams:
    m: int = 2
    delta: int = 4
    theta: Fraction = Fraction(2)
    C: Fraction = Fraction(1)
    c0: Fraction = Fraction(1, 2)
    c0_prime: Fraction = Fraction(1, 2)
    N1: int = 2
    N2: int = 4
    K: int = 4
    C_tilde: int = 2

    def __post_init__(self) -> None:
        for name in ("theta", "C", "c0", "c0_prime"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.m < 2:
            raise BuildError("m must be >= 2")


@dataclass
class EdgeContext:
    """What a chooser knows about the edge it is filling."""

    graph: MetricMeasureGraph
    level: int
    edge: int
    low: int
    high: int
    left_dist: tuple[Fraction, ...]
    right_dist: tuple[Fraction, ...]
    need_left_degree1: bool
    need_right_degree1: bool
    must_connect: bool
    fresh_low: bool
    fresh_high: bool
    rng: random.Random


@dataclass
class BuildPolicy:
    name: str
    fiber_size: Callable[[MetricMeasureGraph, int, int], int]
    endpoint_dist: Callable[[MetricMeasureGraph, int, int], Sequence[Fraction]]
    chooser: Callable[[EdgeContext], EdgeInverse]
    seed: int = 0


@dataclass
class InverseSystem:
    params: SystemParams
    levels: list[MetricMeasureGraph]
    steps: list[Projection]
    fuzzy: list[FuzzySection]
    policy_name: str = ""
    seed: int = 0
    reports: list[AxiomReport] = field(default_factory=list, compare=False)
    inverses: list[list[EdgeInverse]] = field(default_factory=list, compare=False)

    @property
    def depth(self) -> int:
        return len(self.steps)

    def constants(self) -> dict[str, Fraction]:
        """Effective constants actually attained by the built levels."""
        theta = Fraction(0)
        for step in self.steps:
            theta = max(theta, fiber_diameters(step)[0])
        ratio = max(max_adjacent_ratio(G)[0] for G in self.levels)
        weight = min((fs.min_weight for fs in self.fuzzy), default=Fraction(1))
        return {
            "max_degree": Fraction(max(G.max_degree for G in self.levels)),
            "theta": theta,
            "max_ratio": ratio,
            "min_weight": weight,
        }

    def project_down(self, p: GraphPoint, i: int, k: int) -> GraphPoint:
        """Image in ``X_k`` of a point of ``X_i`` under the composite projection."""
        for j in range(i - 1, k - 1, -1):
            step = self.steps[j]
            p = from_subdivision(step.target, project_point(step, p))
        return p


# -- one level ----------------------------------------------------------------


def net_plan(G: MetricMeasureGraph, radius_hops: int) -> set[int]:
    """Edges whose inverses must be connected so that they form a net of the given radius."""
    covered = [False] * G.n_vertices
    chosen: set[int] = set()
    for v in range(G.n_vertices):
        if covered[v]:
            continue
        e = min(G.incident[v])
        chosen.add(e)
        for x in G.ends[e]:
            for u, h in enumerate(G.hops_from(x)):
                if h <= radius_hops:
                    covered[u] = True
    return chosen


def verify_net(G: MetricMeasureGraph, connected_edges: set[int], radius_hops: int) -> int | None:
    """First vertex farther than ``radius_hops`` from every connected edge, if any."""
    ends = {x for e in connected_edges for x in G.ends[e]}
    best = [None] * G.n_vertices
    for x in ends:
        for u, h in enumerate(G.hops_from(x)):
            if best[u] is None or h < best[u]:
                best[u] = h
    for v, h in enumerate(best):
        if h is None or h > radius_hops:
            return v
    return None


def build_level(
    G: MetricMeasureGraph,
    policy: BuildPolicy,
    params: SystemParams,
    fresh: set[int] | None = None,
) -> tuple[MetricMeasureGraph, Projection, list[EdgeInverse], set[int]]:
    """Build ``X_{k+1}`` and the projection onto ``X_k'``.

    Returns the new graph, the step, the inverse chosen for each edge and the
    set of new vertices that lie over interior points of edges.
    """
    m = params.m
    if G.m != m:
        raise BuildError("graph and parameters disagree on m")
    k = G.level
    sizes = [policy.fiber_size(G, k, v) for v in range(G.n_vertices)]
    dists = []
    for v in range(G.n_vertices):
        d = tuple(Fraction(x) for x in policy.endpoint_dist(G, k, v))
        if len(d) != sizes[v] or sum(d) != 1 or any(x < params.c0_prime for x in d):
            raise BuildError(f"distribution at vertex {v} is invalid or has an entry below c0'")
        if sizes[v] > params.N1:
            raise BuildError(f"fiber size {sizes[v]} at vertex {v} exceeds N1")
        dists.append(d)
    start = [0]
    for n in sizes:
        start.append(start[-1] + n)
    vmap = [v for v in range(G.n_vertices) for _ in range(sizes[v])]
    if fresh is None:
        fresh = set(range(G.n_vertices))
    must = net_plan(G, params.C_tilde)
    rng = random.Random(f"{policy.name}:{policy.seed}:{k}")
    ends, measure, emap = [], [], []
    chosen: list[EdgeInverse] = []
    new_fresh: set[int] = set()
    for e, (a, b) in enumerate(G.ends):
        low, high = min(a, b), max(a, b)
        ctx = EdgeContext(
            G, k, e, low, high, dists[low], dists[high],
            G.degree(low) > params.K, G.degree(high) > params.K,
            e in must, low in fresh, high in fresh, rng,
        )
        E = policy.chooser(ctx)
        _check_compatible(E, ctx, m)
        chosen.append(E)
        aligned = G.ends[e][0] == low
        ids = {}
        for s, w in enumerate(E.left_fiber):
            ids[w] = start[low] + s
        for t, w in enumerate(E.right_fiber):
            ids[w] = start[high] + t
        for w in range(E.n_vertices):
            if w in ids:
                continue
            ids[w] = len(vmap)
            new_fresh.add(ids[w])
            j = E.position[w]
            vmap.append(subdivision_vertex(G, e, j if aligned else m - j))
        for x, (u, w) in enumerate(E.ends):
            j = E.slab(x)
            ends.append((ids[u], ids[w]))
            measure.append(E.nu[x] * G.measure[e])
            emap.append(e * m + (j if aligned else m - 1 - j))
    connected = {e for e, E in enumerate(chosen) if E.connected}
    far = verify_net(G, connected, params.C_tilde)
    if far is not None:
        raise BuildError(f"vertex {far} of level {k} is not within the net radius of a connected edge inverse")
    try:
        src = MetricMeasureGraph(m, k + 1, len(vmap), tuple(ends), tuple(measure))
    except ValueError as exc:
        raise BuildError(f"glued level {k + 1} is invalid: {exc}") from exc
    step = Projection(src, G, subdivide(G), tuple(vmap), tuple(emap))
    return src, step, chosen, new_fresh


def _check_compatible(E: EdgeInverse, ctx: EdgeContext, m: int) -> None:
    where = f"edge {ctx.edge} at level {ctx.level}"
    if E.m != m:
        raise BuildError(f"{where}: inverse has m={E.m}, expected {m}")
    left, right = E.endpoint_weights()
    if left != ctx.left_dist or right != ctx.right_dist:
        raise BuildError(f"{where}: inverse endpoint weights do not match the vertex distributions")
    if ctx.must_connect and not E.connected:
        raise BuildError(f"{where}: net rule requires a connected inverse")
    if ctx.need_left_degree1 and not E.in_G0():
        raise BuildError(f"{where}: degree cap requires degree-1 vertices over 0")
    if ctx.need_right_degree1 and not E.in_G1():
        raise BuildError(f"{where}: degree cap requires degree-1 vertices over 1")


def validate_step(step: Projection, params: SystemParams) -> tuple[AxiomReport, FuzzySection]:
    report = check_axioms(step, params)
    if not report.passed:
        raise BuildError("step fails axioms:\n" + report.render())
    fs = fuzzy_section(step)
    if fs.min_weight < params.c0:
        raise BuildError(f"level {step.source.level}: fuzzy weight {fs.min_weight} below c0 = {params.c0}")
    return report, fs


def build_system(X0: MetricMeasureGraph, policy: BuildPolicy, depth: int, params: SystemParams, validate: bool = True) -> InverseSystem:
    if X0.level != 0 or any(x != 1 for x in X0.measure):
        raise BuildError("X_0 must have unit-length edges of unit measure")
    for r in check_graph(X0, params):
        if not r.passed:
            raise BuildError(f"X_0 fails axiom {r.number}: {r.witness}")
    system = InverseSystem(params, [X0], [], [], policy.name, policy.seed)
    G = X0
    fresh = None
    for _ in range(depth):
        G_next, step, chosen, fresh = build_level(G, policy, params, fresh)
        if validate:
            report, fs = validate_step(step, params)
            system.reports.append(report)
        else:
            fs = fuzzy_section(step)
        system.levels.append(G_next)
        system.steps.append(step)
        system.fuzzy.append(fs)
        system.inverses.append(chosen)
        G = G_next
    return system


# -- policies and presets -----------------------------------------------------


def uniform(n: int) -> tuple[Fraction, ...]:
    return (Fraction(1, n),) * n


def default_pinch(m: int) -> int:
    return max(1, m // 2)


def constant_policy(name: str, n: int, inverse: Callable[[EdgeContext], EdgeInverse], seed: int = 0) -> BuildPolicy:
    return BuildPolicy(name, lambda G, k, v: n, lambda G, k, v: uniform(n), inverse, seed)


def explicit_chooser(table: dict[tuple[int, int], EdgeInverse]) -> Callable[[EdgeContext], EdgeInverse]:
    """Chooser reading the inverse for ``(level, edge)`` from a table."""

    def choose(ctx: EdgeContext) -> EdgeInverse:
        try:
            return table[(ctx.level, ctx.edge)]
        except KeyError:
            raise BuildError(f"no inverse given for edge {ctx.edge} at level {ctx.level}") from None

    return choose


def mixed_family(m: int) -> list[EdgeInverse]:
    """Inverses with two uniform vertices over each end, connected and disconnected."""
    h = Fraction(1, 2)
    fam = [wedge_inverse(m, (h, h), (h, h), p) for p in range(1, m)]
    fam.append(parallel_inverse(2, m))
    fam.append(special_from_matrix(ProbabilityMatrix(((h, 0), (0, h))), 1, m))
    fam.append(special_from_matrix(ProbabilityMatrix(((0, h), (h, 0))), 1, m))
    fam.append(_fan(m, "left", 1))
    fam.append(_fan(m, "left", 2))
    fam.append(_fan(m, "right", 2))
    return fam


def _fan(m: int, side: str, merges: int) -> EdgeInverse:
    # quotient of the 2x2 parallel inverse: strands sharing an end vertex are
    # merged along their first (or last) edge, for one or both end vertices
    E = parallel_inverse(2, m)
    for r in range(merges):
        fiber = E.left_fiber if side == "left" else E.right_fiber
        slab = 0 if side == "left" else m - 1
        w = fiber[r]
        at = [x for x in range(E.n_edges) if E.slab(x) == slab and w in E.ends[x]]
        E = quotient(E, ("edges", at[0], at[1]))
    return E


def _mixed_chooser(m: int) -> Callable[[EdgeContext], EdgeInverse]:
    family = mixed_family(m)

    def choose(ctx: EdgeContext) -> EdgeInverse:
        opts = family
        # an end of degree > 1 is only placed over a vertex created by the previous
        # step; this keeps adjacent measure ratios from compounding at vertices
        # that persist through many levels
        left_ok = ctx.fresh_low and not ctx.need_left_degree1
        right_ok = ctx.fresh_high and not ctx.need_right_degree1
        opts = [E for E in opts if (left_ok or E.in_G0()) and (right_ok or E.in_G1())]
        if ctx.must_connect:
            opts = [E for E in opts if E.connected]
        if not opts:
            raise BuildError(f"no admissible inverse for edge {ctx.edge} at level {ctx.level}")
        return opts[ctx.rng.randrange(len(opts))]

    return choose


PRESETS = ("identity", "laakso_like", "parallel", "mixed_random", "degenerate")


def preset_params(name: str, m: int = 2) -> SystemParams:
    if name == "identity":
        return SystemParams(m=m, delta=2, theta=Fraction(0), C=Fraction(1), c0=Fraction(1), c0_prime=Fraction(1), N1=1, N2=1, K=2, C_tilde=1)
    if name in ("laakso_like", "degenerate"):
        return SystemParams(m=m, delta=4, theta=Fraction(2), C=Fraction(1), c0=Fraction(1, 2), c0_prime=Fraction(1, 2), N1=2, N2=2, K=4, C_tilde=1)
    if name == "parallel":
        return SystemParams(m=m, delta=8, theta=Fraction(2 * m), C=Fraction(2), c0=Fraction(1, 4), c0_prime=Fraction(1, 2), N1=2, N2=2, K=4, C_tilde=1)
    if name == "mixed_random":
        return SystemParams(m=m, delta=8, theta=Fraction(8 * m), C=Fraction(4), c0=Fraction(1, 4), c0_prime=Fraction(1, 2), N1=2, N2=2, K=4, C_tilde=2)
    raise BuildError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def preset(name: str, m: int = 2, seed: int = 0) -> tuple[MetricMeasureGraph, BuildPolicy, SystemParams]:
    """Base graph ``[0, 1]``, a policy and matching parameters for a named preset."""
    params = preset_params(name, m)
    X0 = path_graph(1, m)
    h = Fraction(1, 2)
    if name == "identity":
        policy = constant_policy(name, 1, lambda ctx: identity_inverse(m), seed)
    elif name == "laakso_like":
        wedge = wedge_inverse(m, (h, h), (h, h), default_pinch(m))
        policy = constant_policy(name, 2, lambda ctx: wedge, seed)
    elif name == "parallel":
        par = parallel_inverse(2, m)
        wedge = wedge_inverse(m, (h, h), (h, h), default_pinch(m))
        policy = constant_policy(
            name, 2, lambda ctx: wedge if ctx.need_left_degree1 or ctx.need_right_degree1 else par, seed
        )
    elif name == "mixed_random":
        policy = constant_policy(name, 2, _mixed_chooser(m), seed)
    elif name == "degenerate":
        wedge = wedge_inverse(m, (h, h), (h, h), default_pinch(m))
        ident = identity_inverse(m)
        policy = BuildPolicy(
            name,
            lambda G, k, v: 2 if k == 0 else 1,
            lambda G, k, v: uniform(2 if k == 0 else 1),
            lambda ctx: wedge if ctx.level == 0 else ident,
            seed,
        )
    else:
        raise BuildError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return X0, policy, params


def build_preset(name: str, depth: int, m: int = 2, seed: int = 0, validate: bool = True) -> InverseSystem:
    X0, policy, params = preset(name, m, seed)
    return build_system(X0, policy, depth, params, validate)
