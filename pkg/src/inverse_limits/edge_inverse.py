"""Edge inverses: the local pieces that replace one edge of a level by a small graph.

An edge inverse is stored at unit scale.  The target is ``[0, 1]`` cut into
``m`` slabs; vertex ``v`` sits at slab boundary ``position[v]`` in ``0..m``
and every edge runs from some position ``j`` to ``j + 1``.  Edge inverses may
be disconnected, so they do not reuse :class:`MetricMeasureGraph`.

Matrix convention: in a probability matrix the row index is a vertex of the
left fiber (over 0) and the column index a vertex of the right fiber (over 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from itertools import permutations
from typing import Sequence

from .graph_core import as_fraction


class EdgeInverseError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeInverse:
    m: int
    position: tuple[int, ...]
    ends: tuple[tuple[int, int], ...]
    nu: tuple[Fraction, ...]
    left_fiber: tuple[int, ...] = ()
    right_fiber: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", tuple(int(p) for p in self.position))
        object.__setattr__(self, "ends", tuple((int(a), int(b)) for a, b in self.ends))
        object.__setattr__(self, "nu", tuple(as_fraction(x) for x in self.nu))
        if not self.left_fiber:
            object.__setattr__(self, "left_fiber", tuple(v for v, p in enumerate(self.position) if p == 0))
        if not self.right_fiber:
            object.__setattr__(self, "right_fiber", tuple(v for v, p in enumerate(self.position) if p == self.m))
        problems = self.violations()
        if problems:
            raise EdgeInverseError("; ".join(problems))

    # -- basic structure ------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.position)

    @property
    def n_edges(self) -> int:
        return len(self.ends)

    def slab(self, e: int) -> int:
        return self.position[self.ends[e][0]]

    @cached_property
    def left_edges(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in self.position]
        for e, (_, b) in enumerate(self.ends):
            out[b].append(e)
        return tuple(tuple(x) for x in out)

    @cached_property
    def right_edges(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in self.position]
        for e, (a, _) in enumerate(self.ends):
            out[a].append(e)
        return tuple(tuple(x) for x in out)

    def degree(self, v: int) -> int:
        return len(self.left_edges[v]) + len(self.right_edges[v])

    def violations(self) -> list[str]:
        """Problems with conditions (A)-(D); empty when the inverse is admissible."""
        out = []
        m = self.m
        if m < 2:
            out.append("m must be >= 2")
            return out
        if len(self.ends) != len(self.nu):
            return ["one measure per edge required"]
        n = len(self.position)
        if any(not 0 <= p <= m for p in self.position):
            return ["vertex position outside 0..m"]
        if set(self.left_fiber) != {v for v in range(n) if self.position[v] == 0} or len(set(self.left_fiber)) != len(self.left_fiber):
            out.append("left fiber list does not match the vertices over 0")
        if set(self.right_fiber) != {v for v in range(n) if self.position[v] == m} or len(set(self.right_fiber)) != len(self.right_fiber):
            out.append("right fiber list does not match the vertices over 1")
        for e, (a, b) in enumerate(self.ends):
            if not (0 <= a < n and 0 <= b < n) or self.position[b] != self.position[a] + 1:
                out.append(f"(A) edge {e} does not span consecutive positions left to right")
                return out
        for e, x in enumerate(self.nu):
            if x <= 0:
                out.append(f"edge {e} has non-positive measure")
        present = set(self.position)
        if present != set(range(m + 1)):
            out.append("(B) some position has no vertex over it")
        for v in range(n):
            p = self.position[v]
            if p > 0 and not self.left_edges[v]:
                out.append(f"(B) vertex {v} has no edge to the left")
            if p < m and not self.right_edges[v]:
                out.append(f"(B) vertex {v} has no edge to the right")
        slab_sum = [Fraction(0)] * m
        for e in range(len(self.ends)):
            slab_sum[self.position[self.ends[e][0]]] += self.nu[e]
        for j, s in enumerate(slab_sum):
            if s != Fraction(1, m):
                out.append(f"(C) slab {j} carries {s} instead of 1/{m}")
        for v in range(n):
            if 0 < self.position[v] < m:
                ls = sum((self.nu[e] for e in self.left_edges[v]), Fraction(0))
                rs = sum((self.nu[e] for e in self.right_edges[v]), Fraction(0))
                if ls != rs:
                    out.append(f"(D) vertex {v} has left mass {ls} and right mass {rs}")
        return out

    @cached_property
    def connected(self) -> bool:
        parent = list(range(self.n_vertices))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self.ends:
            parent[find(a)] = find(b)
        return len({find(v) for v in range(self.n_vertices)}) == 1

    @property
    def total_measure(self) -> Fraction:
        return sum(self.nu, Fraction(0))

    # -- fuzzy weights --------------------------------------------------

    def edge_weight(self, e: int) -> Fraction:
        return self.m * self.nu[e]

    def vertex_weight(self, v: int) -> Fraction:
        side = self.right_edges[v] if self.position[v] == 0 else self.left_edges[v]
        return self.m * sum((self.nu[e] for e in side), Fraction(0))

    def endpoint_weights(self) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
        """Fuzzy weights over 0 and over 1, in fiber order."""
        return (
            tuple(self.vertex_weight(v) for v in self.left_fiber),
            tuple(self.vertex_weight(v) for v in self.right_fiber),
        )

    def is_special(self) -> bool:
        """Every interior vertex lies on exactly one strand."""
        return all(self.degree(v) == 2 for v in range(self.n_vertices) if 0 < self.position[v] < self.m)

    def in_G0(self) -> bool:
        return all(self.degree(v) == 1 for v in self.left_fiber)

    def in_G1(self) -> bool:
        return all(self.degree(v) == 1 for v in self.right_fiber)

    # -- lifts of the whole interval ------------------------------------

    def lifts(self) -> list[tuple[int, ...]]:
        """All left-to-right edge paths from the fiber over 0 to the fiber over 1."""
        out: list[tuple[int, ...]] = []
        stack: list[tuple[int, tuple[int, ...]]] = [(v, ()) for v in reversed(self.left_fiber)]
        while stack:
            v, path = stack.pop()
            if self.position[v] == self.m:
                out.append(path)
                continue
            for e in reversed(self.right_edges[v]):
                stack.append((self.ends[e][1], path + (e,)))
        return out

    def omega(self, lift: Sequence[int]) -> Fraction:
        from .path_measure import lift_weight

        interior = [self.ends[e][1] for e in lift[:-1]]
        return lift_weight([self.edge_weight(e) for e in lift], [self.vertex_weight(v) for v in interior])

    def lift_vertices(self, lift: Sequence[int]) -> tuple[int, ...]:
        return (self.ends[lift[0]][0],) + tuple(self.ends[e][1] for e in lift)


# -- probability matrices -------------------------------------------------


@dataclass(frozen=True)
class ProbabilityMatrix:
    entries: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(as_fraction(x) for x in r) for r in self.entries)
        object.__setattr__(self, "entries", rows)
        if not rows or not rows[0] or any(len(r) != len(rows[0]) for r in rows):
            raise EdgeInverseError("matrix must be a non-empty rectangle")
        if any(x < 0 for r in rows for x in r):
            raise EdgeInverseError("matrix entries must be nonnegative")
        if sum((x for r in rows for x in r), Fraction(0)) != 1:
            raise EdgeInverseError("matrix entries must sum to 1")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    @property
    def row_marginals(self) -> tuple[Fraction, ...]:
        return tuple(sum(r, Fraction(0)) for r in self.entries)

    @property
    def col_marginals(self) -> tuple[Fraction, ...]:
        return tuple(sum(col, Fraction(0)) for col in zip(*self.entries))

    @property
    def support(self) -> tuple[tuple[int, int], ...]:
        return tuple((s, t) for s, r in enumerate(self.entries) for t, x in enumerate(r) if x > 0)


def special_from_matrix(P: ProbabilityMatrix, c=None, m: int = 2) -> EdgeInverse:
    """Special edge inverse with ``c[s, t]`` strands joining left vertex ``s`` to right vertex ``t``.

    Each strand has ``m`` edges; every edge of a strand for entry ``(s, t)``
    carries measure ``P[s][t] / c[s, t] / m``.
    """
    if m < 2:
        raise EdgeInverseError("m must be >= 2")
    if any(x == 0 for x in P.row_marginals) or any(x == 0 for x in P.col_marginals):
        raise EdgeInverseError("every row and column marginal must be positive")
    n0, n1 = P.shape
    support = P.support
    if c is None:
        c = {}
    c = {st: int(c.get(st, 1)) for st in support} if isinstance(c, dict) else {st: int(c) for st in support}
    if any(k < 1 for k in c.values()):
        raise EdgeInverseError("multiplicities must be positive integers")
    position = [0] * n0 + [m] * n1
    ends, nu = [], []
    for s, t in support:
        w = P.entries[s][t] / c[(s, t)] / m
        for _ in range(c[(s, t)]):
            chain = [s]
            for j in range(1, m):
                chain.append(len(position))
                position.append(j)
            chain.append(n0 + t)
            for j in range(m):
                ends.append((chain[j], chain[j + 1]))
                nu.append(w)
    return EdgeInverse(m, tuple(position), tuple(ends), tuple(nu))


def identity_inverse(m: int) -> EdgeInverse:
    return special_from_matrix(ProbabilityMatrix(((Fraction(1),),)), 1, m)


def parallel_inverse(n: int, m: int) -> EdgeInverse:
    u = Fraction(1, n * n)
    return special_from_matrix(ProbabilityMatrix(tuple((u,) * n for _ in range(n))), 1, m)


def wedge_inverse(m: int, D0: Sequence, D1: Sequence, pinch: int) -> EdgeInverse:
    """Left strands from each left vertex meet at one vertex over ``pinch/m``, then fan out."""
    D0 = tuple(as_fraction(x) for x in D0)
    D1 = tuple(as_fraction(x) for x in D1)
    if not 1 <= pinch <= m - 1:
        raise EdgeInverseError(f"pinch must lie in 1..{m - 1}")
    for D in (D0, D1):
        if not D or sum(D) != 1 or any(x <= 0 for x in D):
            raise EdgeInverseError("endpoint distributions must be positive and sum to 1")
    n0, n1 = len(D0), len(D1)
    position = [0] * n0 + [m] * n1 + [pinch]
    hub = n0 + n1
    ends, nu = [], []
    for s, w in enumerate(D0):
        chain = [s]
        for j in range(1, pinch):
            chain.append(len(position))
            position.append(j)
        chain.append(hub)
        for a, b in zip(chain, chain[1:]):
            ends.append((a, b))
            nu.append(w / m)
    for t, w in enumerate(D1):
        chain = [hub]
        for j in range(pinch + 1, m):
            chain.append(len(position))
            position.append(j)
        chain.append(n0 + t)
        for a, b in zip(chain, chain[1:]):
            ends.append((a, b))
            nu.append(w / m)
    return EdgeInverse(m, tuple(position), tuple(ends), tuple(nu))


def pad_inverse(E: EdgeInverse, end: str) -> EdgeInverse:
    """Add one fresh degree-1 edge per vertex of the chosen endpoint fiber(s)."""
    if end == "both":
        return pad_inverse(pad_inverse(E, "left"), "right")
    if end not in ("left", "right"):
        raise EdgeInverseError("end must be 'left', 'right' or 'both'")
    m = E.m
    scale = Fraction(m, m + 1)
    position = list(E.position)
    ends = list(E.ends)
    nu = [x * scale for x in E.nu]
    left, right = list(E.left_fiber), list(E.right_fiber)
    if end == "left":
        position = [p + 1 for p in position]
        weights = E.endpoint_weights()[0]
        new_left = []
        for v, w in zip(E.left_fiber, weights):
            fresh = len(position)
            position.append(0)
            ends.append((fresh, v))
            nu.append(w / (m + 1))
            new_left.append(fresh)
        left = new_left
    else:
        weights = E.endpoint_weights()[1]
        new_right = []
        for v, w in zip(E.right_fiber, weights):
            fresh = len(position)
            position.append(m + 1)
            ends.append((v, fresh))
            nu.append(w / (m + 1))
            new_right.append(fresh)
        right = new_right
    return EdgeInverse(m + 1, tuple(position), tuple(ends), tuple(nu), tuple(left), tuple(right))


def quotient(E: EdgeInverse, identification: tuple) -> EdgeInverse:
    """Identify two edges over a common slab, or two vertices over a common interior position.

    ``identification`` is ``("edges", e1, e2)`` or ``("vertices", v1, v2)``.
    Edges over the first slab must share their left endpoint and edges over
    the last slab their right endpoint.  Measures of identified edges add.
    """
    kind, x, y = identification
    if x == y:
        raise EdgeInverseError("identification needs two distinct members")
    vmerge: list[tuple[int, int]] = []
    emerge: tuple[int, int] | None = None
    if kind == "edges":
        if E.slab(x) != E.slab(y):
            raise EdgeInverseError(f"edges {x} and {y} lie over different slabs")
        (a1, b1), (a2, b2) = E.ends[x], E.ends[y]
        j = E.slab(x)
        if j == 0 and a1 != a2:
            raise EdgeInverseError("edges over the first slab must share their left endpoint")
        if j == E.m - 1 and b1 != b2:
            raise EdgeInverseError("edges over the last slab must share their right endpoint")
        vmerge = [(a1, a2), (b1, b2)]
        emerge = (x, y)
    elif kind == "vertices":
        if E.position[x] != E.position[y]:
            raise EdgeInverseError(f"vertices {x} and {y} lie over different positions")
        if E.position[x] in (0, E.m):
            raise EdgeInverseError("vertices over an endpoint of the interval cannot be identified")
        vmerge = [(x, y)]
    else:
        raise EdgeInverseError(f"unknown identification kind {kind!r}")

    rep = list(range(E.n_vertices))
    for a, b in vmerge:
        if a != b:
            lo, hi = min(a, b), max(a, b)
            rep[hi] = lo
    keep = [v for v in range(E.n_vertices) if rep[v] == v]
    new_id = {v: i for i, v in enumerate(keep)}
    vid = [new_id[rep[v]] for v in range(E.n_vertices)]
    ends, nu = [], []
    drop = None
    if emerge is not None:
        drop = max(emerge)
        keep_e = min(emerge)
    for e, (a, b) in enumerate(E.ends):
        if e == drop:
            continue
        w = E.nu[e]
        if emerge is not None and e == keep_e:
            w = E.nu[x] + E.nu[y]
        ends.append((vid[a], vid[b]))
        nu.append(w)
    position = tuple(E.position[v] for v in keep)
    left = tuple(vid[v] for v in E.left_fiber)
    right = tuple(vid[v] for v in E.right_fiber)
    return EdgeInverse(E.m, position, tuple(ends), tuple(nu), left, right)


@dataclass(frozen=True)
class QuotientMap:
    vertex_map: tuple[int, ...]
    edge_map: tuple[int, ...]


def special_cover(E: EdgeInverse) -> tuple[EdgeInverse, QuotientMap]:
    """One strand per lift of the whole interval, weighted by the lift measure.

    Strands that start (end) at the same vertex of ``E`` share their start
    (end) vertex.  Returns the special inverse and the quotient map back onto
    ``E``.
    """
    m = E.m
    lifts = E.lifts()
    n0, n1 = len(E.left_fiber), len(E.right_fiber)
    lpos = {v: i for i, v in enumerate(E.left_fiber)}
    rpos = {v: i for i, v in enumerate(E.right_fiber)}
    position = [0] * n0 + [m] * n1
    vmap = list(E.left_fiber) + list(E.right_fiber)
    ends, nu, emap = [], [], []
    for lift in lifts:
        verts = E.lift_vertices(lift)
        w = E.omega(lift)
        chain = [lpos[verts[0]]]
        for j in range(1, m):
            chain.append(len(position))
            position.append(j)
            vmap.append(verts[j])
        chain.append(n0 + rpos[verts[m]])
        for j in range(m):
            ends.append((chain[j], chain[j + 1]))
            nu.append(w / m)
            emap.append(lift[j])
    cover = EdgeInverse(m, tuple(position), tuple(ends), tuple(nu))
    return cover, QuotientMap(tuple(vmap), tuple(emap))


def pushforward(cover: EdgeInverse, sigma: QuotientMap, n_edges: int) -> tuple[Fraction, ...]:
    out = [Fraction(0)] * n_edges
    for e, x in enumerate(cover.nu):
        out[sigma.edge_map[e]] += x
    return tuple(out)


def quotient_chain(cover: EdgeInverse, sigma: QuotientMap) -> list[tuple]:
    """Identifications that collapse ``cover`` onto the target of ``sigma``.

    Interior vertices with equal images are merged first, then parallel edges
    with equal images.  The returned identifications refer to the ids of the
    inverse current at the moment each one is applied.
    """
    E = cover
    vimg = list(sigma.vertex_map)
    eimg = list(sigma.edge_map)
    steps = []
    while True:
        pair = _find_pair(E, vimg)
        if pair is None:
            break
        v1, v2 = pair
        steps.append(("vertices", v1, v2))
        E, vimg, eimg = _apply_tracked(E, ("vertices", v1, v2), vimg, eimg)
    while True:
        seen: dict[int, int] = {}
        found = None
        for e, img in enumerate(eimg):
            if img in seen:
                found = (seen[img], e)
                break
            seen[img] = e
        if found is None:
            break
        steps.append(("edges",) + found)
        E, vimg, eimg = _apply_tracked(E, ("edges",) + found, vimg, eimg)
    return steps


def _find_pair(E: EdgeInverse, vimg: list[int]) -> tuple[int, int] | None:
    seen: dict[int, int] = {}
    for v, img in enumerate(vimg):
        if 0 < E.position[v] < E.m:
            if img in seen:
                return seen[img], v
            seen[img] = v
    return None


def _apply_tracked(E: EdgeInverse, ident: tuple, vimg: list[int], eimg: list[int]):
    kind, x, y = ident
    Q = quotient(E, ident)
    if kind == "vertices":
        drop_v = {max(x, y)}
        drop_e = None
    else:
        (a1, b1), (a2, b2) = E.ends[x], E.ends[y]
        drop_v = {max(a1, a2), max(b1, b2)} - {min(a1, a2), min(b1, b2)}
        drop_e = max(x, y)
    new_vimg = [img for v, img in enumerate(vimg) if v not in drop_v]
    new_eimg = [img for e, img in enumerate(eimg) if e != drop_e]
    return Q, new_vimg, new_eimg


def apply_chain(E: EdgeInverse, steps: Sequence[tuple]) -> EdgeInverse:
    for ident in steps:
        E = quotient(E, ident)
    return E


def is_isomorphic(A: EdgeInverse, B: EdgeInverse) -> bool:
    """Isomorphism preserving positions and edge measures."""
    import networkx as nx
    from networkx.algorithms import isomorphism as iso

    if A.m != B.m or A.n_vertices != B.n_vertices or A.n_edges != B.n_edges:
        return False
    if sorted(A.nu) != sorted(B.nu):
        return False

    def to_graph(E: EdgeInverse):
        g = nx.MultiGraph()
        for v, p in enumerate(E.position):
            g.add_node(v, pos=p)
        for (a, b), x in zip(E.ends, E.nu):
            g.add_edge(a, b, nu=x)
        return g

    return nx.is_isomorphic(
        to_graph(A),
        to_graph(B),
        node_match=iso.categorical_node_match("pos", None),
        edge_match=iso.categorical_multiedge_match("nu", None),
    )


# -- doubly stochastic matrices --------------------------------------------


def _as_rows(M) -> tuple[tuple[Fraction, ...], ...]:
    if isinstance(M, ProbabilityMatrix):
        n, k = M.shape
        if n != k:
            raise EdgeInverseError("matrix must be square")
        rows = tuple(tuple(x * n for x in r) for r in M.entries)
    else:
        rows = tuple(tuple(as_fraction(x) for x in r) for r in M)
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise EdgeInverseError("matrix must be square and non-empty")
    if any(x < 0 for r in rows for x in r):
        raise EdgeInverseError("entries must be nonnegative")
    if any(sum(r) != 1 for r in rows) or any(sum(c) != 1 for c in zip(*rows)):
        raise EdgeInverseError("matrix is not doubly stochastic (rows and columns must sum to 1)")
    return rows


def perfect_matching(allowed: Sequence[Sequence[bool]]) -> tuple[int, ...] | None:
    """Perfect matching row -> column by augmenting paths; rows and columns tried in increasing order."""
    n = len(allowed)
    match_col = [-1] * n

    def augment(i: int, seen: list[bool]) -> bool:
        for j in range(n):
            if allowed[i][j] and not seen[j]:
                seen[j] = True
                if match_col[j] < 0 or augment(match_col[j], seen):
                    match_col[j] = i
                    return True
        return False

    for i in range(n):
        if not augment(i, [False] * n):
            return None
    perm = [0] * n
    for j, i in enumerate(match_col):
        perm[i] = j
    return tuple(perm)


def birkhoff_decompose(M) -> list[tuple[Fraction, tuple[int, ...]]]:
    """Write a doubly stochastic matrix as a convex combination of permutation matrices.

    ``M`` has unit row and column sums, or is a square
    :class:`ProbabilityMatrix` with uniform marginals (rescaled internally).
    Each term is ``(coefficient, perm)`` with ``perm[row] = column``.
    """
    rows = [list(r) for r in _as_rows(M)]
    n = len(rows)
    terms = []
    while any(x for r in rows for x in r):
        perm = perfect_matching([[x > 0 for x in r] for r in rows])
        if perm is None:  # cannot happen for a doubly stochastic residual
            raise EdgeInverseError("support has no perfect matching")
        coeff = min(rows[i][perm[i]] for i in range(n))
        for i in range(n):
            rows[i][perm[i]] -= coeff
        terms.append((coeff, perm))
    return terms


def recompose(terms: Sequence[tuple[Fraction, Sequence[int]]], n: int) -> tuple[tuple[Fraction, ...], ...]:
    out = [[Fraction(0)] * n for _ in range(n)]
    for coeff, perm in terms:
        for i, j in enumerate(perm):
            out[i][j] += coeff
    return tuple(tuple(r) for r in out)


@dataclass(frozen=True)
class DoublyStochasticLift:
    matrix: ProbabilityMatrix
    row_map: tuple[int, ...]
    col_map: tuple[int, ...]
    shape: tuple[int, int]


def lift_to_doubly_stochastic(P: ProbabilityMatrix) -> DoublyStochasticLift:
    """Replicate rows and columns until every marginal equals ``1/d``.

    ``d`` is the least common denominator of all marginals; row ``s`` with
    marginal ``a/d`` becomes ``a`` rows, each a copy scaled by ``1/a``, and the
    same is then done to columns.
    """
    rho, tau = P.row_marginals, P.col_marginals
    if any(x == 0 for x in rho + tau):
        raise EdgeInverseError("marginals must be positive")
    d = reduce(lambda a, b: a * b // math.gcd(a, b), (x.denominator for x in rho + tau), 1)
    alpha = [int(x * d) for x in rho]
    beta = [int(x * d) for x in tau]
    row_map = tuple(s for s, a in enumerate(alpha) for _ in range(a))
    col_map = tuple(t for t, b in enumerate(beta) for _ in range(b))
    entries = tuple(
        tuple(P.entries[s][t] / (alpha[s] * beta[t]) for t in col_map) for s in row_map
    )
    return DoublyStochasticLift(ProbabilityMatrix(entries), row_map, col_map, P.shape)


def contract(lift: DoublyStochasticLift) -> ProbabilityMatrix:
    n, k = lift.shape
    out = [[Fraction(0)] * k for _ in range(n)]
    for i, s in enumerate(lift.row_map):
        for j, t in enumerate(lift.col_map):
            out[s][t] += lift.matrix.entries[i][j]
    return ProbabilityMatrix(tuple(tuple(r) for r in out))


def birkhoff_polytope_dimension(n: int) -> int:
    """Affine dimension of the span of all ``n x n`` permutation matrices (exact rank)."""
    from sympy import Matrix

    perms = list(permutations(range(n)))
    base = perms[0]

    def flat(p):
        return [1 if p[i] == j else 0 for i in range(n) for j in range(n)]

    b = flat(base)
    rows = [[x - y for x, y in zip(flat(p), b)] for p in perms[1:]]
    return Matrix(rows).rank() if rows else 0


def doubly_stochastic_constraint_dimension(n: int) -> int:
    """``n**2`` minus the rank of the row- and column-sum equations."""
    from sympy import Matrix

    rows = []
    for i in range(n):
        rows.append([1 if r == i else 0 for r in range(n) for _ in range(n)])
    for j in range(n):
        rows.append([1 if c == j else 0 for _ in range(n) for c in range(n)])
    return n * n - Matrix(rows).rank()


# -- canonical matrices from a support pattern -----------------------------


class SupportError(EdgeInverseError):
    def __init__(self, message: str, rows: tuple[int, ...] = (), cols: tuple[int, ...] = ()):
        super().__init__(message)
        self.rows = rows
        self.cols = cols


def _hall_witness(allowed: Sequence[Sequence[bool]]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    # rows reachable by alternating paths from an unmatched row of a maximum
    # matching; their neighbourhood is strictly smaller than the set itself
    n = len(allowed)
    match_col = [-1] * n
    match_row = [-1] * n

    def augment(i: int, seen: list[bool]) -> bool:
        for j in range(n):
            if allowed[i][j] and not seen[j]:
                seen[j] = True
                if match_col[j] < 0 or augment(match_col[j], seen):
                    match_col[j] = i
                    match_row[i] = j
                    return True
        return False

    for i in range(n):
        augment(i, [False] * n)
    free = next(i for i in range(n) if match_row[i] < 0)
    rows, cols = {free}, set()
    frontier = [free]
    while frontier:
        i = frontier.pop()
        for j in range(n):
            if allowed[i][j] and j not in cols:
                cols.add(j)
                k = match_col[j]
                if k >= 0 and k not in rows:
                    rows.add(k)
                    frontier.append(k)
    return tuple(sorted(rows)), tuple(sorted(cols))


def _best_matching(allowed, gain) -> tuple[int, ...]:
    # perfect matching inside `allowed` maximising the number of `gain` cells;
    # among maximisers the lexicographically smallest permutation is returned
    import numpy as np
    from scipy.optimize import linear_sum_assignment

    n = len(allowed)

    def best_value(fixed: dict[int, int]) -> int | None:
        w = np.full((n, n), -(n + 1) * 2, dtype=np.int64)
        for i in range(n):
            for j in range(n):
                if allowed[i][j] and (i not in fixed or fixed[i] == j) and (j not in fixed.values() or fixed.get(i) == j):
                    w[i, j] = 1 if gain[i][j] else 0
        r, c = linear_sum_assignment(w, maximize=True)
        if any(w[i, j] < 0 for i, j in zip(r, c)):
            return None
        return int(sum(w[i, j] for i, j in zip(r, c)))

    target = best_value({})
    fixed: dict[int, int] = {}
    for i in range(n):
        for j in range(n):
            if not allowed[i][j] or j in fixed.values():
                continue
            trial = dict(fixed)
            trial[i] = j
            if best_value(trial) == target:
                fixed = trial
                break
    return tuple(fixed[i] for i in range(n))


def canonical_cover(support: Sequence[Sequence]) -> list[tuple[int, ...]]:
    """Permutations whose supports exactly cover ``support``, chosen greedily."""
    allowed = [[bool(x) for x in r] for r in support]
    n = len(allowed)
    if n == 0 or any(len(r) != n for r in allowed):
        raise EdgeInverseError("support must be a non-empty square pattern")
    if perfect_matching(allowed) is None:
        rows, cols = _hall_witness(allowed)
        raise SupportError(f"Hall condition fails: rows {rows} only reach columns {cols}", rows, cols)
    for i in range(n):
        for j in range(n):
            if allowed[i][j]:
                sub = [[allowed[a][b] and a != i and b != j for b in range(n)] for a in range(n)]
                sub[i][j] = True
                if perfect_matching(sub) is None:
                    raise SupportError(f"cell ({i}, {j}) lies on no permutation inside the support", (i,), (j,))
    uncovered = [[allowed[i][j] for j in range(n)] for i in range(n)]
    perms = []
    while any(x for r in uncovered for x in r):
        perm = _best_matching(allowed, uncovered)
        perms.append(perm)
        for i, j in enumerate(perm):
            uncovered[i][j] = False
    return perms


def canonical_from_support(support: Sequence[Sequence]) -> tuple[tuple[Fraction, ...], ...]:
    """Uniform average of a greedy permutation cover of ``support``.

    The result has unit row and column sums; every supported entry is at
    least ``1/len(cover)``.
    """
    perms = canonical_cover(support)
    k = len(perms)
    return recompose([(Fraction(1, k), p) for p in perms], len(support))


def as_probability(M: Sequence[Sequence]) -> ProbabilityMatrix:
    """Rescale a nonnegative matrix so its entries sum to 1."""
    rows = [[as_fraction(x) for x in r] for r in M]
    total = sum((x for r in rows for x in r), Fraction(0))
    return ProbabilityMatrix(tuple(tuple(x / total for x in r) for r in rows))
