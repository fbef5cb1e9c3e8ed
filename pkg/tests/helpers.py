"""Shared builders for the test modules."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from inverse_limits.graph_core import path_graph
from inverse_limits.system_builder import BuildPolicy, SystemParams, build_preset, build_system


@lru_cache(maxsize=None)
def built(name: str, depth: int, m: int = 2, seed: int = 0):
    return build_preset(name, depth, m, seed)


def single_step(inverse, validate: bool = True):
    """Build one level over [0, 1] with a fixed edge inverse."""
    left, right = inverse.endpoint_weights()
    m = inverse.m
    policy = BuildPolicy(
        "fixed",
        lambda G, k, v: len(left) if v == 0 else len(right),
        lambda G, k, v: left if v == 0 else right,
        lambda ctx: inverse,
        0,
    )
    params = SystemParams(
        m=m, delta=64, theta=Fraction(4 * m), C=Fraction(64), c0=Fraction(1, 1000),
        c0_prime=min(left + right), N1=max(len(left), len(right)), N2=8, K=64, C_tilde=1,
    )
    return build_system(path_graph(1, m), policy, 1, params, validate)


def random_edge_inverse(rng, m: int, max_edges: int = 12, merges: int = 4):
    """Seeded edge inverse: a special one from a random matrix, then random identifications."""
    from inverse_limits.edge_inverse import EdgeInverseError, ProbabilityMatrix, quotient, special_from_matrix

    max_strands = max_edges // m
    while True:
        n0, n1 = rng.randint(1, 3), rng.randint(1, 3)
        cells = [(s, t) for s in range(n0) for t in range(n1)]
        support = set(rng.sample(cells, rng.randint(1, len(cells))))
        for s in range(n0):
            if not any(c[0] == s for c in support):
                support.add((s, rng.randrange(n1)))
        for t in range(n1):
            if not any(c[1] == t for c in support):
                support.add((rng.randrange(n0), t))
        mult = {c: rng.randint(1, 2) for c in support}
        if sum(mult.values()) <= max_strands:
            break
    raw = {c: rng.randint(1, 6) for c in support}
    total = sum(raw.values())
    P = ProbabilityMatrix(tuple(tuple(Fraction(raw.get((s, t), 0), total) for t in range(n1)) for s in range(n0)))
    E = special_from_matrix(P, mult, m)
    for _ in range(merges):
        if rng.random() < 0.5:
            inner = [v for v in range(E.n_vertices) if 0 < E.position[v] < m]
            if len(inner) < 2:
                continue
            a, b = rng.sample(inner, 2)
            ident = ("vertices", a, b)
        else:
            if E.n_edges < 2:
                continue
            a, b = rng.sample(range(E.n_edges), 2)
            ident = ("edges", a, b)
        try:
            E = quotient(E, ident)
        except EdgeInverseError:
            continue
    return E


def random_walk(G, rng, length: int):
    """Non-backtracking walk of at most ``length`` edges, as a vertex path."""
    from inverse_limits.path_measure import VertexPath

    v = rng.randrange(G.n_vertices)
    verts, edges = [v], []
    for _ in range(length):
        opts = [e for e in G.incident[verts[-1]] if not edges or e != edges[-1]]
        if not opts:
            break
        e = rng.choice(opts)
        edges.append(e)
        verts.append(G.other_end(e, verts[-1]))
    if not edges:
        e = G.incident[v][0]
        edges, verts = [e], [v, G.other_end(e, v)]
    return VertexPath(tuple(verts), tuple(edges))
