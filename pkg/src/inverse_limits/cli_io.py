"""Plain-text serialization of systems, edge inverses and matrices.

The format is line based.  A file starts with ``inverse-limits 1`` and
contains blocks opened by a keyword line and closed by ``end``::

    params m=2 delta=4 theta=2 C=1 c0=1/2 c0_prime=1/2 N1=2 N2=2 K=4 C_tilde=1
    policy name=laakso_like seed=0 depth=2
    graph level=0 vertices=2
    e 0 1 1
    end
    projection level=0
    vmap 0 1 2 ...
    emap 0 1 ...
    end
    inverse name=w m=2
    pos 0 0 2 2 1
    e 0 4 1/4
    end
    matrix name=P
    row 1/2 1/2
    end

Rationals are written ``p/q`` (integers without a denominator).  Comments
start with ``#``.  A file with a ``policy`` block carrying ``depth`` but no
``graph`` blocks is rebuilt from the named preset.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from .edge_inverse import EdgeInverse, EdgeInverseError, ProbabilityMatrix
from .graph_core import GraphError, MetricMeasureGraph, subdivide
from .inverse_step import Projection, ProjectionError, check_axioms, fuzzy_section
from .system_builder import InverseSystem, SystemParams, build_preset

FORMAT_LINE = "inverse-limits 1"


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}" if line else message)
        self.line = line
        self.column = column


class SemanticError(ValueError):
    pass


def fmt(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_rational(text: str, line: int = 0, column: int = 0) -> Fraction:
    try:
        if "." in text or "e" in text.lower():
            raise ValueError
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"expected a rational p/q, got {text!r}", line, column) from None


# -- writing ----------------------------------------------------------------------


def _params_line(p: SystemParams) -> str:
    return "params " + " ".join(f"{f.name}={fmt(getattr(p, f.name))}" for f in fields(p))


def _graph_block(G: MetricMeasureGraph) -> list[str]:
    out = [f"graph level={G.level} vertices={G.n_vertices} m={G.m}"]
    for (a, b), mu in zip(G.ends, G.measure):
        out.append(f"e {a} {b} {fmt(mu)}")
    out.append("end")
    return out


def _projection_block(k: int, step: Projection) -> list[str]:
    return [
        f"projection level={k}",
        "vmap " + " ".join(str(v) for v in step.vertex_map),
        "emap " + " ".join(str(e) for e in step.edge_map),
        "end",
    ]


def inverse_block(name: str, E: EdgeInverse) -> list[str]:
    out = [f"inverse name={name} m={E.m}"]
    out.append("pos " + " ".join(str(p) for p in E.position))
    out.append("left " + " ".join(str(v) for v in E.left_fiber))
    out.append("right " + " ".join(str(v) for v in E.right_fiber))
    for (a, b), x in zip(E.ends, E.nu):
        out.append(f"e {a} {b} {fmt(x)}")
    out.append("end")
    return out


def matrix_block(name: str, rows) -> list[str]:
    out = [f"matrix name={name}"]
    for r in rows:
        out.append("row " + " ".join(fmt(x) for x in r))
    out.append("end")
    return out


def dumps_system(system: InverseSystem, inverses: dict[str, EdgeInverse] | None = None) -> str:
    lines = [FORMAT_LINE, _params_line(system.params)]
    lines.append(f"policy name={system.policy_name or 'explicit'} seed={system.seed}")
    for G in system.levels:
        lines.extend(_graph_block(G))
    for k, step in enumerate(system.steps):
        lines.extend(_projection_block(k, step))
    for name in sorted(inverses or {}):
        lines.extend(inverse_block(name, inverses[name]))
    return "\n".join(lines) + "\n"


def save_system(system: InverseSystem, path, inverses=None) -> None:
    Path(path).write_text(dumps_system(system, inverses), encoding="utf-8")


def dumps_inverses(inverses: dict[str, EdgeInverse], matrices: dict[str, list] | None = None) -> str:
    lines = [FORMAT_LINE]
    for name in sorted(inverses):
        lines.extend(inverse_block(name, inverses[name]))
    for name in sorted(matrices or {}):
        lines.extend(matrix_block(name, matrices[name]))
    return "\n".join(lines) + "\n"


# -- reading ------------------------------------------------------------------------------


@dataclass
class Document:
    params: SystemParams | None = None
    policy: dict[str, str] = field(default_factory=dict)
    graphs: dict[int, MetricMeasureGraph] = field(default_factory=dict)
    projections: dict[int, tuple[tuple[int, ...], tuple[int, ...]]] = field(default_factory=dict)
    inverses: dict[str, EdgeInverse] = field(default_factory=dict)
    matrices: dict[str, list[list[Fraction]]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


_PARAM_TYPES = {f.name: f.type for f in fields(SystemParams)}
_INT_PARAMS = {"m", "delta", "N1", "N2", "K", "C_tilde"}


class _Reader:
    def __init__(self, text: str, strict: bool):
        self.lines = text.splitlines()
        self.strict = strict
        self.i = 0
        self.doc = Document()

    def fail(self, msg: str, col: int = 1) -> ParseError:
        return ParseError(msg, self.i, col)

    def unknown(self, msg: str, col: int = 1) -> None:
        if self.strict:
            raise self.fail(msg, col)
        self.doc.warnings.append(f"line {self.i}: {msg}")

    def next_line(self) -> list[tuple[str, int]] | None:
        while self.i < len(self.lines):
            raw = self.lines[self.i]
            self.i += 1
            text = raw.split("#", 1)[0]
            toks = []
            col = 0
            for part in text.split():
                col = text.index(part, col)
                toks.append((part, col + 1))
                col += len(part)
            if toks:
                return toks
        return None

    def keyvals(self, toks, allowed: set[str], required: set[str] = frozenset()) -> dict[str, str]:
        out = {}
        for tok, col in toks:
            if "=" not in tok:
                raise self.fail(f"expected key=value, got {tok!r}", col)
            k, v = tok.split("=", 1)
            if k not in allowed:
                self.unknown(f"unknown field {k!r}", col)
                continue
            out[k] = v
        missing = required - out.keys()
        if missing:
            raise self.fail(f"missing field(s) {', '.join(sorted(missing))}")
        return out

    def integer(self, tok: str, col: int) -> int:
        try:
            return int(tok)
        except ValueError:
            raise self.fail(f"expected an integer, got {tok!r}", col) from None

    def block_lines(self) -> Iterable[list[tuple[str, int]]]:
        while True:
            toks = self.next_line()
            if toks is None:
                raise self.fail("unexpected end of file inside a block")
            if toks[0][0] == "end":
                return
            yield toks

    def run(self) -> Document:
        toks = self.next_line()
        if toks is None or " ".join(t for t, _ in toks) != FORMAT_LINE:
            raise ParseError(f"first line must be {FORMAT_LINE!r}", max(self.i, 1), 1)
        while (toks := self.next_line()) is not None:
            head, col = toks[0]
            rest = toks[1:]
            if head == "params":
                self.read_params(rest)
            elif head == "policy":
                self.doc.policy = self.keyvals(rest, {"name", "seed", "depth", "m"}, {"name"})
            elif head == "graph":
                self.read_graph(rest)
            elif head == "projection":
                self.read_projection(rest)
            elif head == "inverse":
                self.read_inverse(rest)
            elif head == "matrix":
                self.read_matrix(rest)
            else:
                self.unknown(f"unknown block {head!r}", col)
                if not self.strict:
                    for _ in self.block_lines():
                        pass
        return self.doc

    def read_params(self, rest) -> None:
        kv = self.keyvals(rest, set(_PARAM_TYPES), {"m"})
        vals = {}
        for k, v in kv.items():
            if k in _INT_PARAMS:
                vals[k] = self.integer(v, 1)
            else:
                vals[k] = parse_rational(v, self.i, 1)
        try:
            self.doc.params = SystemParams(**vals)
        except Exception as exc:
            raise self.fail(str(exc)) from None

    def read_graph(self, rest) -> None:
        start = self.i
        kv = self.keyvals(rest, {"level", "vertices", "m"}, {"level", "vertices"})
        level = self.integer(kv["level"], 1)
        n = self.integer(kv["vertices"], 1)
        m = self.integer(kv.get("m", str(self.doc.params.m if self.doc.params else 2)), 1)
        ends, measure = [], []
        for toks in self.block_lines():
            if toks[0][0] != "e" or len(toks) != 4:
                raise self.fail("graph lines must read 'e A B MEASURE'", toks[0][1])
            ends.append((self.integer(*toks[1]), self.integer(*toks[2])))
            measure.append(parse_rational(toks[3][0], self.i, toks[3][1]))
        try:
            self.doc.graphs[level] = MetricMeasureGraph(m, level, n, tuple(ends), tuple(measure))
        except (GraphError, ValueError) as exc:
            raise SemanticError(f"graph at line {start}: {exc}") from None

    def read_projection(self, rest) -> None:
        kv = self.keyvals(rest, {"level"}, {"level"})
        level = self.integer(kv["level"], 1)
        vmap = emap = None
        for toks in self.block_lines():
            key = toks[0][0]
            vals = tuple(self.integer(*t) for t in toks[1:])
            if key == "vmap":
                vmap = vals
            elif key == "emap":
                emap = vals
            else:
                self.unknown(f"unknown projection field {key!r}", toks[0][1])
        if vmap is None or emap is None:
            raise self.fail("projection needs vmap and emap lines")
        self.doc.projections[level] = (vmap, emap)

    def read_inverse(self, rest) -> None:
        start = self.i
        kv = self.keyvals(rest, {"name", "m"}, {"name", "m"})
        m = self.integer(kv["m"], 1)
        pos, left, right, ends, nu = None, (), (), [], []
        for toks in self.block_lines():
            key = toks[0][0]
            if key == "pos":
                pos = tuple(self.integer(*t) for t in toks[1:])
            elif key == "left":
                left = tuple(self.integer(*t) for t in toks[1:])
            elif key == "right":
                right = tuple(self.integer(*t) for t in toks[1:])
            elif key == "e" and len(toks) == 4:
                ends.append((self.integer(*toks[1]), self.integer(*toks[2])))
                nu.append(parse_rational(toks[3][0], self.i, toks[3][1]))
            else:
                self.unknown(f"unknown inverse line {key!r}", toks[0][1])
        if pos is None:
            raise self.fail("inverse needs a pos line")
        try:
            self.doc.inverses[kv["name"]] = EdgeInverse(m, pos, tuple(ends), tuple(nu), left, right)
        except EdgeInverseError as exc:
            raise SemanticError(f"inverse {kv['name']!r} at line {start}: {exc}") from None

    def read_matrix(self, rest) -> None:
        kv = self.keyvals(rest, {"name"}, {"name"})
        rows = []
        for toks in self.block_lines():
            if toks[0][0] != "row":
                raise self.fail("matrix lines must start with 'row'", toks[0][1])
            rows.append([parse_rational(t, self.i, c) for t, c in toks[1:]])
        self.doc.matrices[kv["name"]] = rows


def parse_document(text: str, strict: bool = True) -> Document:
    return _Reader(text, strict).run()


def system_from_document(doc: Document, validate: bool = True) -> InverseSystem:
    if not doc.graphs:
        if "depth" not in doc.policy:
            raise SemanticError("file has neither graph blocks nor a policy with a depth")
        m = int(doc.policy.get("m", doc.params.m if doc.params else 2))
        return build_preset(doc.policy["name"], int(doc.policy["depth"]), m, int(doc.policy.get("seed", 0)), validate)
    if doc.params is None:
        raise SemanticError("a params line is required")
    depth = max(doc.graphs)
    if sorted(doc.graphs) != list(range(depth + 1)) or sorted(doc.projections) != list(range(depth)):
        raise SemanticError("graphs must cover levels 0..N and projections levels 0..N-1")
    levels = [doc.graphs[k] for k in range(depth + 1)]
    steps, fuzzy, reports = [], [], []
    for k in range(depth):
        vmap, emap = doc.projections[k]
        try:
            step = Projection(levels[k + 1], levels[k], subdivide(levels[k]), vmap, emap)
        except ProjectionError as exc:
            raise SemanticError(f"projection {k}: {exc}") from None
        if validate:
            report = check_axioms(step, doc.params)
            if not report.passed:
                detail = "; ".join(f"axiom {r.number} ({r.name}): {r.witness}" for r in report.failures())
                raise SemanticError(f"projection {k} fails {detail}")
            reports.append(report)
        try:
            fs = fuzzy_section(step)
        except ValueError as exc:
            raise SemanticError(f"projection {k}: {exc}") from None
        steps.append(step)
        fuzzy.append(fs)
    name = doc.policy.get("name", "explicit")
    seed = int(doc.policy.get("seed", 0))
    return InverseSystem(doc.params, levels, steps, fuzzy, name, seed, reports)


def loads_system(text: str, validate: bool = True, strict: bool = True) -> InverseSystem:
    return system_from_document(parse_document(text, strict), validate)


def load_system(path, validate: bool = True, strict: bool = True) -> InverseSystem:
    return loads_system(Path(path).read_text(encoding="utf-8"), validate, strict)


# -- tables -----------------------------------------------------------------------------------


def table(header: list[str], rows: Iterable[Iterable]) -> str:
    """Tab-separated table; the first line names the columns."""
    buf = io.StringIO()
    buf.write("\t".join(header) + "\n")
    for r in rows:
        buf.write("\t".join(fmt(x) if isinstance(x, (Fraction, int)) and not isinstance(x, bool) else str(x) for x in r) + "\n")
    return buf.getvalue()


# -- reports -------------------------------------------------------------------------------------


@dataclass
class ReportResult:
    passed: bool
    first_failure: str | None
    tables: dict[str, str]
    summary: list[str]

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in self.tables.items():
            (out / name).write_text(text, encoding="utf-8")
        (out / "summary.txt").write_text("\n".join(self.summary) + "\n", encoding="utf-8")


def report_corpus(system: InverseSystem, level: int, seed: int = 0) -> list:
    from .analysis import corpus_generate

    G = system.levels[level]
    corpus = corpus_generate(G, "random_vertex_values", 20, seed)
    corpus += corpus_generate(G, "distance_functions", 20, seed)
    corpus += corpus_generate(G, "coordinate_pullbacks", system=system)
    return corpus


def run_report(
    system: InverseSystem,
    levels: tuple[int, int] | None = None,
    lam=None,
    guard: int = 10**5,
    assert_nondegenerate: bool = False,
    seed: int = 0,
) -> ReportResult:
    """Run every analysis on ``system`` and collect tables.

    Asserted checks are the axioms of every step, distance growth, the
    lift-measure pushforward over edge 0 of ``X_0`` and, on request,
    nondegeneracy.  Doubling and Poincare constants are reported only.
    """
    from .analysis import (
        degeneracy_profile,
        degeneracy_summary,
        distance_growth_check,
        doubling_profile,
        poincare_profile,
    )
    from .path_measure import GuardExceeded, edge_path, omega_multilevel, verify_pushforward

    lo, hi = levels if levels is not None else (1, system.depth)
    lo, hi = max(lo, 0), min(hi, system.depth)
    failures: list[str] = []
    summary: list[str] = [f"system policy={system.policy_name} seed={system.seed} depth={system.depth}"]

    rows = []
    for k, step in enumerate(system.steps):
        rep = check_axioms(step, system.params)
        for r in rep.results:
            rows.append((k, r.number, r.name, "pass" if r.passed else "fail", r.value if r.value is not None else "", r.witness))
            if not r.passed:
                failures.append(f"axiom {r.number} ({r.name}) at step {k}: {r.witness}")
    axioms = table(["step", "axiom", "name", "status", "value", "witness"], rows)

    rows = []
    for i in range(max(lo, 1), hi + 1):
        dg = distance_growth_check(system, i)
        rows.append((i, "pass" if dg.passed else "fail", dg.max_excess, dg.pairs, dg.worst_pair or ""))
        if not dg.passed:
            failures.append(f"distance growth at level {i}: pair {dg.worst_pair}")
    growth = table(["level", "status", "max_excess", "pairs", "worst_pair"], rows)

    rows = []
    for i in range(max(lo, 1), hi + 1):
        try:
            pf = verify_pushforward(system, 0, i, 0, guard=guard)
        except GuardExceeded:
            rows.append((i, "skipped", "", f">{guard}"))
            continue
        rows.append((i, "pass" if pf.passed else "fail", pf.max_discrepancy, pf.n_lifts))
        if not pf.passed:
            failures.append(f"pushforward into level {i}: discrepancy {fmt(pf.max_discrepancy)}")
    pushforward = table(["level", "status", "max_discrepancy", "lifts"], rows)

    lift_rows = []
    if system.depth >= 1:
        target = min(hi, 2) if hi >= 1 else 1
        try:
            lm = omega_multilevel(system, 0, target, edge_path(system.levels[0], 0), guard)
            lift_rows = [(target, " ".join(map(str, lift)), w) for lift, w in zip(lm.lifts, lm.omega)]
        except GuardExceeded:
            summary.append(f"lift table skipped: more than {guard} lifts")
    lifts = table(["level", "lift_edges", "omega"], lift_rows)

    rows = []
    for lvl in range(lo, hi + 1):
        d = doubling_profile(system, lvl)
        p = poincare_profile(system, lvl, report_corpus(system, lvl, seed), lam=lam, seed=seed)
        rows.append((lvl, d.doubling_max if d.doubling_max is not None else "", p.poincare_max if p.poincare_max is not None else "", p.sample_spec))
        summary.append(f"{d.render()} | {p.render()}")
    constants = table(["level", "doubling_max", "poincare_max", "sample"], rows)

    summ = degeneracy_summary(system)
    G = system.levels[system.depth]
    rows = []
    for v in range(G.n_vertices):
        prof = degeneracy_profile(system, G.vertex_point(v))
        rows.append((v, " ".join("inf" if x is None else fmt(x) for x in prof.values)))
    degeneracy = table(["vertex", "rescaled_distances"], rows)
    summary.append(
        f"degeneracy nondegenerate={summ.nondegenerate} bounded_fraction={fmt(summ.bounded_fraction)} bound={fmt(summ.bound)}"
    )
    if assert_nondegenerate and not summ.nondegenerate:
        failures.append(f"system is degenerate: only {fmt(summ.bounded_fraction)} of vertices have bounded profiles")

    summary.append("result " + ("pass" if not failures else f"fail: {failures[0]}"))
    tables = {
        "axioms.tsv": axioms,
        "distance_growth.tsv": growth,
        "pushforward.tsv": pushforward,
        "lifts.tsv": lifts,
        "constants.tsv": constants,
        "degeneracy.tsv": degeneracy,
    }
    return ReportResult(not failures, failures[0] if failures else None, tables, summary)
