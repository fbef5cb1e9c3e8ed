"""Command line interface: ``inverse-limits build|check|report|lifts|sample|cover|decompose``.

Exit codes: 0 when every asserted check passes, 1 on a check failure,
2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import sys
from collections import Counter
from fractions import Fraction
from pathlib import Path

from .cli_io import (
    ParseError,
    SemanticError,
    dumps_system,
    fmt,
    inverse_block,
    load_system,
    parse_document,
    parse_rational,
    run_report,
    table,
)
from .edge_inverse import (
    EdgeInverseError,
    apply_chain,
    birkhoff_decompose,
    is_isomorphic,
    quotient_chain,
    recompose,
    special_cover,
    wedge_inverse,
)
from .inverse_step import check_axioms
from .path_measure import GuardExceeded, PathError, edge_path, omega, omega_multilevel, sample_lifts
from .system_builder import PRESETS, BuildError, build_preset, default_pinch, uniform

OK, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _levels(text: str) -> tuple[int, int]:
    try:
        a, b = text.split("..")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b, got {text!r}") from None


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except ParseError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _system_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("system", nargs="?", help="system file; a preset is built when omitted")
    p.add_argument("--preset", choices=PRESETS, default="laakso_like")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=2, help="subdivision factor for presets")
    p.add_argument("--no-validate", action="store_true", help="skip axiom checks while loading or building")
    p.add_argument("--lax", action="store_true", help="warn about unknown fields instead of failing")


def _load(args) -> object:
    if args.system:
        return load_system(args.system, validate=not args.no_validate, strict=not args.lax)
    return build_preset(args.preset, args.depth, args.m, args.seed, validate=not args.no_validate)


def _emit(args, name: str, text: str) -> None:
    if getattr(args, "out", None):
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_build(args) -> int:
    system = _load(args)
    _emit(args, "system.txt", dumps_system(system))
    consts = system.constants()
    print(" ".join(f"{k}={fmt(v)}" for k, v in consts.items()), file=sys.stderr)
    return OK


def cmd_check(args) -> int:
    system = _load(args)
    status = OK
    for k, step in enumerate(system.steps):
        rep = check_axioms(step, system.params)
        print(rep.render())
        if not rep.passed:
            status = FAIL
    return status


def cmd_report(args) -> int:
    system = _load(args)
    res = run_report(system, args.levels, args.lam, args.guard, args.assert_nondegenerate, args.seed)
    if args.out:
        res.write(args.out)
    else:
        sys.stdout.write(res.tables["constants.tsv"])
    print("\n".join(res.summary))
    return OK if res.passed else FAIL


def cmd_lifts(args) -> int:
    system = _load(args)
    k = args.level
    to = args.to if args.to is not None else k + 1
    if not 0 <= k < to <= system.depth:
        raise UsageError(f"need 0 <= level < to <= {system.depth}")
    G = system.levels[k]
    if not 0 <= args.edge < G.n_edges:
        raise UsageError(f"edge must lie in 0..{G.n_edges - 1}")
    lm = omega_multilevel(system, k, to, edge_path(G, args.edge), args.guard)
    rows = [(" ".join(map(str, lift)), w) for lift, w in zip(lm.lifts, lm.omega)]
    _emit(args, "lifts.tsv", table(["lift_edges", "omega"], rows))
    return OK if lm.total == 1 else FAIL


def cmd_sample(args) -> int:
    system = _load(args)
    k = args.level
    if not 0 <= k < system.depth:
        raise UsageError(f"level must lie in 0..{system.depth - 1}")
    G = system.levels[k]
    if not 0 <= args.edge < G.n_edges:
        raise UsageError(f"edge must lie in 0..{G.n_edges - 1}")
    path = edge_path(G, args.edge)
    lm = omega(system.steps[k], path, system.fuzzy[k], args.guard)
    counts = Counter(sample_lifts(system.steps[k], path, args.draws, args.sample_seed))
    rows = [
        (" ".join(map(str, lift)), counts.get(lift, 0), Fraction(counts.get(lift, 0), args.draws), w)
        for lift, w in zip(lm.lifts, lm.omega)
    ]
    _emit(args, "samples.tsv", table(["lift_edges", "count", "frequency", "omega"], rows))
    return OK


def _read_doc(path: str, lax: bool):
    return parse_document(Path(path).read_text(encoding="utf-8"), strict=not lax)


def cmd_cover(args) -> int:
    if args.file:
        inverses = _read_doc(args.file, args.lax).inverses
        if not inverses:
            raise UsageError("file contains no inverse blocks")
    else:
        inverses = {"wedge": wedge_inverse(args.m, uniform(2), uniform(2), default_pinch(args.m))}
    status = OK
    out = []
    for name in sorted(inverses):
        E = inverses[name]
        cover, sigma = special_cover(E)
        chain = quotient_chain(cover, sigma)
        ok = is_isomorphic(apply_chain(cover, chain), E)
        out.extend(inverse_block(f"{name}_cover", cover))
        out.append("# quotients " + " ".join(f"{kind}:{a},{b}" for kind, a, b in chain))
        out.append(f"# reproduces {name}: {'yes' if ok else 'no'}")
        if not ok:
            status = FAIL
    _emit(args, "cover.txt", "\n".join(out) + "\n")
    return status


def cmd_decompose(args) -> int:
    if args.matrix:
        try:
            rows = [[parse_rational(x) for x in r.split()] for r in args.matrix.split(";")]
        except ParseError as exc:
            raise UsageError(str(exc)) from None
        matrices = {"M": rows}
    elif args.file:
        matrices = _read_doc(args.file, args.lax).matrices
        if not matrices:
            raise UsageError("file contains no matrix blocks")
    else:
        raise UsageError("give a matrix file or --matrix")
    status = OK
    out = []
    for name in sorted(matrices):
        M = matrices[name]
        try:
            terms = birkhoff_decompose(M)
        except (EdgeInverseError, ValueError) as exc:
            raise UsageError(f"matrix {name}: {exc}") from None
        n = len(M)
        exact = recompose(terms, n) == tuple(tuple(Fraction(x) for x in r) for r in M)
        out.append(f"# matrix {name}: {len(terms)} terms, exact={'yes' if exact else 'no'}")
        out.append(table(["coefficient", "permutation"], [(c, " ".join(map(str, p))) for c, p in terms]).rstrip("\n"))
        if not exact:
            status = FAIL
    _emit(args, "decomposition.tsv", "\n".join(out) + "\n")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inverse-limits", description="Build and check inverse systems of metric measure graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a preset system and write it in the text format")
    _system_args(p)
    p.add_argument("--out", help="directory for system.txt (stdout otherwise)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("check", help="check the axioms of every step")
    _system_args(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("report", help="run the analyses and write tables")
    _system_args(p)
    p.add_argument("--levels", type=_levels, help="level range a..b for the analyses")
    p.add_argument("--lambda", dest="lam", type=_rational, help="ball enlargement factor p/q")
    p.add_argument("--guard", type=int, default=10**5, help="maximum number of lifts to enumerate")
    p.add_argument("--assert-nondegenerate", action="store_true")
    p.add_argument("--out", help="directory for the report tables")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("lifts", help="tabulate the lift measure of an edge")
    _system_args(p)
    p.add_argument("--level", type=int, default=0)
    p.add_argument("--to", type=int, help="level of the lifts (default level+1)")
    p.add_argument("--edge", type=int, default=0)
    p.add_argument("--guard", type=int, default=10**5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_lifts)

    p = sub.add_parser("sample", help="draw lifts of an edge and compare with the lift measure")
    _system_args(p)
    p.add_argument("--level", type=int, default=0)
    p.add_argument("--edge", type=int, default=0)
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--sample-seed", type=int, default=0)
    p.add_argument("--guard", type=int, default=10**5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("cover", help="special cover of edge inverses and the quotient chain back")
    p.add_argument("file", nargs="?", help="file with inverse blocks (a wedge when omitted)")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--lax", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cover)

    p = sub.add_parser("decompose", help="Birkhoff decomposition of doubly stochastic matrices")
    p.add_argument("file", nargs="?", help="file with matrix blocks")
    p.add_argument("--matrix", help="rows separated by ';', entries by spaces, e.g. '1/2 1/2; 1/2 1/2'")
    p.add_argument("--lax", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decompose)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, UsageError, OSError, PathError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except (SemanticError, BuildError, EdgeInverseError, GuardExceeded) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return FAIL


if __name__ == "__main__":
    sys.exit(main())
