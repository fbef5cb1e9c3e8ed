from __future__ import annotations

from fractions import Fraction

import pytest

from helpers import built
from inverse_limits.cli import main
from inverse_limits.cli_io import (
    FORMAT_LINE,
    ParseError,
    SemanticError,
    dumps_inverses,
    dumps_system,
    load_system,
    loads_system,
    parse_document,
    parse_rational,
    save_system,
    table,
)
from inverse_limits.edge_inverse import parallel_inverse, wedge_inverse
from inverse_limits.inverse_step import nontrivial_example
from inverse_limits.system_builder import build_preset

F = Fraction
H = F(1, 2)


def nontrivial_text(theta=4) -> str:
    step = nontrivial_example()
    lines = [FORMAT_LINE, f"params m=2 delta=3 theta={theta} C=4 c0=1/100", "policy name=nontrivial seed=0"]
    for G in (step.target_parent, step.source):
        lines.append(f"graph level={G.level} vertices={G.n_vertices} m={G.m}")
        lines.extend(f"e {a} {b} {mu}" for (a, b), mu in zip(G.ends, G.measure))
        lines.append("end")
    lines += ["projection level=0", "vmap " + " ".join(map(str, step.vertex_map)), "emap " + " ".join(map(str, step.edge_map)), "end"]
    return "\n".join(lines) + "\n"


# -- text format ------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["laakso_like", "mixed_random", "degenerate"])
def test_round_trip(name, tmp_path):
    system = built(name, 3)
    path = tmp_path / "system.txt"
    save_system(system, path)
    again = load_system(path)
    assert again == system
    assert dumps_system(again) == path.read_text()


def test_dump_is_byte_deterministic():
    a = dumps_system(build_preset("mixed_random", 2, seed=4))
    b = dumps_system(build_preset("mixed_random", 2, seed=4))
    assert a == b and a.startswith(FORMAT_LINE + "\n")


def test_negative_measure_names_the_edge():
    text = dumps_system(built("laakso_like", 1)).replace("e 0 4 1/4", "e 0 4 -1/4", 1)
    assert "-1/4" in text
    with pytest.raises(SemanticError, match="edge 0 has non-positive measure"):
        loads_system(text)


def test_nontrivial_example_fails_on_load():
    with pytest.raises(SemanticError, match="axiom 6"):
        loads_system(nontrivial_text())
    # without validation the fiber averages still need consistent star sums
    with pytest.raises(SemanticError, match="star sums"):
        loads_system(nontrivial_text(), validate=False)


def test_failing_axioms_are_all_listed():
    with pytest.raises(SemanticError) as info:
        loads_system(nontrivial_text(theta=2))
    assert "axiom 3" in str(info.value) and "axiom 6" in str(info.value)


def test_policy_only_file_rebuilds_the_preset():
    text = f"{FORMAT_LINE}\n# rebuilt on load\npolicy name=mixed_random seed=5 depth=2\n"
    assert loads_system(text) == build_preset("mixed_random", 2, seed=5)


def test_strict_and_lax_unknown_blocks():
    text = dumps_system(built("laakso_like", 1)) + "colour name=x\nfoo bar\nend\n"
    with pytest.raises(ParseError) as info:
        parse_document(text)
    assert info.value.line == text.count("\n") - 2 and info.value.column == 1
    doc = parse_document(text, strict=False)
    assert len(doc.warnings) == 1 and "colour" in doc.warnings[0]
    assert loads_system(text, strict=False) == built("laakso_like", 1)


def test_unknown_param_field_is_rejected():
    text = f"{FORMAT_LINE}\nparams m=2 colour=3\n"
    with pytest.raises(ParseError, match="colour"):
        parse_document(text)
    assert "colour" in parse_document(text, strict=False).warnings[0]


def test_parse_errors_carry_positions():
    with pytest.raises(ParseError, match="first line"):
        parse_document("hello\n")
    text = f"{FORMAT_LINE}\ngraph level=0 vertices=2\ne 0 1 0.5\nend\n"
    with pytest.raises(ParseError) as info:
        parse_document(text)
    assert (info.value.line, info.value.column) == (3, 7)
    with pytest.raises(ParseError, match="end of file"):
        parse_document(f"{FORMAT_LINE}\ngraph level=0 vertices=2\ne 0 1 1\n")


def test_parse_rational():
    assert parse_rational("3/6") == H and parse_rational("-2") == -2
    for bad in ("0.5", "1e3", "1/0", "x"):
        with pytest.raises(ParseError):
            parse_rational(bad)


def test_inverse_and_matrix_blocks():
    inverses = {"w": wedge_inverse(3, (H, H), (H, H), 1), "p": parallel_inverse(2, 3)}
    text = dumps_inverses(inverses, {"M": [[H, H], [H, H]]})
    doc = parse_document(text)
    assert doc.inverses == inverses
    assert doc.matrices == {"M": [[H, H], [H, H]]}


def test_table_has_header():
    text = table(["a", "b"], [(F(1, 3), "x"), (2, True)])
    assert text == "a\tb\n1/3\tx\n2\tTrue\n"


# -- command line -------------------------------------------------------------------------


def test_cli_build_and_check(tmp_path, capsys):
    assert main(["build", "--preset", "parallel", "--depth", "2", "--out", str(tmp_path)]) == 0
    path = tmp_path / "system.txt"
    assert load_system(path) == built("parallel", 2)
    assert main(["check", str(path)]) == 0
    assert capsys.readouterr().out.count("PASS") == 12


def test_cli_check_reports_failure(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text(nontrivial_text())
    assert main(["check", str(path)]) == 1
    assert main(["check", str(path), "--no-validate"]) == 1


def test_cli_identity_report(tmp_path):
    assert main(["report", "--preset", "identity", "--depth", "3", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "constants.tsv").read_text().splitlines()
    assert rows[0].startswith("level\tdoubling_max")
    assert [r.split("\t")[1] for r in rows[1:]] == ["2", "2", "2"]
    assert (tmp_path / "summary.txt").read_text().rstrip().endswith("result pass")


def test_cli_degenerate_report_fails_nondegeneracy(capsys):
    assert main(["report", "--preset", "degenerate", "--depth", "3", "--assert-nondegenerate"]) == 1
    assert main(["report", "--preset", "laakso_like", "--depth", "3", "--assert-nondegenerate", "--levels", "1..2"]) == 0


def test_cli_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["report", "--levels", "1-3"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["report", "--lambda", "0.5"])
    assert info.value.code == 2
    assert main(["check", str(tmp_path / "missing.txt")]) == 2
    (tmp_path / "junk.txt").write_text("nonsense\n")
    assert main(["check", str(tmp_path / "junk.txt")]) == 2
    assert main(["lifts", "--depth", "1", "--edge", "9"]) == 2


def test_cli_lifts_and_guard(tmp_path):
    assert main(["lifts", "--depth", "2", "--to", "2", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "lifts.tsv").read_text().splitlines()
    assert len(rows) == 33 and all(r.endswith("\t1/32") for r in rows[1:])
    assert main(["lifts", "--depth", "3", "--to", "3", "--guard", "10"]) == 1


def test_cli_sample_is_reproducible(tmp_path):
    args = ["sample", "--depth", "1", "--draws", "500", "--sample-seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = (tmp_path / "a" / "samples.tsv").read_bytes(), (tmp_path / "b" / "samples.tsv").read_bytes()
    assert a == b and a.startswith(b"lift_edges\tcount\tfrequency\tomega\n")


def test_cli_cover_and_decompose(tmp_path, capsys):
    assert main(["cover", "--m", "3"]) == 0
    assert "reproduces wedge: yes" in capsys.readouterr().out
    path = tmp_path / "inv.txt"
    path.write_text(dumps_inverses({"p": parallel_inverse(2, 2)}, {"M": [[F(1, 3), F(2, 3)], [F(2, 3), F(1, 3)]]}))
    assert main(["cover", str(path)]) == 0
    assert main(["decompose", str(path)]) == 0
    assert "2 terms, exact=yes" in capsys.readouterr().out
    assert main(["decompose", "--matrix", "1/2 1/2; 1/2 1/2"]) == 0
    assert main(["decompose", "--matrix", "1/2 1/3; 1/2 1/2"]) == 2
    assert main(["decompose", "--matrix", "a b; c d"]) == 2
