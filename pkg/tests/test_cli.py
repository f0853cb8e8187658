import json

import pytest

from atomis.cli import main
from atomis.frontend import parse_program

from conftest import CORPUS

BASELIST = str(CORPUS / "baselist.aool")
ILL_TYPED = str(CORPUS / "negative" / "ill_typed.aool")
IFACE = str(CORPUS / "negative" / "iface_violation.aool")


def test_check_ok(capsys):
    assert main(["check", BASELIST]) == 0
    assert capsys.readouterr().out.endswith("ok (stage 3)\n")


def test_stage_one_failure_exits_ten(capsys):
    assert main(["check", ILL_TYPED]) == 10
    assert "error[E-SUBTYPE]" in capsys.readouterr().err


def test_stage_three_failure_exits_thirty(capsys):
    assert main(["analyze", IFACE]) == 30
    err = capsys.readouterr().err
    assert "error[E-IFACE]: class BaseList_na misses variant (recv=a) add : (atomic -> non_atomic)" in err


def test_stage_two_failure_exits_twenty(tmp_path, capsys):
    src = tmp_path / "unsat.aool"
    src.write_text(
        "interface Object {} interface I { m(x : Object) : Object }"
        " class C implements I { def m(x : Object) : Object { x } }"
        " let c : I = new C in c.m(null)"
    )
    assert main(["check", str(src)]) == 20
    assert "E-UNSAT" in capsys.readouterr().err


def test_missing_file_is_a_usage_error(capsys):
    assert main(["check", "/nonexistent.aool"]) == 2


def test_unknown_subcommand_is_a_usage_error(capsys):
    assert main(["frobnicate"]) == 2


def test_analyze_summary(capsys):
    assert main(["analyze", BASELIST, "--solver-mode", "optimal"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["stage"] == 3 and summary["solverMode"] == "optimal"
    assert "n.BaseList_na.add.n.a" in summary["valid"]


def test_analyze_incremental_summary(capsys):
    assert main(["analyze", BASELIST, "--incremental"]) == 0
    inc = json.loads(capsys.readouterr().out)["incremental"]
    assert inc["pushes"] == 3 and len(inc["locallyInvalid"]) == 8


def test_dumps(tmp_path):
    cons, sol = tmp_path / "c.json", tmp_path / "s.json"
    assert main(["analyze", BASELIST, "--dump-constraints", str(cons), "--dump-solution", str(sol)]) == 0
    assert "this.BaseList_na.add.element.%f0" in json.loads(cons.read_text())
    assert json.loads(sol.read_text())["variants"]["n.Unit.main.n.n"] == "valid"


def test_emit_writes_reparseable_program(tmp_path):
    out, meta = tmp_path / "out.aool", tmp_path / "out.json"
    assert main(["emit", BASELIST, "-o", str(out), "--emit-json", str(meta)]) == 0
    p = parse_program(out.read_text())
    assert "a_BaseList_na" in {c.name for c in p.classes}
    assert json.loads(meta.read_text())["mangling"]["methods"]["add_n_n"] == "add"


def test_emit_is_byte_stable(tmp_path):
    a, b = tmp_path / "a.aool", tmp_path / "b.aool"
    main(["emit", BASELIST, "-o", str(a)])
    main(["emit", BASELIST, "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_run(capsys):
    assert main(["run", BASELIST, "--seed", "0"]) == 0
    assert capsys.readouterr().out == "outcome: done after 57 steps, value &0\n"


def test_run_generated_with_trace(capsys):
    assert main(["run", BASELIST, "--generated", "--trace", "--max-steps", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [json.loads(l)["rule"] for l in lines[:3]] == ["new", "let", "new"]
    assert lines[-1] == "outcome: timeout after 3 steps"


def test_costep_report(tmp_path, capsys):
    report = tmp_path / "r.json"
    assert main(["costep", BASELIST, "--seed", "2", "--report", str(report)]) == 0
    assert capsys.readouterr().out == "costep: ok after 57 steps (done)\n"
    assert json.loads(report.read_text())["verdict"] == "ok"


@pytest.mark.parametrize("fmt", ["text", "json"])
def test_uow(fmt, capsys):
    assert main(["uow", BASELIST, "--format", fmt, "--policy", "standard"]) == 0
    out = capsys.readouterr().out
    assert "n_BaseList_na.add_n_n" in out


def test_verify(tmp_path, capsys):
    report = tmp_path / "v.json"
    assert main(["verify", BASELIST, "--seeds", "2", "--report", str(report)]) == 0
    assert json.loads(report.read_text())["ok"] is True
    assert "costep seed 1: ok" in capsys.readouterr().out
