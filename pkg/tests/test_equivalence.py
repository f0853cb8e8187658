import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomis.equivalence import (
    check_base_type_preservation,
    check_program_context_correspondence,
    costep,
    expr_mismatch,
)
from atomis.frontend import parse_expr, parse_program
from atomis.fuzz import random_source
from atomis.pipeline import atomis_analysis
from atomis.solver import OPTIMAL
from atomis.syntax import Program, Null, pretty_print

from conftest import CORPUS_FILES, analysis, mutate

ADD_N_N = ("class a_BaseList_na", "def add_n_n")


def test_new_corresponds_under_type_map():
    assert expr_mismatch(parse_expr("new Node_n"), parse_expr("new a_Node_n")) is None


def test_null_corresponds():
    assert expr_mismatch(Null(), Null()) is None


def test_call_corresponds_under_method_map():
    assert expr_mismatch(parse_expr("x.add(null)"), parse_expr("x.add_n_a(null)")) is None
    assert expr_mismatch(parse_expr("x.add(null)"), parse_expr("y.add_n_a(null)")) is not None


def test_new_atomic_corresponds_only_to_atomic_type():
    assert expr_mismatch(parse_expr("new atomic C"), parse_expr("new a_C")) is None
    assert expr_mismatch(parse_expr("new atomic C"), parse_expr("new n_C")) is not None


def test_let_decoration_must_map():
    assert expr_mismatch(parse_expr("let x : C = null in x"), parse_expr("let x : n_C = null in x")) is None
    assert expr_mismatch(parse_expr("let x : C = null in x"), parse_expr("let x : n_D = null in x")) is not None


def test_corpus_contexts_correspond(baselist):
    assert check_program_context_correspondence(baselist.program, baselist.generated) == []


def test_empty_contexts_correspond():
    assert check_program_context_correspondence(Program((), (), Null()), Program((), (), Null())) == []


def test_perturbed_field_type_is_named(baselist):
    bad = mutate(baselist.generated, "next : a_Node_n", "next : n_Item", ("class a_Node_n",))
    issues = check_program_context_correspondence(baselist.program, bad)
    assert [(i.cls, i.member) for i in issues] == [("a_Node_n", "next")]


def test_baselist_costeps_for_ten_seeds(baselist):
    for seed in range(10):
        r = costep(baselist.program, baselist.generated, seed=seed)
        assert r.ok and r.outcome == "done" and r.steps == 57


@pytest.mark.parametrize("path", CORPUS_FILES, ids=lambda p: p.stem)
def test_corpus_costeps(path):
    r = analysis(path.name)
    for seed in range(5):
        assert costep(r.program, r.generated, seed=seed).ok


def test_wrong_variant_still_costeps(baselist):
    bad = mutate(baselist.generated, "list.add_n_n", "list.add_n_a")
    assert costep(baselist.program, bad, seed=0).ok


def test_wrong_allocation_diverges_at_allocation(baselist):
    bad = mutate(baselist.generated, "new a_Node_n", "new n_Node_n", ADD_N_N)
    r = costep(baselist.program, bad, seed=0, trace=True)
    d = r.divergence
    assert (r.verdict, d.step, d.side, d.clause) == ("diverged", 17, "generated", "heap")
    assert d.detail == "let node: location 4 of class n_Node_n where a_Node_n is expected"
    assert r.trace[-1]["rule"] == "new" and r.trace[-1]["locs"] == [4]


def test_wrong_field_type_diverges_before_stepping(baselist):
    bad = mutate(baselist.generated, "head : a_Node_n", "head : a_Item", ("class a_BaseList_na",))
    d = costep(baselist.program, bad).divergence
    assert (d.step, d.clause, d.cls, d.member) == (0, "context", "a_BaseList_na", "head")


def test_both_sides_raising_is_ok():
    r = analysis("casts.aool")
    rep = costep(r.program, r.generated)
    assert rep.ok and rep.outcome == "exn"


def test_report_json_shape(baselist):
    bad = mutate(baselist.generated, "new a_Node_n", "new n_Node_n", ADD_N_N)
    dump = costep(baselist.program, bad).to_json()
    assert dump["verdict"] == "diverged"
    assert dump["divergence"]["clause"] == "heap"


def test_base_type_preserved_on_corpus(baselist):
    assert check_base_type_preservation(baselist.program, baselist.generated)[0]


def test_base_type_preserved_on_trivial_program():
    r = atomis_analysis("null")
    assert check_base_type_preservation(r.program, r.generated)[0]


def test_deleting_called_variant_breaks_base_type(baselist):
    text = pretty_print(baselist.generated)
    start = text.index("def add_n_n", text.index("class a_BaseList_na"))
    end = text.index("def get_a_n", start)
    bad = parse_program(text[:start] + text[end:])
    ok, why = check_base_type_preservation(baselist.program, bad)
    assert not ok and "does not typecheck" in why


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_random_programs_costep(seed):
    r = atomis_analysis(random_source(seed), mode=OPTIMAL)
    if not r.ok:
        return
    assert check_program_context_correspondence(r.program, r.generated) == []
    for s in range(3):
        assert costep(r.program, r.generated, seed=s, max_steps=2000).ok
