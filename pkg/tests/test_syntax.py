from hypothesis import given, settings
from hypothesis import strategies as st

from atomis.frontend import parse_expr, parse_program
from atomis.fuzz import random_program
from atomis.syntax import (
    ClassDecl,
    FieldDecl,
    FinishAsync,
    Let,
    New,
    NewAtomic,
    Null,
    Program,
    Var,
    alpha_rename,
    dress,
    preorder,
    pretty_print,
    pretty_print_with_positions,
    print_expr,
    rename_body,
    strip,
    strip_expr,
)

from conftest import corpus_source, CORPUS_FILES


def _program(main, classes=()):
    return Program((), tuple(classes), main)


def test_strip_removes_atomic_field_flag():
    p = parse_program("interface I {} class C implements I { head : atomic C } null")
    field = strip(p).classes[0].fields[0]
    assert (field.name, field.type, field.atomic) == ("head", "C", False)


def test_strip_null_is_identity():
    assert strip_expr(Null()) == Null()


def test_strip_new_atomic():
    assert strip_expr(NewAtomic("BaseList_na")) == New("BaseList_na")


def test_strip_erases_interface_annotations():
    p = parse_program(corpus_source("baselist.aool"))
    assert all(m.annotations is None for i in strip(p).interfaces for m in i.methods)


def test_dress_restores_atomic_field():
    p = parse_program("interface I {} class C implements I { f : atomic C } null")
    assert dress(p, strip(p)).classes[0].fields[0].atomic


def test_dress_without_lets_is_inverse_of_strip():
    p = parse_program("interface I { m(x : I) : I [(atomic -> atomic)] } class C implements I { f : atomic C } new atomic C")
    assert dress(p, strip(p)) == p


def test_dress_keeps_new_atomic_against_decorated_let():
    orig = _program(Let("x", None, NewAtomic("C"), Var("x")))
    typed = _program(Let("x", "C", New("C"), Var("x")))
    assert dress(orig, typed).main == Let("x", "C", NewAtomic("C"), Var("x"))


def test_alpha_rename_shadowed_let():
    e = parse_expr("let x = null in let x = null in x")
    assert print_expr(rename_body(e, ())) == print_expr(parse_expr("let x = null in let x$1 = null in x$1"))


def test_alpha_rename_identity_without_shadowing():
    e = parse_expr("let a = null in let b = a in b")
    assert rename_body(e, ()) == e


def test_alpha_rename_triple_shadowing():
    e = parse_expr("let y = null in let y = y in let y = y in y")
    renamed = rename_body(e, ())
    lets = [n for n in preorder(renamed) if isinstance(n, Let)]
    assert [l.name for l in lets] == ["y", "y$1", "y$2"]
    # each init refers to the previous binding, the body to the innermost one
    assert lets[1].init == Var("y") and lets[2].init == Var("y$1")
    assert lets[2].body == Var("y$2")


def test_alpha_rename_avoids_this_and_parameter():
    src = "interface I { m(x : I) : I } class C implements I { def m(x : I) : I { let x = null in let this = null in x } } null"
    body = alpha_rename(parse_program(src)).classes[0].methods[0].body
    assert {n.name for n in preorder(body) if isinstance(n, Let)}.isdisjoint({"this", "x"})


def test_round_trip_baselist():
    p = parse_program(corpus_source("baselist.aool"))
    assert parse_program(pretty_print(p)) == p


def test_round_trip_every_corpus_file():
    for path in CORPUS_FILES:
        p = parse_program(path.read_text())
        assert parse_program(pretty_print(p)) == p, path.name


def test_null_program_prints_null():
    assert pretty_print(_program(Null())).strip() == "null"


def test_finish_layout():
    e = FinishAsync(Null(), Null(), Null())
    assert print_expr(e) == "finish {\n  async {\n    null\n  }\n  async {\n    null\n  }\n};\nnull"
    assert parse_expr(print_expr(e)) == e


def test_positions_follow_preorder():
    p = parse_program(corpus_source("baselist.aool"))
    text, positions = pretty_print_with_positions(p)
    lines = text.splitlines()
    cls = next(c for c in p.classes if c.name == "BaseList_na")
    add = next(m for m in cls.methods if m.name == "add")
    pos = positions[("BaseList_na", "add")]
    nodes = list(preorder(add.body))
    assert len(pos) == len(nodes)
    line, col = pos[0]
    assert lines[line - 1][col - 1 :].startswith("let node")


def test_field_declaration_prints_atomic():
    p = _program(Null(), [ClassDecl("C", "I", (FieldDecl("f", "C", True),))])
    assert "f : atomic C" in pretty_print(p)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_round_trip_random_programs(seed):
    p = random_program(seed)
    assert parse_program(pretty_print(p)) == p


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_strip_is_idempotent(seed):
    p = strip(random_program(seed))
    assert strip(p) == p
