import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomis.frontend import DiagnosticError, parse_program
from atomis.fuzz import random_program
from atomis.oolong import NULL_TYPE, ClassTable, main_type, pre_process, typecheck_oolong
from atomis.syntax import Let, preorder, strip

from conftest import corpus_source


@pytest.fixture(scope="module")
def listing():
    return parse_program(corpus_source("baselist.aool"))


def error_codes(src: str) -> list[str]:
    with pytest.raises(DiagnosticError) as info:
        pre_process(parse_program(src))
    return [d.code for d in info.value.diagnostics]


def test_fields_of_atomic_head(listing):
    head = ClassTable(listing).fields_of("BaseList_na")["head"]
    assert (head.atomic, head.type) == (True, "Node_n")


def test_fields_of_plain_value(listing):
    value = ClassTable(listing).fields_of("Node_n")["value"]
    assert (value.atomic, value.type) == (False, "Object")


def test_fields_of_unknown_class(listing):
    with pytest.raises(KeyError):
        ClassTable(listing).fields_of("Nope")


def test_msigs_of_list_add(listing):
    add = ClassTable(listing).msigs_of("List_n")["add"]
    assert (add.sig.param_type, add.sig.ret_type, len(add.annotations)) == ("Object", "Unit", 2)


def test_msigs_of_extends_is_union():
    p = parse_program(
        "interface R { read(x : R) : R } interface W { write(x : W) : Unit } interface S extends R, W null"
    )
    assert sorted(ClassTable(p).msigs_of("S")) == ["read", "write"]


def test_diamond_with_conflicting_signatures():
    src = (
        "interface A { m(x : A) : A } interface B { m(x : B) : B } interface D extends A, B null"
    )
    assert "E-CONFLICT" in error_codes(src)


def test_cycle_in_extends():
    assert "E-CYCLE" in error_codes("interface A extends B, B interface B extends A, A null")


def test_listing_let_decoration(listing):
    p = pre_process(listing)
    add = next(m for c in p.classes for m in c.methods if m.name == "add")
    assert add.body.name == "node" and add.body.type == "Node_n"


def test_every_let_decorated_after_preprocess(listing):
    p = pre_process(listing)
    bodies = [m.body for c in p.classes for m in c.methods] + [p.main]
    assert all(n.type is not None for b in bodies for n in preorder(b) if isinstance(n, Let))


def test_unbound_variable():
    assert error_codes("x") == ["E-UNBOUND"]


def test_unbound_receiver():
    assert "E-UNBOUND" in error_codes("interface I {} class C implements I { f : C } x.f")


def test_subclass_argument_accepted():
    src = (
        "interface Object {} interface L { add(e : Object) : Unit }"
        " class Node_n implements Object {}"
        " class Lst implements L { def add(e : Object) : Unit { null } }"
        " let x = new Lst in let y = new Node_n in x.add(y)"
    )
    assert main_type(parse_program(src)) == "Unit"


@pytest.mark.parametrize(
    "src, code",
    [
        ("interface I {} class C implements J {} null", "E-UNKNOWN-TYPE"),
        ("interface I { m(x : I) : I } class C implements I {} null", "E-IMPL"),
        ("interface I {} class C implements I {} let c = new C in c.f", "E-FIELD"),
        ("interface I {} class C implements I {} let c = new C in c.m(null)", "E-METHOD"),
        ("interface I {} class C implements I { f : C } class D implements I {} let c = new C in c.f = new D", "E-SUBTYPE"),
        ("interface I {} new I", "E-NEW"),
        ("interface I {} class C implements I {} (Unit) new C", "E-CAST"),
        ("interface I { m(x : I) : I } class C implements I { def m(x : I) : I { x.m(x); let y : Nope = null in x } } null", "E-UNKNOWN-TYPE"),
        ("interface I { m(x : I) : C } class C implements I { def m(x : I) : C { x } } null", "E-RETURN"),
    ],
)
def test_typing_errors(src, code):
    assert code in error_codes(src)


def test_bare_null_main_types_as_bottom():
    assert main_type(parse_program("null")) == NULL_TYPE


def test_null_binds_to_unit_without_object():
    p = pre_process(parse_program("let x = null in x"))
    assert p.main.type == "Unit"


def test_null_binds_to_object_when_declared():
    p = pre_process(parse_program("interface Object {} let x = null in x"))
    assert p.main.type == "Object"


def test_preprocess_is_idempotent(listing):
    once = pre_process(listing)
    assert pre_process(once) == once


def test_strip_of_preprocess_is_annotation_free_typed_program(listing):
    p = pre_process(listing)
    plain = strip(p)
    assert typecheck_oolong(plain) == plain
    assert not any(f.atomic for c in plain.classes for f in c.fields)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_generated_programs_typecheck(seed):
    p = pre_process(random_program(seed))
    assert pre_process(p) == p
