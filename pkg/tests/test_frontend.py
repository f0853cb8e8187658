import pytest

from atomis.frontend import DiagnosticError, parse_expr, parse_program, tokenize, try_parse
from atomis.inference import A, N
from atomis.syntax import Call, Cast, ClassDecl, Let, Null, Qualifier, Select, Update, Var


def codes(src: str) -> list[str]:
    result = try_parse(src)
    assert isinstance(result, list), "expected diagnostics"
    return [d.code for d in result]


def test_empty_interface():
    p = parse_program("interface Object {} null")
    assert p.interfaces[0].name == "Object"
    assert p.interfaces[0].methods == ()


def test_annotation_list_of_two():
    src = "interface List_n { add(element : Object) : Unit [(non_atomic -> non_atomic), (non_atomic -> atomic)] } null"
    m = parse_program(src).interfaces[0].methods[0]
    assert m.sig.param_type == "Object" and m.sig.ret_type == "Unit"
    assert m.annotations == ((Qualifier.NON_ATOMIC, Qualifier.NON_ATOMIC), (Qualifier.NON_ATOMIC, Qualifier.ATOMIC))


def test_missing_annotation_list_is_none():
    m = parse_program("interface I { m(x : I) : I } null").interfaces[0].methods[0]
    assert m.annotations is None


def test_class_with_atomic_field_and_method():
    p = parse_program("class C implements I { f : atomic C def m(x : C) : C { null } } null")
    c = p.classes[0]
    assert isinstance(c, ClassDecl)
    assert [(f.name, f.type, f.atomic) for f in c.fields] == [("f", "C", True)]
    assert [(m.name, m.param, m.param_type, m.ret_type, m.body) for m in c.methods] == [("m", "x", "C", "C", Null())]


def test_extends_pair():
    p = parse_program("interface S extends R, W null")
    assert p.interfaces[0].extends == ("R", "W")


def test_sequence_desugars_in_source_order():
    e = parse_expr("x.f = null; y.g = null; z")
    assert e == Let("_$0", None, Update("x", "f", Null()), Let("_$1", None, Update("y", "g", Null()), Var("z")))


def test_cast_needs_following_expression():
    assert parse_expr("(C) x") == Cast("C", Var("x"))
    assert parse_expr("(x)") == Var("x")


def test_call_and_select():
    assert parse_expr("x.m(y.f)") == Call("x", "m", Select("y", "f"))


def test_qualifier_short_names():
    assert (A.short, N.short) == ("a", "n")


def test_spans_point_at_source():
    p = parse_program("interface I {}\nclass C implements I {}\nnew C", "f.aool")
    span = p.classes[0].span
    assert (span.file, span.start_line, span.start_col) == ("f.aool", 2, 1)


def test_dollar_identifiers_lex():
    assert [t.text for t in tokenize("x$1 _$0")][:2] == ["x$1", "_$0"]


@pytest.mark.parametrize(
    "src, code",
    [
        ("let x = null in @", "E-LEX"),
        ("let x = in x", "E-PARSE"),
        ("interface I {} interface I {} null", "E-DUP"),
        ("class C implements I { f : C f : C } null", "E-DUP"),
        ("interface I { m(x : I) : I m(x : I) : I } null", "E-DUP"),
    ],
)
def test_syntax_errors(src, code):
    assert code in codes(src)


def test_diagnostic_format():
    with pytest.raises(DiagnosticError) as info:
        parse_program("let x = in x", "bad.aool")
    line = info.value.diagnostics[0].format()
    assert line.startswith("bad.aool:1:9: error[E-PARSE]:")


def test_deep_nesting_reports_instead_of_crashing():
    src = "(" * 5000 + "null" + ")" * 5000
    assert "E-PARSE" in codes(src)
