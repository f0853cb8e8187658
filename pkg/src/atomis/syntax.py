"""Abstract syntax of AtomiS-OOlong programs, plus the purely syntactic passes
that sit around the type checker: strip, dress, alpha renaming and printing."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterator, Union

UNIT = "Unit"


class Qualifier(enum.Enum):
    ATOMIC = "atomic"
    NON_ATOMIC = "non_atomic"

    @property
    def short(self) -> str:
        return "a" if self is Qualifier.ATOMIC else "n"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"


def _span():
    return field(default=None, compare=False, repr=False)


# Expressions ---------------------------------------------------------------


@dataclass(frozen=True)
class Null:
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Var:
    name: str
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Select:
    var: str
    field: str
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Update:
    var: str
    field: str
    value: "Expr"
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Call:
    var: str
    method: str
    arg: "Expr"
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Let:
    name: str
    type: str | None
    init: "Expr"
    body: "Expr"
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class New:
    cls: str
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class NewAtomic:
    cls: str
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Cast:
    type: str
    expr: "Expr"
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class FinishAsync:
    left: "Expr"
    right: "Expr"
    cont: "Expr"
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Loc:
    """A heap location; only ever produced by the interpreter."""

    addr: int
    span: SourceSpan | None = _span()


Expr = Union[Null, Var, Select, Update, Call, Let, New, NewAtomic, Cast, FinishAsync, Loc]

VALUES = (Null, Loc)


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, Let):
        return (e.init, e.body)
    if isinstance(e, Update):
        return (e.value,)
    if isinstance(e, Call):
        return (e.arg,)
    if isinstance(e, Cast):
        return (e.expr,)
    if isinstance(e, FinishAsync):
        return (e.left, e.right, e.cont)
    return ()


def preorder(e: Expr) -> Iterator[Expr]:
    """Nodes of e in the order they appear in printed text."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


# Declarations --------------------------------------------------------------

Annotation = tuple[Qualifier, Qualifier]


@dataclass(frozen=True)
class MethodSig:
    name: str
    param: str
    param_type: str
    ret_type: str


@dataclass(frozen=True)
class InterfaceMethod:
    sig: MethodSig
    # None when no annotation list was written at all
    annotations: tuple[Annotation, ...] | None = None
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class InterfaceDecl:
    name: str
    methods: tuple[InterfaceMethod, ...] = ()
    extends: tuple[str, str] | None = None
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type: str
    atomic: bool = False
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class MethodDecl:
    name: str
    param: str
    param_type: str
    ret_type: str
    body: Expr
    span: SourceSpan | None = _span()

    @property
    def sig(self) -> MethodSig:
        return MethodSig(self.name, self.param, self.param_type, self.ret_type)


@dataclass(frozen=True)
class ClassDecl:
    name: str
    implements: str
    fields: tuple[FieldDecl, ...] = ()
    methods: tuple[MethodDecl, ...] = ()
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class Program:
    interfaces: tuple[InterfaceDecl, ...]
    classes: tuple[ClassDecl, ...]
    main: Expr


# strip / dress --------------------------------------------------------------


def strip_expr(e: Expr) -> Expr:
    if isinstance(e, NewAtomic):
        return New(e.cls, span=e.span)
    if isinstance(e, Let):
        return replace(e, init=strip_expr(e.init), body=strip_expr(e.body))
    if isinstance(e, Update):
        return replace(e, value=strip_expr(e.value))
    if isinstance(e, Call):
        return replace(e, arg=strip_expr(e.arg))
    if isinstance(e, Cast):
        return replace(e, expr=strip_expr(e.expr))
    if isinstance(e, FinishAsync):
        return replace(e, left=strip_expr(e.left), right=strip_expr(e.right), cont=strip_expr(e.cont))
    return e


def strip(p: Program) -> Program:
    """Erase every atomicity annotation, leaving a plain OOlong program."""
    interfaces = tuple(
        replace(i, methods=tuple(replace(m, annotations=None) for m in i.methods))
        for i in p.interfaces
    )
    classes = tuple(
        replace(
            c,
            fields=tuple(replace(f, atomic=False) for f in c.fields),
            methods=tuple(replace(m, body=strip_expr(m.body)) for m in c.methods),
        )
        for c in p.classes
    )
    return Program(interfaces, classes, strip_expr(p.main))


class StructuralMismatch(ValueError):
    pass


def _same(a, b, what: str) -> None:
    if a != b:
        raise StructuralMismatch(f"{what}: {a!r} vs {b!r}")


def dress_expr(orig: Expr, typed: Expr) -> Expr:
    if isinstance(orig, NewAtomic) and isinstance(typed, New):
        _same(orig.cls, typed.cls, "new")
        return orig
    _same(type(orig).__name__, type(typed).__name__, "expression kind")
    if isinstance(orig, Let):
        _same(orig.name, typed.name, "let")
        return replace(
            typed, init=dress_expr(orig.init, typed.init), body=dress_expr(orig.body, typed.body)
        )
    if isinstance(orig, Update):
        _same((orig.var, orig.field), (typed.var, typed.field), "update")
        return replace(typed, value=dress_expr(orig.value, typed.value))
    if isinstance(orig, Call):
        _same((orig.var, orig.method), (typed.var, typed.method), "call")
        return replace(typed, arg=dress_expr(orig.arg, typed.arg))
    if isinstance(orig, Cast):
        _same(orig.type, typed.type, "cast")
        return replace(typed, expr=dress_expr(orig.expr, typed.expr))
    if isinstance(orig, FinishAsync):
        return replace(
            typed,
            left=dress_expr(orig.left, typed.left),
            right=dress_expr(orig.right, typed.right),
            cont=dress_expr(orig.cont, typed.cont),
        )
    _same(orig, typed, "expression")
    return typed


def dress(original: Program, typed: Program) -> Program:
    """Put the annotations of `original` back onto a decorated, stripped copy."""
    _same(len(original.interfaces), len(typed.interfaces), "interface count")
    _same(len(original.classes), len(typed.classes), "class count")
    interfaces = []
    for oi, ti in zip(original.interfaces, typed.interfaces):
        _same((oi.name, oi.extends, len(oi.methods)), (ti.name, ti.extends, len(ti.methods)), "interface")
        methods = []
        for om, tm in zip(oi.methods, ti.methods):
            _same(om.sig, tm.sig, "signature")
            methods.append(replace(tm, annotations=om.annotations))
        interfaces.append(replace(ti, methods=tuple(methods)))
    classes = []
    for oc, tc in zip(original.classes, typed.classes):
        _same(
            (oc.name, oc.implements, len(oc.fields), len(oc.methods)),
            (tc.name, tc.implements, len(tc.fields), len(tc.methods)),
            "class",
        )
        fields = []
        for of, tf in zip(oc.fields, tc.fields):
            _same((of.name, of.type), (tf.name, tf.type), "field")
            fields.append(replace(tf, atomic=of.atomic))
        methods = []
        for om, tm in zip(oc.methods, tc.methods):
            _same(om.sig, tm.sig, "method")
            methods.append(replace(tm, body=dress_expr(om.body, tm.body)))
        classes.append(replace(tc, fields=tuple(fields), methods=tuple(methods)))
    return Program(tuple(interfaces), tuple(classes), dress_expr(original.main, typed.main))


# alpha renaming --------------------------------------------------------------


def _names(e: Expr) -> set[str]:
    out: set[str] = set()
    for node in preorder(e):
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, (Select, Update, Call)):
            out.add(node.var)
        elif isinstance(node, Let):
            out.add(node.name)
    return out


def rename_body(body: Expr, reserved: tuple[str, ...]) -> Expr:
    """Make every let-bound name in body unique and distinct from `reserved`."""
    used = _names(body) | set(reserved)
    bound = set(reserved)

    def fresh(name: str) -> str:
        k = 1
        while f"{name}${k}" in used:
            k += 1
        new = f"{name}${k}"
        used.add(new)
        return new

    def go(e: Expr, env: dict[str, str]) -> Expr:
        if isinstance(e, Var):
            return replace(e, name=env.get(e.name, e.name))
        if isinstance(e, Select):
            return replace(e, var=env.get(e.var, e.var))
        if isinstance(e, Update):
            return replace(e, var=env.get(e.var, e.var), value=go(e.value, env))
        if isinstance(e, Call):
            return replace(e, var=env.get(e.var, e.var), arg=go(e.arg, env))
        if isinstance(e, Let):
            init = go(e.init, env)
            name = e.name if e.name not in bound else fresh(e.name)
            bound.add(name)
            return replace(e, name=name, init=init, body=go(e.body, {**env, e.name: name}))
        if isinstance(e, Cast):
            return replace(e, expr=go(e.expr, env))
        if isinstance(e, FinishAsync):
            return replace(e, left=go(e.left, env), right=go(e.right, env), cont=go(e.cont, env))
        return e

    return go(body, {})


def alpha_rename(p: Program) -> Program:
    classes = tuple(
        replace(
            c,
            methods=tuple(
                replace(m, body=rename_body(m.body, ("this", m.param))) for m in c.methods
            ),
        )
        for c in p.classes
    )
    return Program(p.interfaces, classes, rename_body(p.main, ()))


# pretty printing ---------------------------------------------------------------


class _Printer:
    def __init__(self, record: bool):
        self.parts: list[str] = []
        self.line = 1
        self.col = 1
        self.record = record
        self.positions: dict[tuple[str | None, str], list[tuple[int, int]]] = {}
        self._current: list[tuple[int, int]] | None = None

    def write(self, text: str) -> None:
        self.parts.append(text)
        nl = text.count("\n")
        if nl:
            self.line += nl
            self.col = len(text) - text.rfind("\n")
        else:
            self.col += len(text)

    def newline(self, indent: int) -> None:
        self.write("\n" + "  " * indent)

    def expr(self, e: Expr, indent: int) -> None:
        if self._current is not None:
            self._current.append((self.line, self.col))
        w = self.write
        if isinstance(e, Null):
            w("null")
        elif isinstance(e, Var):
            w(e.name)
        elif isinstance(e, Loc):
            w(f"&{e.addr}")
        elif isinstance(e, Select):
            w(f"{e.var}.{e.field}")
        elif isinstance(e, Update):
            w(f"{e.var}.{e.field} = ")
            self.expr(e.value, indent)
        elif isinstance(e, Call):
            w(f"{e.var}.{e.method}(")
            self.expr(e.arg, indent + 1)
            w(")")
        elif isinstance(e, Let):
            w(f"let {e.name}")
            if e.type is not None:
                w(f" : {e.type}")
            w(" = ")
            self.expr(e.init, indent + 1)
            w(" in")
            self.newline(indent)
            self.expr(e.body, indent)
        elif isinstance(e, New):
            w(f"new {e.cls}")
        elif isinstance(e, NewAtomic):
            w(f"new atomic {e.cls}")
        elif isinstance(e, Cast):
            w(f"({e.type}) ")
            self.expr(e.expr, indent)
        elif isinstance(e, FinishAsync):
            w("finish {")
            for part in (e.left, e.right):
                self.newline(indent + 1)
                w("async {")
                self.newline(indent + 2)
                self.expr(part, indent + 2)
                self.newline(indent + 1)
                w("}")
            self.newline(indent)
            w("};")
            self.newline(indent)
            self.expr(e.cont, indent)
        else:
            raise TypeError(f"not an expression: {e!r}")

    def body(self, owner: str | None, method: str, e: Expr, indent: int) -> None:
        if self.record:
            self._current = self.positions.setdefault((owner, method), [])
        self.expr(e, indent)
        self._current = None

    def program(self, p: Program) -> None:
        for i in p.interfaces:
            if i.extends is not None:
                self.write(f"interface {i.name} extends {i.extends[0]}, {i.extends[1]}\n\n")
                continue
            if not i.methods:
                self.write(f"interface {i.name} {{}}\n\n")
                continue
            self.write(f"interface {i.name} {{\n")
            for m in i.methods:
                s = m.sig
                self.write(f"  {s.name}({s.param} : {s.param_type}) : {s.ret_type}")
                if m.annotations is not None:
                    anns = ", ".join(f"({q1} -> {q2})" for q1, q2 in m.annotations)
                    self.write(f" [{anns}]")
                self.write("\n")
            self.write("}\n\n")
        for c in p.classes:
            if not c.fields and not c.methods:
                self.write(f"class {c.name} implements {c.implements} {{}}\n\n")
                continue
            self.write(f"class {c.name} implements {c.implements} {{\n")
            for f in c.fields:
                self.write(f"  {f.name} : {'atomic ' if f.atomic else ''}{f.type}\n")
            for m in c.methods:
                self.write(f"  def {m.name}({m.param} : {m.param_type}) : {m.ret_type} {{")
                self.newline(2)
                self.body(c.name, m.name, m.body, 2)
                self.write("\n  }\n")
            self.write("}\n\n")
        self.body(None, "main", p.main, 0)
        self.write("\n")


def pretty_print(p: Program) -> str:
    printer = _Printer(record=False)
    printer.program(p)
    return "".join(printer.parts)


def pretty_print_with_positions(p: Program):
    """Text plus, per (class, method) body, the (line, col) of every node in preorder.

    The main expression is keyed (None, "main")."""
    printer = _Printer(record=True)
    printer.program(p)
    return "".join(printer.parts), printer.positions


def print_expr(e: Expr) -> str:
    printer = _Printer(record=False)
    printer.expr(e, 0)
    return "".join(printer.parts)


def to_json(node) -> object:
    """Debug dump: node kind plus children, recursively."""
    if isinstance(node, enum.Enum):
        return node.value
    if isinstance(node, tuple):
        return [to_json(x) for x in node]
    if hasattr(node, "__dataclass_fields__"):
        out = {"kind": type(node).__name__}
        for name in node.__dataclass_fields__:
            if name != "span":
                out[name] = to_json(getattr(node, name))
        return out
    return node
