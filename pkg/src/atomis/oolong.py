"""Stage 1: class table, subtyping and the OOlong type checker that decorates lets."""

from __future__ import annotations

from dataclasses import replace

from .frontend import Diagnostic, DiagnosticError
from .syntax import (
    UNIT,
    Call,
    Cast,
    ClassDecl,
    Expr,
    FieldDecl,
    FinishAsync,
    InterfaceDecl,
    InterfaceMethod,
    Let,
    Loc,
    MethodDecl,
    New,
    NewAtomic,
    Null,
    Program,
    Select,
    SourceSpan,
    Update,
    Var,
    alpha_rename,
    dress,
    strip,
)

# Type of a bare `null`; below every reference type, unrelated to Unit.
NULL_TYPE = "<null>"
ROOT = "Object"


def _err(code: str, message: str, span: SourceSpan | None) -> DiagnosticError:
    return DiagnosticError([Diagnostic(code, message, span)])


class ClassTable:
    """Declaration index for one program. Construction validates the declarations."""

    def __init__(self, p: Program):
        self.program = p
        self.interfaces: dict[str, InterfaceDecl] = {i.name: i for i in p.interfaces}
        self.classes: dict[str, ClassDecl] = {c.name: c for c in p.classes}
        self._msigs: dict[str, dict[str, InterfaceMethod]] = {}
        self._supers: dict[str, frozenset[str]] = {}
        self._validate()

    def is_class(self, t: str) -> bool:
        return t in self.classes

    def is_interface(self, t: str) -> bool:
        return t in self.interfaces

    def is_reference(self, t: str) -> bool:
        return t in self.classes or t in self.interfaces

    def is_type(self, t: str) -> bool:
        return t == UNIT or self.is_reference(t)

    def fields_of(self, cls: str) -> dict[str, FieldDecl]:
        if cls not in self.classes:
            raise KeyError(f"unknown class {cls}")
        return {f.name: f for f in self.classes[cls].fields}

    def field(self, cls: str, name: str) -> FieldDecl:
        fields = self.fields_of(cls)
        if name not in fields:
            raise KeyError(f"class {cls} has no field {name}")
        return fields[name]

    def method(self, cls: str, name: str) -> MethodDecl:
        for m in self.classes[cls].methods:
            if m.name == name:
                return m
        raise KeyError(f"class {cls} has no method {name}")

    def msigs_of(self, t: str) -> dict[str, InterfaceMethod]:
        """Method signatures visible on t; interface extends are resolved by union."""
        if t in self._msigs:
            return self._msigs[t]
        if t in self.classes:
            out = {m.name: InterfaceMethod(m.sig, None, span=m.span) for m in self.classes[t].methods}
        elif t in self.interfaces:
            decl = self.interfaces[t]
            if decl.extends is None:
                out = {m.sig.name: m for m in decl.methods}
            else:
                out = {}
                for parent in decl.extends:
                    for name, m in self.msigs_of(parent).items():
                        if name not in out:
                            out[name] = m
                            continue
                        prev = out[name]
                        a, b = prev.sig, m.sig
                        if (a.param_type, a.ret_type) != (b.param_type, b.ret_type):
                            raise _err(
                                "E-CONFLICT",
                                f"interface {t} inherits conflicting signatures for '{name}'",
                                decl.span,
                            )
                        if prev.annotations is None and m.annotations is None:
                            continue
                        merged = list(prev.annotations or ())
                        merged += [a for a in (m.annotations or ()) if a not in merged]
                        out[name] = replace(prev, annotations=tuple(merged))
        else:
            raise KeyError(f"unknown type {t}")
        self._msigs[t] = out
        return out

    def supertypes(self, t: str) -> frozenset[str]:
        """Reflexive-transitive supertypes of a declared reference type."""
        if t in self._supers:
            return self._supers[t]
        out = {t}
        if t in self.classes:
            out |= self.supertypes(self.classes[t].implements)
        elif t in self.interfaces and self.interfaces[t].extends:
            for parent in self.interfaces[t].extends:
                out |= self.supertypes(parent)
        result = frozenset(out)
        self._supers[t] = result
        return result

    def subtype(self, s: str, t: str) -> bool:
        if s == t:
            return True
        if s == NULL_TYPE:
            return t == UNIT or self.is_reference(t)
        if s == UNIT or t == UNIT or not self.is_reference(s):
            return False
        return t in self.supertypes(s)

    def implementors(self, iface: str) -> list[str]:
        return [c for c in self.classes if self.subtype(c, iface)]

    # well-formedness of declarations
    def _validate(self) -> None:
        diags: list[Diagnostic] = []

        def need_type(t: str, span, ctx: str) -> None:
            if not self.is_type(t):
                diags.append(Diagnostic("E-UNKNOWN-TYPE", f"unknown type '{t}' in {ctx}", span))

        for i in self.interfaces.values():
            if i.extends:
                for parent in i.extends:
                    if parent not in self.interfaces:
                        diags.append(
                            Diagnostic("E-UNKNOWN-TYPE", f"interface {i.name} extends unknown interface '{parent}'", i.span)
                        )
            for m in i.methods:
                need_type(m.sig.param_type, m.span, f"{i.name}.{m.sig.name}")
                need_type(m.sig.ret_type, m.span, f"{i.name}.{m.sig.name}")
        if diags:
            raise DiagnosticError(diags)
        self._check_acyclic()
        for c in self.classes.values():
            if c.implements not in self.interfaces:
                diags.append(
                    Diagnostic("E-UNKNOWN-TYPE", f"class {c.name} implements unknown interface '{c.implements}'", c.span)
                )
            for f in c.fields:
                need_type(f.type, f.span, f"field {c.name}.{f.name}")
            for m in c.methods:
                need_type(m.param_type, m.span, f"{c.name}.{m.name}")
                need_type(m.ret_type, m.span, f"{c.name}.{m.name}")
        if diags:
            raise DiagnosticError(diags)
        for name in self.interfaces:
            self.msigs_of(name)
        for c in self.classes.values():
            own = self.msigs_of(c.name)
            for name, m in self.msigs_of(c.implements).items():
                mine = own.get(name)
                if mine is None:
                    diags.append(
                        Diagnostic("E-IMPL", f"class {c.name} does not implement '{name}' of {c.implements}", c.span)
                    )
                elif (mine.sig.param_type, mine.sig.ret_type) != (m.sig.param_type, m.sig.ret_type):
                    diags.append(
                        Diagnostic("E-IMPL", f"class {c.name} implements '{name}' with a different signature", mine.span)
                    )
        if diags:
            raise DiagnosticError(diags)

    def _check_acyclic(self) -> None:
        state: dict[str, int] = {}

        def visit(name: str) -> None:
            state[name] = 1
            for parent in self.interfaces[name].extends or ():
                if state.get(parent) == 1:
                    raise _err("E-CYCLE", f"interface '{parent}' extends itself", self.interfaces[name].span)
                if parent not in state:
                    visit(parent)
            state[name] = 2

        for name in self.interfaces:
            if name not in state:
                visit(name)


class TypeChecker:
    """OOlong typing for bodies and main. Undecorated lets get the derived type of
    their initializer; decorated lets are checked against their decoration."""

    def __init__(self, ct: ClassTable):
        self.ct = ct

    def infer(self, e: Expr, env: dict[str, str], locs: dict[int, str] | None = None) -> tuple[str, Expr]:
        ct = self.ct
        if isinstance(e, Null):
            return NULL_TYPE, e
        if isinstance(e, Loc):
            if locs is None or e.addr not in locs:
                raise _err("E-TYPE", f"dangling location #{e.addr}", e.span)
            return locs[e.addr], e
        if isinstance(e, Var):
            return self._lookup(e.name, env, e.span), e
        if isinstance(e, Select):
            cls = self._receiver_class(e.var, env, e.span)
            return self._field(cls, e.field, e.span).type, e
        if isinstance(e, Update):
            cls = self._receiver_class(e.var, env, e.span)
            fd = self._field(cls, e.field, e.span)
            vt, value = self.infer(e.value, env, locs)
            if not ct.subtype(vt, fd.type):
                raise _err("E-SUBTYPE", f"cannot assign {_show(vt)} to field {cls}.{fd.name} : {fd.type}", e.span)
            return UNIT, replace(e, value=value)
        if isinstance(e, Call):
            recv = self._lookup(e.var, env, e.span)
            if not ct.is_reference(recv):
                raise _err("E-METHOD", f"cannot call '{e.method}' on '{e.var}' of type {_show(recv)}", e.span)
            sig = ct.msigs_of(recv).get(e.method)
            if sig is None:
                raise _err("E-METHOD", f"type {recv} has no method '{e.method}'", e.span)
            at, arg = self.infer(e.arg, env, locs)
            if not ct.subtype(at, sig.sig.param_type):
                raise _err(
                    "E-SUBTYPE",
                    f"argument of type {_show(at)} does not match parameter {sig.sig.param_type} of {recv}.{e.method}",
                    e.span,
                )
            return sig.sig.ret_type, replace(e, arg=arg)
        if isinstance(e, Let):
            it, init = self.infer(e.init, env, locs)
            if e.type is None:
                decl = it
                if it == NULL_TYPE:
                    # a bare null binding gets the root interface, or Unit when there is none
                    decl = ROOT if ct.is_reference(ROOT) else UNIT
            else:
                decl = e.type
                if not ct.is_type(decl):
                    raise _err("E-UNKNOWN-TYPE", f"unknown type '{decl}' in let", e.span)
                if not ct.subtype(it, decl):
                    raise _err("E-SUBTYPE", f"cannot bind {_show(it)} to '{e.name}' : {decl}", e.span)
            bt, body = self.infer(e.body, {**env, e.name: decl}, locs)
            return bt, replace(e, type=decl, init=init, body=body)
        if isinstance(e, (New, NewAtomic)):
            if not ct.is_class(e.cls):
                raise _err("E-NEW", f"cannot instantiate '{e.cls}': not a class", e.span)
            return e.cls, e
        if isinstance(e, Cast):
            if not ct.is_reference(e.type):
                raise _err("E-CAST", f"cast target '{e.type}' is not a declared reference type", e.span)
            it, inner = self.infer(e.expr, env, locs)
            if it != NULL_TYPE and not ct.is_reference(it):
                raise _err("E-CAST", f"cannot cast expression of type {_show(it)}", e.span)
            return e.type, replace(e, expr=inner)
        if isinstance(e, FinishAsync):
            _, left = self.infer(e.left, env, locs)
            _, right = self.infer(e.right, env, locs)
            ct_, cont = self.infer(e.cont, env, locs)
            return ct_, replace(e, left=left, right=right, cont=cont)
        raise TypeError(f"not an expression: {e!r}")

    def _lookup(self, name: str, env: dict[str, str], span) -> str:
        if name not in env:
            raise _err("E-UNBOUND", f"unbound variable '{name}'", span)
        return env[name]

    def _receiver_class(self, name: str, env: dict[str, str], span) -> str:
        t = self._lookup(name, env, span)
        if not self.ct.is_class(t):
            raise _err("E-FIELD", f"'{name}' of type {_show(t)} has no fields", span)
        return t

    def _field(self, cls: str, name: str, span) -> FieldDecl:
        fields = self.ct.fields_of(cls)
        if name not in fields:
            raise _err("E-FIELD", f"class {cls} has no field '{name}'", span)
        return fields[name]

    def method(self, cls: ClassDecl, m: MethodDecl) -> MethodDecl:
        env = {"this": cls.name, m.param: m.param_type}
        bt, body = self.infer(m.body, env)
        if not self.ct.subtype(bt, m.ret_type):
            raise _err(
                "E-RETURN", f"body of {cls.name}.{m.name} has type {_show(bt)}, expected {m.ret_type}", m.span
            )
        return replace(m, body=body)

    def program(self, p: Program) -> tuple[Program, str]:
        diags: list[Diagnostic] = []
        classes = []
        for c in p.classes:
            methods = []
            for m in c.methods:
                try:
                    methods.append(self.method(c, m))
                except DiagnosticError as err:
                    diags.extend(err.diagnostics)
                    methods.append(m)
            classes.append(replace(c, methods=tuple(methods)))
        main_type = NULL_TYPE
        main = p.main
        try:
            main_type, main = self.infer(p.main, {})
        except DiagnosticError as err:
            diags.extend(err.diagnostics)
        if diags:
            raise DiagnosticError(diags)
        return Program(p.interfaces, tuple(classes), main), main_type


def _show(t: str) -> str:
    return "null" if t == NULL_TYPE else t


def class_table(p: Program) -> ClassTable:
    return ClassTable(p)


def typecheck_oolong(p: Program) -> Program:
    """Type check and decorate every let; raises DiagnosticError on failure."""
    return TypeChecker(ClassTable(p)).program(p)[0]


def main_type(p: Program) -> str:
    return TypeChecker(ClassTable(p)).program(p)[1]


def pre_process(p: Program) -> Program:
    renamed = alpha_rename(p)
    typed = typecheck_oolong(strip(renamed))
    return dress(renamed, typed)
