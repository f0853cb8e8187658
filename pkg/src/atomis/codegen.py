"""Stage 4: emit plain OOlong with one type per atomicity and one method per valid variant."""

from __future__ import annotations

from itertools import product

from .conformance import interface_msig
from .inference import BOTH, MAIN_VARIANT, A, AtomVar, VarGen, VariantId, fatom, natvar, nextvar
from .oolong import NULL_TYPE, ClassTable
from .solver import Solution
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
    MethodDecl,
    MethodSig,
    New,
    NewAtomic,
    Null,
    Program,
    Qualifier,
    Select,
    Update,
    Var,
    preorder,
)

_PREFIX = {"a": Qualifier.ATOMIC, "n": Qualifier.NON_ATOMIC}


def ootype(nu: Qualifier, t: str) -> str:
    if t in (UNIT, NULL_TYPE):
        return t
    return f"{nu.short}_{t}"


def ootype_inverse(name: str) -> tuple[Qualifier | None, str]:
    """(atomicity, base type); Unit maps to (None, Unit)."""
    if name in (UNIT, NULL_TYPE):
        return None, name
    if len(name) > 2 and name[1] == "_" and name[0] in _PREFIX:
        return _PREFIX[name[0]], name[2:]
    raise ValueError(f"not a mangled type name: {name}")


def type_map(name: str) -> str:
    return ootype_inverse(name)[1]


def oomn(m: str, n1: Qualifier, n2: Qualifier) -> str:
    return f"{m}_{n1.short}_{n2.short}"


def oomn_inverse(name: str) -> tuple[str, Qualifier, Qualifier]:
    if len(name) > 4 and name[-4] == "_" and name[-2] == "_" and name[-3] in _PREFIX and name[-1] in _PREFIX:
        return name[:-4], _PREFIX[name[-3]], _PREFIX[name[-1]]
    raise ValueError(f"not a mangled method name: {name}")


def method_map(name: str) -> str:
    return oomn_inverse(name)[0]


def oosig(n1: Qualifier, n2: Qualifier, sig: MethodSig) -> MethodSig:
    return MethodSig(oomn(sig.name, n1, n2), sig.param, ootype(n1, sig.param_type), ootype(n2, sig.ret_type))


class GeneratorDesync(AssertionError):
    """The solution lacks a variable the replayed generator asked for."""


def _sol(sol: Solution, v: AtomVar, mu: VariantId) -> Qualifier:
    try:
        return sol.atom(v.at(mu))
    except KeyError:
        raise GeneratorDesync(f"no solution for {v.at(mu)}") from None


def vi_expr(sol: Solution, mu: VariantId, e: Expr, gen: VarGen) -> Expr:
    if isinstance(e, Let):
        if e.type is None:
            raise ValueError(f"undecorated let '{e.name}'")
        nu = _sol(sol, natvar(e.name), mu)
        return Let(e.name, ootype(nu, e.type), vi_expr(sol, mu, e.init, gen), vi_expr(sol, mu, e.body, gen))
    if isinstance(e, Call):
        x1 = nextvar(gen)
        x2 = nextvar(gen)
        name = oomn(e.method, _sol(sol, x1, mu), _sol(sol, x2, mu))
        return Call(e.var, name, vi_expr(sol, mu, e.arg, gen))
    if isinstance(e, New):
        x = nextvar(gen)
        return New(ootype(_sol(sol, x, mu), e.cls))
    if isinstance(e, NewAtomic):
        return New(ootype(A, e.cls))
    if isinstance(e, Cast):
        x = nextvar(gen)
        target = ootype(_sol(sol, x, mu), e.type)
        return Cast(target, vi_expr(sol, mu, e.expr, gen))
    if isinstance(e, Update):
        return Update(e.var, e.field, vi_expr(sol, mu, e.value, gen))
    if isinstance(e, FinishAsync):
        return FinishAsync(
            vi_expr(sol, mu, e.left, gen), vi_expr(sol, mu, e.right, gen), vi_expr(sol, mu, e.cont, gen)
        )
    if isinstance(e, Null):
        return Null()
    if isinstance(e, Var):
        return Var(e.name)
    if isinstance(e, Select):
        return Select(e.var, e.field)
    raise TypeError(f"unexpected expression {e!r}")


def vi_body(sol: Solution, mu: VariantId, e: Expr) -> Expr:
    return vi_expr(sol, mu, e, VarGen("synced"))


def vi_interface(decl: InterfaceDecl, nu: Qualifier) -> InterfaceDecl:
    name = ootype(nu, decl.name)
    if decl.extends is not None:
        return InterfaceDecl(name, (), (ootype(nu, decl.extends[0]), ootype(nu, decl.extends[1])))
    methods = tuple(
        InterfaceMethod(oosig(t.param, t.ret, im.sig)) for im in decl.methods for t in interface_msig(im)
    )
    return InterfaceDecl(name, methods, None)


def vi_class(sol: Solution, ct: ClassTable, decl: ClassDecl, nu: Qualifier) -> ClassDecl:
    fields = tuple(FieldDecl(f.name, ootype(fatom(ct, decl.name, nu, f.name), f.type)) for f in decl.fields)
    methods = []
    for m in decl.methods:
        for n1, n2 in product(BOTH, BOTH):
            mu = VariantId(nu, decl.name, m.name, n1, n2)
            if not sol.valid(mu):
                continue
            sig = oosig(n1, n2, m.sig)
            methods.append(MethodDecl(sig.name, sig.param, sig.param_type, sig.ret_type, vi_body(sol, mu, m.body)))
    return ClassDecl(ootype(nu, decl.name), ootype(nu, decl.implements), fields, tuple(methods))


def vi_program(sol: Solution, p: Program, ct: ClassTable | None = None) -> Program:
    ct = ct or ClassTable(p)
    interfaces = tuple(vi_interface(i, nu) for i in p.interfaces for nu in BOTH)
    classes = tuple(vi_class(sol, ct, c, nu) for c in p.classes for nu in BOTH)
    return Program(interfaces, classes, vi_body(sol, MAIN_VARIANT, p.main))


def mangling_map(p_plus: Program) -> dict:
    """{mangled name: original name} for every type and method in a generated program."""
    types: dict[str, str] = {}
    methods: dict[str, str] = {}
    for i in p_plus.interfaces:
        types[i.name] = type_map(i.name)
        for m in i.methods:
            methods[m.sig.name] = method_map(m.sig.name)
    for c in p_plus.classes:
        types[c.name] = type_map(c.name)
        for m in c.methods:
            methods[m.name] = method_map(m.name)
    return {"types": dict(sorted(types.items())), "methods": dict(sorted(methods.items()))}


def consistency_scan(p: Program, sol: Solution, p_plus: Program, ct: ClassTable | None = None) -> list[str]:
    """Check every generated field and signature against the source declarations and
    the solution. Returns a list of findings; empty means consistent."""
    ct = ct or ClassTable(p)
    findings: list[str] = []

    def base(name: str, where: str) -> tuple[Qualifier | None, str] | None:
        try:
            nu, t = ootype_inverse(name)
        except ValueError:
            findings.append(f"{where}: unmangled type name {name}")
            return None
        if nu is not None and not ct.is_reference(t):
            findings.append(f"{where}: {name} names no declared type")
            return None
        return nu, t

    for i in p_plus.interfaces:
        got = base(i.name, f"interface {i.name}")
        if got is None:
            continue
        nu, orig = got
        decl = ct.interfaces.get(orig)
        if decl is None:
            findings.append(f"interface {i.name}: {orig} is not a source interface")
            continue
        if decl.extends is not None:
            if i.extends != (ootype(nu, decl.extends[0]), ootype(nu, decl.extends[1])):
                findings.append(f"interface {i.name}: extends {i.extends} does not match {decl.extends}")
            continue
        own = {m.sig.name: m for m in decl.methods}
        for m in i.methods:
            try:
                mname, n1, n2 = oomn_inverse(m.sig.name)
            except ValueError:
                findings.append(f"interface {i.name}: unmangled method {m.sig.name}")
                continue
            src = own.get(mname)
            if src is None or (n1, n2) not in (src.annotations or ()):
                findings.append(f"interface {i.name}: {m.sig.name} is not a declared signature")
                continue
            if m.sig != oosig(n1, n2, src.sig):
                findings.append(f"interface {i.name}: {m.sig.name} has signature {m.sig}")

    for c in p_plus.classes:
        got = base(c.name, f"class {c.name}")
        if got is None:
            continue
        nu, orig = got
        decl = ct.classes.get(orig)
        if decl is None:
            findings.append(f"class {c.name}: {orig} is not a source class")
            continue
        if c.implements != ootype(nu, decl.implements):
            findings.append(f"class {c.name}: implements {c.implements}, expected {ootype(nu, decl.implements)}")
        src_fields = {f.name: f for f in decl.fields}
        if [f.name for f in c.fields] != list(src_fields):
            findings.append(f"class {c.name}: field names differ from {orig}")
        for f in c.fields:
            sf = src_fields.get(f.name)
            if sf is None:
                continue
            want = ootype(fatom(ct, orig, nu, f.name), sf.type)
            if f.type != want:
                findings.append(f"class {c.name}: field {f.name} has type {f.type}, expected {want}")
        for m in c.methods:
            try:
                mname, n1, n2 = oomn_inverse(m.name)
            except ValueError:
                findings.append(f"class {c.name}: unmangled method {m.name}")
                continue
            try:
                src = ct.method(orig, mname)
            except KeyError:
                findings.append(f"class {c.name}: {m.name} has no source method")
                continue
            if m.sig != oosig(n1, n2, src.sig):
                findings.append(f"class {c.name}: {m.name} has signature {m.sig}")
            if not sol.valid(VariantId(nu, orig, mname, n1, n2)):
                findings.append(f"class {c.name}: {m.name} is not a valid variant")
            _scan_body(m.body, f"{c.name}.{m.name}", base)
    _scan_body(p_plus.main, "main", base)
    return findings


def _scan_body(body: Expr, where: str, base) -> None:
    for node in preorder(body):
        if isinstance(node, Let) and node.type is not None:
            base(node.type, f"{where}: let {node.name}")
        elif isinstance(node, (New, Cast)):
            base(node.cls if isinstance(node, New) else node.type, where)
        elif isinstance(node, NewAtomic):
            base("", f"{where}: leftover new atomic {node.cls}")
