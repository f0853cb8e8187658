"""Stage 2, first half: type-directed generation of atomicity constraints.

Every expression is typed at a recipient variable standing for the atomicity of
its value. Calls record the variant they need; those are bound to validity
variables later, in the solver module."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

from .oolong import ClassTable
from .syntax import (
    UNIT,
    Call,
    Cast,
    Expr,
    FinishAsync,
    Let,
    New,
    NewAtomic,
    Null,
    Program,
    Qualifier,
    Select,
    Update,
    Var,
)

A = Qualifier.ATOMIC
N = Qualifier.NON_ATOMIC
AtomValue = Qualifier
BOTH = (A, N)


@dataclass(frozen=True)
class VariantId:
    """A ground method variant: receiver, type, method, parameter and return atomicity."""

    this: Qualifier
    type: str
    method: str
    param: Qualifier
    ret: Qualifier

    def __str__(self) -> str:
        return f"{self.this.short}.{self.type}.{self.method}.{self.param.short}.{self.ret.short}"


MAIN_VARIANT = VariantId(N, UNIT, "main", N, N)


@dataclass(frozen=True)
class AtomVar:
    kind: str  # "named", "fresh" or "synced"
    key: Union[str, int]
    qual: VariantId | None = None

    def at(self, mu: VariantId) -> "AtomVar":
        return self if self.qual is not None else replace(self, qual=mu)

    @property
    def base(self) -> str:
        if self.kind == "named":
            return str(self.key)
        return f"%{'f' if self.kind == 'fresh' else 's'}{self.key}"

    def __str__(self) -> str:
        return self.base if self.qual is None else f"{self.base}@{self.qual}"


Term = Union[AtomVar, Qualifier]


def show_term(t: Term) -> str:
    return t.short if isinstance(t, Qualifier) else str(t)


@dataclass(frozen=True)
class VariantVar:
    this: Term
    type: str
    method: str
    param: Term
    ret: Term

    def __str__(self) -> str:
        return f"{show_term(self.this)}.{self.type}.{self.method}.{show_term(self.param)}.{show_term(self.ret)}"


# Constraint language ---------------------------------------------------------


@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term


@dataclass(frozen=True)
class Valid:
    variant: VariantId
    valid: bool = True


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


@dataclass(frozen=True)
class Implies:
    cond: Valid
    then: object


SolExpr = Union[Eq, Valid, And, Or, Implies]
TRUE = And(())


def sexpr(e: SolExpr) -> str:
    if isinstance(e, Eq):
        return f"(= {show_term(e.left)} {show_term(e.right)})"
    if isinstance(e, Valid):
        return f"({'valid' if e.valid else 'invalid'} {e.variant})"
    if isinstance(e, And):
        return "(and" + "".join(" " + sexpr(p) for p in e.parts) + ")"
    if isinstance(e, Or):
        return "(or" + "".join(" " + sexpr(p) for p in e.parts) + ")"
    if isinstance(e, Implies):
        return f"(=> {sexpr(e.cond)} {sexpr(e.then)})"
    raise TypeError(e)


def atom_vars(e: SolExpr):
    """Atomicity variables of e, in first-occurrence order."""
    if isinstance(e, Eq):
        for t in (e.left, e.right):
            if isinstance(t, AtomVar):
                yield t
    elif isinstance(e, (And, Or)):
        for p in e.parts:
            yield from atom_vars(p)
    elif isinstance(e, Implies):
        yield from atom_vars(e.then)


def validity_atoms(e: SolExpr):
    if isinstance(e, Valid):
        yield e.variant
    elif isinstance(e, (And, Or)):
        for p in e.parts:
            yield from validity_atoms(p)
    elif isinstance(e, Implies):
        yield e.cond.variant
        yield from validity_atoms(e.then)


# Generators ------------------------------------------------------------------


class VarGen:
    """Deterministic variable source; restarts from 0 on reset."""

    def __init__(self, kind: str):
        self.kind = kind
        self.count = 0

    def reset(self) -> None:
        self.count = 0

    def __call__(self) -> AtomVar:
        v = AtomVar(self.kind, self.count)
        self.count += 1
        return v


def natvar(name: str) -> AtomVar:
    return AtomVar("named", name)


def nextvar(gen: VarGen) -> AtomVar:
    return gen()


def fatom(ct: ClassTable, cls: str, nu: Qualifier, f: str) -> Qualifier:
    fd = ct.field(cls, f)
    if fd.atomic or (fd.type == cls and nu is A):
        return A
    return N


# Rules -------------------------------------------------------------------------


@dataclass
class MethodConstraints:
    acs: tuple
    vns: tuple


class _Ordered:
    def __init__(self):
        self.items: dict = {}

    def add(self, x) -> None:
        self.items.setdefault(x, None)

    def tuple(self) -> tuple:
        return tuple(self.items)


Env = dict[str, tuple[AtomVar, str]]


class ConstraintGenerator:
    def __init__(self, ct: ClassTable):
        self.ct = ct
        self.synced = VarGen("synced")
        self.fresh = VarGen("fresh")

    def _field_choice(self, recv: AtomVar, cls: str, f: str, target: Term) -> SolExpr:
        return Or(
            tuple(And((Eq(recv, nu), Eq(target, fatom(self.ct, cls, nu, f)))) for nu in BOTH)
        )

    def expr(self, env: Env, y: Term, e: Expr, acs: _Ordered, vns: _Ordered) -> None:
        if isinstance(e, Var):
            acs.add(Eq(env[e.name][0], y))
        elif isinstance(e, Null):
            acs.add(Eq(y, y))
        elif isinstance(e, Let):
            x = natvar(e.name)
            self.expr(env, x, e.init, acs, vns)
            self.expr({**env, e.name: (x, e.type)}, y, e.body, acs, vns)
        elif isinstance(e, Call):
            x1, t = env[e.var]
            x2 = nextvar(self.synced)
            x3 = nextvar(self.synced)
            self.expr(env, x2, e.arg, acs, vns)
            acs.add(Eq(x3, y))
            vns.add(VariantVar(x1, t, e.method, x2, x3))
        elif isinstance(e, New):
            x = nextvar(self.synced)
            acs.add(Eq(x, y))
        elif isinstance(e, NewAtomic):
            acs.add(Eq(y, A))
        elif isinstance(e, Cast):
            # the site variable is drawn before the operand, as code generation does
            x = nextvar(self.synced)
            self.expr(env, y, e.expr, acs, vns)
            acs.add(Eq(x, y))
        elif isinstance(e, Select):
            x, cls = env[e.var]
            acs.add(self._field_choice(x, cls, e.field, y))
        elif isinstance(e, Update):
            x, cls = env[e.var]
            x1 = self.fresh()
            self.expr(env, x1, e.value, acs, vns)
            acs.add(Eq(y, y))
            acs.add(self._field_choice(x, cls, e.field, x1))
        elif isinstance(e, FinishAsync):
            self.expr(env, self.fresh(), e.left, acs, vns)
            self.expr(env, self.fresh(), e.right, acs, vns)
            self.expr(env, y, e.cont, acs, vns)
        else:
            raise TypeError(f"unexpected expression {e!r}")

    def body(self, env: Env, y: Term, e: Expr) -> MethodConstraints:
        acs, vns = _Ordered(), _Ordered()
        self.expr(env, y, e, acs, vns)
        return MethodConstraints(acs.tuple(), vns.tuple())


def gen_expr_constraints(ct: ClassTable, env: Env, y: Term, e: Expr, synced: VarGen | None = None,
                         fresh: VarGen | None = None) -> MethodConstraints:
    g = ConstraintGenerator(ct)
    if synced is not None:
        g.synced = synced
    if fresh is not None:
        g.fresh = fresh
    return g.body(env, y, e)


def main_key() -> VariantVar:
    return VariantVar(AtomVar("fresh", 0), UNIT, "main", AtomVar("fresh", 1), AtomVar("fresh", 2))


def gen_program_constraints(p: Program, ct: ClassTable | None = None) -> dict[VariantVar, MethodConstraints]:
    """One entry per class method plus the main entry; p must be Stage 1 output."""
    ct = ct or ClassTable(p)
    g = ConstraintGenerator(ct)
    mcs: dict[VariantVar, MethodConstraints] = {}
    for c in p.classes:
        for m in c.methods:
            g.synced.reset()
            g.fresh.reset()
            ret = g.fresh()
            key = VariantVar(natvar("this"), c.name, m.name, natvar(m.param), ret)
            env = {"this": (natvar("this"), c.name), m.param: (natvar(m.param), m.param_type)}
            mcs[key] = g.body(env, ret, m.body)
    g.synced.reset()
    g.fresh.reset()
    key = main_key()
    for _ in range(3):
        g.fresh()
    mcs[key] = g.body({}, key.ret, p.main)
    return mcs


def mcs_to_json(mcs: dict[VariantVar, MethodConstraints]) -> dict:
    return {
        str(k): {"acs": [sexpr(c) for c in v.acs], "vns": [str(x) for x in v.vns]}
        for k, v in mcs.items()
    }
