"""Random well-typed programs and an independent oracle for the validity solver."""

from __future__ import annotations

import random
from itertools import combinations, product

from .inference import BOTH, A, And, Eq, Implies, Or, Valid, VariantId, gen_program_constraints
from .oolong import ClassTable, pre_process
from .solver import (
    MAIN_VARIANT,
    bind_call,
    interface_pins,
    is_main,
    main_constraint,
    method_body_constraint,
    qualify,
    variants_of,
)
from .syntax import (
    UNIT,
    Call,
    Cast,
    ClassDecl,
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
    pretty_print,
)

OBJECT = "Object"


class ProgramGenerator:
    """Builds programs that typecheck by construction.

    Class k implements interface I_k, whose signatures are exactly the class's methods.
    Without recursion, methods of class k only call methods of classes after k, so every
    run terminates."""

    def __init__(
        self,
        rng: random.Random,
        max_classes: int = 3,
        max_methods: int = 2,
        max_fields: int = 2,
        depth: int = 3,
        allow_recursion: bool = True,
        annotate: float = 0.3,
    ):
        self.rng = rng
        self.max_classes = max_classes
        self.max_methods = max_methods
        self.max_fields = max_fields
        self.depth = depth
        self.allow_recursion = allow_recursion
        self.annotate = annotate

    # declarations

    def program(self) -> Program:
        rng = self.rng
        n = rng.randint(1, self.max_classes)
        self.classes = [f"C{k}" for k in range(n)]
        self.ifaces = [f"I{k}" for k in range(n)]
        self.implements = dict(zip(self.classes, self.ifaces))
        ref_types = self.classes + self.ifaces + [OBJECT]
        self.fields: dict[str, list[FieldDecl]] = {}
        self.sigs: dict[str, list[MethodSig]] = {}
        for c in self.classes:
            self.fields[c] = [
                FieldDecl(f"f{j}", rng.choice(ref_types), rng.random() < 0.3)
                for j in range(rng.randint(0, self.max_fields))
            ]
            self.sigs[c] = [
                MethodSig(f"m{j}", "x", rng.choice(ref_types), rng.choice(ref_types + [UNIT]))
                for j in range(rng.randint(0, self.max_methods))
            ]
        self.counter = 0
        classes = []
        for k, c in enumerate(self.classes):
            methods = []
            for sig in self.sigs[c]:
                env = {"this": c, "x": sig.param_type}
                body = self.expr(sig.ret_type, env, self.depth, k)
                methods.append(MethodDecl(sig.name, sig.param, sig.param_type, sig.ret_type, body))
            classes.append(ClassDecl(c, self.implements[c], tuple(self.fields[c]), tuple(methods)))
        interfaces = [InterfaceDecl(OBJECT)]
        for c, i in self.implements.items():
            interfaces.append(InterfaceDecl(i, tuple(self.interface_method(s) for s in self.sigs[c])))
        return Program(tuple(interfaces), tuple(classes), self.main())

    def interface_method(self, sig: MethodSig) -> InterfaceMethod:
        if self.rng.random() >= self.annotate:
            return InterfaceMethod(sig)
        combos = list(product(BOTH, BOTH))
        picked = self.rng.sample(combos, self.rng.randint(1, 2))
        return InterfaceMethod(sig, tuple(sorted(picked, key=lambda q: (q[0].value, q[1].value))))

    def main(self):
        """Allocate one object per class, wire some fields, then a random body."""
        env: dict[str, str] = {}
        bindings = []
        for c in self.classes:
            name = self.fresh("o")
            alloc = NewAtomic(c) if self.rng.random() < 0.3 else New(c)
            bindings.append((name, c, alloc))
            env[name] = c
        stores = []
        for name, c, _ in bindings:
            for f in self.fields[c]:
                if self.rng.random() < 0.6:
                    stores.append(Update(name, f.name, self.leaf(f.type, env)))
        body = self.expr(self.rng.choice(self.classes + [UNIT]), env, self.depth, -1)
        for store in reversed(stores):
            body = Let(self.fresh("_s"), UNIT, store, body)
        for name, c, alloc in reversed(bindings):
            body = Let(name, c, alloc, body)
        return body

    # expressions

    def fresh(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def subtype(self, s: str, t: str) -> bool:
        if s == t:
            return True
        return s in self.implements and self.implements[s] == t

    def leaf(self, t: str, env: dict[str, str]):
        options = [Null()]
        options += [Var(v) for v, vt in env.items() if self.subtype(vt, t)]
        options += [New(c) for c in self.classes if self.subtype(c, t)]
        return self.rng.choice(options)

    def callable_from(self, k: int) -> set[str]:
        if k < 0 or self.allow_recursion:
            return set(self.classes)
        return set(self.classes[k + 1 :])

    def expr(self, t: str, env: dict[str, str], depth: int, k: int):
        rng = self.rng
        if depth <= 0:
            return self.leaf(t, env)
        choices = ["leaf", "let", "let"]
        selects = [
            (v, f.name)
            for v, vt in env.items()
            if vt in self.fields
            for f in self.fields[vt]
            if self.subtype(f.type, t)
        ]
        if selects:
            choices.append("select")
        allowed = self.callable_from(k)
        calls = []
        for v, vt in env.items():
            owner = vt if vt in self.sigs else next((c for c, i in self.implements.items() if i == vt), None)
            if owner is None or owner not in allowed:
                continue
            calls += [(v, s) for s in self.sigs[owner] if self.subtype(s.ret_type, t)]
        if calls:
            choices += ["call", "call"]
        if t == UNIT and any(vt in self.fields and self.fields[vt] for vt in env.values()):
            choices.append("update")
        if t in self.classes or t in self.ifaces:
            choices.append("cast")
        choices.append("finish")
        kind = rng.choice(choices)
        if kind == "leaf":
            return self.leaf(t, env)
        if kind == "select":
            v, f = rng.choice(selects)
            return Select(v, f)
        if kind == "call":
            v, s = rng.choice(calls)
            return Call(v, s.name, self.expr(s.param_type, env, depth - 1, k))
        if kind == "update":
            v = rng.choice([v for v, vt in env.items() if vt in self.fields and self.fields[vt]])
            f = rng.choice(self.fields[env[v]])
            return Update(v, f.name, self.expr(f.type, env, depth - 1, k))
        if kind == "cast":
            target = rng.choice([c for c in self.classes if self.subtype(c, t)] or [t])
            source = rng.choice(self.classes + self.ifaces)
            return Cast(target, self.leaf(source, env))
        if kind == "finish":
            return FinishAsync(
                self.expr(UNIT, env, depth - 1, k), self.expr(UNIT, env, depth - 1, k), self.expr(t, env, depth - 1, k)
            )
        bound = rng.choice(self.classes + self.ifaces + [UNIT])
        name = self.fresh("v")
        init = self.expr(bound, env, depth - 1, k)
        # leave the decoration off only where the checker's choice is obvious
        if isinstance(init, Null) and rng.random() < 0.3:
            decl, bound = None, OBJECT
        elif isinstance(init, New) and rng.random() < 0.3:
            decl, bound = None, init.cls
        else:
            decl = bound
        return Let(name, decl, init, self.expr(t, {**env, name: bound}, depth - 1, k))


def random_program(seed: int, **kwargs) -> Program:
    return ProgramGenerator(random.Random(seed), **kwargs).program()


def random_source(seed: int, **kwargs) -> str:
    return pretty_print(random_program(seed, **kwargs))


# oracle --------------------------------------------------------------------------------


def _partial(e, validity: dict[VariantId, bool], atoms: dict):
    """Three-valued evaluation: True, False or None when undetermined."""
    if isinstance(e, Valid):
        return validity.get(e.variant, False) == e.valid
    if isinstance(e, Eq):
        lv = e.left if isinstance(e.left, Qualifier) else atoms.get(e.left)
        rv = e.right if isinstance(e.right, Qualifier) else atoms.get(e.right)
        if e.left == e.right:
            return True
        if lv is None or rv is None:
            return None
        return lv == rv
    if isinstance(e, Implies):
        c = _partial(e.cond, validity, atoms)
        if c is False:
            return True
        t = _partial(e.then, validity, atoms)
        if c is True:
            return t
        return True if t is True else None
    if isinstance(e, (And, Or)):
        is_and = isinstance(e, And)
        unknown = False
        for p in e.parts:
            v = _partial(p, validity, atoms)
            if v is None:
                unknown = True
            elif v != is_and:
                return v
        return None if unknown else is_and
    raise TypeError(e)


def _atoms_in(e, out: dict) -> None:
    if isinstance(e, Eq):
        for t in (e.left, e.right):
            if not isinstance(t, Qualifier):
                out.setdefault(t)
    elif isinstance(e, Implies):
        _atoms_in(e.then, out)
    elif isinstance(e, (And, Or)):
        for p in e.parts:
            _atoms_in(p, out)


def satisfiable(e, validity: dict[VariantId, bool]) -> bool:
    """Backtracking search over the atomicity variables of e, validity held fixed."""
    order: dict = {}
    _atoms_in(e, order)
    names = list(order)
    atoms: dict = {}

    def search(i: int) -> bool:
        v = _partial(e, validity, atoms)
        if v is not None:
            return v
        if i == len(names):
            return False
        for q in (A, Qualifier.NON_ATOMIC):
            atoms[names[i]] = q
            if search(i + 1):
                return True
        del atoms[names[i]]
        return False

    return search(0)


def oracle_valid_set(p: Program) -> set[VariantId] | None:
    """Greatest set of variants whose bodies are satisfiable when exactly that set is
    valid, or None when main cannot be satisfied."""
    p = pre_process(p)
    ct = ClassTable(p)
    mcs = gen_program_constraints(p, ct)
    pinned: dict[VariantId, bool] = {pin.variant: pin.valid for pin in interface_pins(ct)}
    bodies = {}
    main = None
    for key, mc in mcs.items():
        if is_main(key):
            main = And((qualify(mc.acs, MAIN_VARIANT), bind_call(mc.vns, MAIN_VARIANT)))
            continue
        for mu in variants_of(key):
            bodies[mu] = method_body_constraint(key, mc, mu)
    valid = set(bodies)
    while True:
        validity = {**pinned, **{mu: mu in valid for mu in bodies}}
        dropped = {mu for mu in valid if not satisfiable(bodies[mu], validity)}
        if not dropped:
            break
        valid -= dropped
    validity = {**pinned, **{mu: mu in valid for mu in bodies}}
    if main is not None and not satisfiable(main, validity):
        return None
    return valid | {mu for mu, ok in pinned.items() if ok} | {MAIN_VARIANT}


def feasible(p: Program, valid: set[VariantId]) -> bool:
    """Whether the whole system holds with exactly `valid` as the validity set."""
    p = pre_process(p)
    ct = ClassTable(p)
    mcs = gen_program_constraints(p, ct)
    validity: dict[VariantId, bool] = {}
    for pin in interface_pins(ct):
        if (pin.variant in valid) != pin.valid:
            return False
        validity[pin.variant] = pin.valid
    checks = []
    for key, mc in mcs.items():
        if is_main(key):
            checks.append(And((qualify(mc.acs, MAIN_VARIANT), bind_call(mc.vns, MAIN_VARIANT))))
            continue
        for mu in variants_of(key):
            validity[mu] = mu in valid
            if mu in valid:
                checks.append(method_body_constraint(key, mc, mu))
    return all(satisfiable(c, validity) for c in checks)


def only_positive_validity(e) -> bool:
    """Whether every validity literal in e asks for `valid`."""
    if isinstance(e, Valid):
        return e.valid
    if isinstance(e, Implies):
        return only_positive_validity(e.then)
    if isinstance(e, (And, Or)):
        return all(only_positive_validity(p) for p in e.parts)
    return True


def maximum_by_enumeration(p: Program, limit: int = 12) -> tuple[str, int | None]:
    """Largest number of class variants valid together, by trying subsets largest first.

    Variants whose body fails even with every variant valid are left out first, and a
    main that fails that way means no solution; both rely on validity occurring only
    positively. Returns ("skipped", None) when more than `limit` candidates remain,
    ("none", None) without a solution, else ("max", k)."""
    p = pre_process(p)
    ct = ClassTable(p)
    mcs = gen_program_constraints(p, ct)
    pins = {pin.variant: pin.valid for pin in interface_pins(ct)}
    bodies = {
        mu: method_body_constraint(key, mc, mu) for key, mc in mcs.items() if not is_main(key) for mu in variants_of(key)
    }
    main = next(main_constraint(mc) for key, mc in mcs.items() if is_main(key))
    assert all(only_positive_validity(b) for b in [*bodies.values(), main])
    everything = {**pins, **{mu: True for mu in bodies}, MAIN_VARIANT: True}
    if not satisfiable(main, everything):
        return "none", None
    candidates = [mu for mu, body in bodies.items() if satisfiable(body, everything)]
    if len(candidates) > limit:
        return "skipped", None
    fixed = {mu for mu, ok in pins.items() if ok} | {MAIN_VARIANT}
    for k in range(len(candidates), -1, -1):
        for subset in combinations(candidates, k):
            if feasible(p, fixed | set(subset)):
                return "max", k
    return "none", None
