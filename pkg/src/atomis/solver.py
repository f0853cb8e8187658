"""Stage 2, second half: the global validity system and its propositional solving."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import networkx as nx

from .inference import (
    BOTH,
    MAIN_VARIANT,
    TRUE,
    And,
    AtomVar,
    Eq,
    Implies,
    MethodConstraints,
    Or,
    SolExpr,
    Valid,
    VariantId,
    VariantVar,
    A,
    N,
    atom_vars,
    validity_atoms,
)
from .oolong import ClassTable
from .sat import Solver, totalizer
from .syntax import UNIT, Qualifier

HEURISTIC = "heuristic"
OPTIMAL = "optimal"


@dataclass
class Solution:
    atoms: dict[AtomVar, Qualifier] = field(default_factory=dict)
    variants: dict[VariantId, bool] = field(default_factory=dict)

    def atom(self, v: AtomVar) -> Qualifier:
        return self.atoms[v]

    def valid(self, mu: VariantId) -> bool:
        return self.variants.get(mu, False)

    def valid_set(self) -> list[VariantId]:
        return sorted((mu for mu, ok in self.variants.items() if ok), key=str)

    def to_json(self) -> dict:
        return {
            "variants": {
                str(mu): "valid" if ok else "invalid"
                for mu, ok in sorted(self.variants.items(), key=lambda kv: str(kv[0]))
            },
            "atoms": {
                str(v): q.value for v, q in sorted(self.atoms.items(), key=lambda kv: str(kv[0]))
            },
        }


# building the system ----------------------------------------------------------------


def _qualify_term(t, mu: VariantId):
    return t.at(mu) if isinstance(t, AtomVar) else t


def qualify_expr(e: SolExpr, mu: VariantId) -> SolExpr:
    if isinstance(e, Eq):
        return Eq(_qualify_term(e.left, mu), _qualify_term(e.right, mu))
    if isinstance(e, And):
        return And(tuple(qualify_expr(p, mu) for p in e.parts))
    if isinstance(e, Or):
        return Or(tuple(qualify_expr(p, mu) for p in e.parts))
    if isinstance(e, Implies):
        return Implies(e.cond, qualify_expr(e.then, mu))
    return e


def qualify(acs, mu: VariantId) -> SolExpr:
    return And(tuple(qualify_expr(c, mu) for c in acs))


def bind_call(vns, mu: VariantId) -> SolExpr:
    calls = []
    for vv in vns:
        options = []
        for n1, n2, n3 in product(BOTH, repeat=3):
            options.append(
                And(
                    (
                        Valid(VariantId(n1, vv.type, vv.method, n2, n3)),
                        Eq(_qualify_term(vv.this, mu), n1),
                        Eq(_qualify_term(vv.param, mu), n2),
                        Eq(_qualify_term(vv.ret, mu), n3),
                    )
                )
            )
        calls.append(Or(tuple(options)))
    return And(tuple(calls))


def variants_of(key: VariantVar) -> list[VariantId]:
    return [VariantId(a, key.type, key.method, b, c) for a, b, c in product(BOTH, repeat=3)]


def method_body_constraint(key: VariantVar, mc: MethodConstraints, mu: VariantId) -> SolExpr:
    """(Acs plus the variant's own atomicities)@mu together with its bound calls."""
    own = (Eq(key.this, mu.this), Eq(key.param, mu.param), Eq(key.ret, mu.ret))
    return And((qualify(tuple(mc.acs) + own, mu), bind_call(mc.vns, mu)))


def method_constraints(key: VariantVar, mc: MethodConstraints) -> list[SolExpr]:
    return [Implies(Valid(mu), method_body_constraint(key, mc, mu)) for mu in variants_of(key)]


def main_constraint(mc: MethodConstraints) -> SolExpr:
    return And((Valid(MAIN_VARIANT), qualify(mc.acs, MAIN_VARIANT), bind_call(mc.vns, MAIN_VARIANT)))


def interface_pins(ct: ClassTable) -> list[SolExpr]:
    """Declared interface signature combinations are valid, all others invalid."""
    out: list[SolExpr] = []
    for name in ct.interfaces:
        for m, sig in ct.msigs_of(name).items():
            declared = {(q1, q2) for q1, q2 in (sig.annotations or ())}
            for nu, n1, n2 in product(BOTH, repeat=3):
                out.append(Valid(VariantId(nu, name, m, n1, n2), (n1, n2) in declared))
    return out


def is_main(key: VariantVar) -> bool:
    return key.type == UNIT and key.method == "main"


def variant_constraints(mcs: dict[VariantVar, MethodConstraints], ct: ClassTable) -> list[SolExpr]:
    system: list[SolExpr] = []
    for key, mc in mcs.items():
        if is_main(key):
            system.append(main_constraint(mc))
        else:
            system.extend(method_constraints(key, mc))
    system.extend(interface_pins(ct))
    return system


# evaluation ------------------------------------------------------------------------


def _term_value(t, sol: Solution) -> Qualifier:
    return t if isinstance(t, Qualifier) else sol.atoms[t]


def evaluate(e: SolExpr, sol: Solution) -> bool:
    if isinstance(e, Eq):
        return _term_value(e.left, sol) == _term_value(e.right, sol)
    if isinstance(e, Valid):
        return sol.valid(e.variant) == e.valid
    if isinstance(e, And):
        return all(evaluate(p, sol) for p in e.parts)
    if isinstance(e, Or):
        return any(evaluate(p, sol) for p in e.parts)
    if isinstance(e, Implies):
        return (not evaluate(e.cond, sol)) or evaluate(e.then, sol)
    raise TypeError(e)


# lowering -------------------------------------------------------------------------


class Lowering:
    """Maps source variables to solver variables and encodes SolExpr by definitions."""

    def __init__(self, solver: Solver):
        self.solver = solver
        self.atoms: dict[AtomVar, int] = {}
        self.variants: dict[VariantId, int] = {}
        self._defs: dict = {}

    def atom(self, v: AtomVar) -> int:
        if v not in self.atoms:
            self.atoms[v] = self.solver.new_var(phase=False)
        return self.atoms[v]

    def variant(self, mu: VariantId) -> int:
        if mu not in self.variants:
            self.variants[mu] = self.solver.new_var(phase=True)
        return self.variants[mu]

    def register(self, e: SolExpr) -> None:
        for v in atom_vars(e):
            self.atom(v)
        for mu in validity_atoms(e):
            self.variant(mu)

    def _term(self, t):
        # atomic maps to true
        return (t is A) if isinstance(t, Qualifier) else self.atom(t)

    def lit(self, e: SolExpr):
        """A literal equivalent to e, or a Python bool when e is constant."""
        if isinstance(e, Eq):
            a, b = self._term(e.left), self._term(e.right)
            if isinstance(a, bool) and isinstance(b, bool):
                return a == b
            if isinstance(a, bool):
                return b if a else -b
            if isinstance(b, bool):
                return a if b else -a
            if a == b:
                return True
            return self._define(("eq", min(a, b), max(a, b)), "eq", [a, b])
        if isinstance(e, Valid):
            v = self.variant(e.variant)
            return v if e.valid else -v
        if isinstance(e, Implies):
            return self.lit(Or((_Neg(e.cond), e.then)))
        if isinstance(e, _Neg):
            inner = self.lit(e.inner)
            return (not inner) if isinstance(inner, bool) else -inner
        if isinstance(e, (And, Or)):
            is_and = isinstance(e, And)
            lits = []
            for p in e.parts:
                l = self.lit(p)
                if isinstance(l, bool):
                    if l != is_and:
                        return l
                    continue
                lits.append(l)
            lits = list(dict.fromkeys(lits))
            if not lits:
                return is_and
            if len(lits) == 1:
                return lits[0]
            kind = "and" if is_and else "or"
            return self._define((kind, tuple(sorted(lits))), kind, lits)
        raise TypeError(e)

    def _define(self, key, kind: str, lits: list[int]) -> int:
        if key in self._defs:
            return self._defs[key]
        s = self.solver
        d = s.new_var()
        if kind == "eq":
            a, b = lits
            s.add_clause([-d, -a, b])
            s.add_clause([-d, a, -b])
            s.add_clause([d, a, b])
            s.add_clause([d, -a, -b])
        elif kind == "and":
            for l in lits:
                s.add_clause([-d, l])
            s.add_clause([d] + [-l for l in lits])
        else:
            for l in lits:
                s.add_clause([d, -l])
            s.add_clause([-d] + lits)
        self._defs[key] = d
        return d

    def assert_(self, e: SolExpr) -> None:
        self.register(e)
        if isinstance(e, And):
            for p in e.parts:
                self.assert_(p)
            return
        if isinstance(e, Eq):
            a, b = self._term(e.left), self._term(e.right)
            if not isinstance(a, bool) and not isinstance(b, bool):
                self.solver.add_clause([-a, b])
                self.solver.add_clause([a, -b])
                return
        if isinstance(e, (Or, Implies)):
            parts = (_Neg(e.cond), e.then) if isinstance(e, Implies) else e.parts
            clause = []
            for p in parts:
                l = self.lit(p)
                if l is True:
                    return
                if l is not False:
                    clause.append(l)
            self.solver.add_clause(clause)
            return
        l = self.lit(e)
        if l is True:
            return
        self.solver.add_clause([] if l is False else [l])

    def fix_order(self) -> None:
        """Validity variables are decided before atomicity variables, each group by name."""
        variants = sorted((str(mu), i) for mu, i in self.variants.items())
        atoms = sorted((str(v), i) for v, i in self.atoms.items())
        self.solver.prioritize([i for _, i in variants + atoms])

    def read(self, model: list[bool]) -> Solution:
        return Solution(
            atoms={v: (A if model[i] else N) for v, i in self.atoms.items()},
            variants={mu: model[i] for mu, i in self.variants.items()},
        )


@dataclass(frozen=True)
class _Neg:
    inner: SolExpr


def _flatten(system) -> list[SolExpr]:
    out: list[SolExpr] = []
    for e in system:
        if isinstance(e, And):
            out.extend(_flatten(e.parts))
        else:
            out.append(e)
    return out


def _simplify(e: SolExpr, validity: dict[VariantId, bool]):
    """Partially evaluate validity atoms; returns a SolExpr or a bool."""
    if isinstance(e, Valid):
        if e.variant in validity:
            return validity[e.variant] == e.valid
        return e
    if isinstance(e, Eq):
        if isinstance(e.left, Qualifier) and isinstance(e.right, Qualifier):
            return e.left == e.right
        if e.left == e.right:
            return True
        return e
    if isinstance(e, Implies):
        c = _simplify(e.cond, validity)
        if c is False:
            return True
        t = _simplify(e.then, validity)
        if c is True:
            return t
        return Implies(c, t) if not isinstance(t, bool) else (True if t else _Neg(c))
    if isinstance(e, (And, Or)):
        is_and = isinstance(e, And)
        parts = []
        for p in e.parts:
            s = _simplify(p, validity)
            if isinstance(s, bool):
                if s != is_and:
                    return s
                continue
            parts.append(s)
        if not parts:
            return is_and
        if len(parts) == 1:
            return parts[0]
        return And(tuple(parts)) if is_and else Or(tuple(parts))
    return e


def _count_true(lits: list[int], model: list[bool]) -> int:
    return sum(1 for l in lits if model[l])


def _maximize(solver: Solver, lits: list[int]) -> list[bool] | None:
    """Model maximizing the number of true lits. Starts from the first model found and
    raises the lower bound one step at a time until the bound becomes infeasible."""
    if not solver.solve():
        return None
    best = solver.model
    count = _count_true(lits, best)
    if count == len(lits):
        return best
    outs = totalizer(solver, lits)
    while count < len(lits):
        if not solver.solve([outs[count]]):
            break
        best = solver.model
        count = _count_true(lits, best)
    return best


def _minimize(solver: Solver, lits: list[int]) -> list[bool] | None:
    if not solver.solve():
        return None
    best = solver.model
    count = _count_true(lits, best)
    if count == 0:
        return best
    outs = totalizer(solver, lits)
    while count > 0:
        if not solver.solve([-outs[count - 1]]):
            break
        best = solver.model
        count = _count_true(lits, best)
    return best


def _all_vars(system) -> tuple[list[AtomVar], list[VariantId]]:
    atoms: dict[AtomVar, None] = {}
    variants: dict[VariantId, None] = {}
    for e in system:
        for v in atom_vars(e):
            atoms.setdefault(v)
        for mu in validity_atoms(e):
            variants.setdefault(mu)
    return list(atoms), list(variants)


def _minimize_atoms(system: list[SolExpr], validity: dict[VariantId, bool]) -> dict[AtomVar, Qualifier] | None:
    """With every validity variable fixed, the system falls apart into independent
    groups of atomicity variables; each group is minimized on its own."""
    conjuncts = []
    for e in _flatten(system):
        s = _simplify(e, validity)
        if s is False:
            return None
        if s is not True:
            conjuncts.append(s)
    parent: dict[AtomVar, AtomVar] = {}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    groups_of: list[list[AtomVar]] = []
    for c in conjuncts:
        vs = list(dict.fromkeys(atom_vars(c)))
        groups_of.append(vs)
        for v in vs:
            parent.setdefault(v, v)
        for v in vs[1:]:
            ra, rb = find(vs[0]), find(v)
            if ra != rb:
                parent[rb] = ra
    buckets: dict[AtomVar, list[SolExpr]] = {}
    for c, vs in zip(conjuncts, groups_of):
        if not vs:
            # a closed conjunct can only be an unresolved validity atom; none remain
            continue
        buckets.setdefault(find(vs[0]), []).append(c)
    result: dict[AtomVar, Qualifier] = {}
    for group in buckets.values():
        solver = Solver()
        low = Lowering(solver)
        for c in group:
            low.assert_(c)
        low.fix_order()
        atoms = sorted(low.atoms.items(), key=lambda kv: str(kv[0]))
        model = _minimize(solver, [i for _, i in atoms])
        if model is None:
            return None
        for v, i in atoms:
            result[v] = A if model[i] else N
    return result


def solve(system: list[SolExpr], mode: str = HEURISTIC) -> tuple[bool, Solution]:
    """Satisfiability of the conjunction of `system`, with a total Solution on success."""
    solver = Solver()
    low = Lowering(solver)
    for e in system:
        low.assert_(e)
    low.fix_order()
    if mode == HEURISTIC:
        if not solver.solve():
            return False, Solution()
        return True, low.read(solver.model)
    if mode != OPTIMAL:
        raise ValueError(f"unknown solver mode {mode!r}")
    validity = sorted(low.variants.items(), key=lambda kv: str(kv[0]))
    model = _maximize(solver, [i for _, i in validity])
    if model is None:
        return False, Solution()
    sol = low.read(model)
    fixed = {mu: model[i] for mu, i in validity}
    atoms = _minimize_atoms(system, fixed)
    if atoms is None:  # cannot happen: the model above witnesses satisfiability
        raise AssertionError("atom minimization lost satisfiability")
    for v in sol.atoms:
        sol.atoms[v] = atoms.get(v, N)
    return True, sol


# incremental solving -----------------------------------------------------------------


@dataclass
class IncrementalStats:
    locally_invalid: list[VariantId] = field(default_factory=list)
    blocks: list[list[str]] = field(default_factory=list)

    @property
    def pushes(self) -> int:
        return len(self.blocks)


def locally_valid(key: VariantVar, mc: MethodConstraints, mu: VariantId) -> bool:
    own = (Eq(key.this, mu.this), Eq(key.param, mu.param), Eq(key.ret, mu.ret))
    solver = Solver()
    low = Lowering(solver)
    low.assert_(qualify(tuple(mc.acs) + own, mu))
    return solver.solve()


def solve_incremental(
    mcs: dict[VariantVar, MethodConstraints], ct: ClassTable, mode: str = OPTIMAL
) -> tuple[bool, Solution, IncrementalStats]:
    """Prefilter variants by their local constraints, then solve method groups bottom-up
    along the call graph, each strongly connected group as one block."""
    stats = IncrementalStats()
    fixed: dict[VariantId, bool] = {}
    for pin in interface_pins(ct):
        fixed[pin.variant] = pin.valid
    methods = {(k.type, k.method): (k, mc) for k, mc in mcs.items() if not is_main(k)}
    main_entry = next(mc for k, mc in mcs.items() if is_main(k))
    for key, mc in methods.values():
        for mu in variants_of(key):
            if not locally_valid(key, mc, mu):
                fixed[mu] = False
                stats.locally_invalid.append(mu)

    graph = nx.DiGraph()
    graph.add_nodes_from(methods)
    for node, (key, mc) in methods.items():
        for vv in mc.vns:
            if (vv.type, vv.method) in methods:
                graph.add_edge(node, (vv.type, vv.method))
    cond = nx.condensation(graph)
    # callees before callers; ties broken by declaration order
    rank = {node: i for i, node in enumerate(methods)}
    order = list(nx.lexicographical_topological_sort(
        cond.reverse(copy=True), key=lambda c: min(rank[n] for n in cond.nodes[c]["members"])
    ))

    atoms: dict[AtomVar, Qualifier] = {}

    def pinned(system: list[SolExpr]) -> list[SolExpr]:
        _, mus = _all_vars(system)
        return [Valid(mu, fixed[mu]) for mu in mus if mu in fixed]

    for comp in order:
        members = sorted(cond.nodes[comp]["members"], key=rank.get)
        stats.blocks.append([f"{t}.{m}" for t, m in members])
        block: list[SolExpr] = []
        targets: list[VariantId] = []
        for node in members:
            key, mc = methods[node]
            block.extend(method_constraints(key, mc))
            targets.extend(mu for mu in variants_of(key) if mu not in fixed)
        system = block + pinned(block)
        solver = Solver()
        low = Lowering(solver)
        for e in system:
            low.assert_(e)
        low.fix_order()
        model = _maximize(solver, [low.variant(mu) for mu in targets])
        if model is None:  # cannot happen: all-invalid satisfies the block
            raise AssertionError("method block unsatisfiable")
        for mu in targets:
            fixed[mu] = model[low.variant(mu)]
        part = low.read(model)
        block_fixed = {mu: fixed[mu] for mu in low.variants}
        if mode == OPTIMAL:
            part.atoms = _minimize_atoms(system, block_fixed)
        atoms.update(part.atoms)

    main_system = [main_constraint(main_entry)]
    main_system += pinned(main_system)
    ok, part = solve(main_system, mode)
    if not ok:
        return False, Solution(), stats
    atoms.update(part.atoms)

    full = variant_constraints(mcs, ct)
    all_atoms, all_variants = _all_vars(full)
    sol = Solution(
        atoms={v: atoms.get(v, N) for v in all_atoms},
        variants={mu: fixed.get(mu, mu == MAIN_VARIANT) for mu in all_variants},
    )
    # atoms of variants that ended up invalid are unconstrained
    return True, sol, stats
