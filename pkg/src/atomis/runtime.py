"""Small-step interpreter for OOlong programs over configurations <H; V; T>.

Locals live in one global variable map V. Every let or call activation binds a
freshly renamed name (`x#k`), so thread expressions only ever mention names
that are bound in V."""

from __future__ import annotations

import random
import sys
from dataclasses import dataclass, field, replace
from typing import Union

from .oolong import ClassTable, TypeChecker
from .frontend import DiagnosticError
from .syntax import (
    Call,
    Cast,
    Expr,
    FinishAsync,
    Let,
    Loc,
    New,
    NewAtomic,
    Null,
    Program,
    Select,
    Update,
    Var,
)

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

Value = Union[Null, Loc]


def is_value(e: Expr) -> bool:
    return isinstance(e, (Null, Loc))


@dataclass
class Obj:
    cls: str
    fields: dict[str, Value]
    locked: bool = False

    def copy(self) -> "Obj":
        return Obj(self.cls, dict(self.fields), self.locked)


@dataclass(frozen=True)
class Leaf:
    expr: Expr
    locks: frozenset = frozenset()


@dataclass(frozen=True)
class Par:
    left: "Thread"
    right: "Thread"
    join: Expr


@dataclass(frozen=True)
class Exn:
    pass


EXN = Exn()
Thread = Union[Leaf, Par, Exn]


@dataclass
class Configuration:
    heap: dict[int, Obj]
    vars: dict[str, Value]
    threads: Thread
    # declared type of every name in vars, used only for run-time type checks
    var_types: dict[str, str] = field(default_factory=dict)
    next_loc: int = 0
    next_name: int = 0
    bound: list[str] = field(default_factory=list)  # names in binding order


def init_config(p: Program) -> Configuration:
    return Configuration({}, {}, Leaf(p.main))


def runnable(t: Thread, path: tuple = ()) -> list[tuple[str, tuple]]:
    """Steppable positions of the tree, left to right: ("leaf", path) or ("join", path)."""
    if isinstance(t, Leaf):
        return [] if is_value(t.expr) else [("leaf", path)]
    if isinstance(t, Par):
        if isinstance(t.left, Leaf) and isinstance(t.right, Leaf) and is_value(t.left.expr) and is_value(t.right.expr):
            return [("join", path)]
        return runnable(t.left, path + (0,)) + runnable(t.right, path + (1,))
    return []


def _get(t: Thread, path: tuple) -> Thread:
    for d in path:
        t = t.left if d == 0 else t.right
    return t


def _put(t: Thread, path: tuple, new: Thread) -> Thread:
    if not path:
        return new
    if path[0] == 0:
        return replace(t, left=_put(t.left, path[1:], new))
    return replace(t, right=_put(t.right, path[1:], new))


def decompose(e: Expr) -> tuple[list[Expr], Expr]:
    """Split e into evaluation-context frames (outermost first) and the redex."""
    frames = []
    while True:
        if isinstance(e, Let) and not is_value(e.init):
            frames.append(e)
            e = e.init
        elif isinstance(e, Update) and not is_value(e.value):
            frames.append(e)
            e = e.value
        elif isinstance(e, Call) and not is_value(e.arg):
            frames.append(e)
            e = e.arg
        elif isinstance(e, Cast) and not is_value(e.expr):
            frames.append(e)
            e = e.expr
        else:
            return frames, e


def plug(frames: list[Expr], e: Expr) -> Expr:
    for f in reversed(frames):
        if isinstance(f, Let):
            e = replace(f, init=e)
        elif isinstance(f, Update):
            e = replace(f, value=e)
        elif isinstance(f, Call):
            e = replace(f, arg=e)
        else:
            e = replace(f, expr=e)
    return e


def rename_free(e: Expr, old: str, new: str) -> Expr:
    if isinstance(e, Var):
        return replace(e, name=new) if e.name == old else e
    if isinstance(e, Select):
        return replace(e, var=new) if e.var == old else e
    if isinstance(e, Update):
        return replace(e, var=new if e.var == old else e.var, value=rename_free(e.value, old, new))
    if isinstance(e, Call):
        return replace(e, var=new if e.var == old else e.var, arg=rename_free(e.arg, old, new))
    if isinstance(e, Let):
        init = rename_free(e.init, old, new)
        body = e.body if e.name == old else rename_free(e.body, old, new)
        return replace(e, init=init, body=body)
    if isinstance(e, Cast):
        return replace(e, expr=rename_free(e.expr, old, new))
    if isinstance(e, FinishAsync):
        return replace(
            e,
            left=rename_free(e.left, old, new),
            right=rename_free(e.right, old, new),
            cont=rename_free(e.cont, old, new),
        )
    return e


class Stuck(Exception):
    """The interpreter met a state a well-typed program cannot reach."""


class _Raise(Exception):
    pass


@dataclass
class StepInfo:
    leaf: int
    rule: str
    locs: list[int]


class Interpreter:
    def __init__(self, p: Program, ct: ClassTable | None = None):
        self.program = p
        self.ct = ct or ClassTable(p)

    def _fresh(self, c: Configuration, name: str) -> str:
        base = name.split("#", 1)[0]
        new = f"{base}#{c.next_name}"
        c.next_name += 1
        c.bound.append(new)
        return new

    def _lookup(self, c: Configuration, name: str) -> Value:
        if name not in c.vars:
            raise Stuck(f"unbound variable {name}")
        return c.vars[name]

    def _receiver(self, c: Configuration, name: str) -> int:
        v = self._lookup(c, name)
        if isinstance(v, Null):
            raise _Raise()
        return v.addr

    def _subclass(self, cls: str, target: str) -> bool:
        return self.ct.subtype(cls, target)

    def reduce(self, c: Configuration, e: Expr) -> tuple[Expr | Thread, str, list[int]]:
        """Contract the redex e. May return a Par (spawn) instead of an expression."""
        if isinstance(e, Var):
            return self._lookup(c, e.name), "var", []
        if isinstance(e, Select):
            addr = self._receiver(c, e.var)
            return c.heap[addr].fields[e.field], "select", [addr]
        if isinstance(e, Update):
            addr = self._receiver(c, e.var)
            obj = c.heap[addr]
            if e.field not in obj.fields:
                raise Stuck(f"no field {e.field} on {obj.cls}")
            obj.fields[e.field] = e.value
            return Null(), "update", [addr]
        if isinstance(e, Call):
            addr = self._receiver(c, e.var)
            cls = c.heap[addr].cls
            try:
                m = self.ct.method(cls, e.method)
            except KeyError:
                raise Stuck(f"class {cls} has no method {e.method}") from None
            this_name = self._fresh(c, "this")
            param_name = self._fresh(c, m.param)
            c.vars[this_name] = Loc(addr)
            c.vars[param_name] = e.arg
            c.var_types[this_name] = cls
            c.var_types[param_name] = m.param_type
            body = rename_free(m.body, m.param, param_name)
            body = rename_free(body, "this", this_name)
            return body, "call", [addr]
        if isinstance(e, Let):
            name = self._fresh(c, e.name)
            c.vars[name] = e.init
            if e.type is not None:
                c.var_types[name] = e.type
            return rename_free(e.body, e.name, name), "let", []
        if isinstance(e, (New, NewAtomic)):
            addr = c.next_loc
            c.next_loc += 1
            c.heap[addr] = Obj(e.cls, {f.name: Null() for f in self.ct.classes[e.cls].fields})
            return Loc(addr), "new", [addr]
        if isinstance(e, Cast):
            if isinstance(e.expr, Null):
                return e.expr, "cast", []
            addr = e.expr.addr
            if not self._subclass(c.heap[addr].cls, e.type):
                raise _Raise()
            return e.expr, "cast", [addr]
        if isinstance(e, FinishAsync):
            return Par(Leaf(e.left), Leaf(e.right), e.cont), "spawn", []
        raise Stuck(f"no rule for {type(e).__name__}")

    def step_at(self, c: Configuration, action: tuple[str, tuple]) -> tuple[str, list[int]]:
        """Perform one step at the given runnable position, mutating c."""
        kind, path = action
        node = _get(c.threads, path)
        if kind == "join":
            c.threads = _put(c.threads, path, Leaf(node.join))
            return "join", []
        frames, redex = decompose(node.expr)
        try:
            out, rule, locs = self.reduce(c, redex)
        except _Raise:
            c.threads = EXN
            return "exn", []
        if isinstance(out, Par):
            c.threads = _put(c.threads, path, Par(out.left, out.right, plug(frames, out.join)))
        else:
            c.threads = _put(c.threads, path, Leaf(plug(frames, out), node.locks))
        return rule, locs


class Schedule:
    """Seeded choice among runnable positions, listed left to right."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = random.Random(seed)

    def choose(self, n: int) -> int:
        return 0 if n == 1 else self.rng.randrange(n)


@dataclass
class RunResult:
    outcome: str  # "done", "exn", "timeout" or "stuck"
    value: Value | None
    config: Configuration
    trace: list[dict]
    steps: int
    message: str = ""


def status(c: Configuration) -> str | None:
    if isinstance(c.threads, Exn):
        return "exn"
    if isinstance(c.threads, Leaf) and is_value(c.threads.expr):
        return "done"
    return None


def run(p: Program, seed: int = 0, max_steps: int = 10_000, ct: ClassTable | None = None) -> RunResult:
    interp = Interpreter(p, ct)
    c = init_config(p)
    sched = Schedule(seed)
    trace: list[dict] = []
    steps = 0
    while True:
        st = status(c)
        if st == "done":
            return RunResult("done", c.threads.expr, c, trace, steps)
        if st == "exn":
            return RunResult("exn", None, c, trace, steps)
        if steps >= max_steps:
            return RunResult("timeout", None, c, trace, steps)
        actions = runnable(c.threads)
        if not actions:
            return RunResult("stuck", None, c, trace, steps, "no runnable thread")
        idx = sched.choose(len(actions))
        try:
            rule, locs = interp.step_at(c, actions[idx])
        except Stuck as err:
            return RunResult("stuck", None, c, trace, steps, str(err))
        steps += 1
        trace.append({"step": steps, "leaf": idx, "rule": rule, "locs": locs})


# run-time typing ----------------------------------------------------------------


def thread_exprs(t: Thread) -> list[Expr]:
    if isinstance(t, Leaf):
        return [t.expr]
    if isinstance(t, Par):
        return thread_exprs(t.left) + thread_exprs(t.right) + [t.join]
    return []


def check_configuration(c: Configuration, ct: ClassTable) -> list[str]:
    """Re-typecheck the residual state: thread expressions under the declared types of
    V and the classes of heap locations, plus the heap and V against declared types."""
    problems = store_typing(c, ct)
    checker = TypeChecker(ct)
    locs = {a: o.cls for a, o in c.heap.items()}
    for e in thread_exprs(c.threads):
        try:
            checker.infer(e, c.var_types, locs)
        except DiagnosticError as err:
            problems.extend(d.message for d in err.diagnostics)
    return problems


def store_typing(c: Configuration, ct: ClassTable, locs=None, names=None) -> list[str]:
    """Every location stored in the heap, in V, or sitting in a typed slot of a thread
    expression belongs to a subclass of the slot's declared type.

    `locs` and `names` restrict the heap and V parts to the given entries."""
    problems: list[str] = []

    def conforms(v, declared: str, where: str) -> None:
        if isinstance(v, Loc):
            cls = c.heap[v.addr].cls
            if not ct.subtype(cls, declared):
                problems.append(f"{where}: location {v.addr} of class {cls} where {declared} is expected")

    for addr in c.heap if locs is None else locs:
        obj = c.heap[addr]
        fields = ct.fields_of(obj.cls)
        for f, v in obj.fields.items():
            conforms(v, fields[f].type, f"field {obj.cls}.{f} of location {addr}")
    for name in c.vars if names is None else names:
        if name in c.var_types:
            conforms(c.vars[name], c.var_types[name], f"variable {name}")
    for e in thread_exprs(c.threads):
        # a value only ever sits in a typed slot right at the redex
        _, redex = decompose(e)
        if isinstance(redex, Let) and redex.type is not None:
            conforms(redex.init, redex.type, f"let {redex.name}")
        elif isinstance(redex, (Update, Call)):
            recv = c.vars.get(redex.var)
            if not isinstance(recv, Loc):
                continue
            cls = c.heap[recv.addr].cls
            try:
                if isinstance(redex, Update):
                    conforms(redex.value, ct.field(cls, redex.field).type, f"update of {redex.field}")
                else:
                    conforms(redex.arg, ct.method(cls, redex.method).param_type, f"argument of {redex.method}")
            except (KeyError, DiagnosticError):
                pass
    return problems
