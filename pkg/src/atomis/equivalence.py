"""Lockstep execution of a program and its generated counterpart.

Both sides take the same scheduling choice at every step; after each step the two
configurations must still correspond: equal variable maps, heaps that agree up to
the type mapping, and thread trees whose expressions agree up to the type and method
mappings."""

from __future__ import annotations

from dataclasses import dataclass, field

from .codegen import method_map, type_map
from .frontend import DiagnosticError
from .oolong import ClassTable, main_type
from .runtime import (
    Configuration,
    Exn,
    Interpreter,
    Leaf,
    Par,
    Schedule,
    Stuck,
    init_config,
    runnable,
    status,
    store_typing,
)
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


def _tmap(name: str) -> str | None:
    try:
        return type_map(name)
    except ValueError:
        return None


def _mmap(name: str) -> str | None:
    try:
        return method_map(name)
    except ValueError:
        return None


def expr_mismatch(e: Expr, g: Expr) -> str | None:
    """None when the generated expression g corresponds to e, else a short reason."""
    if type(e) is not type(g) and not (isinstance(e, NewAtomic) and isinstance(g, New)):
        return f"{type(e).__name__} vs {type(g).__name__}"
    if isinstance(e, Null):
        return None
    if isinstance(e, Loc):
        return None if e.addr == g.addr else f"location {e.addr} vs {g.addr}"
    if isinstance(e, Var):
        return None if e.name == g.name else f"variable {e.name} vs {g.name}"
    if isinstance(e, Select):
        return None if (e.var, e.field) == (g.var, g.field) else f"select {e.var}.{e.field} vs {g.var}.{g.field}"
    if isinstance(e, Update):
        if (e.var, e.field) != (g.var, g.field):
            return f"update {e.var}.{e.field} vs {g.var}.{g.field}"
        return expr_mismatch(e.value, g.value)
    if isinstance(e, Call):
        if e.var != g.var or _mmap(g.method) != e.method:
            return f"call {e.var}.{e.method} vs {g.var}.{g.method}"
        return expr_mismatch(e.arg, g.arg)
    if isinstance(e, Let):
        if e.name != g.name:
            return f"let {e.name} vs {g.name}"
        if e.type is not None and _tmap(g.type or "") != e.type:
            return f"let {e.name} : {e.type} vs {g.type}"
        return expr_mismatch(e.init, g.init) or expr_mismatch(e.body, g.body)
    if isinstance(e, NewAtomic):
        if g.cls != f"a_{e.cls}":
            return f"new atomic {e.cls} vs new {g.cls}"
        return None
    if isinstance(e, New):
        return None if _tmap(g.cls) == e.cls else f"new {e.cls} vs new {g.cls}"
    if isinstance(e, Cast):
        if _tmap(g.type) != e.type:
            return f"cast to {e.type} vs {g.type}"
        return expr_mismatch(e.expr, g.expr)
    if isinstance(e, FinishAsync):
        return expr_mismatch(e.left, g.left) or expr_mismatch(e.right, g.right) or expr_mismatch(e.cont, g.cont)
    return f"unexpected {type(e).__name__}"


def thread_mismatch(t, g) -> str | None:
    if isinstance(t, Exn) or isinstance(g, Exn):
        return None if isinstance(t, Exn) and isinstance(g, Exn) else "exception on one side only"
    if isinstance(t, Leaf) and isinstance(g, Leaf):
        if t.locks != g.locks:
            return "held locks differ"
        return expr_mismatch(t.expr, g.expr)
    if isinstance(t, Par) and isinstance(g, Par):
        return thread_mismatch(t.left, g.left) or thread_mismatch(t.right, g.right) or expr_mismatch(t.join, g.join)
    return "thread trees differ in shape"


def heap_mismatch(h, hg) -> str | None:
    if h.keys() != hg.keys():
        return f"heap domains differ: {sorted(h)} vs {sorted(hg)}"
    for addr in sorted(h):
        o, og = h[addr], hg[addr]
        if _tmap(og.cls) != o.cls:
            return f"location {addr}: class {o.cls} vs {og.cls}"
        if o.fields != og.fields:
            return f"location {addr}: field values differ"
        if o.locked != og.locked:
            return f"location {addr}: lock state differs"
    return None


@dataclass
class ContextIssue:
    cls: str | None
    member: str | None
    detail: str

    def to_json(self) -> dict:
        return {"class": self.cls, "member": self.member, "detail": self.detail}


def check_program_context_correspondence(p: Program, g: Program) -> list[ContextIssue]:
    """Every generated class, field and method maps back onto a source declaration,
    with field and signature types agreeing under the type mapping."""
    issues: list[ContextIssue] = []
    classes = {c.name: c for c in p.classes}
    interfaces = {i.name: i for i in p.interfaces}
    for gi in g.interfaces:
        base = _tmap(gi.name)
        if base not in interfaces:
            issues.append(ContextIssue(gi.name, None, "no source interface"))
            continue
        src = {m.sig.name: m.sig for m in interfaces[base].methods}
        for m in gi.methods:
            s = src.get(_mmap(m.sig.name) or "")
            if s is None or (_tmap(m.sig.param_type), _tmap(m.sig.ret_type)) != (s.param_type, s.ret_type):
                issues.append(ContextIssue(gi.name, m.sig.name, "signature does not map onto the source"))
    for gc in g.classes:
        base = _tmap(gc.name)
        if base not in classes:
            issues.append(ContextIssue(gc.name, None, "no source class"))
            continue
        src = classes[base]
        if _tmap(gc.implements) != src.implements:
            issues.append(ContextIssue(gc.name, None, f"implements {gc.implements}, source has {src.implements}"))
        sfields = {f.name: f.type for f in src.fields}
        if [f.name for f in gc.fields] != list(sfields):
            issues.append(ContextIssue(gc.name, None, "field names differ from the source class"))
        for f in gc.fields:
            if f.name in sfields and _tmap(f.type) != sfields[f.name]:
                issues.append(ContextIssue(gc.name, f.name, f"field type {f.type} does not map to {sfields[f.name]}"))
        smethods = {m.name: m for m in src.methods}
        for m in gc.methods:
            sm = smethods.get(_mmap(m.name) or "")
            if sm is None:
                issues.append(ContextIssue(gc.name, m.name, "no source method"))
                continue
            if (m.param, _tmap(m.param_type), _tmap(m.ret_type)) != (sm.param, sm.param_type, sm.ret_type):
                issues.append(ContextIssue(gc.name, m.name, "signature does not map onto the source"))
            why = expr_mismatch(sm.body, m.body)
            if why:
                issues.append(ContextIssue(gc.name, m.name, f"body: {why}"))
    why = expr_mismatch(p.main, g.main)
    if why:
        issues.append(ContextIssue(None, "main", why))
    return issues


@dataclass
class Divergence:
    step: int
    side: str  # "source", "generated" or "both"
    clause: str  # "context", "vars", "heap", "threads", "outcome"
    detail: str
    cls: str | None = None
    member: str | None = None

    def to_json(self) -> dict:
        out = {"step": self.step, "side": self.side, "clause": self.clause, "detail": self.detail}
        if self.cls is not None or self.member is not None:
            out["class"] = self.cls
            out["member"] = self.member
        return out


@dataclass
class CostepReport:
    verdict: str  # "ok" or "diverged"
    steps: int
    outcome: str | None = None  # joint outcome when ok: done, exn or timeout
    divergence: Divergence | None = None
    trace: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.verdict == "ok"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "steps": self.steps,
            "outcome": self.outcome,
            "divergence": self.divergence.to_json() if self.divergence else None,
        }


def _compare(
    step: int, c: Configuration, cg: Configuration, ctg: ClassTable, locs=None, names=None
) -> Divergence | None:
    """Correspondence of two configurations. With `locs`/`names` given, only those heap
    locations and variables are compared; V only grows and a step changes only the
    locations it reports, so checking the delta each step covers the whole state."""
    if len(c.vars) != len(cg.vars):
        return Divergence(step, "both", "vars", "variable maps bind different names")
    for name in c.vars if names is None else names:
        if c.vars[name] != cg.vars.get(name):
            return Divergence(step, "both", "vars", f"variable maps differ at {name}")
    if len(c.heap) != len(cg.heap):
        return Divergence(step, "both", "heap", f"heap domains differ: {sorted(c.heap)} vs {sorted(cg.heap)}")
    if locs is None:
        why = heap_mismatch(c.heap, cg.heap)
    else:
        why = heap_mismatch({a: c.heap[a] for a in locs}, {a: cg.heap[a] for a in locs if a in cg.heap})
    if why:
        return Divergence(step, "both", "heap", why)
    problems = store_typing(cg, ctg, locs, names)
    if problems:
        return Divergence(step, "generated", "heap", problems[0])
    why = thread_mismatch(c.threads, cg.threads)
    if why:
        return Divergence(step, "both", "threads", why)
    return None


def _finish(steps: int, outcome: str, c, cg, ctg, log) -> CostepReport:
    bad = _compare(steps, c, cg, ctg)
    if bad:
        return CostepReport("diverged", steps, divergence=bad, trace=log)
    return CostepReport("ok", steps, outcome, trace=log)


def costep(p: Program, g: Program, seed: int = 0, max_steps: int = 10_000, trace: bool = False) -> CostepReport:
    issues = check_program_context_correspondence(p, g)
    if issues:
        i = issues[0]
        return CostepReport("diverged", 0, divergence=Divergence(0, "generated", "context", i.detail, i.cls, i.member))
    try:
        ct, ctg = ClassTable(p), ClassTable(g)
    except DiagnosticError as err:
        d = err.diagnostics[0]
        return CostepReport("diverged", 0, divergence=Divergence(0, "generated", "context", d.message))
    run_p, run_g = Interpreter(p, ct), Interpreter(g, ctg)
    c, cg = init_config(p), init_config(g)
    sched = Schedule(seed)
    log: list[dict] = []
    steps = 0
    bad = _compare(0, c, cg, ctg)
    if bad:
        return CostepReport("diverged", 0, divergence=bad)
    while True:
        s1, s2 = status(c), status(cg)
        if s1 or s2:
            if s1 != s2:
                return CostepReport(
                    "diverged", steps, divergence=Divergence(steps, "both", "outcome", f"{s1 or 'running'} vs {s2 or 'running'}")
                )
            return _finish(steps, s1, c, cg, ctg, log)
        if steps >= max_steps:
            return _finish(steps, "timeout", c, cg, ctg, log)
        acts, acts_g = runnable(c.threads), runnable(cg.threads)
        if len(acts) != len(acts_g):
            return CostepReport(
                "diverged", steps, divergence=Divergence(steps, "both", "threads", "runnable thread counts differ")
            )
        idx = sched.choose(len(acts))
        steps += 1
        seen = len(c.bound)
        touched: set[int] = set()
        for side, interp, conf, act in (("source", run_p, c, acts[idx]), ("generated", run_g, cg, acts_g[idx])):
            try:
                rule, locs = interp.step_at(conf, act)
            except Stuck as err:
                return CostepReport("diverged", steps, divergence=Divergence(steps, side, "outcome", f"stuck: {err}"))
            touched.update(locs)
            if side == "source" and trace:
                log.append({"step": steps, "leaf": idx, "rule": rule, "locs": locs})
        bad = _compare(steps, c, cg, ctg, sorted(touched), c.bound[seen:])
        if bad:
            return CostepReport("diverged", steps, divergence=bad, trace=log)


def check_base_type_preservation(p: Program, g: Program) -> tuple[bool, str]:
    """The generated program typechecks and its main type maps back to the source main type."""
    try:
        src = main_type(p)
    except DiagnosticError as err:
        return False, f"source program does not typecheck: {err.diagnostics[0].message}"
    try:
        gen = main_type(g)
    except DiagnosticError as err:
        return False, f"generated program does not typecheck: {err.diagnostics[0].message}"
    mapped = _tmap(gen)
    if mapped != src:
        return False, f"main type {gen} maps to {mapped}, expected {src}"
    return True, f"{gen} maps to {src}"

