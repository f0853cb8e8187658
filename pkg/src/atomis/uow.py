"""Units of work over a generated program.

A unit of work runs from the first to the last access to an atomic value in a method
body. Calls to methods that carry units of their own may be folded into an enclosing
unit according to a composition policy."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .oolong import ClassTable
from .syntax import Call, Expr, Let, New, NewAtomic, Program, Select, Update, Var, children, pretty_print_with_positions

CONSERVATIVE = "conservative"
STANDARD = "standard"
MAIN = "main"


def _atomic(t: str | None) -> bool:
    return bool(t) and t.startswith("a_")


@dataclass(frozen=True)
class Access:
    site: int  # preorder index in the body
    kind: str  # fieldRead, fieldWrite or atomicReceiver


@dataclass(frozen=True)
class CallSite:
    site: int
    targets: tuple[str, ...]  # "Class.method" keys of every possible callee


@dataclass
class UnitOfWork:
    variant: str
    span: tuple[int, int]
    accesses: tuple[Access, ...]
    origin: str  # direct, composed-conservative or composed-standard

    def contains(self, other: "UnitOfWork") -> bool:
        return self.span[0] <= other.span[0] and other.span[1] <= self.span[1]

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "span": list(self.span),
            "accesses": [[a.site, a.kind] for a in self.accesses],
            "origin": self.origin,
        }


@dataclass
class BodyFacts:
    accesses: list[Access]
    calls: list[CallSite]


@dataclass
class UowReport:
    policy: str
    fresh_exclusion: bool
    units: dict[str, list[UnitOfWork]] = field(default_factory=dict)
    calls: dict[str, list[str]] = field(default_factory=dict)  # call-graph summary

    def all_units(self) -> list[UnitOfWork]:
        return [u for us in self.units.values() for u in us]

    def to_json(self) -> dict:
        return {
            "policy": self.policy,
            "freshExclusion": self.fresh_exclusion,
            "units": {k: [u.to_json() for u in us] for k, us in self.units.items()},
            "calls": self.calls,
        }


def scan_body(ct: ClassTable, body: Expr, env: dict[str, str], fresh_exclusion: bool = True) -> BodyFacts:
    """Qualifying accesses and call sites of one body, indexed in preorder."""
    accesses: list[Access] = []
    calls: list[CallSite] = []
    counter = [0]
    escaped: set[str] = set()

    def field_type(recv: str, f: str) -> str | None:
        if ct.is_class(recv) and f in ct.fields_of(recv):
            return ct.fields_of(recv)[f].type
        return None

    def targets(recv: str, m: str) -> tuple[str, ...]:
        classes = [recv] if ct.is_class(recv) else ct.implementors(recv) if ct.is_interface(recv) else []
        found = tuple(f"{c}.{m}" for c in classes if any(md.name == m for md in ct.classes[c].methods))
        if not found:
            raise AssertionError(f"unresolvable call target {recv}.{m}")
        return found

    def visit(e: Expr, env: dict[str, str], fresh: frozenset[str]) -> None:
        site = counter[0]
        counter[0] += 1
        if isinstance(e, Var) and e.name in fresh:
            escaped.add(e.name)
        if isinstance(e, (Select, Update)):
            recv = env.get(e.var)
            excluded = e.var in fresh and e.var not in escaped
            ftype = field_type(recv, e.field) if recv else None
            if not excluded:
                if _atomic(ftype):
                    accesses.append(Access(site, "fieldRead" if isinstance(e, Select) else "fieldWrite"))
                elif _atomic(recv):
                    accesses.append(Access(site, "atomicReceiver"))
        if isinstance(e, Call):
            calls.append(CallSite(site, targets(env[e.var], e.method)))
        if isinstance(e, Let):
            visit(e.init, env, fresh)
            inner = {**env, e.name: e.type} if e.type else env
            if fresh_exclusion and isinstance(e.init, (New, NewAtomic)):
                body_fresh = fresh | {e.name}
                escaped.discard(e.name)
            else:
                body_fresh = fresh - {e.name}
            visit(e.body, inner, body_fresh)
            return
        for child in children(e):
            visit(child, env, fresh)

    visit(body, env, frozenset())
    return BodyFacts(accesses, calls)


def collect_bodies(p: Program, ct: ClassTable, fresh_exclusion: bool = True) -> dict[str, BodyFacts]:
    out: dict[str, BodyFacts] = {}
    for c in p.classes:
        for m in c.methods:
            out[f"{c.name}.{m.name}"] = scan_body(ct, m.body, {"this": c.name, m.param: m.param_type}, fresh_exclusion)
    out[MAIN] = scan_body(ct, p.main, {}, fresh_exclusion)
    return out


def _units_for(
    key: str, facts: BodyFacts, bearing: set[str], allowed, policy: str
) -> list[UnitOfWork]:
    """Direct unit (if any) plus a composed unit, for one body."""
    units = []
    direct = None
    if facts.accesses:
        first, last = facts.accesses[0].site, facts.accesses[-1].site
        direct = UnitOfWork(key, (first, last), tuple(facts.accesses), "direct")
        units.append(direct)
    bearing_calls = [c for c in facts.calls if any(t in bearing for t in c.targets)]
    if direct is None:
        if len(bearing_calls) < 2:
            return units
        outside = bearing_calls
    else:
        outside = [c for c in bearing_calls if not direct.span[0] <= c.site <= direct.span[1]]
        if not outside:
            return units
    if not all(allowed(c) for c in outside):
        return units
    sites = [c.site for c in outside] + (list(direct.span) if direct else [])
    span = (min(sites), max(sites))
    inside = tuple(a for a in facts.accesses if span[0] <= a.site <= span[1])
    units.append(UnitOfWork(key, span, inside, f"composed-{policy}"))
    return units


def _bearing_fixpoint(bodies: dict[str, BodyFacts], allowed) -> set[str]:
    """Least set of bodies carrying a unit, direct or composed."""
    bearing = {k for k, f in bodies.items() if f.accesses}
    while True:
        grown = {
            k
            for k, f in bodies.items()
            if k not in bearing and len([c for c in f.calls if any(t in bearing for t in c.targets)]) >= 2
            and all(allowed(c) for c in f.calls if any(t in bearing for t in c.targets))
        }
        if not grown:
            return bearing
        bearing |= grown


def compute_units(p_plus: Program, policy: str = CONSERVATIVE, fresh_exclusion: bool = True) -> UowReport:
    if policy not in (CONSERVATIVE, STANDARD):
        raise ValueError(f"unknown policy {policy}")
    ct = ClassTable(p_plus)
    bodies = collect_bodies(p_plus, ct, fresh_exclusion)

    def anything(_c: CallSite) -> bool:
        return True

    wide = _bearing_fixpoint(bodies, anything)
    if policy == CONSERVATIVE:
        allowed, bearing = anything, wide
    else:
        # a call may be folded in only when none of its callees calls a unit-bearing method itself
        def allowed(c: CallSite) -> bool:
            return all(
                not any(t in wide for cs in bodies[target].calls for t in cs.targets) for target in c.targets
            )

        bearing = _bearing_fixpoint(bodies, allowed)

    report = UowReport(policy, fresh_exclusion)
    for key, facts in bodies.items():
        units = _units_for(key, facts, bearing, allowed, policy)
        if units:
            report.units[key] = units
        callees = sorted({t for c in facts.calls for t in c.targets})
        if callees:
            report.calls[key] = callees
    return report


def render_report(report: UowReport, p_plus: Program, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
    if not report.units:
        return "no units of work\n"
    _, positions = pretty_print_with_positions(p_plus)
    lines = [f"policy: {report.policy}, fresh exclusion: {'on' if report.fresh_exclusion else 'off'}"]
    for key, units in report.units.items():
        if key == MAIN:
            pos = positions.get((None, MAIN), [])
        else:
            cls, meth = key.split(".", 1)
            pos = positions.get((cls, meth), [])
        lines.append(f"{key}:")
        for u in units:
            start = "%d:%d" % pos[u.span[0]] if u.span[0] < len(pos) else "?"
            end = "%d:%d" % pos[u.span[1]] if u.span[1] < len(pos) else "?"
            kinds = ", ".join(f"{a.kind}@{a.site}" for a in u.accesses) or "-"
            lines.append(f"  {u.origin} [{u.span[0]}..{u.span[1]}] {start}-{end} accesses: {kinds}")
    return "\n".join(lines) + "\n"


def report_from_json(data: dict) -> UowReport:
    report = UowReport(data["policy"], data["freshExclusion"])
    for key, units in data["units"].items():
        report.units[key] = [
            UnitOfWork(u["variant"], tuple(u["span"]), tuple(Access(s, k) for s, k in u["accesses"]), u["origin"])
            for u in units
        ]
    report.calls = {k: list(v) for k, v in data["calls"].items()}
    return report
