"""The nine acceptance criteria, one test each. Every test records a PASS/FAIL line
that is printed in the terminal summary."""

import json
import time

from atomis.codegen import consistency_scan, ootype
from atomis.conformance import interface_impl, interface_msig, variant_msigs
from atomis.equivalence import costep
from atomis.frontend import DiagnosticError
from atomis.fuzz import maximum_by_enumeration, oracle_valid_set, random_program, random_source
from atomis.inference import A, N, VariantId, natvar
from atomis.oolong import main_type, typecheck_oolong
from atomis.pipeline import atomis_analysis
from atomis.solver import OPTIMAL
from atomis.syntax import New, preorder, pretty_print, pretty_print_with_positions, strip
from atomis.uow import CONSERVATIVE, STANDARD, compute_units, render_report

from conftest import CORPUS, CORPUS_FILES, corpus_source, mutate, record

BOTH = (A, N)
POPULATION = 200


def fresh(name, mode=OPTIMAL):
    path = CORPUS / name
    return atomis_analysis(path.read_text(), f"corpus/{name}", mode=mode)


def test_criterion_1_listing_solution():
    start = time.perf_counter()
    r = fresh("baselist.aool")
    elapsed = time.perf_counter() - start
    sol = r.solution
    verdicts = {
        (nu, q1, q2): sol.valid(VariantId(nu, "BaseList_na", "add", q1, q2))
        for nu in BOTH for q1 in BOTH for q2 in BOTH
    }
    expected = {k: k[1] is N for k in verdicts}
    node_atomic = all(
        sol.atom(natvar("node").at(VariantId(nu, "BaseList_na", "add", N, q2))) is A for nu in BOTH for q2 in BOTH
    )
    allocs = [
        n for c in r.generated.classes if c.name.endswith("BaseList_na")
        for m in c.methods if m.name.startswith("add_") for n in preorder(m.body) if isinstance(n, New)
    ]
    ok = verdicts == expected and node_atomic and allocs and all(n.cls == "a_Node_n" for n in allocs) and elapsed < 1
    valid = sum(verdicts.values())
    assert record(1, ok, f"add: {valid} valid / {8 - valid} invalid, new Node_n -> a_Node_n, {elapsed:.3f}s"), verdicts


def test_criterion_2_interface_conformance():
    r = fresh("baselist.aool")
    ct = r.class_table
    declared = {t for im in ct.msigs_of("List_n").values() for t in interface_msig(im)}
    per_method = {m: len(interface_msig(im)) for m, im in ct.msigs_of("List_n").items()}
    covered = all(
        declared <= {t for im in ct.msigs_of("BaseList_na").values()
                     for t in variant_msigs(r.solution, nu, "BaseList_na", im.sig)}
        for nu in BOTH
    )
    impl, diags = interface_impl(r.solution, ct)
    ok = len(declared) == 8 and per_method == {"add": 2, "get": 2, "equals": 4} and covered and impl and not diags
    assert record(2, ok, f"{len(declared)} declared triples {per_method}, covered for both receivers, interfaceImpl={impl}")


def test_criterion_3_impossible_annotation_fails_at_stage_three():
    src = corpus_source("baselist.aool").replace(
        "add(element : Object) : Unit [(non_atomic -> non_atomic), (non_atomic -> atomic)]",
        "add(element : Object) : Unit [(non_atomic -> non_atomic), (non_atomic -> atomic), (atomic -> non_atomic)]",
    )
    r = atomis_analysis(src, "baselist_mutated.aool", mode=OPTIMAL)
    messages = [d.message for d in r.diagnostics if d.code == "E-IFACE"]
    ok = r.failed_stage == 3 and messages and all("add : (atomic -> non_atomic)" in m for m in messages)
    assert record(3, bool(ok), f"failed at stage {r.failed_stage}: {'; '.join(messages)}")


def _population():
    """Corpus programs followed by the first POPULATION random programs that reach Stage 4."""
    programs = [(p.stem, fresh(p.name)) for p in CORPUS_FILES]
    seed = skipped = 0
    while len(programs) < len(CORPUS_FILES) + POPULATION:
        r = atomis_analysis(random_source(seed), f"seed{seed}.aool", mode=OPTIMAL)
        if r.ok:
            programs.append((f"seed {seed}", r))
        else:
            skipped += 1
        seed += 1
    return programs, skipped


_CACHE = {}


def population():
    if "pop" not in _CACHE:
        _CACHE["pop"] = _population()
    return _CACHE["pop"]


def test_criterion_4_base_type_preservation():
    programs, skipped = population()
    failures = []
    for name, r in programs:
        try:
            typecheck_oolong(r.generated)
            t = main_type(strip(r.source))
            if main_type(r.generated) not in {ootype(nu, t) for nu in BOTH}:
                failures.append(name)
        except DiagnosticError as err:
            failures.append(f"{name}: {err}")
    ok = not failures and len(CORPUS_FILES) >= 10 and skipped < POPULATION
    detail = f"{len(CORPUS_FILES)} corpus + {POPULATION} random ({skipped} seeds skipped before Stage 4), {len(failures)} failures"
    assert record(4, ok, detail), failures[:5]


def test_criterion_5_consistency_scan():
    programs, _ = population()
    failures = [
        (name, f) for name, r in programs
        for f in consistency_scan(r.program, r.solution, r.generated, r.class_table)
    ]
    assert record(5, not failures, f"{len(programs)} programs, {len(failures)} findings"), failures[:5]


def test_criterion_6_solver_oracle():
    start = time.perf_counter()
    mismatches, enumerated = [], 0
    for seed in range(100):
        p = random_program(seed, max_classes=3, max_methods=2)
        r = atomis_analysis(pretty_print(p), mode=OPTIMAL, stop_after=2)
        got = set(r.solution.valid_set()) if r.solution else None
        if got != oracle_valid_set(p):
            mismatches.append((seed, "oracle"))
            continue
        verdict, best = maximum_by_enumeration(p, limit=12)
        if verdict == "skipped":
            continue
        enumerated += 1
        if verdict == "none":
            if got is not None:
                mismatches.append((seed, "enumeration found no solution"))
        elif got is None or len({mu for mu in got if mu.type in {c.name for c in p.classes}}) != best:
            mismatches.append((seed, "not maximum"))
    elapsed = time.perf_counter() - start
    ok = not mismatches and elapsed < 60
    detail = f"100 programs, {len(mismatches)} mismatches, {enumerated} also checked by enumeration, {elapsed:.1f}s"
    assert record(6, ok, detail), mismatches


def test_criterion_7_costep():
    unexpected = []
    runs = 0
    for path in CORPUS_FILES:
        r = fresh(path.name)
        for seed in range(10):
            rep = costep(r.program, r.generated, seed=seed, max_steps=10_000)
            runs += 1
            if not rep.ok:
                unexpected.append((path.stem, seed, rep.divergence))
    r = fresh("baselist.aool")
    g = r.generated
    wrong_variant = costep(r.program, mutate(g, "list.add_n_n", "list.add_n_a"))
    wrong_alloc = costep(r.program, mutate(g, "new a_Node_n", "new n_Node_n", ("class a_BaseList_na", "def add_n_n")))
    wrong_field = costep(r.program, mutate(g, "head : a_Node_n", "head : a_Item", ("class a_BaseList_na",)))
    d_alloc, d_field = wrong_alloc.divergence, wrong_field.divergence
    mutations_ok = (
        wrong_variant.ok
        and d_alloc is not None and (d_alloc.clause, d_alloc.side) == ("heap", "generated") and d_alloc.step == 17
        and d_field is not None and (d_field.clause, d_field.cls, d_field.member) == ("context", "a_BaseList_na", "head")
    )
    ok = not unexpected and mutations_ok
    detail = (
        f"{runs} corpus runs, {len(unexpected)} unexpected divergences; mutations: wrong variant "
        f"{wrong_variant.verdict}, wrong allocation {wrong_alloc.verdict} at step {d_alloc and d_alloc.step} "
        f"({d_alloc and d_alloc.clause}), field type {wrong_field.verdict} ({d_field and d_field.clause})"
    )
    assert record(7, ok, detail), unexpected


def test_criterion_8_units_of_work():
    r = fresh("baselist.aool")
    g = r.generated
    text, positions = pretty_print_with_positions(g)
    lines = text.splitlines()

    def at(index):
        line, col = positions[("n_BaseList_na", "add_n_n")][index]
        return lines[line - 1][col - 1:]

    (unit,) = compute_units(g).units["n_BaseList_na.add_n_n"]
    span_ok = unit.origin == "direct" and at(unit.span[0]).startswith("this.head") and at(unit.span[1]).startswith("this.tail = node")
    uncontained = []
    for path in CORPUS_FILES:
        gp = fresh(path.name).generated
        cons, std = compute_units(gp, CONSERVATIVE), compute_units(gp, STANDARD)
        for key, units in std.units.items():
            for u in units:
                if not any(c.contains(u) for c in cons.units.get(key, [])):
                    uncontained.append((path.stem, key, u.span))
    ok = span_ok and not uncontained
    detail = f"add unit [{unit.span[0]}..{unit.span[1]}] from '{at(unit.span[0])[:9]}' to '{at(unit.span[1])[:16]}', {len(uncontained)} uncontained standard units"
    assert record(8, ok, detail), uncontained


def test_criterion_9_determinism():
    differing = []
    for path in CORPUS_FILES:
        outputs = []
        for _ in range(2):
            r = fresh(path.name)
            outputs.append((
                pretty_print(r.generated),
                json.dumps(r.solution.to_json(), sort_keys=True),
                render_report(compute_units(r.generated), r.generated, "json"),
                render_report(compute_units(r.generated, STANDARD), r.generated, "text"),
            ))
        if outputs[0] != outputs[1]:
            differing.append(path.stem)
    assert record(9, not differing, f"{len(CORPUS_FILES)} corpus programs, {len(differing)} differing"), differing
