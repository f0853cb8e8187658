"""The four-stage analysis end to end, stopping at the first failing stage."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .codegen import vi_program
from .conformance import interface_impl
from .frontend import Diagnostic, DiagnosticError, parse_program
from .inference import MethodConstraints, VariantVar, gen_program_constraints
from .oolong import ClassTable, pre_process
from .solver import HEURISTIC, OPTIMAL, IncrementalStats, Solution, solve, solve_incremental, variant_constraints
from .syntax import Program


@dataclass
class PipelineResult:
    stage: int  # last stage that succeeded, 0 when parsing failed
    source: Program | None = None
    program: Program | None = None  # Stage 1 output
    mcs: dict[VariantVar, MethodConstraints] | None = None
    system: list | None = None
    solution: Solution | None = None
    generated: Program | None = None
    diagnostics: list[Diagnostic] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    solver_mode: str = HEURISTIC
    incremental: IncrementalStats | None = None
    class_table: ClassTable | None = None

    @property
    def ok(self) -> bool:
        return self.generated is not None

    @property
    def failed_stage(self) -> int | None:
        return None if self.ok else self.stage + 1


def _solve(result: PipelineResult, mode: str, incremental: bool) -> bool:
    if incremental:
        ok, sol, stats = solve_incremental(result.mcs, result.class_table, mode)
        result.incremental = stats
    else:
        ok, sol = solve(result.system, mode)
    result.solver_mode = mode
    result.solution = sol if ok else None
    return ok


def atomis_analysis(
    src: str,
    file: str = "<input>",
    mode: str = HEURISTIC,
    incremental: bool = False,
    stop_after: int = 4,
) -> PipelineResult:
    result = PipelineResult(stage=0)
    clock = time.perf_counter
    t0 = clock()
    try:
        result.source = parse_program(src, file)
        result.program = pre_process(result.source)
        result.class_table = ClassTable(result.program)
    except DiagnosticError as err:
        result.diagnostics = err.diagnostics
        return result
    result.stage = 1
    result.timings["stage1"] = clock() - t0
    if stop_after <= 1:
        return result

    t0 = clock()
    ct = result.class_table
    result.mcs = gen_program_constraints(result.program, ct)
    result.system = variant_constraints(result.mcs, ct)
    if not _solve(result, mode, incremental):
        result.diagnostics = [Diagnostic("E-UNSAT", "no valid assignment of atomicities exists for main")]
        return result
    result.stage = 2
    result.timings["stage2"] = clock() - t0
    if stop_after <= 2:
        return result

    t0 = clock()
    ok, diags = interface_impl(result.solution, ct)
    if not ok and mode == HEURISTIC:
        # the heuristic search does not promise a maximal valid set; retry once optimally
        _solve(result, OPTIMAL, incremental)
        ok, diags = interface_impl(result.solution, ct)
    if not ok:
        result.diagnostics = diags
        return result
    result.stage = 3
    result.timings["stage3"] = clock() - t0
    if stop_after <= 3:
        return result

    t0 = clock()
    result.generated = vi_program(result.solution, result.program, ct)
    result.stage = 4
    result.timings["stage4"] = clock() - t0
    return result


def self_verify(result: PipelineResult, seeds=range(5), max_steps: int = 10_000) -> dict:
    """Type preservation, the field/signature consistency scan and co-stepping over seeds."""
    from .codegen import consistency_scan
    from .equivalence import check_base_type_preservation, costep

    if not result.ok:
        raise ValueError("self verification needs a generated program")
    preserved, why = check_base_type_preservation(result.program, result.generated)
    findings = consistency_scan(result.program, result.solution, result.generated, result.class_table)
    runs = []
    for seed in seeds:
        report = costep(result.program, result.generated, seed, max_steps)
        runs.append({"seed": seed, **report.to_json()})
    ok = preserved and not findings and all(r["verdict"] == "ok" for r in runs)
    return {
        "ok": ok,
        "baseTypePreservation": {"ok": preserved, "detail": why},
        "consistency": {"ok": not findings, "findings": findings},
        "costep": runs,
    }
