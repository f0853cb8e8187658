"""Command line driver: `atomis <subcommand> file.aool`."""

from __future__ import annotations

import argparse
import json
import sys

from .codegen import mangling_map
from .equivalence import costep
from .inference import mcs_to_json
from .pipeline import PipelineResult, atomis_analysis, self_verify
from .runtime import run
from .solver import HEURISTIC, OPTIMAL
from .syntax import pretty_print, print_expr, to_json
from .uow import CONSERVATIVE, STANDARD, compute_units, render_report

EXIT_USAGE = 2
STAGE_EXIT = {1: 10, 2: 20, 3: 30}


def _dump(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _analyze(args, stop_after: int = 4) -> PipelineResult:
    try:
        with open(args.file, encoding="utf-8") as fh:
            src = fh.read()
    except OSError as err:
        print(f"atomis: cannot read {args.file}: {err.strerror}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from None
    stop_after = min(stop_after, getattr(args, "stop_after", None) or 4)
    return atomis_analysis(
        src,
        args.file,
        mode=getattr(args, "solver_mode", HEURISTIC),
        incremental=getattr(args, "incremental", False),
        stop_after=stop_after,
    )


def _fail(result: PipelineResult) -> int:
    stage = result.failed_stage
    for d in result.diagnostics:
        print(f"stage {stage}: {d.format()}", file=sys.stderr)
    return STAGE_EXIT.get(stage, 1)


def cmd_check(args) -> int:
    result = _analyze(args, stop_after=3)
    if result.diagnostics:
        return _fail(result)
    print(f"{args.file}: ok (stage {result.stage})")
    return 0


def cmd_analyze(args) -> int:
    result = _analyze(args, stop_after=3)
    if args.dump_constraints and result.mcs is not None:
        _write(args.dump_constraints, _dump(mcs_to_json(result.mcs)))
    if result.diagnostics:
        return _fail(result)
    if args.dump_solution and result.solution is not None:
        _write(args.dump_solution, _dump(result.solution.to_json()))
    summary = {"stage": result.stage, "solverMode": result.solver_mode}
    if result.solution is not None:
        summary["valid"] = [str(mu) for mu in result.solution.valid_set()]
    if result.incremental is not None:
        summary["incremental"] = {
            "locallyInvalid": [str(mu) for mu in result.incremental.locally_invalid],
            "blocks": result.incremental.blocks,
            "pushes": result.incremental.pushes,
        }
    if not (args.dump_constraints == "-" or args.dump_solution == "-"):
        sys.stdout.write(_dump(summary))
    return 0


def cmd_emit(args) -> int:
    result = _analyze(args)
    if not result.ok:
        return _fail(result)
    _write(args.output, pretty_print(result.generated))
    if args.emit_json:
        data = {
            "mangling": mangling_map(result.generated),
            "solution": result.solution.to_json(),
            "program": to_json(result.generated),
        }
        _write(args.emit_json, _dump(data))
    return 0


def cmd_run(args) -> int:
    result = _analyze(args, stop_after=4 if args.generated else 1)
    program = result.generated if args.generated else result.program
    if program is None:
        return _fail(result)
    res = run(program, seed=args.seed, max_steps=args.max_steps)
    if args.trace:
        for entry in res.trace:
            print(json.dumps(entry, sort_keys=True))
    value = print_expr(res.value) if res.value is not None else None
    line = f"outcome: {res.outcome} after {res.steps} steps"
    if value is not None:
        line += f", value {value}"
    if res.message:
        line += f" ({res.message})"
    print(line)
    return 1 if res.outcome == "stuck" else 0


def cmd_costep(args) -> int:
    result = _analyze(args)
    if not result.ok:
        return _fail(result)
    report = costep(result.program, result.generated, seed=args.seed, max_steps=args.max_steps)
    if args.report:
        _write(args.report, _dump(report.to_json()))
    if report.ok:
        print(f"costep: ok after {report.steps} steps ({report.outcome})")
        return 0
    d = report.divergence
    print(f"costep: diverged at step {d.step} ({d.side}, {d.clause}): {d.detail}")
    return 1


def cmd_uow(args) -> int:
    result = _analyze(args)
    if not result.ok:
        return _fail(result)
    report = compute_units(result.generated, args.policy, not args.no_fresh_exclusion)
    sys.stdout.write(render_report(report, result.generated, args.format))
    return 0


def cmd_verify(args) -> int:
    result = _analyze(args)
    if not result.ok:
        return _fail(result)
    report = self_verify(result, range(args.seeds), args.max_steps)
    if args.report:
        _write(args.report, _dump(report))
    print(f"base type preservation: {'ok' if report['baseTypePreservation']['ok'] else 'FAIL'}")
    print(f"consistency scan: {'ok' if report['consistency']['ok'] else 'FAIL'}")
    for finding in report["consistency"]["findings"]:
        print(f"  {finding}")
    for r in report["costep"]:
        status = "ok" if r["verdict"] == "ok" else f"FAIL {r['divergence']}"
        print(f"costep seed {r['seed']}: {status}")
    return 0 if report["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atomis", description="Atomicity inference for OOlong programs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str, solver: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("file")
        p.set_defaults(func=func)
        if solver:
            p.add_argument("--solver-mode", choices=[HEURISTIC, OPTIMAL], default=HEURISTIC)
            p.add_argument("--incremental", action="store_true", help="solve per method group, callees first")
        return p

    p = add("check", cmd_check, "run stages 1-3 and report diagnostics")
    p.add_argument("--stop-after", type=int, choices=[1, 2, 3])

    p = add("analyze", cmd_analyze, "infer atomicities and print the valid variants")
    p.add_argument("--stop-after", type=int, choices=[1, 2, 3])
    p.add_argument("--dump-constraints", metavar="PATH", help="write per-method constraints as JSON ('-' for stdout)")
    p.add_argument("--dump-solution", metavar="PATH", help="write the solution as JSON ('-' for stdout)")

    p = add("emit", cmd_emit, "print the generated program")
    p.add_argument("-o", "--output", metavar="PATH")
    p.add_argument("--emit-json", metavar="PATH", help="also write mangling map, solution and AST as JSON")

    p = add("run", cmd_run, "interpret the program")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--trace", action="store_true", help="print one JSON line per step")
    p.add_argument("--generated", action="store_true", help="run the generated program instead")

    p = add("costep", cmd_costep, "run source and generated programs in lockstep")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--report", metavar="PATH")

    p = add("uow", cmd_uow, "report units of work in the generated program")
    p.add_argument("--policy", choices=[CONSERVATIVE, STANDARD], default=CONSERVATIVE)
    p.add_argument("--no-fresh-exclusion", action="store_true")
    p.add_argument("--format", choices=["text", "json"], default="text")

    p = add("verify", cmd_verify, "check type preservation, consistency and co-stepping")
    p.add_argument("--seeds", type=int, default=5, help="co-step seeds 0..N-1")
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--report", metavar="PATH")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
