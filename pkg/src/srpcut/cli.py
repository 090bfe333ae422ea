"""Command-line interface.

    srpcut solve SPEC          simulate the monolithic network
    srpcut check SPEC          cut and verify with the SMT solver
    srpcut cut SPEC --out DIR  write one spec file per fragment
    srpcut bench SUITE ...     run a benchmark suite, emit CSV

Exit codes for check: 0 verified, 1 violation, 2 inconclusive or error.
"""

from __future__ import annotations

import os
import sys

import click

from .bench import bench_fattree, bench_random, bench_spec, to_csv
from .checker import (
    Inconclusive,
    SolverSettings,
    Verified,
    Violation,
    check,
    check_universal,
    check_with_refinement,
)
from .cutting import Interface, cross_edges, cut_n
from .interfaces import complete_interface, maint_interface
from .routes import format_value
from .sim import (
    Diverged,
    NoSolution,
    SolveConfig,
    Solved,
    solve,
    solve_all_symbolic,
    symbolic_assignments,
    trace_csv,
)
from .smt import find_solver
from .specfile import NetworkSpec, SpecError, fragment_to_doc, load


@click.group()
def main():
    """Cut networks into fragments and verify them modularly."""


def _load(spec_path: str) -> NetworkSpec:
    try:
        return load(spec_path)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


@main.command("solve")
@click.argument("spec_path", type=click.Path(exists=True))
@click.option("--trace", is_flag=True, help="print per-round change trace as CSV")
def cmd_solve(spec_path, trace):
    """Simulate the network to its stable state and print the routes."""
    spec = _load(spec_path)
    cfg = SolveConfig(record_trace=trace)
    srp = spec.srp
    if srp.policy.symbolics:
        results = solve_all_symbolic(srp, cfg)
        failed = False
        for assignment, result in results.items():
            label = ", ".join(f"{k}={format_value(v)}" for k, v in assignment)
            click.echo(f"[{label}]")
            failed |= _print_solve_result(spec, result, cfg, trace)
            click.echo("")
        sys.exit(2 if failed else 0)
    result = solve(srp, cfg)
    failed = _print_solve_result(spec, result, cfg, trace)
    sys.exit(2 if failed else 0)


def _print_solve_result(spec, result, cfg, trace) -> bool:
    if isinstance(result, Solved):
        click.echo(result.labeling.table(order=spec.srp.nodes))
        if trace:
            click.echo(trace_csv(result.trace))
        return False
    if isinstance(result, Diverged):
        click.echo(f"diverged after {result.rounds} rounds", err=True)
        return True
    assert isinstance(result, NoSolution)
    click.echo("no solution; guarantee mismatches:", err=True)
    for node, expected, actual in result.failures:
        click.echo(
            f"  {node}: guaranteed {format_value(expected)}, stable value {format_value(actual)}",
            err=True,
        )
    return True


@main.command("check")
@click.argument("spec_path", type=click.Path(exists=True))
@click.option("--solver", default=None, help="solver command reading SMT-LIB v2 on stdin")
@click.option("--timeout", default=60.0, show_default=True, help="per-query timeout in seconds")
@click.option("--total-timeout", default=600.0, show_default=True, help="whole-run timeout in seconds")
@click.option("--all", "collect_all", is_flag=True, help="check every fragment instead of stopping at the first violation")
@click.option("--refine", "refine_rounds", default=0, show_default=True,
              help="rounds of counterexample-driven interface refinement")
@click.option("--jobs", default=1, show_default=True, help="parallel solver sessions")
@click.option("--dump-smt", "dump_dir", default=None, type=click.Path(), help="write one .smt2 file per fragment")
@click.option("--interface", "interface_mode", default="file", show_default=True,
              type=click.Choice(["file", "complete", "maint"]),
              help="use the spec interface, synthesize the complete one, or build the maintenance family")
def cmd_check(spec_path, solver, timeout, total_timeout, collect_all, refine_rounds, jobs, dump_dir, interface_mode):
    """Cut the network and check each fragment with the SMT solver."""
    spec = _load(spec_path)
    srp = spec.srp
    settings = SolverSettings.with_budget(
        total_timeout, command=solver, timeout=timeout,
        dump_dir=dump_dir, dump_name=spec.name, jobs=jobs,
    )
    if solver is None and find_solver() is None:
        click.echo("error: no SMT solver on PATH; install z3 or pass --solver", err=True)
        sys.exit(2)

    assignment = spec.partition or {n: 0 for n in srp.nodes if n not in srp.input_nodes}

    try:
        if srp.policy.symbolics:
            _check_symbolic(spec, assignment, settings, interface_mode, refine_rounds)
            return
        interface = _concrete_interface(spec, assignment, interface_mode)
        if refine_rounds > 0:
            result, final, rounds, steps = check_with_refinement(
                srp, spec.prop, assignment, interface, refine_rounds + 1, settings
            )
            for step in steps:
                click.echo(step.describe())
            click.echo(f"rounds: {rounds}")
        else:
            result = check(
                srp, spec.prop, assignment, interface, settings, collect_all=collect_all
            )
            if collect_all:
                for r in result:
                    _print_result(r)
                worst = _worst(result)
                sys.exit(_exit_code(worst))
        _print_result(result)
        sys.exit(_exit_code(result))
    except SpecError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


def _concrete_interface(spec, assignment, interface_mode) -> Interface:
    srp = spec.srp
    if interface_mode == "complete":
        return complete_interface(srp, cross_edges(srp, assignment))
    if interface_mode == "maint":
        raise SpecError("--interface maint needs a MAINT policy with a symbolic down")
    if spec.interface is None:
        if cross_edges(srp, assignment):
            raise SpecError(
                "spec has no interface; supply one or pass --interface complete"
            )
        return Interface({})
    return spec.interface


def _check_symbolic(spec, assignment, settings, interface_mode, refine_rounds):
    srp = spec.srp
    if refine_rounds:
        click.echo("error: --refine is not supported with symbolic values", err=True)
        sys.exit(2)
    cutset = cross_edges(srp, assignment)
    if interface_mode == "maint":
        dest = spec.policy_doc.get("dest")
        if dest is None:
            click.echo("error: --interface maint needs a builtin policy with a dest", err=True)
            sys.exit(2)
        family_by_down = maint_interface(srp.topology, dest, cutset)
        family = {(("down", d),): i for d, i in family_by_down.items()}
    elif interface_mode == "complete":
        family = {
            sym: complete_interface(srp.instantiate(dict(sym)), cutset)
            for sym in symbolic_assignments(srp)
        }
    else:
        if spec.interface is None and cutset:
            click.echo(
                "error: spec has no interface; pass --interface complete or maint",
                err=True,
            )
            sys.exit(2)
        fixed = spec.interface or Interface({})
        family = {sym: fixed for sym in symbolic_assignments(srp)}
    aggregate, per = check_universal(srp, spec.prop, assignment, family, settings)
    for sym, result in per.items():
        label = ", ".join(f"{k}={format_value(v)}" for k, v in sym)
        prefix = "ok " if isinstance(result, Verified) else "FAIL"
        click.echo(f"{prefix} [{label}] {_describe(result)}")
    click.echo(f"aggregate: {_describe(aggregate)}")
    sys.exit(_exit_code(aggregate))


def _describe(result) -> str:
    if isinstance(result, Verified):
        return f"verified ({result.fragments} fragment(s))"
    if isinstance(result, Violation):
        return result.describe()
    assert isinstance(result, Inconclusive)
    return f"inconclusive (fragment {result.fragment_id}: {result.reason})"


def _print_result(result):
    if isinstance(result, Verified):
        click.echo(f"verified: all fragments hold ({result.fragments} checked)")
        return
    if isinstance(result, Violation):
        click.echo(f"violation: {result.describe()}")
        click.echo("counterexample routes:")
        for node, value in sorted(result.counterexample.items()):
            click.echo(f"  {node}: {format_value(value)}")
        return
    assert isinstance(result, Inconclusive)
    click.echo(f"inconclusive: fragment {result.fragment_id}: {result.reason}")


def _worst(results):
    for r in results:
        if isinstance(r, Violation):
            return r
    for r in results:
        if isinstance(r, Inconclusive):
            return r
    return results[0] if results else Verified()


def _exit_code(result) -> int:
    if isinstance(result, Verified):
        return 0
    if isinstance(result, Violation):
        return 1
    return 2


@main.command("cut")
@click.argument("spec_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(), help="output directory")
@click.option("--interface", "interface_mode", default="file", show_default=True,
              type=click.Choice(["file", "complete"]))
def cmd_cut(spec_path, out_dir, interface_mode):
    """Cut the network and write each fragment as a standalone spec."""
    import json

    spec = _load(spec_path)
    srp = spec.srp
    if spec.partition is None:
        click.echo("error: spec has no partition", err=True)
        sys.exit(2)
    try:
        interface = _concrete_interface(spec, spec.partition, interface_mode)
        fragments = cut_n(srp, spec.partition, interface)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    os.makedirs(out_dir, exist_ok=True)
    for i, frag in enumerate(fragments):
        doc = fragment_to_doc(spec, frag, i)
        path = os.path.join(out_dir, f"{spec.name}.frag{i}.json")
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        click.echo(path)


@main.command("bench")
@click.argument("suite", type=click.Choice(["fattree-sp", "fattree-fat", "fattree-maint", "random", "file"]))
@click.option("--k", "ks", default="4", show_default=True, help="comma-separated fattree pod counts")
@click.option("--x", "xs", default="4,5,6", show_default=True, help="comma-separated exponents for the random suite")
@click.option("--cuts", default="mono,pods,full", show_default=True, help="comma-separated cut kinds")
@click.option("--spec", "spec_paths", multiple=True, type=click.Path(exists=True), help="spec files for the file suite")
@click.option("--solver", default=None)
@click.option("--timeout", default=60.0, show_default=True)
@click.option("--total-timeout", default=600.0, show_default=True,
              help="whole-run timeout per benchmark configuration")
@click.option("--trials", default=1, show_default=True)
@click.option("--seed", default=1, show_default=True)
@click.option("--csv", "csv_path", default=None, type=click.Path(), help="write CSV here instead of stdout")
def cmd_bench(suite, ks, xs, cuts, spec_paths, solver, timeout, total_timeout, trials, seed, csv_path):
    """Run a benchmark suite and report SMT and pipeline times."""
    settings = SolverSettings(command=solver, timeout=timeout)
    bench_budget = total_timeout
    if solver is None and find_solver() is None:
        click.echo("error: no SMT solver on PATH; install z3 or pass --solver", err=True)
        sys.exit(2)
    cut_list = [c.strip() for c in cuts.split(",") if c.strip()]
    try:
        if suite in ("fattree-sp", "fattree-fat", "fattree-maint"):
            k_list = [int(k) for k in ks.split(",")]
            records = bench_fattree(
                suite.split("-", 1)[1], k_list, cut_list, settings, trials,
                total_timeout=bench_budget,
            )
        elif suite == "random":
            x_list = [int(x) for x in xs.split(",")]
            allowed = [c for c in cut_list if c in ("mono", "full")] or ["mono", "full"]
            records = bench_random(x_list, allowed, settings, trials, seed,
                                   total_timeout=bench_budget)
        else:
            if not spec_paths:
                click.echo("error: file suite needs --spec", err=True)
                sys.exit(2)
            records = []
            for path in spec_paths:
                records.extend(
                    bench_spec(_load(path), settings, trials, total_timeout=bench_budget)
                )
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    text = to_csv(records)
    if csv_path:
        with open(csv_path, "w") as fh:
            fh.write(text)
        click.echo(f"wrote {csv_path}")
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
