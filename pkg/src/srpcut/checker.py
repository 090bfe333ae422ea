"""Fragment checking, property decomposition and interface refinement.

solve_fragment encodes one fragment together with a per-node property
and asks the solver whether the assumptions and stability constraints
admit a labeling violating the guarantees or the property. check cuts a
network along an assignment and interface and runs solve_fragment on
every fragment, returning the first non-verified result (all fragments
when collect_all is set).

A guarantee violation can mean a stale interface annotation rather than
a network bug; refine_interface replaces the violated node's annotations
with the counterexample's value, and check_with_refinement loops check
and refine until verified or out of budget.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

from .cutting import Edge, FragmentAssignment, Interface, cut_n
from .ir import Expr, evaluate, type_check
from .routes import BoolType, Value, format_value
from .sim import Assignment, symbolic_assignments
from .smt import (
    Sat,
    SmtScript,
    SolverError,
    Unknown,
    Unsat,
    encode_fragment,
    parse_model,
    run_solver,
)
from .srp import Labeling, OpenSrp


class CheckerError(Exception):
    pass


class NotRefinable(CheckerError):
    """The violation does not point at a refinable guarantee."""


class MissingInterfaceFor(CheckerError):
    def __init__(self, assignment):
        self.assignment = assignment
        super().__init__(f"no interface supplied for symbolic assignment {dict(assignment)}")


@dataclass(frozen=True)
class PropertySpec:
    """Per-node predicate over one route parameter r, optionally
    narrowed to a node subset."""

    per_node: Expr
    nodes: Optional[frozenset[str]] = None
    description: str = ""

    def type_check(self, route_type) -> None:
        t = type_check(self.per_node, {"r": route_type})
        if not isinstance(t, BoolType):
            raise CheckerError(f"property must be boolean, got {t!r}")

    def holds_on(self, value: Value, route_type) -> bool:
        return bool(evaluate(self.per_node, {"r": (value, route_type)}))

    def targets(self, fragment: OpenSrp) -> list[str]:
        if self.nodes is None:
            return list(fragment.nodes)
        return [n for n in fragment.nodes if n in self.nodes]


@dataclass(frozen=True)
class Verified:
    fragments: int = 1

    def __bool__(self):
        return True


@dataclass(frozen=True)
class Violation:
    fragment_id: int
    kind: str                    # "guarantee" | "property"
    node: str
    counterexample: Labeling
    symbolic_assignment: Assignment = ()

    def __bool__(self):
        return False

    def describe(self) -> str:
        value = format_value(self.counterexample[self.node])
        sym = (
            " under " + ", ".join(f"{k}={format_value(v)}" for k, v in self.symbolic_assignment)
            if self.symbolic_assignment
            else ""
        )
        return f"fragment {self.fragment_id}: {self.kind} violated at {self.node} (route {value}){sym}"


@dataclass(frozen=True)
class Inconclusive:
    fragment_id: int
    reason: str

    def __bool__(self):
        return False


CheckResult = Union[Verified, Violation, Inconclusive]


@dataclass(frozen=True)
class SolverSettings:
    """timeout bounds a single solver query; deadline (an absolute
    time.monotonic() value) bounds the whole run, turning everything
    past it inconclusive."""

    command: Optional[str] = None
    timeout: float = 60.0
    deadline: Optional[float] = None
    dump_dir: Optional[str] = None
    dump_name: str = "fragment"
    jobs: int = 1

    @staticmethod
    def with_budget(total_timeout: Optional[float], **kwargs) -> "SolverSettings":
        deadline = None if total_timeout is None else time.monotonic() + total_timeout
        return SolverSettings(deadline=deadline, **kwargs)

    def remaining_query_time(self) -> float:
        if self.deadline is None:
            return self.timeout
        return min(self.timeout, self.deadline - time.monotonic())


def _dump(script: SmtScript, settings: SolverSettings, fragment_id: int) -> None:
    if settings.dump_dir is None:
        return
    import os

    os.makedirs(settings.dump_dir, exist_ok=True)
    path = os.path.join(settings.dump_dir, f"{settings.dump_name}.{fragment_id}.smt2")
    with open(path, "w") as fh:
        fh.write(script.text)


def _first_violated_obligation(
    fragment: OpenSrp, prop: Optional[PropertySpec], model: Labeling
) -> tuple[str, str]:
    """Re-evaluate guarantees then the property on the model, in
    canonical node order, and name the first failure."""
    for node in fragment.nodes:
        if node in fragment.guarantees and model[node] != fragment.guarantees[node]:
            return "guarantee", node
    if prop is not None:
        targets = set(prop.targets(fragment))
        for node in fragment.nodes:
            if node in targets and not prop.holds_on(model[node], fragment.route_type):
                return "property", node
    raise CheckerError(
        "solver model does not violate any obligation; encoder and solver disagree"
    )


def solve_fragment(
    fragment: OpenSrp,
    prop: Optional[PropertySpec] = None,
    settings: SolverSettings = SolverSettings(),
    fragment_id: int = 0,
    symbolic_assignment: Assignment = (),
    timings: Optional[list] = None,
) -> CheckResult:
    """Check one fragment: unsat verifies it, a model is classified as a
    guarantee or property violation, unknown is inconclusive.

    When a timings list is supplied, (fragment_id, solver wall seconds)
    is appended per query; encoding time is excluded.
    """
    if prop is not None:
        prop.type_check(fragment.route_type)
    script = encode_fragment(
        fragment,
        prop.per_node if prop is not None else None,
        prop.targets(fragment) if prop is not None else None,
    )
    _dump(script, settings, fragment_id)
    budget = settings.remaining_query_time()
    if budget <= 0:
        return Inconclusive(fragment_id, "whole-run timeout exceeded")
    started = time.perf_counter()
    try:
        verdict = run_solver(script, settings.command, budget)
    except SolverError as exc:
        return Inconclusive(fragment_id, str(exc))
    finally:
        if timings is not None:
            timings.append((fragment_id, time.perf_counter() - started))
    if isinstance(verdict, Unsat):
        return Verified()
    if isinstance(verdict, Unknown):
        return Inconclusive(fragment_id, verdict.reason)
    assert isinstance(verdict, Sat)
    model = parse_model(verdict.model, script)
    kind, node = _first_violated_obligation(fragment, prop, model)
    return Violation(fragment_id, kind, node, model, symbolic_assignment)


def decompose_property(
    prop: PropertySpec, fragments: Sequence[OpenSrp]
) -> list[PropertySpec]:
    """One spec per fragment, asserting the predicate over all of that
    fragment's nodes (inputs included; shared nodes are checked in every
    fragment that contains them)."""
    out = []
    for frag in fragments:
        nodes = frozenset(frag.nodes)
        if prop.nodes is not None:
            nodes &= prop.nodes
        out.append(PropertySpec(prop.per_node, nodes, prop.description))
    return out


def check(
    srp: OpenSrp,
    prop: Optional[PropertySpec],
    assignment: FragmentAssignment,
    interface: Interface,
    settings: SolverSettings = SolverSettings(),
    collect_all: bool = False,
    symbolic_assignment: Assignment = (),
    timings: Optional[list] = None,
) -> Union[CheckResult, list[CheckResult]]:
    """Cut and check every fragment. Returns the first non-verified
    result in fragment order (the whole list when collect_all)."""
    fragments = cut_n(srp, assignment, interface)
    per_fragment = (
        decompose_property(prop, fragments) if prop is not None else [None] * len(fragments)
    )

    def run_one(i: int) -> CheckResult:
        return solve_fragment(
            fragments[i], per_fragment[i], settings, i, symbolic_assignment, timings
        )

    results: list[CheckResult]
    if settings.jobs > 1:
        with ThreadPoolExecutor(max_workers=settings.jobs) as pool:
            results = list(pool.map(run_one, range(len(fragments))))
    else:
        results = []
        for i in range(len(fragments)):
            r = run_one(i)
            results.append(r)
            if not isinstance(r, Verified) and not collect_all:
                return r
    if collect_all:
        return results
    for r in results:
        if not isinstance(r, Verified):
            return r
    return Verified(fragments=len(fragments))


def refine_interface(interface: Interface, violation: Violation) -> Interface:
    """Install the counterexample's route for the violated node on every
    annotated edge leaving it."""
    if violation.kind != "guarantee":
        raise NotRefinable(f"{violation.kind} violation at {violation.node} is not an annotation problem")
    node = violation.node
    new_value = violation.counterexample[node]
    changes: dict[Edge, Value] = {
        (u, v): new_value for (u, v) in interface.domain() if u == node
    }
    if not changes:
        raise NotRefinable(f"violated node {node} has no annotated out-edges")
    return interface.updated(changes)


@dataclass(frozen=True)
class RefinementStep:
    round: int
    node: str
    edges: tuple[Edge, ...]
    old: Value
    new: Value

    def describe(self) -> str:
        edges = ", ".join(f"{u}->{v}" for (u, v) in self.edges)
        return (
            f"round {self.round}: refined {edges}: "
            f"{format_value(self.old)} -> {format_value(self.new)}"
        )


def check_with_refinement(
    srp: OpenSrp,
    prop: Optional[PropertySpec],
    assignment: FragmentAssignment,
    interface: Interface,
    max_rounds: int,
    settings: SolverSettings = SolverSettings(),
) -> tuple[CheckResult, Interface, int, list[RefinementStep]]:
    """Alternate check and refine until verified, not refinable, or the
    round budget runs out. Returns the final result, final interface,
    rounds used and the refinement trajectory."""
    if max_rounds < 1:
        raise ValueError("need at least one round")
    steps: list[RefinementStep] = []
    current = interface
    rounds = 0
    while True:
        rounds += 1
        result = check(srp, prop, assignment, current, settings)
        if isinstance(result, Verified) or isinstance(result, Inconclusive):
            return result, current, rounds, steps
        assert isinstance(result, Violation)
        if rounds >= max_rounds:
            return result, current, rounds, steps
        try:
            refined = refine_interface(current, result)
        except NotRefinable:
            return result, current, rounds, steps
        edges = tuple(sorted(e for e in current.domain() if e[0] == result.node))
        steps.append(
            RefinementStep(
                rounds,
                result.node,
                edges,
                current[edges[0]],
                result.counterexample[result.node],
            )
        )
        current = refined


def check_universal(
    srp: OpenSrp,
    prop: Optional[PropertySpec],
    assignment: FragmentAssignment,
    interface_family: Mapping[Assignment, Interface],
    settings: SolverSettings = SolverSettings(),
    timings: Optional[list] = None,
) -> tuple[CheckResult, dict[Assignment, CheckResult]]:
    """Check once per concrete assignment of the symbolic values; the
    aggregate is verified iff every concrete check is."""
    per: dict[Assignment, CheckResult] = {}
    for sym in symbolic_assignments(srp):
        if sym not in interface_family:
            raise MissingInterfaceFor(sym)
        concrete = srp.instantiate(dict(sym))
        per[sym] = check(
            concrete, prop, assignment, interface_family[sym],
            settings, symbolic_assignment=sym, timings=timings,
        )
    for result in per.values():
        if not isinstance(result, Verified):
            return result, per
    verified = next(iter(per.values()), Verified())
    return verified, per
