"""Fixed-point simulation solver.

Serves as the ground-truth oracle for the SMT pipeline: it computes the
solution of an open SRP by synchronous (Jacobi-style) rounds. Every
non-input node is recomputed from the previous round simultaneously;
input nodes stay clamped to their assumptions. On reaching a fixed
point the guarantees of the output nodes are checked; a labeling is
returned only if they all hold.

Synchronous iteration reaches the same unique fixed point as message
passing when one exists, and is deterministic: identical inputs give
identical labelings and round counts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Union

from .ir import evaluate, specialize_edge
from .routes import Value, format_value
from .srp import Labeling, OpenSrp


class DomainEmpty(ValueError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    """max_iterations defaults to twice the node count; the margin
    surfaces slow convergence without masking true divergence."""

    max_iterations: Optional[int] = None
    record_trace: bool = False

    def __post_init__(self):
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def bound(self, n_nodes: int) -> int:
        return self.max_iterations if self.max_iterations is not None else max(1, 2 * n_nodes)


@dataclass(frozen=True)
class TraceEntry:
    round: int
    node: str
    old: Value
    new: Value

    def csv_line(self) -> str:
        return f"{self.round},{self.node},{format_value(self.old)},{format_value(self.new)}"


@dataclass(frozen=True)
class Solved:
    labeling: Labeling
    rounds: int
    trace: tuple[TraceEntry, ...] = ()


@dataclass(frozen=True)
class Diverged:
    rounds: int
    trace: tuple[TraceEntry, ...] = ()


@dataclass(frozen=True)
class NoSolution:
    """A fixed point exists but contradicts the guarantees."""

    failures: tuple[tuple[str, Value, Value], ...]  # (node, expected, actual)
    labeling: Labeling
    rounds: int
    trace: tuple[TraceEntry, ...] = ()


SolveResult = Union[Solved, Diverged, NoSolution]

DEFAULT_CONFIG = SolveConfig()


def solve(srp: OpenSrp, cfg: SolveConfig = DEFAULT_CONFIG) -> SolveResult:
    """Run synchronous rounds from the initial labeling until stable.

    The initial labeling assigns assumptions to input nodes and init
    values everywhere else.
    """
    if srp.policy.symbolics:
        raise ValueError(
            "instance has unresolved symbolic values; "
            "use solve_all_symbolic or instantiate first"
        )
    topo = srp.topology
    rt = srp.route_type
    policy = srp.policy
    vin = srp.input_nodes
    free = [v for v in topo.nodes if v not in vin]
    trans_for = {
        (u, v): specialize_edge(policy.trans_expr, (u, v)) for (u, v) in topo.edges
    }
    in_edges = {v: [(u, v) for u in topo.in_neighbors(v)] for v in free}
    merge_expr = policy.merge_expr

    lab: dict[str, Value] = {}
    for v in topo.nodes:
        lab[v] = srp.assumptions[v] if v in vin else srp.init[v]

    trace: list[TraceEntry] = []
    rounds = 0
    limit = cfg.bound(len(topo.nodes))
    while rounds < limit:
        rounds += 1
        nxt = dict(lab)
        changed = False
        for v in free:
            acc = srp.init[v]
            for (u, _) in in_edges[v]:
                transferred = evaluate(trans_for[(u, v)], {"r": (lab[u], rt)})
                acc = evaluate(merge_expr, {"r1": (acc, rt), "r2": (transferred, rt)})
            if acc != lab[v]:
                changed = True
                if cfg.record_trace:
                    trace.append(TraceEntry(rounds, v, lab[v], acc))
            nxt[v] = acc
        if not changed:
            return _finish(srp, lab, rounds, tuple(trace))
        lab = nxt
    return Diverged(rounds, tuple(trace))


def _finish(srp: OpenSrp, lab: dict, rounds: int, trace) -> SolveResult:
    failures = tuple(
        (v, expected, lab[v])
        for v, expected in sorted(srp.guarantees.items(), key=lambda kv: srp.topology.index(kv[0]))
        if lab[v] != expected
    )
    labeling = Labeling(dict(lab))
    if failures:
        return NoSolution(failures, labeling, rounds, trace)
    return Solved(labeling, rounds, trace)


def trace_csv(trace) -> str:
    return "\n".join(["round,node,old,new"] + [t.csv_line() for t in trace])


Assignment = tuple[tuple[str, Value], ...]


def symbolic_assignments(srp: OpenSrp) -> list[Assignment]:
    """Cartesian product of the symbolic domains, as sorted key tuples.
    A policy without symbolics yields the single empty assignment."""
    syms = srp.policy.symbolics
    for s in syms:
        if not s.domain:
            raise DomainEmpty(f"symbolic {s.name!r} has an empty domain")
    names = [s.name for s in syms]
    products = itertools.product(*(s.domain for s in syms))
    return [tuple(zip(names, combo)) for combo in products]


def solve_all_symbolic(
    srp: OpenSrp, cfg: SolveConfig = DEFAULT_CONFIG
) -> dict[Assignment, SolveResult]:
    """Solve one concrete instance per assignment of the symbolics."""
    results: dict[Assignment, SolveResult] = {}
    for assignment in symbolic_assignments(srp):
        concrete = srp.instantiate(dict(assignment))
        results[assignment] = solve(concrete, cfg)
    return results
