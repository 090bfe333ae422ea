"""Stable routing problem instances and the solution predicate.

An instance pairs a topology with a routing policy; an open instance
additionally assumes routes on input nodes and guarantees routes on
output nodes. A labeling solves an open instance when

  * every non-input node equals its init merged with the transferred
    routes of its in-neighbors (local stability),
  * every input node equals its assumed route, and
  * every output node equals its guaranteed route.

All types are immutable after validation; operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Mapping, Optional

from .ir import PolicySpec
from .routes import RouteType, Value, conforms, format_value


class ValidationError(Exception):
    """Base class for instance validation failures."""


class SelfLoop(ValidationError):
    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"self-loop edge {edge}")


class DanglingEdge(ValidationError):
    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"edge {edge} references an undeclared node")


class InputHasInEdge(ValidationError):
    def __init__(self, node, edge):
        self.node = node
        self.edge = edge
        super().__init__(f"input node {node} has incoming edge {edge}")


class InOutOverlap(ValidationError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"node {node} is both an input and an output")


class NonConformingInit(ValidationError):
    def __init__(self, node, value, rtype):
        self.node = node
        super().__init__(f"init value {value!r} for {node} does not conform to the route type")


class UnknownNode(ValidationError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"unknown node {node}")


@dataclass(frozen=True)
class Topology:
    """Directed graph. The node tuple fixes the canonical order used for
    deterministic merge folds and SMT variable naming."""

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]

    def __post_init__(self):
        if len(set(self.nodes)) != len(self.nodes):
            raise ValidationError("duplicate node identifiers")

    def index(self, node: str) -> int:
        return self.nodes.index(node)

    def in_neighbors(self, node: str) -> tuple[str, ...]:
        return _adjacency(self)[0][node]

    def out_neighbors(self, node: str) -> tuple[str, ...]:
        return _adjacency(self)[1][node]


@lru_cache(maxsize=None)
def _adjacency(topo: Topology):
    order = {n: i for i, n in enumerate(topo.nodes)}
    ins: dict[str, list[str]] = {n: [] for n in topo.nodes}
    outs: dict[str, list[str]] = {n: [] for n in topo.nodes}
    for (u, v) in topo.edges:
        if u in order and v in order:
            ins[v].append(u)
            outs[u].append(v)
    return (
        {n: tuple(sorted(us, key=order.__getitem__)) for n, us in ins.items()},
        {n: tuple(sorted(vs, key=order.__getitem__)) for n, vs in outs.items()},
    )


def make_topology(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> Topology:
    return Topology(tuple(nodes), frozenset(tuple(e) for e in edges))


@dataclass(frozen=True)
class SrpInstance:
    topology: Topology
    route_type: RouteType
    init: Mapping[str, Value]
    policy: PolicySpec


@dataclass(frozen=True)
class OpenSrp:
    """SRP with assumptions over input nodes and guarantees over output
    nodes. A closed SRP is the special case of empty assumptions and
    guarantees."""

    base: SrpInstance
    assumptions: Mapping[str, Value] = field(default_factory=dict)   # inh over Vin
    guarantees: Mapping[str, Value] = field(default_factory=dict)    # outh over Vout

    @property
    def topology(self) -> Topology:
        return self.base.topology

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.base.topology.nodes

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        return self.base.topology.edges

    @property
    def route_type(self) -> RouteType:
        return self.base.route_type

    @property
    def init(self) -> Mapping[str, Value]:
        return self.base.init

    @property
    def policy(self) -> PolicySpec:
        return self.base.policy

    @property
    def input_nodes(self) -> frozenset[str]:
        return frozenset(self.assumptions)

    @property
    def output_nodes(self) -> frozenset[str]:
        return frozenset(self.guarantees)

    @property
    def base_nodes(self) -> frozenset[str]:
        return frozenset(self.nodes) - self.input_nodes - self.output_nodes

    def is_closed(self) -> bool:
        return not self.assumptions and not self.guarantees

    def instantiate(self, assignment: Mapping[str, Value]) -> "OpenSrp":
        """Resolve symbolic policy values to concrete literals."""
        if not self.policy.symbolics:
            return self
        return replace(self, base=replace(self.base, policy=self.policy.instantiate(assignment)))


def closed_srp(topology: Topology, policy: PolicySpec) -> OpenSrp:
    """Build a closed instance, computing init from the policy."""
    init = {v: policy.init_for(v) for v in topology.nodes}
    return validate_open_srp(
        OpenSrp(base=SrpInstance(topology, policy.route_type, init, policy))
    )


def validate_open_srp(candidate: OpenSrp) -> OpenSrp:
    """Check all instance invariants and return the instance unchanged.

    Validation is idempotent: a validated instance re-validates equal.
    """
    topo = candidate.topology
    declared = set(topo.nodes)
    for (u, v) in topo.edges:
        if u == v:
            raise SelfLoop((u, v))
        if u not in declared or v not in declared:
            raise DanglingEdge((u, v))
    vin = set(candidate.assumptions)
    vout = set(candidate.guarantees)
    overlap = vin & vout
    if overlap:
        raise InOutOverlap(sorted(overlap)[0])
    for n in (vin | vout) - declared:
        raise UnknownNode(n)
    for (u, v) in topo.edges:
        if v in vin:
            raise InputHasInEdge(v, (u, v))
    rt = candidate.route_type
    for v in topo.nodes:
        if v not in candidate.init:
            raise NonConformingInit(v, None, rt)
        if not conforms(candidate.init[v], rt):
            raise NonConformingInit(v, candidate.init[v], rt)
    for mapping in (candidate.assumptions, candidate.guarantees):
        for n, val in mapping.items():
            if not conforms(val, rt):
                raise NonConformingInit(n, val, rt)
    candidate.policy.type_check()
    return candidate


@dataclass(frozen=True)
class Labeling:
    """Total mapping from nodes to route values."""

    values: Mapping[str, Value]

    def __getitem__(self, node: str) -> Value:
        return self.values[node]

    def __contains__(self, node: str) -> bool:
        return node in self.values

    def __len__(self) -> int:
        return len(self.values)

    def items(self):
        return self.values.items()

    def table(self, order: Optional[Iterable[str]] = None) -> str:
        nodes = list(order) if order is not None else sorted(self.values)
        width = max((len(n) for n in nodes), default=0)
        return "\n".join(f"{n:<{width}}  {format_value(self.values[n])}" for n in nodes)


def restrict_labeling(lab: Labeling, nodes: Iterable[str]) -> Labeling:
    """Restrict a labeling to a node subset, values unchanged."""
    keep = list(nodes)
    for n in keep:
        if n not in lab.values:
            raise UnknownNode(n)
    return Labeling({n: lab.values[n] for n in keep})


@dataclass(frozen=True)
class NodeViolation:
    node: str
    equation: str        # "stability" | "assumption" | "guarantee"
    expected: Value
    actual: Value

    def __str__(self):
        return (
            f"{self.node}: {self.equation} expects {format_value(self.expected)}, "
            f"got {format_value(self.actual)}"
        )


@dataclass(frozen=True)
class SolutionReport:
    ok: bool
    violations: tuple[NodeViolation, ...]


def stability_rhs(srp: OpenSrp, lab: Labeling, node: str) -> Value:
    """init(v) merged with transferred in-neighbor routes, folded in
    canonical node order."""
    policy = srp.policy
    acc = srp.init[node]
    for u in srp.topology.in_neighbors(node):
        acc = policy.merge(acc, policy.trans((u, node), lab[u]))
    return acc


def is_solution(srp: OpenSrp, lab: Labeling) -> SolutionReport:
    """Decide the solution predicate, reporting every violated equation.

    Inputs must equal their assumptions; outputs must satisfy both the
    stability equation and their guarantees.
    """
    for n in srp.nodes:
        if n not in lab:
            raise UnknownNode(n)
    violations: list[NodeViolation] = []
    vin = srp.input_nodes
    for v in srp.nodes:
        if v in vin:
            expected = srp.assumptions[v]
            if lab[v] != expected:
                violations.append(NodeViolation(v, "assumption", expected, lab[v]))
        else:
            expected = stability_rhs(srp, lab, v)
            if lab[v] != expected:
                violations.append(NodeViolation(v, "stability", expected, lab[v]))
        if v in srp.guarantees:
            expected = srp.guarantees[v]
            if lab[v] != expected:
                violations.append(NodeViolation(v, "guarantee", expected, lab[v]))
    return SolutionReport(ok=not violations, violations=tuple(violations))
