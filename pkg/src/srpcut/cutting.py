"""Cutting open SRPs into fragments.

An interface annotates each edge of a cut-set with the route that the
source node's solution is believed to transfer along it. Cutting along
an interface produces two fragments: each cut edge u->v turns u into an
output node (guaranteeing the annotation) on its own side and into a
replicated input node (assuming the annotation) on the side that
contains v. These input-output nodes are what make the fragments
independently checkable without circular reasoning.

Construction rules for a side W (the other side being W'):

    inputs      parent inputs with an edge into W, plus sources in W'
                of cut edges into W
    outputs     parent outputs inside W, plus sources in W of cut edges
    node set    W plus its inputs
    edge set    parent edges within the node set that do not enter an
                input node
    init        parent init restricted to the node set
    assumptions parent assumption for parent inputs, else the interface
                annotation of the cut edge leaving the node
    guarantees  parent guarantee for parent outputs that are not inputs
                here, else the interface annotation

N-way cuts iterate the binary construction, separating fragment 0 from
the rest, then 1 from the rest, and so on; the result carries identical
assumptions and guarantees to annotating every cross edge pairwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .routes import Value, conforms, format_value
from .srp import (
    Labeling,
    OpenSrp,
    SrpInstance,
    Topology,
    validate_open_srp,
)

Edge = tuple[str, str]


class CutError(Exception):
    pass


class NotACutSet(CutError):
    pass


class AnnotationOffEdge(CutError):
    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"annotation on {edge} is not on the cut between fragments")


class NonConformingAnnotation(CutError):
    def __init__(self, edge, value):
        self.edge = edge
        super().__init__(f"annotation {value!r} on {edge} does not conform to the route type")


class ConflictingAnnotation(CutError):
    """Two cut edges leaving the same node carry different routes; the
    node cannot assume or guarantee both."""

    def __init__(self, node, values):
        self.node = node
        super().__init__(
            f"cut edges out of {node} carry conflicting annotations: "
            + ", ".join(format_value(v) for v in values)
        )


class MissingAnnotation(CutError):
    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"cross edge {edge} has no interface annotation")


class NotTotalAssignment(CutError):
    pass


@dataclass(frozen=True)
class Interface:
    """Mapping from cut-set edges to route annotations."""

    annotations: Mapping[Edge, Value]

    def __getitem__(self, edge: Edge) -> Value:
        return self.annotations[edge]

    def __contains__(self, edge: Edge) -> bool:
        return edge in self.annotations

    def __len__(self) -> int:
        return len(self.annotations)

    def domain(self) -> frozenset[Edge]:
        return frozenset(self.annotations)

    def updated(self, changes: Mapping[Edge, Value]) -> "Interface":
        merged = dict(self.annotations)
        merged.update(changes)
        return Interface(merged)


FragmentAssignment = Mapping[str, int]


def check_interface(srp: OpenSrp, interface: Interface) -> None:
    """Annotations must sit on declared edges, conform to the route
    type, and agree across all cut edges leaving one node."""
    for edge, value in interface.annotations.items():
        if edge not in srp.edges:
            raise AnnotationOffEdge(edge)
        if not conforms(value, srp.route_type):
            raise NonConformingAnnotation(edge, value)
    by_source: dict[str, set] = {}
    for (u, v), value in interface.annotations.items():
        by_source.setdefault(u, set()).add(value)
    for u, values in by_source.items():
        if len(values) > 1:
            raise ConflictingAnnotation(u, sorted(values, key=repr))


def input_free_graph(srp: OpenSrp) -> Topology:
    """Induced subgraph on the non-input nodes."""
    vin = srp.input_nodes
    keep = tuple(n for n in srp.nodes if n not in vin)
    keep_set = set(keep)
    edges = frozenset(
        (u, v) for (u, v) in srp.edges if u in keep_set and v in keep_set
    )
    return Topology(keep, edges)


def _recover_sides(srp: OpenSrp, interface: Interface) -> tuple[set[str], set[str]]:
    """Recover the two sides of the cut from the interface domain: the
    annotated edges must be exactly the edges crossing a bipartition of
    the input-free graph, and the bipartition must be determined (every
    leftover component tied to a side by some cut edge)."""
    graph = input_free_graph(srp)
    dom = interface.domain()
    if not dom:
        raise NotACutSet("empty interface cannot determine two sides")

    nodes = list(graph.nodes)
    node_set = set(nodes)
    for (u, v) in dom:
        if u not in node_set or v not in node_set:
            raise NotACutSet(f"cut edge {(u, v)} touches an input node")

    undirected_cut = {frozenset(e) for e in dom}
    adjacency: dict[str, list[str]] = {n: [] for n in nodes}
    for (u, v) in graph.edges:
        if frozenset((u, v)) not in undirected_cut:
            adjacency[u].append(v)
            adjacency[v].append(u)

    component: dict[str, int] = {}
    for start in nodes:
        if start in component:
            continue
        comp_id = len(set(component.values()))
        stack = [start]
        component[start] = comp_id
        while stack:
            x = stack.pop()
            for y in adjacency[x]:
                if y not in component:
                    component[y] = comp_id
                    stack.append(y)

    n_comps = len(set(component.values()))
    # 2-color components; cut edges force their endpoints apart. The
    # coloring must be reachable from a single seed, otherwise the cut
    # set admits more than one bipartition and the sides are ambiguous.
    constraint: dict[int, set[int]] = {i: set() for i in range(n_comps)}
    for (u, v) in dom:
        cu, cv = component[u], component[v]
        if cu == cv:
            raise NotACutSet(f"annotated edge {(u, v)} does not cross the cut")
        constraint[cu].add(cv)
        constraint[cv].add(cu)
    first_comp = component[nodes[0]]
    color: dict[int, int] = {first_comp: 0}
    stack = [first_comp]
    while stack:
        c = stack.pop()
        for d in constraint[c]:
            if d not in color:
                color[d] = 1 - color[c]
                stack.append(d)
            elif color[d] == color[c]:
                raise NotACutSet("annotated edges do not form a bipartition cut-set")
    if len(color) != n_comps:
        raise NotACutSet(
            "cut does not determine two sides: some component is not tied "
            "to the rest by any annotated edge"
        )
    side1 = {n for n in nodes if color[component[n]] == 0}
    side2 = {n for n in nodes if color[component[n]] == 1}
    if not side1 or not side2:
        raise NotACutSet("cut leaves one side empty")

    crossing = _crossing_edges(srp, side1, side2)
    if crossing != dom:
        extra = sorted(dom - crossing)
        missing = sorted(crossing - dom)
        raise NotACutSet(
            f"interface domain is not the cut-set of the recovered sides "
            f"(unexpected: {extra}, unannotated: {missing})"
        )
    return side1, side2


def _crossing_edges(srp: OpenSrp, w1: set[str], w2: set[str]) -> frozenset[Edge]:
    return frozenset(
        (u, v)
        for (u, v) in srp.edges
        if (u in w1 and v in w2) or (u in w2 and v in w1)
    )


def _build_fragment(
    srp: OpenSrp, side: set[str], interface: Interface, take_orphans: bool = False
) -> OpenSrp:
    """Construct one fragment for a side of the cut. Parent inputs
    without any out-edge belong to no side; the first fragment takes
    them so the partition still covers the parent."""
    dom = interface.domain()
    vin = {
        u
        for u in srp.input_nodes
        if any(u == a and b in side for (a, b) in srp.edges)
    }
    vin |= {u for (u, v) in dom if v in side}
    if take_orphans:
        with_edges = {a for (a, _b) in srp.edges}
        vin |= {u for u in srp.input_nodes if u not in with_edges}
    vout = {u for u in side if u in srp.output_nodes}
    vout |= {u for (u, v) in dom if u in side}

    node_set = side | vin
    order = {n: i for i, n in enumerate(srp.nodes)}
    nodes = tuple(sorted(node_set, key=order.__getitem__))
    edges = frozenset(
        (u, v)
        for (u, v) in srp.edges
        if u in node_set and v in node_set and v not in vin
    )

    assumptions: dict[str, Value] = {}
    for u in vin:
        if u in srp.input_nodes:
            assumptions[u] = srp.assumptions[u]
        else:
            for (a, b) in dom:
                if a == u and b in side:
                    assumptions[u] = interface[(a, b)]
                    break
    guarantees: dict[str, Value] = {}
    for u in vout:
        if u in srp.output_nodes and u not in vin:
            guarantees[u] = srp.guarantees[u]
        else:
            for (a, b) in dom:
                if a == u and a in side:
                    guarantees[u] = interface[(a, b)]
                    break

    base = SrpInstance(
        topology=Topology(nodes, edges),
        route_type=srp.route_type,
        init={n: srp.init[n] for n in nodes},
        policy=srp.policy,
    )
    return OpenSrp(base=base, assumptions=assumptions, guarantees=guarantees)


def _cut_sides(
    srp: OpenSrp, w1: set[str], w2: set[str], interface: Interface
) -> tuple[OpenSrp, OpenSrp]:
    check_interface(srp, interface)
    crossing = _crossing_edges(srp, w1, w2)
    dom = interface.domain()
    for edge in sorted(crossing - dom):
        raise MissingAnnotation(edge)
    for edge in sorted(dom - crossing):
        raise AnnotationOffEdge(edge)
    t1 = validate_open_srp(_build_fragment(srp, w1, interface, take_orphans=True))
    t2 = validate_open_srp(_build_fragment(srp, w2, interface))
    return t1, t2


def cut(srp: OpenSrp, interface: Interface) -> tuple[OpenSrp, OpenSrp]:
    """Cut an open SRP in two along the interface. The interface domain
    must be exactly the cut-set of a bipartition of the input-free
    graph; the side containing the canonically first non-input node
    comes back first."""
    check_interface(srp, interface)
    w1, w2 = _recover_sides(srp, interface)
    return _cut_sides(srp, w1, w2, interface)


def _used_indices(assignment: FragmentAssignment) -> list[int]:
    return sorted(set(assignment.values()))


def cross_edges(srp: OpenSrp, assignment: FragmentAssignment) -> frozenset[Edge]:
    """Edges between distinct assignment classes (parent inputs have no
    class and never contribute)."""
    return frozenset(
        (u, v)
        for (u, v) in srp.edges
        if u in assignment and v in assignment and assignment[u] != assignment[v]
    )


def cut_n(
    srp: OpenSrp, assignment: FragmentAssignment, interface: Interface
) -> list[OpenSrp]:
    """Cut into one fragment per assignment class by iterated binary
    cuts. Fragments come back in ascending class order."""
    expected = frozenset(srp.nodes) - srp.input_nodes
    got = frozenset(assignment)
    if got != expected:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        detail = []
        if missing:
            detail.append(f"unassigned nodes: {missing}")
        if extra:
            detail.append(f"not assignable: {extra}")
        raise NotTotalAssignment("; ".join(detail))
    check_interface(srp, interface)
    crossing = cross_edges(srp, assignment)
    dom = interface.domain()
    for edge in sorted(crossing - dom):
        raise MissingAnnotation(edge)
    for edge in sorted(dom - crossing):
        raise AnnotationOffEdge(edge)

    indices = _used_indices(assignment)
    if len(indices) == 1:
        return [srp]

    fragments: list[OpenSrp] = []
    rest = srp
    for idx in indices[:-1]:
        side = {n for n in rest.nodes if assignment.get(n) == idx and n not in rest.input_nodes}
        other = {
            n
            for n in rest.nodes
            if n not in rest.input_nodes and assignment.get(n) != idx
        }
        step_dom = {
            e: interface[e]
            for e in _crossing_edges(rest, side, other)
        }
        frag, rest = _cut_sides(rest, side, other, Interface(step_dom))
        fragments.append(frag)
    fragments.append(rest)
    return fragments


def binary_steps(
    srp: OpenSrp, assignment: FragmentAssignment, interface: Interface
) -> list[tuple[OpenSrp, OpenSrp, OpenSrp]]:
    """The (parent, fragment, rest) chain behind cut_n, for checking
    that every intermediate binary cut forms a partition."""
    indices = _used_indices(assignment)
    steps = []
    rest = srp
    for idx in indices[:-1]:
        side = {n for n in rest.nodes if assignment.get(n) == idx and n not in rest.input_nodes}
        other = {
            n
            for n in rest.nodes
            if n not in rest.input_nodes and assignment.get(n) != idx
        }
        step_dom = {e: interface[e] for e in _crossing_edges(rest, side, other)}
        frag, new_rest = _cut_sides(rest, side, other, Interface(step_dom))
        steps.append((rest, frag, new_rest))
        rest = new_rest
    return steps


# --- partition validation ----------------------------------------------

@dataclass(frozen=True)
class PartitionViolation:
    constraint: str
    witnesses: tuple

    def __str__(self):
        return f"{self.constraint}: {self.witnesses}"


@dataclass(frozen=True)
class PartitionReport:
    valid: bool
    violations: tuple[PartitionViolation, ...]


def _fragment_violations(s: OpenSrp, t: OpenSrp, tag: str) -> list[PartitionViolation]:
    """Check the fragment relation between t and s.

    The input and output node sets are checked in the direction the
    gluing argument needs: every node with a missing in-neighbor must be
    an input here, and every parent output that is not an input here
    must still be an output; cut-created inputs and outputs beyond that
    are legitimate and covered by the partition constraints below.
    """
    out: list[PartitionViolation] = []
    sv = set(s.nodes)
    tv = set(t.nodes)
    if not tv <= sv:
        out.append(PartitionViolation(f"{tag} node subset", tuple(sorted(tv - sv))))
        return out
    expected_edges = frozenset(
        (u, v)
        for (u, v) in s.edges
        if u in tv and v in tv and v not in t.input_nodes
    )
    if t.edges != expected_edges:
        out.append(
            PartitionViolation(
                f"{tag} edge rule",
                tuple(sorted(t.edges ^ expected_edges)),
            )
        )
    if t.route_type != s.route_type:
        out.append(PartitionViolation(f"{tag} route type", (t.route_type, s.route_type)))
    if t.policy.merge_expr != s.policy.merge_expr or t.policy.trans_expr != s.policy.trans_expr:
        out.append(PartitionViolation(f"{tag} policy", ()))
    bad_init = tuple(n for n in t.nodes if t.init.get(n) != s.init.get(n))
    if bad_init:
        out.append(PartitionViolation(f"{tag} init restriction", bad_init))
    dangling = tuple(
        sorted(
            v
            for v in tv
            if v not in t.input_nodes
            and any(b == v and a not in tv for (a, b) in s.edges)
        )
    )
    if dangling:
        out.append(PartitionViolation(f"{tag} missing in-neighbors not inputs", dangling))
    bad_inherited_in = tuple(
        sorted(
            v for v in (set(s.input_nodes) & tv) if v not in t.input_nodes
        )
    )
    if bad_inherited_in:
        out.append(PartitionViolation(f"{tag} parent inputs not inputs", bad_inherited_in))
    bad_in_values = tuple(
        sorted(
            v
            for v in (t.input_nodes & s.input_nodes)
            if t.assumptions[v] != s.assumptions[v]
        )
    )
    if bad_in_values:
        out.append(PartitionViolation(f"{tag} inherited assumptions", bad_in_values))
    lost_outputs = tuple(
        sorted(
            v
            for v in (set(s.output_nodes) & tv)
            if v not in t.input_nodes and v not in t.output_nodes
        )
    )
    if lost_outputs:
        out.append(PartitionViolation(f"{tag} parent outputs not outputs", lost_outputs))
    bad_out_values = tuple(
        sorted(
            v
            for v in (t.output_nodes & s.output_nodes)
            if t.guarantees[v] != s.guarantees[v]
        )
    )
    if bad_out_values:
        out.append(PartitionViolation(f"{tag} inherited guarantees", bad_out_values))
    return out


def validate_partition(s: OpenSrp, t1: OpenSrp, t2: OpenSrp) -> PartitionReport:
    """Check that (t1, t2) forms a partition of s: both are fragments,
    they cover s's nodes and edges, every cut-created input or output is
    an input-output node with matching annotation, and shared nodes are
    exactly the shared inputs plus the input-output nodes."""
    violations: list[PartitionViolation] = []
    violations += _fragment_violations(s, t1, "T1")
    violations += _fragment_violations(s, t2, "T2")

    v1, v2, vs = set(t1.nodes), set(t2.nodes), set(s.nodes)
    if v1 | v2 != vs:
        violations.append(PartitionViolation("V coverage", tuple(sorted(vs ^ (v1 | v2)))))
    if t1.edges | t2.edges != s.edges:
        violations.append(
            PartitionViolation("E coverage", tuple(sorted(s.edges ^ (t1.edges | t2.edges))))
        )

    in1 = set(t1.input_nodes) - set(s.input_nodes)
    in2 = set(t2.input_nodes) - set(s.input_nodes)
    out1 = set(t1.output_nodes) - set(s.output_nodes)
    out2 = set(t2.output_nodes) - set(s.output_nodes)
    if not in1 <= set(t2.output_nodes):
        violations.append(
            PartitionViolation("T1 new inputs are T2 outputs", tuple(sorted(in1 - set(t2.output_nodes))))
        )
    if not in2 <= set(t1.output_nodes):
        violations.append(
            PartitionViolation("T2 new inputs are T1 outputs", tuple(sorted(in2 - set(t1.output_nodes))))
        )
    if not out1 <= set(t2.input_nodes):
        violations.append(
            PartitionViolation("T1 new outputs are T2 inputs", tuple(sorted(out1 - set(t2.input_nodes))))
        )
    if not out2 <= set(t1.input_nodes):
        violations.append(
            PartitionViolation("T2 new outputs are T1 inputs", tuple(sorted(out2 - set(t1.input_nodes))))
        )
    mismatched = tuple(
        sorted(
            v
            for v in in1
            if v in t2.guarantees and t1.assumptions[v] != t2.guarantees[v]
        )
    )
    if mismatched:
        violations.append(PartitionViolation("input-output equality (T1 in, T2 out)", mismatched))
    mismatched = tuple(
        sorted(
            v
            for v in in2
            if v in t1.guarantees and t2.assumptions[v] != t1.guarantees[v]
        )
    )
    if mismatched:
        violations.append(PartitionViolation("input-output equality (T2 in, T1 out)", mismatched))

    shared = v1 & v2
    expected_shared = (set(t1.input_nodes) & set(t2.input_nodes)) | (
        (set(t1.input_nodes) | set(t2.input_nodes)) - set(s.input_nodes)
    )
    if shared != expected_shared:
        violations.append(
            PartitionViolation("shared input constraint", tuple(sorted(shared ^ expected_shared)))
        )

    return PartitionReport(valid=not violations, violations=tuple(violations))


def is_input_output_node(u: str, t1: OpenSrp, t2: OpenSrp) -> bool:
    """A node assumed in one fragment and guaranteed in the other, with
    equal annotation on both sides."""
    if u in t1.assumptions and u in t2.guarantees:
        if t1.assumptions[u] == t2.guarantees[u]:
            return True
    if u in t2.assumptions and u in t1.guarantees:
        if t2.assumptions[u] == t1.guarantees[u]:
            return True
    return False


def glue_solutions(
    s: OpenSrp, fragments: Sequence[OpenSrp], labelings: Sequence[Labeling]
) -> Labeling:
    """Combine fragment solutions into a labeling of the parent: each
    node takes its fragment value, and parent inputs take their assumed
    value. Shared nodes must agree across fragments."""
    combined: dict[str, Value] = {}
    for frag, lab in zip(fragments, labelings):
        for n in frag.nodes:
            if n in combined and combined[n] != lab[n]:
                raise CutError(
                    f"fragments disagree on shared node {n}: "
                    f"{format_value(combined[n])} vs {format_value(lab[n])}"
                )
            combined[n] = lab[n]
    for n, v in s.assumptions.items():
        combined[n] = v
    missing = [n for n in s.nodes if n not in combined]
    if missing:
        raise CutError(f"fragments do not cover nodes: {missing}")
    return Labeling(combined)
