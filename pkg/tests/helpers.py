"""Shared test builders and independent oracles.

The oracles here deliberately avoid the package's own machinery: path
enumeration and relaxation-based distances are written directly against
dictionaries so simulator and SMT results can be checked against a
second opinion.
"""

from __future__ import annotations

import random
from typing import Optional

from srpcut.cutting import Interface, cross_edges
from srpcut.ir import LessEq, Lit, MatchOption, Var
from srpcut.netgen import fattree
from srpcut.policies import sp_policy
from srpcut.routes import BoolType, BoundedInt, Some
from srpcut.checker import PropertySpec
from srpcut.sim import Solved, solve
from srpcut.srp import OpenSrp, SrpInstance, Topology, closed_srp, validate_open_srp

HOP = BoundedInt(0, 15)


def max_hops_prop(bound: int, hop_type: BoundedInt = HOP) -> PropertySpec:
    return PropertySpec(
        MatchOption(Var("r"), Lit(False, BoolType()), "h", LessEq(Var("h"), Lit(bound, hop_type))),
        description=f"hops <= {bound}",
    )


def fat20():
    return fattree(4)


def fat20_sp() -> OpenSrp:
    topo, meta = fattree(4)
    return closed_srp(topo, sp_policy(dest=meta.dest))


def open_srp(topology, policy, assumptions=None, guarantees=None) -> OpenSrp:
    init = {v: policy.init_for(v) for v in topology.nodes}
    return validate_open_srp(
        OpenSrp(
            base=SrpInstance(topology, policy.route_type, init, policy),
            assumptions=dict(assumptions or {}),
            guarantees=dict(guarantees or {}),
        )
    )


# --- independent distance oracles ---------------------------------------

def adjacency(topology: Topology) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {n: [] for n in topology.nodes}
    for (u, v) in topology.edges:
        out[u].append(v)
    return {n: sorted(vs) for n, vs in out.items()}


def bfs_distances(topology: Topology, dest: str) -> dict[str, Optional[int]]:
    """Hop distance from each node to dest along directed edges."""
    preds: dict[str, list[str]] = {n: [] for n in topology.nodes}
    for (u, v) in topology.edges:
        preds[v].append(u)
    dist: dict[str, Optional[int]] = {n: None for n in topology.nodes}
    dist[dest] = 0
    frontier = [dest]
    while frontier:
        nxt = []
        for v in frontier:
            for u in preds[v]:
                if dist[u] is None:
                    dist[u] = dist[v] + 1
                    nxt.append(u)
        frontier = nxt
    return dist


def relaxation_distances(
    topology: Topology, dest: str, dropped_sources: frozenset[str] = frozenset()
) -> dict[str, Optional[int]]:
    """Bellman-Ford style fixed point of min/+1, ignoring transfers out
    of dropped sources. Independent oracle for SP and MAINT labelings."""
    dist: dict[str, Optional[int]] = {n: None for n in topology.nodes}
    dist[dest] = 0
    for _ in range(len(topology.nodes) + 1):
        changed = False
        for (u, v) in topology.edges:
            if u in dropped_sources or dist[u] is None:
                continue
            cand = dist[u] + 1
            if dist[v] is None or cand < dist[v]:
                dist[v] = cand
                changed = True
        if not changed:
            break
    return dist


def simple_paths(topology: Topology, source: str, dest: str, limit=10000):
    """All loopless paths source -> dest by DFS, as node tuples."""
    adj = adjacency(topology)
    out = []

    def go(path):
        if len(out) >= limit:
            raise RuntimeError("too many simple paths for the oracle")
        node = path[-1]
        if node == dest:
            out.append(tuple(path))
            return
        for nxt in adj[node]:
            if nxt not in path:
                path.append(nxt)
                go(path)
                path.pop()

    go([source])
    return out


def two_shortest_by_enumeration(topology: Topology, source: str, dest: str):
    """The two smallest (hops, path) pairs over all simple paths."""
    ranked = sorted((len(p) - 1, p) for p in simple_paths(topology, source, dest))
    best = ranked[0] if ranked else None
    second = ranked[1] if len(ranked) > 1 else None
    return best, second


def is_valley_free(path: tuple[str, ...], tiers) -> bool:
    """No climbing step after the first non-climbing step."""
    rank = {"edge": 0, "aggregation": 1, "core": 2}
    descended = False
    for a, b in zip(path, path[1:]):
        going_up = rank[tiers[b]] > rank[tiers[a]]
        if going_up and descended:
            return False
        if not going_up:
            descended = True
    return True


def valley_free_shortest(
    topology: Topology, tiers, source: str, dest: str, max_len: int = 6
) -> Optional[int]:
    """Exhaustive: enumerate every simple path up to max_len hops and
    keep the shortest valley-free one."""
    adj = adjacency(topology)
    best: list[Optional[int]] = [None]

    def go(path):
        node = path[-1]
        if node == dest:
            if is_valley_free(tuple(path), tiers):
                hops = len(path) - 1
                if best[0] is None or hops < best[0]:
                    best[0] = hops
            return
        if len(path) - 1 >= max_len:
            return
        for nxt in adj[node]:
            if nxt not in path:
                path.append(nxt)
                go(path)
                path.pop()

    go([source])
    return best[0]


# --- random instances ----------------------------------------------------

def random_topology(rng: random.Random, max_nodes: int = 12, p: float = 0.35) -> Topology:
    n = rng.randint(2, max_nodes)
    nodes = tuple(f"v{i}" for i in range(n))
    edges = set()
    for u in nodes:
        for v in nodes:
            if u != v and rng.random() < p:
                edges.add((u, v))
    # make sure the destination can be reached by someone
    if not edges:
        edges.add((nodes[1], nodes[0]))
        edges.add((nodes[0], nodes[1]))
    return Topology(nodes, frozenset(edges))


def random_tiers(rng: random.Random, topology: Topology) -> dict[str, str]:
    return {n: rng.choice(["edge", "aggregation", "core"]) for n in topology.nodes}


def random_open_sp_srp(rng: random.Random, max_nodes: int = 12) -> OpenSrp:
    """A solvable open SRP: random directed graph with an SP policy,
    some in-degree-0 nodes promoted to inputs, then some nodes promoted
    to outputs with their solved values (so a solution exists)."""
    topo = random_topology(rng, max_nodes)
    dest = topo.nodes[0]
    policy = sp_policy(dest=dest)
    srp = closed_srp(topo, policy)

    sources = [
        v
        for v in topo.nodes
        if v != dest and not any(e[1] == v for e in topo.edges)
    ]
    assumptions = {}
    # keep at least two non-input nodes so a two-way cut exists
    budget = len(topo.nodes) - 2
    for v in sources:
        if budget > 0 and rng.random() < 0.5:
            assumptions[v] = rng.choice([None, Some(rng.randint(0, 9))])
            budget -= 1
    srp = open_srp(topo, policy, assumptions, {})
    result = solve(srp)
    assert isinstance(result, Solved)
    guarantees = {}
    for v in topo.nodes:
        if v not in assumptions and rng.random() < 0.25:
            guarantees[v] = result.labeling[v]
    return open_srp(topo, policy, assumptions, guarantees)


def random_two_class_assignment(rng: random.Random, srp: OpenSrp) -> dict[str, int]:
    free = [n for n in srp.nodes if n not in srp.input_nodes]
    assert len(free) >= 2
    while True:
        assignment = {n: rng.randint(0, 1) for n in free}
        if len(set(assignment.values())) == 2:
            return assignment


def complete_interface_via_solve(srp: OpenSrp, assignment) -> Interface:
    result = solve(srp)
    assert isinstance(result, Solved)
    lab = result.labeling
    return Interface({(u, v): lab[u] for (u, v) in cross_edges(srp, assignment)})
