"""Interface generation.

The complete interface annotates every cut edge u->v with the parent
solution at u; fragments cut along it are guaranteed to be solvable
with the restricted parent solution. For maintenance policies, a
per-down family of interfaces is generated from shortest paths: the
annotation for u is the hop count of u's best path whose transfer chain
avoids the down node (the down node may be u itself, since only routes
it advertises are dropped).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Optional

from .cutting import Edge, Interface
from .routes import Some, Value
from .sim import SolveConfig, Solved, solve
from .srp import OpenSrp, Topology


class Unsolvable(Exception):
    """The instance has no simulation fixed point to annotate from."""

    def __init__(self, result):
        self.result = result
        super().__init__(f"cannot build interface: solver returned {type(result).__name__}")


def complete_interface(
    srp: OpenSrp, cutset: Iterable[Edge], cfg: SolveConfig = SolveConfig()
) -> Interface:
    """Annotate each cut edge u->v with the solved label of u."""
    edges = list(cutset)
    result = solve(srp, cfg)
    if not isinstance(result, Solved):
        raise Unsolvable(result)
    lab = result.labeling
    return Interface({(u, v): lab[u] for (u, v) in edges})


@dataclass(frozen=True)
class PathInfo:
    hops: int
    path: tuple[str, ...]


@dataclass(frozen=True)
class TwoPaths:
    """Shortest and second-shortest loopless paths to the destination,
    ordered by (hop count, lexicographic node sequence)."""

    best: Optional[PathInfo]
    second: Optional[PathInfo]


def _shortest_path(
    topology: Topology,
    source: str,
    dest: str,
    banned_nodes: frozenset[str] = frozenset(),
    banned_edges: frozenset[Edge] = frozenset(),
) -> Optional[PathInfo]:
    """Unit-weight shortest path with deterministic tie-breaking by the
    lexicographically smallest node-name sequence."""
    if source in banned_nodes or dest in banned_nodes:
        return None
    heap = [(0, (source,))]
    visited: set[str] = set()
    while heap:
        hops, path = heapq.heappop(heap)
        node = path[-1]
        if node in visited:
            continue
        visited.add(node)
        if node == dest:
            return PathInfo(hops, path)
        for nxt in topology.out_neighbors(node):
            if nxt in visited or nxt in banned_nodes:
                continue
            if (node, nxt) in banned_edges:
                continue
            heapq.heappush(heap, (hops + 1, path + (nxt,)))
    return None


def yen_two_shortest(topology: Topology, dest: str) -> dict[str, TwoPaths]:
    """Best and second-best loopless path to dest from every node.

    Standard spur-node construction for the second path: for each prefix
    of the best path, ban the next best-path edge at the spur node and
    the prefix nodes, then take the cheapest spur completion.
    """
    out: dict[str, TwoPaths] = {}
    for source in topology.nodes:
        if source == dest:
            out[source] = TwoPaths(PathInfo(0, (dest,)), None)
            continue
        best = _shortest_path(topology, source, dest)
        if best is None:
            out[source] = TwoPaths(None, None)
            continue
        candidates: list[PathInfo] = []
        for i in range(len(best.path) - 1):
            spur = best.path[i]
            root = best.path[: i + 1]
            banned_edges = frozenset({(best.path[i], best.path[i + 1])})
            banned_nodes = frozenset(root[:-1])
            spur_path = _shortest_path(topology, spur, dest, banned_nodes, banned_edges)
            if spur_path is None:
                continue
            total = root[:-1] + spur_path.path
            if total == best.path:
                continue
            candidates.append(PathInfo(len(total) - 1, total))
        second = None
        if candidates:
            second = min(candidates, key=lambda p: (p.hops, p.path))
        out[source] = TwoPaths(best, second)
    return out


def distances_avoiding(topology: Topology, dest: str, down: str) -> dict[str, Optional[int]]:
    """Hop count of the best path to dest whose transfer chain skips
    routes advertised by `down`: internal nodes and the destination may
    not be down, the source may. Reverse BFS from dest over the graph
    without down, then one relaxation step for down itself."""
    if down == dest:
        raise ValueError("destination cannot be the down node")
    in_neighbors = {n: topology.in_neighbors(n) for n in topology.nodes}
    dist: dict[str, Optional[int]] = {n: None for n in topology.nodes}
    dist[dest] = 0
    frontier = [dest]
    while frontier:
        nxt: list[str] = []
        for v in frontier:
            for u in in_neighbors[v]:
                if u == down or dist[u] is not None:
                    continue
                dist[u] = dist[v] + 1
                nxt.append(u)
        frontier = nxt
    reachable = [
        dist[v] for v in topology.out_neighbors(down) if dist[v] is not None
    ]
    dist[down] = min(reachable) + 1 if reachable else None
    return dist


def maint_interface(
    topology: Topology, dest: str, cutset: Iterable[Edge]
) -> dict[str, Interface]:
    """Per-down interfaces for the maintenance policy.

    The annotation on u->v is Some(hops) of u's best path avoiding down,
    or None when no such path exists. The two Yen paths decide the common
    cases (the best path when it avoids down, else the second); when both
    run through down, the exact avoiding distance is used, since a longer
    detour may still exist.
    """
    edges = list(cutset)
    two_paths = yen_two_shortest(topology, dest)
    out: dict[str, Interface] = {}
    for down in topology.nodes:
        if down == dest:
            continue
        avoiding: Optional[dict[str, Optional[int]]] = None
        annotations: dict[Edge, Value] = {}
        for (u, v) in edges:
            tp = two_paths[u]
            hops: Optional[int]
            if tp.best is not None and down not in tp.best.path[1:]:
                hops = tp.best.hops
            elif tp.second is not None and down not in tp.second.path[1:]:
                hops = tp.second.hops
            else:
                if avoiding is None:
                    avoiding = distances_avoiding(topology, dest, down)
                hops = avoiding[u]
            annotations[(u, v)] = Some(hops) if hops is not None else None
        out[down] = Interface(annotations)
    return out
