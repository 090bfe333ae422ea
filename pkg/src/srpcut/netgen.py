"""Benchmark topology generators and file ingestion.

Fattrees are parameterized by the pod count k (even): k*k/4 core
switches in groups of k/2, and per pod k/2 aggregation and k/2 edge
switches. Aggregation switch l of a pod connects to core group l and to
every edge switch of its pod. Nodes are named c0.., a0.., e0..; the
routing destination edge switch is named d. All links are materialized
as two directed edges.

Random topologies follow the Erdos-Renyi-Gilbert model with a fixed,
documented 64-bit linear congruential generator so draws reproduce
across implementations:

    state' = (6364136223846793343 * state + 1442695040888963407) mod 2^64

seeded with the user seed; each undirected pair (i, j), i < j, taken in
ascending (i, j) order, is present iff state' / 2^64 < p.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .srp import Topology


class OddK(ValueError):
    pass


class BadProbability(ValueError):
    pass


class EdgeListError(ValueError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        super().__init__(message if line_no is None else f"line {line_no}: {message}")


class DuplicateEdge(EdgeListError):
    pass


class DuplicateNode(ValueError):
    pass


@dataclass(frozen=True)
class FattreeMeta:
    k: int
    tiers: Mapping[str, str]        # node -> edge | aggregation | core
    pod: Mapping[str, int]          # non-core node -> pod index
    dest: str


def fattree(k: int, dest_index: int = -1) -> tuple[Topology, FattreeMeta]:
    """Build a k-pod fattree (5*k^2/4 nodes). dest_index selects which
    edge switch is the destination (default: the last one); that switch
    is named d."""
    if k < 2 or k % 2 != 0:
        raise OddK(f"pod count must be even and >= 2, got {k}")
    half = k // 2
    n_cores = k * k // 4
    n_edge = k * half

    if dest_index < 0:
        dest_index = n_edge + dest_index
    if not (0 <= dest_index < n_edge):
        raise ValueError(f"destination index {dest_index} out of range")

    cores = [f"c{i}" for i in range(n_cores)]
    aggs = [f"a{i}" for i in range(k * half)]
    edge_names = [
        "d" if i == dest_index else f"e{i}" for i in range(n_edge)
    ]

    links: set[tuple[str, str]] = set()
    tiers: dict[str, str] = {}
    pod: dict[str, int] = {}
    for c in cores:
        tiers[c] = "core"
    for p in range(k):
        for l in range(half):
            agg = aggs[p * half + l]
            tiers[agg] = "aggregation"
            pod[agg] = p
            # all edge switches of the pod
            for m in range(half):
                e = edge_names[p * half + m]
                links.add((agg, e))
                links.add((e, agg))
            # core group l
            for m in range(half):
                c = cores[l * half + m]
                links.add((agg, c))
                links.add((c, agg))
        for m in range(half):
            e = edge_names[p * half + m]
            tiers[e] = "edge"
            pod[e] = p

    nodes = tuple(cores + aggs + edge_names)
    topo = Topology(nodes, frozenset(links))
    meta = FattreeMeta(k=k, tiers=tiers, pod=pod, dest=edge_names[dest_index])
    return topo, meta


_LCG_MUL = 6364136223846793343
_LCG_ADD = 1442695040888963407
_LCG_MOD = 1 << 64


def _lcg(state: int) -> int:
    return (_LCG_MUL * state + _LCG_ADD) % _LCG_MOD


def erdos_renyi(n: int, p: float, seed: int) -> Topology:
    """Seeded random graph; undirected edges materialize as two directed
    edges. May be disconnected."""
    if n < 1:
        raise ValueError(f"need at least one node, got {n}")
    if not (0.0 <= p <= 1.0):
        raise BadProbability(f"edge probability {p} outside [0, 1]")
    nodes = tuple(f"n{i}" for i in range(n))
    state = seed % _LCG_MOD
    edges: set[tuple[str, str]] = set()
    for i in range(n):
        for j in range(i + 1, n):
            state = _lcg(state)
            if state / _LCG_MOD < p:
                edges.add((nodes[i], nodes[j]))
                edges.add((nodes[j], nodes[i]))
    return Topology(nodes, frozenset(edges))


def parse_edge_list(text: str) -> Topology:
    """Parse an edge list: one link per line, "u v" for undirected or
    "u -> v" for directed; '#' starts a comment. Nodes are declared by
    first appearance."""
    nodes: list[str] = []
    seen: set[str] = set()
    edges: set[tuple[str, str]] = set()

    def declare(name: str):
        if name not in seen:
            seen.add(name)
            nodes.append(name)

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) == 3 and parts[1] == "->":
            u, v = parts[0], parts[2]
            directed = True
        elif len(parts) == 2:
            u, v = parts
            directed = False
        else:
            raise EdgeListError(f"cannot parse {raw.strip()!r}", line_no)
        if u == v:
            raise EdgeListError(f"self-loop on {u}", line_no)
        declare(u)
        declare(v)
        new = [(u, v)] if directed else [(u, v), (v, u)]
        for e in new:
            if e in edges:
                raise DuplicateEdge(f"duplicate edge {e[0]} -> {e[1]}", line_no)
            edges.add(e)
    return Topology(tuple(nodes), frozenset(edges))


def fattree_assignment(meta: FattreeMeta, kind: str) -> dict[str, int]:
    """The four fattree cut strategies.

    vertical    2 fragments, half the pods and half the cores each
    horizontal  3 fragments: destination pod, spines, remaining pods
    pods        k+1 fragments: the spines, then each pod
    full        every node in its own fragment
    """
    k = meta.k
    cores = sorted(
        (n for n, t in meta.tiers.items() if t == "core"),
        key=lambda n: int(n[1:]),
    )
    non_core = [n for n in meta.tiers if n not in cores]
    if kind == "vertical":
        assignment = {}
        for c in cores:
            assignment[c] = 0 if cores.index(c) < len(cores) // 2 else 1
        for n in non_core:
            assignment[n] = 0 if meta.pod[n] < k // 2 else 1
        return assignment
    if kind == "horizontal":
        dest_pod = meta.pod[meta.dest]
        assignment = {}
        for c in cores:
            assignment[c] = 1
        for n in non_core:
            assignment[n] = 0 if meta.pod[n] == dest_pod else 2
        return assignment
    if kind == "pods":
        assignment = {}
        for c in cores:
            assignment[c] = 0
        for n in non_core:
            assignment[n] = meta.pod[n] + 1
        return assignment
    if kind == "full":
        aggs = sorted(
            (n for n, t in meta.tiers.items() if t == "aggregation"),
            key=lambda n: int(n[1:]),
        )
        edge_sw = sorted(
            (n for n, t in meta.tiers.items() if t == "edge"),
            key=lambda n: (meta.pod[n], n),
        )
        return {n: i for i, n in enumerate(cores + aggs + edge_sw)}
    raise ValueError(f"unknown cut kind {kind!r}")


def load_assignment(text: str) -> dict[str, int]:
    """Parse "node index" lines into a fragment assignment."""
    out: dict[str, int] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListError(f"cannot parse {raw.strip()!r}", line_no)
        node, idx = parts
        if node in out:
            raise DuplicateNode(f"node {node} assigned twice (line {line_no})")
        try:
            out[node] = int(idx)
        except ValueError:
            raise EdgeListError(f"bad fragment index {idx!r}", line_no) from None
    return out
