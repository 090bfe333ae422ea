"""Network spec files: a JSON document describing a whole verification
problem.

Top-level keys (see docs/network-spec.md for the full schema):

    name        optional label used in reports and dump file names
    nodes       node identifiers, in canonical order
    edges       directed [u, v] pairs; "undirected": true doubles them
    policy      {"builtin": "SP"|"FAT"|"MAINT", ...params} or inline
                {"route_type", "merge", "trans", "init", ...}
    inputs      assumed routes per input node (open fragments)
    outputs     guaranteed routes per output node
    partition   node -> fragment index
    interface   [{"edge": [u, v], "value": route}, ...]
    property    {"builtin": "max_hops"|"reachable", ...} or
                {"expr": "...", "nodes": [...]}

Route values are written type-directed: options as null or the bare
payload ({"some": x} disambiguates nested options), tuples as lists,
enum variants as strings. Inline policy expressions use the
s-expression surface syntax parsed below.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .cutting import Interface
from .ir import (
    Add,
    And,
    EdgeVar,
    EnumEq,
    EnumLit,
    Eq,
    Expr,
    If,
    LessEq,
    Let,
    Lit,
    MatchOption,
    Min,
    NODE,
    NodeLit,
    NoneOf,
    Not,
    Or,
    PolicySpec,
    Proj,
    SomeOf,
    Symbolic,
    TupleOf,
    Var,
)
from .policies import DEFAULT_MAX_HOPS, builtin_policy, maint_policy
from .routes import (
    BoolType,
    BoundedInt,
    EnumType,
    OptionType,
    RouteType,
    Some,
    TupleType,
    Value,
)
from .srp import OpenSrp, SrpInstance, Topology, validate_open_srp
from .checker import PropertySpec


class SpecError(ValueError):
    pass


# --- route types and values in JSON -------------------------------------

def type_from_json(doc) -> RouteType:
    if not isinstance(doc, Mapping) or "kind" not in doc:
        raise SpecError(f"bad route type: {doc!r}")
    kind = doc["kind"]
    if kind == "int":
        return BoundedInt(int(doc["lo"]), int(doc["hi"]))
    if kind == "bool":
        return BoolType()
    if kind == "option":
        return OptionType(type_from_json(doc["inner"]))
    if kind == "tuple":
        return TupleType(tuple(type_from_json(t) for t in doc["elements"]))
    if kind == "enum":
        return EnumType(tuple(doc["variants"]))
    raise SpecError(f"unknown route type kind {kind!r}")


def type_to_json(rtype: RouteType):
    if isinstance(rtype, BoundedInt):
        return {"kind": "int", "lo": rtype.lo, "hi": rtype.hi}
    if isinstance(rtype, BoolType):
        return {"kind": "bool"}
    if isinstance(rtype, OptionType):
        return {"kind": "option", "inner": type_to_json(rtype.inner)}
    if isinstance(rtype, TupleType):
        return {"kind": "tuple", "elements": [type_to_json(t) for t in rtype.elements]}
    if isinstance(rtype, EnumType):
        return {"kind": "enum", "variants": list(rtype.variants)}
    raise SpecError(f"not a route type: {rtype!r}")


def value_from_json(doc, rtype: RouteType) -> Value:
    if isinstance(rtype, OptionType):
        if doc is None:
            return None
        if isinstance(doc, Mapping) and set(doc) == {"some"}:
            return Some(value_from_json(doc["some"], rtype.inner))
        return Some(value_from_json(doc, rtype.inner))
    if isinstance(rtype, BoundedInt):
        if isinstance(doc, bool) or not isinstance(doc, int):
            raise SpecError(f"expected integer, got {doc!r}")
        return doc
    if isinstance(rtype, BoolType):
        if not isinstance(doc, bool):
            raise SpecError(f"expected boolean, got {doc!r}")
        return doc
    if isinstance(rtype, TupleType):
        if not isinstance(doc, list) or len(doc) != len(rtype.elements):
            raise SpecError(f"expected {len(rtype.elements)}-tuple, got {doc!r}")
        return tuple(value_from_json(v, t) for v, t in zip(doc, rtype.elements))
    if isinstance(rtype, EnumType):
        if doc not in rtype.variants:
            raise SpecError(f"unknown variant {doc!r} of {rtype.variants}")
        return doc
    raise SpecError(f"not a route type: {rtype!r}")


def value_to_json(value: Value, rtype: RouteType):
    if isinstance(rtype, OptionType):
        if value is None:
            return None
        inner = value_to_json(value.value, rtype.inner)
        # bare payload is ambiguous for nested options
        if isinstance(rtype.inner, OptionType):
            return {"some": inner}
        return inner
    if isinstance(rtype, TupleType):
        return [value_to_json(v, t) for v, t in zip(value, rtype.elements)]
    return value


# --- s-expression surface syntax ----------------------------------------

def _tokenize(text: str) -> list[str]:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in "()":
            out.append(ch)
            i += 1
        elif ch == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "();":
                j += 1
            out.append(text[i:j])
            i = j
    return out


def _read_sexpr(tokens: list[str], pos: int = 0):
    if pos >= len(tokens):
        raise SpecError("unexpected end of expression")
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            item, pos = _read_sexpr(tokens, pos)
            items.append(item)
        if pos >= len(tokens):
            raise SpecError("missing closing parenthesis")
        return items, pos + 1
    if tok == ")":
        raise SpecError("unexpected closing parenthesis")
    return tok, pos + 1


@dataclass(frozen=True)
class SurfaceContext:
    """Typing context for the surface syntax: bounds for bare integer
    literals, the policy route type behind (none), and the enum types in
    scope for (variant ...) literals."""

    int_type: BoundedInt
    route_type: Optional[RouteType] = None

    def enums(self) -> list[EnumType]:
        found: list[EnumType] = []

        def walk(t: Optional[RouteType]):
            if isinstance(t, EnumType):
                found.append(t)
            elif isinstance(t, OptionType):
                walk(t.inner)
            elif isinstance(t, TupleType):
                for x in t.elements:
                    walk(x)

        walk(self.route_type)
        return found


def parse_expr(text: str, ctx: SurfaceContext) -> Expr:
    tokens = _tokenize(text)
    tree, pos = _read_sexpr(tokens)
    if pos != len(tokens):
        raise SpecError(f"trailing tokens after expression: {tokens[pos:]}")
    return _expr_from_tree(tree, ctx)


def _expr_from_tree(tree, ctx: SurfaceContext) -> Expr:
    if isinstance(tree, str):
        if tree == "true":
            return Lit(True, BoolType())
        if tree == "false":
            return Lit(False, BoolType())
        try:
            return Lit(int(tree), ctx.int_type)
        except ValueError:
            return Var(tree)
    if not tree:
        raise SpecError("empty expression ()")
    head = tree[0]
    args = tree[1:]

    def sub(t):
        return _expr_from_tree(t, ctx)

    def arity(n):
        if len(args) != n:
            raise SpecError(f"({head} ...) takes {n} arguments, got {len(args)}")

    if head == "some":
        arity(1)
        return SomeOf(sub(args[0]))
    if head == "none":
        arity(0)
        if not isinstance(ctx.route_type, OptionType):
            raise SpecError("(none) needs an option-typed policy route type")
        return NoneOf(ctx.route_type)
    if head == "+":
        arity(2)
        return Add(sub(args[0]), sub(args[1]))
    if head == "min":
        arity(2)
        return Min(sub(args[0]), sub(args[1]))
    if head == "<=":
        arity(2)
        return LessEq(sub(args[0]), sub(args[1]))
    if head == "=":
        arity(2)
        return Eq(sub(args[0]), sub(args[1]))
    if head == "and":
        return And(tuple(sub(a) for a in args))
    if head == "or":
        return Or(tuple(sub(a) for a in args))
    if head == "not":
        arity(1)
        return Not(sub(args[0]))
    if head == "if":
        arity(3)
        return If(sub(args[0]), sub(args[1]), sub(args[2]))
    if head == "match":
        arity(3)
        none_clause, some_clause = args[1], args[2]
        if (
            not isinstance(none_clause, list)
            or len(none_clause) != 2
            or none_clause[0] != "none"
        ):
            raise SpecError("match needs a (none e) clause")
        if (
            not isinstance(some_clause, list)
            or len(some_clause) != 3
            or some_clause[0] != "some"
            or not isinstance(some_clause[1], str)
        ):
            raise SpecError("match needs a (some name e) clause")
        return MatchOption(
            sub(args[0]), sub(none_clause[1]), some_clause[1], sub(some_clause[2])
        )
    if head == "tuple":
        return TupleOf(tuple(sub(a) for a in args))
    if head == "proj":
        arity(2)
        if not isinstance(args[1], str) or not args[1].isdigit():
            raise SpecError("(proj e i) needs a literal index")
        return Proj(sub(args[0]), int(args[1]))
    if head == "variant":
        arity(1)
        name = args[0]
        for enum in ctx.enums():
            if name in enum.variants:
                return EnumLit(enum, name)
        raise SpecError(f"variant {name!r} not found in the policy route type")
    if head == "variant=":
        arity(2)
        return EnumEq(sub(args[0]), args[1])
    if head == "let":
        arity(3)
        if not isinstance(args[0], str):
            raise SpecError("(let name bound body) needs a name")
        return Let(args[0], sub(args[1]), sub(args[2]))
    if head == "node":
        arity(1)
        return NodeLit(args[0])
    if head == "edge-src":
        arity(0)
        return Proj(EdgeVar(), 0)
    if head == "edge-dst":
        arity(0)
        return Proj(EdgeVar(), 1)
    raise SpecError(f"unknown operator {head!r}")


# --- builtin properties ---------------------------------------------------

def _hops_of(route_type: RouteType) -> tuple[RouteType, bool]:
    """Locate the hop counter: Option(int) or Option((int, ...))."""
    if not isinstance(route_type, OptionType):
        raise SpecError(f"builtin properties need an option route type, got {route_type!r}")
    inner = route_type.inner
    if isinstance(inner, BoundedInt):
        return inner, False
    if isinstance(inner, TupleType) and isinstance(inner.elements[0], BoundedInt):
        return inner.elements[0], True
    raise SpecError(f"cannot find a hop count in {route_type!r}")


def max_hops_property(route_type: RouteType, bound: int) -> PropertySpec:
    """Reachable with at most the given number of hops; absent routes fail."""
    hop_type, in_tuple = _hops_of(route_type)
    hops = Proj(Var("h"), 0) if in_tuple else Var("h")
    return PropertySpec(
        MatchOption(
            Var("r"), Lit(False, BoolType()), "h", LessEq(hops, Lit(bound, hop_type))
        ),
        description=f"max_hops {bound}",
    )


def reachable_property(route_type: RouteType) -> PropertySpec:
    if not isinstance(route_type, OptionType):
        raise SpecError("reachable needs an option route type")
    return PropertySpec(
        MatchOption(Var("r"), Lit(False, BoolType()), "h", Lit(True, BoolType())),
        description="reachable",
    )


# --- the spec document -----------------------------------------------------

@dataclass
class NetworkSpec:
    name: str
    srp: OpenSrp
    partition: Optional[dict[str, int]]
    interface: Optional[Interface]
    prop: Optional[PropertySpec]
    policy_doc: dict
    undirected: bool
    meta: dict = field(default_factory=dict)

    @property
    def route_type(self) -> RouteType:
        return self.srp.route_type


def _policy_from_doc(doc, nodes: Sequence[str]) -> PolicySpec:
    if not isinstance(doc, Mapping):
        raise SpecError("policy must be an object")
    if "builtin" in doc:
        params = dict(doc)
        name = params.pop("builtin")
        kind = str(name).upper()
        if kind == "MAINT":
            domain = params.pop("down_domain", None)
            policy = maint_policy(
                dest=params.pop("dest"),
                nodes=tuple(domain) if domain is not None else tuple(nodes),
                max_hops=params.pop("max_hops", DEFAULT_MAX_HOPS),
                drop_adverts_from=tuple(params.pop("drop_adverts_from", ())),
            )
        else:
            params.setdefault("max_hops", DEFAULT_MAX_HOPS)
            policy = builtin_policy(kind, **params)
        return policy
    required = {"route_type", "merge", "trans", "init"}
    missing = required - set(doc)
    if missing:
        raise SpecError(f"inline policy is missing keys: {sorted(missing)}")
    route_type = type_from_json(doc["route_type"])
    lo, hi = doc.get("int_bounds", (0, DEFAULT_MAX_HOPS))
    ctx = SurfaceContext(BoundedInt(int(lo), int(hi)), route_type)
    symbolics = []
    for sym in doc.get("symbolics", ()):
        name = sym["name"]
        if sym.get("type", "node") == "node":
            domain = tuple(sym["domain"])
            symbolics.append(Symbolic(name, NODE, domain))
        else:
            st = type_from_json(sym["type"])
            domain = tuple(value_from_json(v, st) for v in sym["domain"])
            symbolics.append(Symbolic(name, st, domain))
    return PolicySpec(
        route_type=route_type,
        merge_expr=parse_expr(doc["merge"], ctx),
        trans_expr=parse_expr(doc["trans"], ctx),
        init_expr=parse_expr(doc["init"], ctx),
        symbolics=tuple(symbolics),
    )


def _property_from_doc(doc, route_type: RouteType, int_type: BoundedInt) -> PropertySpec:
    if not isinstance(doc, Mapping):
        raise SpecError("property must be an object")
    if "builtin" in doc:
        kind = doc["builtin"]
        if kind == "max_hops":
            prop = max_hops_property(route_type, int(doc["bound"]))
        elif kind == "reachable":
            prop = reachable_property(route_type)
        else:
            raise SpecError(f"unknown builtin property {kind!r}")
    elif "expr" in doc:
        ctx = SurfaceContext(int_type, route_type)
        prop = PropertySpec(parse_expr(doc["expr"], ctx), description=doc.get("description", ""))
    else:
        raise SpecError("property needs a builtin name or an expr")
    if "nodes" in doc:
        prop = PropertySpec(prop.per_node, frozenset(doc["nodes"]), prop.description)
    return prop


def loads(text: str, name: str = "network") -> NetworkSpec:
    """Parse and validate a network spec document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, Mapping):
        raise SpecError("spec must be a JSON object")
    for key in ("nodes", "edges", "policy"):
        if key not in doc:
            raise SpecError(f"spec is missing the {key!r} key")
    nodes = tuple(str(n) for n in doc["nodes"])
    undirected = bool(doc.get("undirected", False))
    edges: set[tuple[str, str]] = set()
    for e in doc["edges"]:
        if not isinstance(e, list) or len(e) != 2:
            raise SpecError(f"bad edge entry {e!r}")
        u, v = str(e[0]), str(e[1])
        edges.add((u, v))
        if undirected:
            edges.add((v, u))
    topology = Topology(nodes, frozenset(edges))

    policy = _policy_from_doc(doc["policy"], nodes)
    rt = policy.route_type
    init = {v: policy.init_for(v) for v in nodes}
    assumptions = {
        str(n): value_from_json(v, rt) for n, v in doc.get("inputs", {}).items()
    }
    guarantees = {
        str(n): value_from_json(v, rt) for n, v in doc.get("outputs", {}).items()
    }
    srp = validate_open_srp(
        OpenSrp(
            base=SrpInstance(topology, rt, init, policy),
            assumptions=assumptions,
            guarantees=guarantees,
        )
    )

    partition = None
    if "partition" in doc:
        partition = {str(n): int(i) for n, i in doc["partition"].items()}
        for n in partition:
            if n not in set(nodes):
                raise SpecError(f"partition references unknown node {n!r}")
    interface = None
    if "interface" in doc:
        annotations = {}
        for entry in doc["interface"]:
            edge = tuple(str(x) for x in entry["edge"])
            if len(edge) != 2:
                raise SpecError(f"bad interface edge {entry['edge']!r}")
            if edge not in edges:
                raise SpecError(f"interface references unknown edge {edge}")
            annotations[edge] = value_from_json(entry["value"], rt)
        interface = Interface(annotations)

    int_type = _int_type_of(doc, rt)
    prop = None
    meta = {}
    if "property" in doc:
        prop = _property_from_doc(doc["property"], rt, int_type)
        meta["property_doc"] = dict(doc["property"])

    return NetworkSpec(
        name=str(doc.get("name", name)),
        srp=srp,
        partition=partition,
        interface=interface,
        prop=prop,
        policy_doc=dict(doc["policy"]),
        undirected=undirected,
        meta=meta,
    )


def _int_type_of(doc, route_type: RouteType) -> BoundedInt:
    policy = doc.get("policy", {})
    if "int_bounds" in policy:
        lo, hi = policy["int_bounds"]
        return BoundedInt(int(lo), int(hi))
    if "max_hops" in policy:
        return BoundedInt(0, int(policy["max_hops"]))
    try:
        hop, _ = _hops_of(route_type)
        return hop
    except SpecError:
        return BoundedInt(0, DEFAULT_MAX_HOPS)


def load(path: str) -> NetworkSpec:
    with open(path) as fh:
        text = fh.read()
    import os

    return loads(text, name=os.path.splitext(os.path.basename(path))[0])


def dumps(spec: NetworkSpec) -> str:
    """Serialize a spec so that loads(dumps(s)) equals s."""
    rt = spec.route_type
    doc: dict = {
        "name": spec.name,
        "nodes": list(spec.srp.nodes),
        "undirected": spec.undirected,
        "edges": _edges_doc(spec),
        "policy": spec.policy_doc,
    }
    if spec.srp.assumptions:
        doc["inputs"] = {
            n: value_to_json(v, rt) for n, v in sorted(spec.srp.assumptions.items())
        }
    if spec.srp.guarantees:
        doc["outputs"] = {
            n: value_to_json(v, rt) for n, v in sorted(spec.srp.guarantees.items())
        }
    if spec.partition is not None:
        doc["partition"] = dict(sorted(spec.partition.items()))
    if spec.interface is not None:
        doc["interface"] = [
            {"edge": list(edge), "value": value_to_json(val, rt)}
            for edge, val in sorted(spec.interface.annotations.items())
        ]
    if "property_doc" in spec.meta:
        doc["property"] = spec.meta["property_doc"]
    return json.dumps(doc, indent=2) + "\n"


def _edges_doc(spec: NetworkSpec) -> list[list[str]]:
    edges = spec.srp.edges
    if not spec.undirected:
        return [list(e) for e in sorted(edges)]
    seen = set()
    out = []
    for (u, v) in sorted(edges):
        if (v, u) in seen:
            continue
        seen.add((u, v))
        out.append([u, v])
    return out


def fragment_to_doc(
    spec: NetworkSpec, fragment: OpenSrp, index: int
) -> dict:
    """A standalone spec document for one fragment. Fragment edge sets
    are asymmetric (edges into inputs are dropped), so edges are emitted
    directed."""
    rt = spec.route_type
    policy_doc = dict(spec.policy_doc)
    if policy_doc.get("builtin", "").upper() == "MAINT" and "down_domain" not in policy_doc:
        policy_doc["down_domain"] = [
            s for s in spec.srp.policy.symbolics if s.name == "down"
        ][0].domain
        policy_doc["down_domain"] = list(policy_doc["down_domain"])
    doc = {
        "name": f"{spec.name}.frag{index}",
        "nodes": list(fragment.nodes),
        "undirected": False,
        "edges": [list(e) for e in sorted(fragment.edges)],
        "policy": policy_doc,
    }
    if fragment.assumptions:
        doc["inputs"] = {
            n: value_to_json(v, rt) for n, v in sorted(fragment.assumptions.items())
        }
    if fragment.guarantees:
        doc["outputs"] = {
            n: value_to_json(v, rt) for n, v in sorted(fragment.guarantees.items())
        }
    if "property_doc" in spec.meta:
        doc["property"] = spec.meta["property_doc"]
    return doc
