"""Builtin routing policies.

SP     shortest path by hop count: routes are optional hop counters,
       transfer adds one hop, merge keeps the minimum.
FAT    valley-free shortest path for tiered data center networks: a
       route remembers whether it has already traveled downward and is
       dropped if it would climb again afterwards.
MAINT  SP under maintenance: a symbolic non-destination node `down` is
       out of service, so routes it advertises are dropped. Checked for
       every concrete choice of down by enumeration.

All three use bounded hop counts; additions saturate at the bound.
"""

from __future__ import annotations

from typing import Mapping, Sequence

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
from .routes import BoundedInt, EnumType, OptionType, TupleType

DEFAULT_MAX_HOPS = 15

TIER_NAMES = ("edge", "aggregation", "core")
DIRECTION = EnumType(("up", "down"))


class UnknownPolicy(ValueError):
    pass


class MissingParam(ValueError):
    pass


def _sp_exprs(hop_type: BoundedInt, dest: str):
    route_type = OptionType(hop_type)
    one = Lit(1, hop_type)
    merge = MatchOption(
        Var("r1"),
        Var("r2"),
        "h1",
        MatchOption(
            Var("r2"),
            Var("r1"),
            "h2",
            SomeOf(Min(Var("h1"), Var("h2"))),
        ),
    )
    trans = MatchOption(
        Var("r"),
        NoneOf(route_type),
        "h",
        SomeOf(Add(Var("h"), one)),
    )
    init = If(
        Eq(Var("node"), NodeLit(dest)),
        SomeOf(Lit(0, hop_type)),
        NoneOf(route_type),
    )
    return route_type, merge, trans, init


def _drop_adverts(trans: Expr, route_type: OptionType, sources: Sequence[str]) -> Expr:
    """Wrap a transfer so routes advertised by the given nodes vanish."""
    guards = tuple(Eq(Proj(EdgeVar(), 0), NodeLit(s)) for s in sources)
    cond = guards[0] if len(guards) == 1 else Or(guards)
    return If(cond, NoneOf(route_type), trans)


def sp_policy(dest: str, max_hops: int = DEFAULT_MAX_HOPS,
              drop_adverts_from: Sequence[str] = ()) -> PolicySpec:
    hop_type = BoundedInt(0, max_hops)
    route_type, merge, trans, init = _sp_exprs(hop_type, dest)
    if drop_adverts_from:
        trans = _drop_adverts(trans, route_type, drop_adverts_from)
    return PolicySpec(route_type, merge, trans, init)


def fat_policy(dest: str, tiers: Mapping[str, str], max_hops: int = DEFAULT_MAX_HOPS,
               drop_adverts_from: Sequence[str] = ()) -> PolicySpec:
    """Valley-free policy. `tiers` maps every node to edge, aggregation
    or core. A transfer is upward when the target tier is strictly
    higher; an upward transfer of a route that has already descended is
    dropped, otherwise hops increase and the direction records whether
    the route has ever gone down."""
    for n, t in tiers.items():
        if t not in TIER_NAMES:
            raise MissingParam(f"unknown tier {t!r} for node {n}")
    hop_type = BoundedInt(0, max_hops)
    route_type = OptionType(TupleType((hop_type, DIRECTION)))
    rank_type = BoundedInt(0, 2)

    def tier_rank_of(endpoint: Expr) -> Expr:
        # nested lookup node -> tier rank; folds to a constant per edge
        expr: Expr = Lit(0, rank_type)
        for n in sorted(tiers):
            expr = If(
                Eq(endpoint, NodeLit(n)),
                Lit(TIER_NAMES.index(tiers[n]), rank_type),
                expr,
            )
        return expr

    going_up = Not(LessEq(tier_rank_of(Proj(EdgeVar(), 1)), tier_rank_of(Proj(EdgeVar(), 0))))
    one = Lit(1, hop_type)
    # the direction test is let-bound: the lookup chains are long and
    # the body uses the answer twice
    trans = MatchOption(
        Var("r"),
        NoneOf(route_type),
        "t",
        Let(
            "climbing",
            going_up,
            If(
                And((Var("climbing"), EnumEq(Proj(Var("t"), 1), "down"))),
                NoneOf(route_type),
                SomeOf(
                    TupleOf(
                        (
                            Add(Proj(Var("t"), 0), one),
                            If(Var("climbing"), EnumLit(DIRECTION, "up"), EnumLit(DIRECTION, "down")),
                        )
                    )
                ),
            ),
        ),
    )
    if drop_adverts_from:
        trans = _drop_adverts(trans, route_type, drop_adverts_from)
    # lexicographic minimum on (hops, direction) with up preferred on ties
    merge = MatchOption(
        Var("r1"),
        Var("r2"),
        "t1",
        MatchOption(
            Var("r2"),
            Var("r1"),
            "t2",
            If(
                LessEq(Proj(Var("t1"), 0), Proj(Var("t2"), 0)),
                If(
                    LessEq(Proj(Var("t2"), 0), Proj(Var("t1"), 0)),
                    If(EnumEq(Proj(Var("t1"), 1), "up"), Var("r1"), Var("r2")),
                    Var("r1"),
                ),
                Var("r2"),
            ),
        ),
    )
    init = If(
        Eq(Var("node"), NodeLit(dest)),
        SomeOf(TupleOf((Lit(0, hop_type), EnumLit(DIRECTION, "up")))),
        NoneOf(route_type),
    )
    return PolicySpec(route_type, merge, trans, init)


def maint_policy(dest: str, nodes: Sequence[str], max_hops: int = DEFAULT_MAX_HOPS,
                 drop_adverts_from: Sequence[str] = ()) -> PolicySpec:
    """SP with a symbolic down node whose advertisements are dropped.
    The domain of down is every non-destination node."""
    domain = tuple(n for n in nodes if n != dest)
    if not domain:
        raise MissingParam("maintenance policy needs at least one non-destination node")
    hop_type = BoundedInt(0, max_hops)
    route_type, merge, trans, init = _sp_exprs(hop_type, dest)
    trans = If(
        Eq(Proj(EdgeVar(), 0), Var("down")),
        NoneOf(route_type),
        trans,
    )
    if drop_adverts_from:
        trans = _drop_adverts(trans, route_type, drop_adverts_from)
    return PolicySpec(
        route_type, merge, trans, init,
        symbolics=(Symbolic("down", NODE, domain),),
    )


def builtin_policy(name: str, **params) -> PolicySpec:
    """Look up a builtin policy by name.

    SP needs dest; FAT needs dest and tiers; MAINT needs dest and nodes.
    All accept max_hops and drop_adverts_from.
    """
    kind = name.upper()
    common = {
        "max_hops": params.pop("max_hops", DEFAULT_MAX_HOPS),
        "drop_adverts_from": tuple(params.pop("drop_adverts_from", ())),
    }
    try:
        if kind == "SP":
            policy = sp_policy(params.pop("dest"), **common)
        elif kind == "FAT":
            policy = fat_policy(params.pop("dest"), params.pop("tiers"), **common)
        elif kind == "MAINT":
            policy = maint_policy(params.pop("dest"), params.pop("nodes"), **common)
        else:
            raise UnknownPolicy(f"no builtin policy named {name!r}")
    except KeyError as exc:
        raise MissingParam(f"policy {kind} needs parameter {exc.args[0]!r}") from None
    if params:
        raise MissingParam(f"unexpected parameter(s) for {kind}: {sorted(params)}")
    return policy
