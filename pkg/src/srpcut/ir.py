"""Typed expression language for routing policies.

Merge, transfer, init and property predicates are all written as small
expression trees over route values. The same trees are interpreted by
the simulator and compiled to SMT constraints, so the two backends share
one semantics:

  * integer addition saturates at the upper bound of the derived type;
  * option payloads are only inspected under a Some match;
  * node and edge references are compile-time constants that fold away
    once an expression is specialized to a concrete edge.

Evaluation is type-directed internally: every subterm carries its
derived type alongside its value so that saturation bounds are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

from .routes import (
    BoolType,
    BoundedInt,
    EnumType,
    OptionType,
    RouteType,
    Some,
    TupleType,
    Value,
    conforms,
    default_value,
    format_type,
)


class IrTypeError(Exception):
    """Base class for expression typing failures."""


class UnboundVar(IrTypeError):
    pass


class TypeMismatch(IrTypeError):
    def __init__(self, expected, found, where=""):
        self.expected = expected
        self.found = found
        suffix = f" in {where}" if where else ""
        super().__init__(f"expected {describe(expected)}, found {describe(found)}{suffix}")


class ProjOutOfRange(IrTypeError):
    pass


class UnknownEnumVariant(IrTypeError):
    pass


def describe(t) -> str:
    if isinstance(t, str):
        return t
    if isinstance(t, NodeType):
        return "node"
    try:
        return format_type(t)
    except Exception:
        return repr(t)


@dataclass(frozen=True)
class NodeType:
    """Type of topology node references (finite, but not a route type)."""


NODE = NodeType()
EDGE_TYPE = TupleType((NODE, NODE))  # type: ignore[arg-type]

ExprType = Union[RouteType, NodeType]


# --- expression nodes -------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: Value
    rtype: RouteType


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Min:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class LessEq:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Eq:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class And:
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Not:
    arg: "Expr"


@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"


@dataclass(frozen=True)
class SomeOf:
    arg: "Expr"


@dataclass(frozen=True)
class NoneOf:
    rtype: OptionType


@dataclass(frozen=True)
class MatchOption:
    scrutinee: "Expr"
    none_branch: "Expr"
    binder: str
    some_branch: "Expr"


@dataclass(frozen=True)
class TupleOf:
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Proj:
    arg: "Expr"
    index: int


@dataclass(frozen=True)
class EnumLit:
    rtype: EnumType
    variant: str


@dataclass(frozen=True)
class EnumEq:
    arg: "Expr"
    variant: str


@dataclass(frozen=True)
class Let:
    binder: str
    bound: "Expr"
    body: "Expr"


@dataclass(frozen=True)
class NodeLit:
    node: str


@dataclass(frozen=True)
class EdgeVar:
    """The edge under transfer; endpoints via Proj(EdgeVar(), 0|1)."""


Expr = Union[
    Lit, Var, Add, Min, LessEq, Eq, And, Or, Not, If, SomeOf, NoneOf,
    MatchOption, TupleOf, Proj, EnumLit, EnumEq, Let, NodeLit, EdgeVar,
]

# the edge under transfer is a reserved binding
EDGE_BINDING = "edge"

TypeEnv = Mapping[str, ExprType]


def unify(t1: ExprType, t2: ExprType, where: str = "") -> ExprType:
    """Join two types. Bounded ints join to their interval hull;
    everything else must match structurally."""
    if isinstance(t1, BoundedInt) and isinstance(t2, BoundedInt):
        return BoundedInt(min(t1.lo, t2.lo), max(t1.hi, t2.hi))
    if isinstance(t1, OptionType) and isinstance(t2, OptionType):
        return OptionType(unify(t1.inner, t2.inner, where))
    if isinstance(t1, TupleType) and isinstance(t2, TupleType):
        if len(t1.elements) != len(t2.elements):
            raise TypeMismatch(t1, t2, where)
        return TupleType(tuple(unify(a, b, where) for a, b in zip(t1.elements, t2.elements)))
    if t1 == t2:
        return t1
    raise TypeMismatch(t1, t2, where)


def type_check(e: Expr, env: TypeEnv) -> ExprType:
    """Derive the unique type of an expression, or raise an IrTypeError."""
    if isinstance(e, Lit):
        if not conforms(e.value, e.rtype):
            raise TypeMismatch(e.rtype, repr(e.value), "literal")
        return e.rtype
    if isinstance(e, Var):
        if e.name not in env:
            raise UnboundVar(f"unbound variable {e.name!r}")
        return env[e.name]
    if isinstance(e, (Add, Min)):
        lt = type_check(e.left, env)
        rt = type_check(e.right, env)
        op = "add" if isinstance(e, Add) else "min"
        if not isinstance(lt, BoundedInt):
            raise TypeMismatch("bounded int", lt, op)
        if not isinstance(rt, BoundedInt):
            raise TypeMismatch("bounded int", rt, op)
        return unify(lt, rt)
    if isinstance(e, LessEq):
        lt = type_check(e.left, env)
        rt = type_check(e.right, env)
        if not isinstance(lt, BoundedInt) or not isinstance(rt, BoundedInt):
            raise TypeMismatch("bounded int", lt if not isinstance(lt, BoundedInt) else rt, "<=")
        return BoolType()
    if isinstance(e, Eq):
        lt = type_check(e.left, env)
        rt = type_check(e.right, env)
        unify(lt, rt, "=")
        return BoolType()
    if isinstance(e, (And, Or)):
        for a in e.args:
            t = type_check(a, env)
            if not isinstance(t, BoolType):
                raise TypeMismatch("bool", t, "and/or")
        return BoolType()
    if isinstance(e, Not):
        t = type_check(e.arg, env)
        if not isinstance(t, BoolType):
            raise TypeMismatch("bool", t, "not")
        return BoolType()
    if isinstance(e, If):
        ct = type_check(e.cond, env)
        if not isinstance(ct, BoolType):
            raise TypeMismatch("bool", ct, "if condition")
        return unify(type_check(e.then, env), type_check(e.orelse, env), "if branches")
    if isinstance(e, SomeOf):
        t = type_check(e.arg, env)
        if isinstance(t, NodeType):
            raise TypeMismatch("route type", t, "some")
        return OptionType(t)
    if isinstance(e, NoneOf):
        if not isinstance(e.rtype, OptionType):
            raise TypeMismatch("option type", e.rtype, "none")
        return e.rtype
    if isinstance(e, MatchOption):
        st = type_check(e.scrutinee, env)
        if not isinstance(st, OptionType):
            raise TypeMismatch("option type", st, "match scrutinee")
        none_t = type_check(e.none_branch, env)
        inner_env = dict(env)
        inner_env[e.binder] = st.inner
        some_t = type_check(e.some_branch, inner_env)
        return unify(none_t, some_t, "match branches")
    if isinstance(e, TupleOf):
        return TupleType(tuple(type_check(a, env) for a in e.args))
    if isinstance(e, Proj):
        t = type_check(e.arg, env)
        if not isinstance(t, TupleType):
            raise TypeMismatch("tuple type", t, "proj")
        if not (0 <= e.index < len(t.elements)):
            raise ProjOutOfRange(f"index {e.index} out of range for {describe(t)}")
        return t.elements[e.index]
    if isinstance(e, EnumLit):
        if e.variant not in e.rtype.variants:
            raise UnknownEnumVariant(f"{e.variant!r} not in {describe(e.rtype)}")
        return e.rtype
    if isinstance(e, EnumEq):
        t = type_check(e.arg, env)
        if not isinstance(t, EnumType):
            raise TypeMismatch("enum type", t, "enum=")
        if e.variant not in t.variants:
            raise UnknownEnumVariant(f"{e.variant!r} not in {describe(t)}")
        return BoolType()
    if isinstance(e, Let):
        bt = type_check(e.bound, env)
        inner_env = dict(env)
        inner_env[e.binder] = bt
        return type_check(e.body, inner_env)
    if isinstance(e, NodeLit):
        return NODE
    if isinstance(e, EdgeVar):
        if EDGE_BINDING not in env:
            raise UnboundVar("edge reference outside a transfer expression")
        return EDGE_TYPE
    raise IrTypeError(f"not an expression: {e!r}")


# --- evaluation -------------------------------------------------------

Binding = tuple[Value, ExprType]


def evaluate(e: Expr, env: Mapping[str, Binding]) -> Value:
    """Evaluate a type-checked expression. env maps names to
    (value, type) pairs; node values are node-name strings and the
    reserved "edge" binding is an (u, v) pair."""
    return _eval(e, dict(env))[0]


def _eval(e: Expr, env: dict[str, Binding]) -> Binding:
    if isinstance(e, Lit):
        return e.value, e.rtype
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundVar(f"unbound variable {e.name!r}") from None
    if isinstance(e, Add):
        (lv, lt) = _eval(e.left, env)
        (rv, rt) = _eval(e.right, env)
        t = unify(lt, rt)
        # clamp to the derived interval so results always conform
        return max(t.lo, min(lv + rv, t.hi)), t
    if isinstance(e, Min):
        (lv, lt) = _eval(e.left, env)
        (rv, rt) = _eval(e.right, env)
        return min(lv, rv), unify(lt, rt)
    if isinstance(e, LessEq):
        return _eval(e.left, env)[0] <= _eval(e.right, env)[0], BoolType()
    if isinstance(e, Eq):
        return _eval(e.left, env)[0] == _eval(e.right, env)[0], BoolType()
    if isinstance(e, And):
        return all(_eval(a, env)[0] for a in e.args), BoolType()
    if isinstance(e, Or):
        return any(_eval(a, env)[0] for a in e.args), BoolType()
    if isinstance(e, Not):
        return not _eval(e.arg, env)[0], BoolType()
    if isinstance(e, If):
        # both branches typed so saturation bounds do not depend on the path taken
        cond = _eval(e.cond, env)[0]
        (tv, tt) = _eval(e.then, env)
        (ev, et) = _eval(e.orelse, env)
        t = unify(tt, et)
        return (tv if cond else ev), t
    if isinstance(e, SomeOf):
        v, t = _eval(e.arg, env)
        return Some(v), OptionType(t)
    if isinstance(e, NoneOf):
        return None, e.rtype
    if isinstance(e, MatchOption):
        sv, st = _eval(e.scrutinee, env)
        assert isinstance(st, OptionType)
        (nv, nt) = _eval(e.none_branch, env)
        saved = env.get(e.binder)
        env[e.binder] = (sv.value if isinstance(sv, Some) else default_value(st.inner), st.inner)
        (mv, mt) = _eval(e.some_branch, env)
        if saved is None:
            env.pop(e.binder, None)
        else:
            env[e.binder] = saved
        t = unify(nt, mt)
        return (mv if isinstance(sv, Some) else nv), t
    if isinstance(e, TupleOf):
        parts = [_eval(a, env) for a in e.args]
        return tuple(p[0] for p in parts), TupleType(tuple(p[1] for p in parts))
    if isinstance(e, Proj):
        v, t = _eval(e.arg, env)
        assert isinstance(t, TupleType)
        return v[e.index], t.elements[e.index]
    if isinstance(e, EnumLit):
        return e.variant, e.rtype
    if isinstance(e, EnumEq):
        return _eval(e.arg, env)[0] == e.variant, BoolType()
    if isinstance(e, Let):
        bv = _eval(e.bound, env)
        saved = env.get(e.binder)
        env[e.binder] = bv
        result = _eval(e.body, env)
        if saved is None:
            env.pop(e.binder, None)
        else:
            env[e.binder] = saved
        return result
    if isinstance(e, NodeLit):
        return e.node, NODE
    if isinstance(e, EdgeVar):
        try:
            return env[EDGE_BINDING]
        except KeyError:
            raise UnboundVar("edge reference outside a transfer expression") from None
    raise IrTypeError(f"not an expression: {e!r}")


# --- substitution and partial evaluation ------------------------------

def substitute(e: Expr, bindings: Mapping[str, Expr]) -> Expr:
    """Replace free variables with expressions (capture is avoided by
    dropping shadowed bindings)."""
    if isinstance(e, Var):
        return bindings.get(e.name, e)
    if isinstance(e, (Lit, NoneOf, EnumLit, NodeLit, EdgeVar)):
        return e
    if isinstance(e, Add):
        return Add(substitute(e.left, bindings), substitute(e.right, bindings))
    if isinstance(e, Min):
        return Min(substitute(e.left, bindings), substitute(e.right, bindings))
    if isinstance(e, LessEq):
        return LessEq(substitute(e.left, bindings), substitute(e.right, bindings))
    if isinstance(e, Eq):
        return Eq(substitute(e.left, bindings), substitute(e.right, bindings))
    if isinstance(e, And):
        return And(tuple(substitute(a, bindings) for a in e.args))
    if isinstance(e, Or):
        return Or(tuple(substitute(a, bindings) for a in e.args))
    if isinstance(e, Not):
        return Not(substitute(e.arg, bindings))
    if isinstance(e, If):
        return If(
            substitute(e.cond, bindings),
            substitute(e.then, bindings),
            substitute(e.orelse, bindings),
        )
    if isinstance(e, SomeOf):
        return SomeOf(substitute(e.arg, bindings))
    if isinstance(e, MatchOption):
        inner = {k: v for k, v in bindings.items() if k != e.binder}
        return MatchOption(
            substitute(e.scrutinee, bindings),
            substitute(e.none_branch, bindings),
            e.binder,
            substitute(e.some_branch, inner),
        )
    if isinstance(e, TupleOf):
        return TupleOf(tuple(substitute(a, bindings) for a in e.args))
    if isinstance(e, Proj):
        return Proj(substitute(e.arg, bindings), e.index)
    if isinstance(e, EnumEq):
        return EnumEq(substitute(e.arg, bindings), e.variant)
    if isinstance(e, Let):
        inner = {k: v for k, v in bindings.items() if k != e.binder}
        return Let(e.binder, substitute(e.bound, bindings), substitute(e.body, inner))
    raise IrTypeError(f"not an expression: {e!r}")


_SPECIALIZE_CACHE: dict = {}
_SPECIALIZE_CACHE_LIMIT = 500_000


def specialize_edge(e: Expr, edge: tuple[str, str]) -> Expr:
    """Fix the edge under transfer to a concrete (u, v) pair and fold
    away everything that becomes constant: endpoint projections, node
    equalities and decided conditionals. Node references never reach
    the solver because the SMT encoder works on specialized transfers.

    Results are cached per (expression identity, edge): the simulator
    and the encoder repeatedly specialize the same policy expression
    over the same edges, and folding large policies is the expensive
    part. Entries keep a strong reference to the expression, so the
    identity key stays valid for the cache's lifetime.
    """
    key = (id(e), edge)
    hit = _SPECIALIZE_CACHE.get(key)
    if hit is not None and hit[0] is e:
        return hit[1]
    folded = fold_constants(e, edge)
    if len(_SPECIALIZE_CACHE) >= _SPECIALIZE_CACHE_LIMIT:
        _SPECIALIZE_CACHE.clear()
    _SPECIALIZE_CACHE[key] = (e, folded)
    return folded


def fold_constants(e: Expr, edge: Optional[tuple[str, str]] = None) -> Expr:
    """Folding returns the original node whenever nothing changed, so
    repeated specialization stays cheap on large policies."""
    if isinstance(e, EdgeVar):
        if edge is None:
            return e
        return TupleOf((NodeLit(edge[0]), NodeLit(edge[1])))
    if isinstance(e, Proj):
        arg = fold_constants(e.arg, edge)
        if isinstance(arg, TupleOf):
            return arg.args[e.index]
        return e if arg is e.arg else Proj(arg, e.index)
    if isinstance(e, Eq):
        left = fold_constants(e.left, edge)
        right = fold_constants(e.right, edge)
        if isinstance(left, NodeLit) and isinstance(right, NodeLit):
            return Lit(left.node == right.node, BoolType())
        if isinstance(left, Lit) and isinstance(right, Lit):
            return Lit(left.value == right.value, BoolType())
        if left is e.left and right is e.right:
            return e
        return Eq(left, right)
    if isinstance(e, If):
        cond = fold_constants(e.cond, edge)
        if isinstance(cond, Lit):
            return fold_constants(e.then if cond.value else e.orelse, edge)
        then = fold_constants(e.then, edge)
        orelse = fold_constants(e.orelse, edge)
        if cond is e.cond and then is e.then and orelse is e.orelse:
            return e
        return If(cond, then, orelse)
    if isinstance(e, And):
        args = []
        for a in e.args:
            fa = fold_constants(a, edge)
            if isinstance(fa, Lit):
                if fa.value is False:
                    return Lit(False, BoolType())
                continue  # drop literal true
            args.append(fa)
        if not args:
            return Lit(True, BoolType())
        if len(args) == 1:
            return args[0]
        if len(args) == len(e.args) and all(a is b for a, b in zip(args, e.args)):
            return e
        return And(tuple(args))
    if isinstance(e, Or):
        args = []
        for a in e.args:
            fa = fold_constants(a, edge)
            if isinstance(fa, Lit):
                if fa.value is True:
                    return Lit(True, BoolType())
                continue
            args.append(fa)
        if not args:
            return Lit(False, BoolType())
        if len(args) == 1:
            return args[0]
        if len(args) == len(e.args) and all(a is b for a, b in zip(args, e.args)):
            return e
        return Or(tuple(args))
    if isinstance(e, Not):
        arg = fold_constants(e.arg, edge)
        if isinstance(arg, Lit):
            return Lit(not arg.value, BoolType())
        return e if arg is e.arg else Not(arg)
    if isinstance(e, (Lit, Var, NoneOf, EnumLit, NodeLit)):
        return e
    if isinstance(e, Add):
        left = fold_constants(e.left, edge)
        right = fold_constants(e.right, edge)
        return e if left is e.left and right is e.right else Add(left, right)
    if isinstance(e, Min):
        left = fold_constants(e.left, edge)
        right = fold_constants(e.right, edge)
        return e if left is e.left and right is e.right else Min(left, right)
    if isinstance(e, LessEq):
        left = fold_constants(e.left, edge)
        right = fold_constants(e.right, edge)
        return e if left is e.left and right is e.right else LessEq(left, right)
    if isinstance(e, SomeOf):
        arg = fold_constants(e.arg, edge)
        return e if arg is e.arg else SomeOf(arg)
    if isinstance(e, MatchOption):
        scrut = fold_constants(e.scrutinee, edge)
        none_b = fold_constants(e.none_branch, edge)
        some_b = fold_constants(e.some_branch, edge)
        if scrut is e.scrutinee and none_b is e.none_branch and some_b is e.some_branch:
            return e
        return MatchOption(scrut, none_b, e.binder, some_b)
    if isinstance(e, TupleOf):
        args = tuple(fold_constants(a, edge) for a in e.args)
        if all(a is b for a, b in zip(args, e.args)):
            return e
        return TupleOf(args)
    if isinstance(e, EnumEq):
        arg = fold_constants(e.arg, edge)
        if isinstance(arg, EnumLit):
            return Lit(arg.variant == e.variant, BoolType())
        return e if arg is e.arg else EnumEq(arg, e.variant)
    if isinstance(e, Let):
        bound = fold_constants(e.bound, edge)
        # a constant binding disappears into the body, letting guarded
        # branches collapse
        if isinstance(bound, (Lit, EnumLit, NodeLit)):
            return fold_constants(substitute(e.body, {e.binder: bound}), edge)
        body = fold_constants(e.body, edge)
        if bound is e.bound and body is e.body:
            return e
        return Let(e.binder, bound, body)
    raise IrTypeError(f"not an expression: {e!r}")


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (Lit, NoneOf, EnumLit, NodeLit, EdgeVar)):
        return set()
    if isinstance(e, (Add, Min, LessEq, Eq)):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, (And, Or, TupleOf)):
        out: set[str] = set()
        for a in e.args:
            out |= free_vars(a)
        return out
    if isinstance(e, Not):
        return free_vars(e.arg)
    if isinstance(e, If):
        return free_vars(e.cond) | free_vars(e.then) | free_vars(e.orelse)
    if isinstance(e, SomeOf):
        return free_vars(e.arg)
    if isinstance(e, MatchOption):
        return (
            free_vars(e.scrutinee)
            | free_vars(e.none_branch)
            | (free_vars(e.some_branch) - {e.binder})
        )
    if isinstance(e, Proj):
        return free_vars(e.arg)
    if isinstance(e, EnumEq):
        return free_vars(e.arg)
    if isinstance(e, Let):
        return free_vars(e.bound) | (free_vars(e.body) - {e.binder})
    raise IrTypeError(f"not an expression: {e!r}")


# --- policies ---------------------------------------------------------

@dataclass(frozen=True)
class Symbolic:
    """A named unknown ranging over an explicit finite domain."""

    name: str
    rtype: ExprType
    domain: tuple[Value, ...]


@dataclass(frozen=True)
class PolicySpec:
    """Routing policy: a route type plus merge/trans/init expressions.

    merge binds r1, r2; trans binds r and the edge under transfer;
    init binds node. Symbolic values are resolved by enumeration before
    solving or encoding.
    """

    route_type: RouteType
    merge_expr: Expr
    trans_expr: Expr
    init_expr: Expr
    symbolics: tuple[Symbolic, ...] = ()

    def type_check(self) -> None:
        sym_env = {s.name: s.rtype for s in self.symbolics}
        rt = self.route_type
        merge_t = type_check(self.merge_expr, {**sym_env, "r1": rt, "r2": rt})
        unify(merge_t, rt, "merge result")
        trans_t = type_check(
            self.trans_expr, {**sym_env, "r": rt, EDGE_BINDING: EDGE_TYPE}
        )
        unify(trans_t, rt, "trans result")
        init_t = type_check(self.init_expr, {**sym_env, "node": NODE})
        unify(init_t, rt, "init result")

    def instantiate(self, assignment: Mapping[str, Value]) -> "PolicySpec":
        """Substitute symbolic values with concrete literals."""
        missing = [s.name for s in self.symbolics if s.name not in assignment]
        if missing:
            raise UnboundVar(f"no value for symbolic(s): {', '.join(missing)}")
        bindings: dict[str, Expr] = {}
        for s in self.symbolics:
            v = assignment[s.name]
            if v not in s.domain:
                raise ValueError(f"{v!r} not in domain of symbolic {s.name!r}")
            bindings[s.name] = NodeLit(v) if isinstance(s.rtype, NodeType) else Lit(v, s.rtype)
        return PolicySpec(
            route_type=self.route_type,
            merge_expr=fold_constants(substitute(self.merge_expr, bindings)),
            trans_expr=fold_constants(substitute(self.trans_expr, bindings)),
            init_expr=fold_constants(substitute(self.init_expr, bindings)),
            symbolics=(),
        )

    def merge(self, r1: Value, r2: Value) -> Value:
        rt = self.route_type
        return evaluate(self.merge_expr, {"r1": (r1, rt), "r2": (r2, rt)})

    def trans(self, edge: tuple[str, str], r: Value) -> Value:
        rt = self.route_type
        return evaluate(
            self.trans_expr, {"r": (r, rt), EDGE_BINDING: (edge, EDGE_TYPE)}
        )

    def init_for(self, node: str) -> Value:
        return evaluate(self.init_expr, {"node": (node, NODE)})
