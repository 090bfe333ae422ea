"""SMT backend: fragment encoding, solver subprocess, model parsing.

A fragment is compiled to one self-contained SMT-LIB v2 script. Route
values are flattened into scalar variables per node: options become an
isSome boolean plus payload fields, tuples one variable per leaf, enums
a bounded integer code. Integers use linear integer arithmetic with
explicit range assertions.

The script asserts the stability constraints for non-input nodes, the
assumption equalities for inputs, and the negation of (guarantees and
property); unsat therefore means the guarantees and property always
hold under the assumptions, while a model is a concrete labeling that
satisfies the assumptions and stability but violates some obligation.

Expression compilation mirrors the interpreter exactly: additions
saturate at the bounds of the derived interval type, option payloads
are guarded by the isSome flag, and absent payloads are pinned to
canonical defaults so every model parses to well-formed route values.

Solver interaction is one-shot: the script is piped to an external
process (anything that accepts SMT-LIB v2 on stdin, e.g. ``z3 -in``)
and sat/unsat plus the get-value response are parsed back.
"""

from __future__ import annotations

import re
import shlex
import shutil
import subprocess
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

from .ir import (
    Add,
    And,
    EnumEq,
    EnumLit,
    Eq,
    EdgeVar,
    Expr,
    If,
    LessEq,
    Let,
    Lit,
    MatchOption,
    Min,
    NodeLit,
    NoneOf,
    Not,
    Or,
    Proj,
    SomeOf,
    TupleOf,
    Var,
    specialize_edge,
    type_check,
    unify,
)
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
from .srp import Labeling, OpenSrp


class EncodeError(Exception):
    pass


class UnsupportedRouteType(EncodeError):
    pass


class IllTypedProperty(EncodeError):
    pass


class SolverError(Exception):
    pass


class SolverSpawnFailure(SolverError):
    pass


class MalformedSolverOutput(SolverError):
    pass


class SchemaMismatch(SolverError):
    pass


class OutOfBoundsConstant(SolverError):
    pass


# --- schema ------------------------------------------------------------

def _leaf_roles(rtype: RouteType, suffix: str = "") -> list[tuple[str, str, RouteType]]:
    """Flatten a route type into (name suffix, role, leaf type) triples.
    Roles: some flag, int field, bool field, enum code."""
    if isinstance(rtype, BoundedInt):
        return [(suffix or "val", "int", rtype)]
    if isinstance(rtype, BoolType):
        return [(suffix or "val", "bool", rtype)]
    if isinstance(rtype, EnumType):
        return [(suffix or "val", "enum", rtype)]
    if isinstance(rtype, OptionType):
        flag = f"{suffix}_some" if suffix else "some"
        inner = _leaf_roles(rtype.inner, f"{suffix}_x" if suffix else "x")
        return [(flag, "some", BoolType())] + inner
    if isinstance(rtype, TupleType):
        out = []
        for i, t in enumerate(rtype.elements):
            part = f"{suffix}_{i}" if suffix else str(i)
            out.extend(_leaf_roles(t, part))
        return out
    raise UnsupportedRouteType(f"cannot flatten {rtype!r}")


def _sanitize(node: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", node)


@dataclass(frozen=True)
class SmtScript:
    text: str
    var_schema: Mapping[str, tuple[tuple[str, str], ...]]  # node -> ((var, role), ...)
    route_type: RouteType
    node_order: tuple[str, ...]


@dataclass(frozen=True)
class Sat:
    model: Mapping[str, Value]


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class Unknown:
    reason: str


SolverVerdict = Union[Sat, Unsat, Unknown]


# --- symbolic values ----------------------------------------------------

@dataclass(frozen=True)
class SymVal:
    """Flattened symbolic route value: SMT terms arranged by type shape.

    BoundedInt/Enum -> int term; Bool -> bool term;
    Option -> (flag term, payload SymVal); Tuple -> tuple of SymVals.
    """

    rtype: RouteType
    term: Optional[str] = None
    flag: Optional[str] = None
    payload: Optional["SymVal"] = None
    parts: Optional[tuple["SymVal", ...]] = None


def _sym_from_vars(rtype: RouteType, names: list[str]) -> SymVal:
    if isinstance(rtype, (BoundedInt, BoolType, EnumType)):
        return SymVal(rtype, term=names.pop(0))
    if isinstance(rtype, OptionType):
        flag = names.pop(0)
        return SymVal(rtype, flag=flag, payload=_sym_from_vars(rtype.inner, names))
    if isinstance(rtype, TupleType):
        return SymVal(rtype, parts=tuple(_sym_from_vars(t, names) for t in rtype.elements))
    raise UnsupportedRouteType(repr(rtype))


def _sym_from_value(value: Value, rtype: RouteType) -> SymVal:
    """Constant route value as a flattened symbolic value with canonical
    defaults in absent payloads."""
    if isinstance(rtype, BoundedInt):
        return SymVal(rtype, term=_int_lit(value))
    if isinstance(rtype, BoolType):
        return SymVal(rtype, term="true" if value else "false")
    if isinstance(rtype, EnumType):
        return SymVal(rtype, term=str(rtype.variants.index(value)))
    if isinstance(rtype, OptionType):
        if value is None:
            from .routes import default_value

            return SymVal(
                rtype, flag="false", payload=_sym_from_value(default_value(rtype.inner), rtype.inner)
            )
        assert isinstance(value, Some)
        return SymVal(rtype, flag="true", payload=_sym_from_value(value.value, rtype.inner))
    if isinstance(rtype, TupleType):
        return SymVal(
            rtype,
            parts=tuple(_sym_from_value(v, t) for v, t in zip(value, rtype.elements)),
        )
    raise UnsupportedRouteType(repr(rtype))


def _int_lit(n: int) -> str:
    return str(n) if n >= 0 else f"(- {-n})"


def _leaves(sym: SymVal) -> list[tuple[str, RouteType]]:
    if sym.term is not None:
        return [(sym.term, sym.rtype)]
    if sym.flag is not None:
        return [(sym.flag, BoolType())] + _leaves(sym.payload)
    return [leaf for p in sym.parts for leaf in _leaves(p)]


def _ite(cond: str, a: str, b: str) -> str:
    if a == b:
        return a
    return f"(ite {cond} {a} {b})"


def _ite_sym(cond: str, a: SymVal, b: SymVal) -> SymVal:
    if isinstance(a.rtype, (BoundedInt, BoolType, EnumType)):
        return SymVal(unify(a.rtype, b.rtype), term=_ite(cond, a.term, b.term))
    if isinstance(a.rtype, OptionType):
        return SymVal(
            unify(a.rtype, b.rtype),
            flag=_ite(cond, a.flag, b.flag),
            payload=_ite_sym(cond, a.payload, b.payload),
        )
    return SymVal(
        unify(a.rtype, b.rtype),
        parts=tuple(_ite_sym(cond, x, y) for x, y in zip(a.parts, b.parts)),
    )


def _eq_sym(a: SymVal, b: SymVal) -> str:
    """Route equality: payloads only compared under both-present."""
    if isinstance(a.rtype, (BoundedInt, BoolType, EnumType)):
        return f"(= {a.term} {b.term})"
    if isinstance(a.rtype, OptionType):
        inner = _eq_sym(a.payload, b.payload)
        return f"(and (= {a.flag} {b.flag}) (=> (and {a.flag} {b.flag}) {inner}))"
    return "(and " + " ".join(_eq_sym(x, y) for x, y in zip(a.parts, b.parts)) + ")"


def _pin_sym(var: SymVal, rhs: SymVal) -> str:
    """Component-wise equality used for node equations. Absent payloads
    on the right are canonical constants, so this pins models to one
    canonical representative per abstract route value."""
    pairs = list(zip(_leaves(var), _leaves(rhs)))
    conj = " ".join(f"(= {a} {b})" for (a, _), (b, _) in pairs)
    return conj if len(pairs) == 1 else f"(and {conj})"


class _Compiler:
    """Compile policy expressions to SMT terms over flattened values."""

    def __init__(self):
        self.lets: list[tuple[str, str, str]] = []  # (name, sort, term)
        self.counter = 0

    def fresh(self, sort: str, term: str) -> str:
        name = f".t{self.counter}"
        self.counter += 1
        self.lets.append((name, sort, term))
        return name

    def share(self, sym: SymVal) -> SymVal:
        """Bind every leaf to a let so repeated uses stay linear."""
        if sym.term is not None:
            sort = "Bool" if isinstance(sym.rtype, BoolType) else "Int"
            if _is_atomic(sym.term):
                return sym
            return SymVal(sym.rtype, term=self.fresh(sort, sym.term))
        if sym.flag is not None:
            flag = sym.flag if _is_atomic(sym.flag) else self.fresh("Bool", sym.flag)
            return SymVal(sym.rtype, flag=flag, payload=self.share(sym.payload))
        return SymVal(sym.rtype, parts=tuple(self.share(p) for p in sym.parts))

    def compile(self, e: Expr, env: dict[str, SymVal]) -> SymVal:
        if isinstance(e, Lit):
            return _sym_from_value(e.value, e.rtype)
        if isinstance(e, Var):
            if e.name not in env:
                raise EncodeError(f"unbound variable {e.name!r} reached the encoder")
            return env[e.name]
        if isinstance(e, Add):
            a = self.compile(e.left, env)
            b = self.compile(e.right, env)
            t = unify(a.rtype, b.rtype)
            s = self.fresh("Int", f"(+ {a.term} {b.term})")
            clamped = f"(ite (> {s} {_int_lit(t.hi)}) {_int_lit(t.hi)} (ite (< {s} {_int_lit(t.lo)}) {_int_lit(t.lo)} {s}))"
            return SymVal(t, term=clamped)
        if isinstance(e, Min):
            a = self.compile(e.left, env)
            b = self.compile(e.right, env)
            t = unify(a.rtype, b.rtype)
            x = self.fresh("Int", a.term) if not _is_atomic(a.term) else a.term
            y = self.fresh("Int", b.term) if not _is_atomic(b.term) else b.term
            return SymVal(t, term=f"(ite (<= {x} {y}) {x} {y})")
        if isinstance(e, LessEq):
            a = self.compile(e.left, env)
            b = self.compile(e.right, env)
            return SymVal(BoolType(), term=f"(<= {a.term} {b.term})")
        if isinstance(e, Eq):
            a = self.compile(e.left, env)
            b = self.compile(e.right, env)
            return SymVal(BoolType(), term=_eq_sym(self.share(a), self.share(b)))
        if isinstance(e, And):
            if not e.args:
                return SymVal(BoolType(), term="true")
            parts = [self.compile(a, env).term for a in e.args]
            return SymVal(BoolType(), term="(and " + " ".join(parts) + ")" if len(parts) > 1 else parts[0])
        if isinstance(e, Or):
            if not e.args:
                return SymVal(BoolType(), term="false")
            parts = [self.compile(a, env).term for a in e.args]
            return SymVal(BoolType(), term="(or " + " ".join(parts) + ")" if len(parts) > 1 else parts[0])
        if isinstance(e, Not):
            return SymVal(BoolType(), term=f"(not {self.compile(e.arg, env).term})")
        if isinstance(e, If):
            cond = self.compile(e.cond, env)
            c = cond.term if _is_atomic(cond.term) else self.fresh("Bool", cond.term)
            a = self.share(self.compile(e.then, env))
            b = self.share(self.compile(e.orelse, env))
            return _ite_sym(c, a, b)
        if isinstance(e, SomeOf):
            inner = self.compile(e.arg, env)
            return SymVal(OptionType(inner.rtype), flag="true", payload=inner)
        if isinstance(e, NoneOf):
            return _sym_from_value(None, e.rtype)
        if isinstance(e, MatchOption):
            scrut = self.share(self.compile(e.scrutinee, env))
            none_v = self.share(self.compile(e.none_branch, env))
            inner_env = dict(env)
            inner_env[e.binder] = scrut.payload
            some_v = self.share(self.compile(e.some_branch, inner_env))
            return _ite_sym(scrut.flag, some_v, none_v)
        if isinstance(e, TupleOf):
            parts = tuple(self.compile(a, env) for a in e.args)
            return SymVal(TupleType(tuple(p.rtype for p in parts)), parts=parts)
        if isinstance(e, Proj):
            arg = self.compile(e.arg, env)
            if arg.parts is None:
                raise EncodeError("projection from a non-tuple value")
            return arg.parts[e.index]
        if isinstance(e, EnumLit):
            return SymVal(e.rtype, term=str(e.rtype.variants.index(e.variant)))
        if isinstance(e, EnumEq):
            arg = self.compile(e.arg, env)
            code = arg.rtype.variants.index(e.variant)
            return SymVal(BoolType(), term=f"(= {arg.term} {code})")
        if isinstance(e, Let):
            bound = self.share(self.compile(e.bound, env))
            inner_env = dict(env)
            inner_env[e.binder] = bound
            return self.compile(e.body, inner_env)
        if isinstance(e, (NodeLit, EdgeVar)):
            raise EncodeError(
                "node or edge reference survived specialization; "
                "symbolic values must be instantiated before encoding"
            )
        raise EncodeError(f"cannot compile {e!r}")

    def wrap(self, term: str) -> str:
        """Wrap a boolean term in the accumulated let bindings."""
        out = term
        for name, _sort, bound in reversed(self.lets):
            out = f"(let (({name} {bound})) {out})"
        return out


def _is_atomic(term: str) -> bool:
    return not term.startswith("(")


# --- fragment encoding ---------------------------------------------------

def encode_fragment(fragment: OpenSrp, prop: Optional[Expr] = None,
                    prop_nodes: Optional[Sequence[str]] = None) -> SmtScript:
    """Compile a fragment and per-node property predicate into a script
    asserting assumptions and stability plus the negation of
    (guarantees and property). The property binds the route parameter r
    and is asserted for every fragment node unless prop_nodes narrows it.
    """
    if fragment.policy.symbolics:
        raise EncodeError(
            "fragment policy has unresolved symbolic values; instantiate first"
        )
    rt = fragment.route_type
    roles = _leaf_roles(rt)
    if prop is not None:
        t = type_check(prop, {"r": rt})
        if not isinstance(t, BoolType):
            raise IllTypedProperty(f"property must be boolean, got {t!r}")

    nodes = fragment.nodes
    schema: dict[str, tuple[tuple[str, str], ...]] = {}
    decls: list[str] = []
    ranges: list[str] = []
    node_syms: dict[str, SymVal] = {}
    for idx, node in enumerate(nodes):
        prefix = f"n{idx}_{_sanitize(node)}"
        names = []
        entries = []
        for suffix, role, leaf_t in roles:
            var = f"{prefix}__{suffix}"
            names.append(var)
            entries.append((var, role))
            if isinstance(leaf_t, BoolType):
                decls.append(f"(declare-const {var} Bool)")
            elif isinstance(leaf_t, BoundedInt):
                decls.append(f"(declare-const {var} Int)")
                ranges.append(
                    f"(assert (and (<= {_int_lit(leaf_t.lo)} {var}) (<= {var} {_int_lit(leaf_t.hi)})))"
                )
            elif isinstance(leaf_t, EnumType):
                decls.append(f"(declare-const {var} Int)")
                ranges.append(
                    f"(assert (and (<= 0 {var}) (<= {var} {len(leaf_t.variants) - 1})))"
                )
        schema[node] = tuple(entries)
        node_syms[node] = _sym_from_vars(rt, names)

    lines: list[str] = [
        "(set-logic QF_LIA)",
        f"; fragment over {len(nodes)} nodes",
    ]
    lines.extend(decls)
    lines.extend(ranges)

    vin = fragment.input_nodes

    # assumptions: lab(u) = inh(u)
    for node in nodes:
        if node in vin:
            rhs = _sym_from_value(fragment.assumptions[node], rt)
            lines.append(f"(assert {_pin_sym(node_syms[node], rhs)})  ; assume {node}")

    # stability: lab(v) = init(v) merged with transferred in-neighbors
    for node in nodes:
        if node in vin:
            continue
        compiler = _Compiler()
        acc = _sym_from_value(fragment.init[node], rt)
        for u in fragment.topology.in_neighbors(node):
            trans = specialize_edge(fragment.policy.trans_expr, (u, node))
            transferred = compiler.compile(trans, {"r": node_syms[u]})
            acc = compiler.share(
                compiler.compile(
                    fragment.policy.merge_expr, {"r1": acc, "r2": transferred}
                )
            )
        eq = _pin_sym(node_syms[node], acc)
        lines.append(f"(assert {compiler.wrap(eq)})  ; stability {node}")

    # negated goal: not (guarantees and property)
    goal_parts: list[str] = []
    for node in nodes:
        if node in fragment.guarantees:
            rhs = _sym_from_value(fragment.guarantees[node], rt)
            goal_parts.append(_eq_sym(node_syms[node], rhs))
    if prop is not None:
        targets = list(prop_nodes) if prop_nodes is not None else list(nodes)
        for node in targets:
            if node not in node_syms:
                raise EncodeError(f"property target {node} is not in the fragment")
            compiler = _Compiler()
            p = compiler.compile(prop, {"r": node_syms[node]})
            goal_parts.append(compiler.wrap(p.term))
    if goal_parts:
        conj = goal_parts[0] if len(goal_parts) == 1 else "(and " + " ".join(goal_parts) + ")"
        lines.append(f"(assert (not {conj}))  ; negated guarantees and property")
    else:
        # nothing to violate: trivially unsat
        lines.append("(assert false)  ; no guarantees or property to check")

    lines.append("(check-sat)")
    all_vars = [var for node in nodes for (var, _role) in schema[node]]
    if all_vars:
        lines.append("(get-value (" + " ".join(all_vars) + "))")
    return SmtScript(
        text="\n".join(lines) + "\n",
        var_schema=schema,
        route_type=rt,
        node_order=tuple(nodes),
    )


# --- solver driver -------------------------------------------------------

DEFAULT_SOLVER_CANDIDATES = ("z3 -in", "cvc5 --lang smt2", "cvc4 --lang smt2")


def find_solver() -> Optional[str]:
    """First SMT-LIB-on-stdin solver found on PATH."""
    for cmd in DEFAULT_SOLVER_CANDIDATES:
        if shutil.which(shlex.split(cmd)[0]):
            return cmd
    return None


def run_solver(script: SmtScript, solver_cmd: Optional[str] = None,
               timeout: float = 60.0) -> SolverVerdict:
    """Pipe the script to the solver and parse the verdict. The timeout
    is enforced by killing the process."""
    cmd = solver_cmd or find_solver()
    if cmd is None:
        raise SolverSpawnFailure(
            "no SMT solver found; install z3 or pass an explicit command"
        )
    argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
    if timeout <= 0:
        return Unknown("timeout")
    try:
        proc = subprocess.run(
            argv,
            input=script.text,
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except FileNotFoundError as exc:
        raise SolverSpawnFailure(f"cannot run {argv[0]!r}: {exc}") from None
    except subprocess.TimeoutExpired:
        return Unknown("timeout")
    return _parse_output(proc.stdout, proc.stderr, script)


def _parse_output(stdout: str, stderr: str, script: SmtScript) -> SolverVerdict:
    lines = [ln.strip() for ln in stdout.splitlines() if ln.strip()]
    verdict = None
    rest_start = 0
    for i, ln in enumerate(lines):
        if ln in ("sat", "unsat", "unknown"):
            verdict = ln
            rest_start = i + 1
            break
        if ln.startswith("(error"):
            continue
        raise MalformedSolverOutput(f"unexpected solver output line: {ln!r}")
    if verdict is None:
        raise MalformedSolverOutput(
            f"no sat/unsat verdict in solver output: {stdout!r} (stderr: {stderr!r})"
        )
    if verdict == "unsat":
        return Unsat()
    if verdict == "unknown":
        return Unknown(stderr.strip() or "solver returned unknown")
    rest = "\n".join(lines[rest_start:])
    values = _parse_get_value(rest) if rest else {}
    return Sat(values)


def _parse_get_value(text: str) -> dict[str, Value]:
    """Parse a get-value response: ((name val) (name val) ...)."""
    tokens = re.findall(r"\(|\)|[^\s()]+", text)
    pos = 0

    def parse() -> object:
        nonlocal pos
        if tokens[pos] == "(":
            pos += 1
            items = []
            while pos < len(tokens) and tokens[pos] != ")":
                items.append(parse())
            pos += 1  # closing paren
            return items
        tok = tokens[pos]
        pos += 1
        return tok

    if not tokens:
        return {}
    try:
        tree = parse()
    except IndexError:
        raise MalformedSolverOutput(f"unbalanced get-value response: {text!r}") from None
    out: dict[str, Value] = {}
    if not isinstance(tree, list):
        raise MalformedSolverOutput(f"unexpected get-value response: {text!r}")
    for pair in tree:
        if not isinstance(pair, list) or len(pair) != 2:
            raise MalformedSolverOutput(f"unexpected get-value entry: {pair!r}")
        name, val = pair
        out[str(name)] = _parse_constant(val)
    return out


def _parse_constant(val: object) -> Value:
    if isinstance(val, list):
        # negative integers print as (- 5)
        if len(val) == 2 and val[0] == "-":
            return -int(val[1])
        raise MalformedSolverOutput(f"unexpected constant: {val!r}")
    if val == "true":
        return True
    if val == "false":
        return False
    try:
        return int(val)
    except ValueError:
        raise MalformedSolverOutput(f"unexpected constant: {val!r}") from None


# --- model parsing -------------------------------------------------------

def parse_model(model: Mapping[str, Value], script: SmtScript) -> Labeling:
    """Reassemble flattened solver values into route values per node."""
    values: dict[str, Value] = {}
    for node in script.node_order:
        leaves = []
        for var, _role in script.var_schema[node]:
            if var not in model:
                raise SchemaMismatch(f"model is missing variable {var!r}")
            leaves.append(model[var])
        value, remaining = _rebuild(script.route_type, leaves)
        if remaining:
            raise SchemaMismatch(f"extra values for node {node}")
        values[node] = value
    return Labeling(values)


def _rebuild(rtype: RouteType, leaves: list) -> tuple[Value, list]:
    if isinstance(rtype, BoundedInt):
        v = leaves[0]
        if not isinstance(v, int) or isinstance(v, bool) or not (rtype.lo <= v <= rtype.hi):
            raise OutOfBoundsConstant(f"{v!r} outside [{rtype.lo}, {rtype.hi}]")
        return v, leaves[1:]
    if isinstance(rtype, BoolType):
        v = leaves[0]
        if not isinstance(v, bool):
            raise OutOfBoundsConstant(f"{v!r} is not a boolean")
        return v, leaves[1:]
    if isinstance(rtype, EnumType):
        v = leaves[0]
        if not isinstance(v, int) or isinstance(v, bool) or not (0 <= v < len(rtype.variants)):
            raise OutOfBoundsConstant(f"enum code {v!r} outside {rtype.variants}")
        return rtype.variants[v], leaves[1:]
    if isinstance(rtype, OptionType):
        flag = leaves[0]
        if not isinstance(flag, bool):
            raise OutOfBoundsConstant(f"{flag!r} is not a boolean flag")
        inner, rest = _rebuild(rtype.inner, leaves[1:])
        return (Some(inner) if flag else None), rest
    if isinstance(rtype, TupleType):
        parts = []
        rest = leaves
        for t in rtype.elements:
            v, rest = _rebuild(t, rest)
            parts.append(v)
        return tuple(parts), rest
    raise UnsupportedRouteType(repr(rtype))
