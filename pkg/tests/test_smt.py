import random

import pytest

from expr_gen import random_expr, random_type
from helpers import fat20, fat20_sp, max_hops_prop, open_srp
from srpcut.cutting import cross_edges, cut_n
from srpcut.interfaces import complete_interface
from srpcut.ir import evaluate
from srpcut.netgen import fattree_assignment
from srpcut.policies import sp_policy
from srpcut.routes import BoolType, BoundedInt, Some
from srpcut.smt import (
    MalformedSolverOutput,
    OutOfBoundsConstant,
    Sat,
    SchemaMismatch,
    SmtScript,
    SolverSpawnFailure,
    Unknown,
    Unsat,
    encode_fragment,
    parse_model,
    run_solver,
)
from srpcut.srp import Topology, closed_srp


def plain_script(text: str) -> SmtScript:
    return SmtScript(text=text, var_schema={}, route_type=BoolType(), node_order=())


def test_trivial_unsat(solver_cmd):
    assert isinstance(run_solver(plain_script("(assert false)(check-sat)"), solver_cmd), Unsat)


def test_trivial_sat_with_empty_model(solver_cmd):
    verdict = run_solver(plain_script("(assert true)(check-sat)"), solver_cmd)
    assert isinstance(verdict, Sat)
    assert verdict.model == {}


def test_zero_timeout_is_reported_as_unknown(solver_cmd):
    verdict = run_solver(plain_script("(check-sat)"), solver_cmd, timeout=0)
    assert verdict == Unknown("timeout")


def test_unrunnable_solver_raises_spawn_failure():
    with pytest.raises(SolverSpawnFailure):
        run_solver(plain_script("(check-sat)"), "definitely-not-a-solver-binary")


def test_garbage_output_is_malformed():
    with pytest.raises(MalformedSolverOutput):
        run_solver(plain_script("(check-sat)"), "echo garbage-but-not-a-verdict")


def _spines_fragment(drop=(), interface_from=None):
    """The spines fragment of fat20 under the pods cut."""
    topo, meta = fat20()
    srp = closed_srp(topo, sp_policy(dest=meta.dest, drop_adverts_from=drop))
    assignment = fattree_assignment(meta, "pods")
    source = interface_from if interface_from is not None else srp
    iface = complete_interface(source, cross_edges(srp, assignment))
    return cut_n(srp, assignment, iface)[0]


def test_correct_spines_fragment_is_unsat(solver_cmd):
    frag = _spines_fragment()
    prop = max_hops_prop(4)
    script = encode_fragment(frag, prop.per_node)
    assert isinstance(run_solver(script, solver_cmd), Unsat)


def test_black_holed_spines_fragment_reroutes_to_six_hops(solver_cmd):
    frag = _spines_fragment(drop=("a6",))
    prop = max_hops_prop(4)
    script = encode_fragment(frag, prop.per_node)
    verdict = run_solver(script, solver_cmd)
    assert isinstance(verdict, Sat)
    lab = parse_model(verdict.model, script)
    assert lab["c0"] == Some(6)


def test_single_node_guarantee_contradiction_is_sat(solver_cmd):
    topo = Topology(("d",), frozenset())
    srp = open_srp(topo, sp_policy(dest="d"), guarantees={"d": Some(1)})
    script = encode_fragment(srp, None)
    verdict = run_solver(script, solver_cmd)
    assert isinstance(verdict, Sat)
    lab = parse_model(verdict.model, script)
    assert lab["d"] == Some(0)  # init forces zero hops, contradicting the guarantee


def test_parse_model_reassembles_options():
    topo = Topology(("c0",), frozenset())
    srp = open_srp(topo, sp_policy(dest="d"))
    script = encode_fragment(srp, None)
    (some_var, _), (val_var, _) = script.var_schema["c0"]
    lab = parse_model({some_var: True, val_var: 6}, script)
    assert lab["c0"] == Some(6)
    lab = parse_model({some_var: False, val_var: 3}, script)
    assert lab["c0"] is None  # payload ignored under an absent route


def test_parse_model_rejects_bad_constants():
    from srpcut.policies import fat_policy

    topo = Topology(("v",), frozenset())
    srp = open_srp(topo, fat_policy(dest="v", tiers={"v": "edge"}))
    script = encode_fragment(srp, None)
    names = [name for name, _role in script.var_schema["v"]]
    good = {names[0]: True, names[1]: 0, names[2]: 0}
    assert parse_model(good, script)["v"] == Some((0, "up"))
    with pytest.raises(OutOfBoundsConstant):
        parse_model({**good, names[2]: 9}, script)  # enum code out of range
    with pytest.raises(SchemaMismatch):
        parse_model({names[0]: True}, script)


def test_encoding_is_deterministic():
    frag = _spines_fragment()
    prop = max_hops_prop(4)
    a = encode_fragment(frag, prop.per_node)
    b = encode_fragment(frag, prop.per_node)
    assert a.text == b.text
    assert a.var_schema == b.var_schema


def test_interpreter_and_solver_agree_on_random_expressions(solver_cmd):
    """Compile random closed boolean/integer expressions and compare the
    solver's forced values with the interpreter, batched per script."""
    rng = random.Random(99)
    total = 0
    batch = []
    while total < 500:
        target = random_type(rng, 2)
        expr = random_expr(rng, target, {}, depth=rng.randint(1, 4))
        batch.append((expr, target))
        total += 1
        if len(batch) == 50:
            _check_batch(batch, solver_cmd)
            batch = []
    if batch:
        _check_batch(batch, solver_cmd)


def _check_batch(batch, solver_cmd):
    from srpcut.smt import _Compiler, _pin_sym, _sym_from_vars, _leaf_roles

    decls = []
    asserts = []
    all_vars = []
    expected = {}
    for i, (expr, target) in enumerate(batch):
        names = []
        for suffix, role, leaf_t in _leaf_roles(target):
            var = f"e{i}__{suffix}"
            names.append(var)
            all_vars.append(var)
            sort = "Bool" if role in ("bool", "some") else "Int"
            decls.append(f"(declare-const {var} {sort})")
        sym = _sym_from_vars(target, list(names))
        compiler = _Compiler()
        compiled = compiler.compile(expr, {})
        asserts.append(f"(assert {compiler.wrap(_pin_sym(sym, compiled))})")
        expected[i] = (evaluate(expr, {}), target, names)
    text = "\n".join(
        ["(set-logic QF_LIA)"] + decls + asserts + ["(check-sat)", "(get-value (" + " ".join(all_vars) + "))"]
    )
    script = SmtScript(text=text, var_schema={}, route_type=BoolType(), node_order=())
    verdict = run_solver(script, solver_cmd)
    assert isinstance(verdict, Sat), "pinned expressions must be satisfiable"
    from srpcut.smt import _rebuild

    for i, (value, target, names) in expected.items():
        leaves = [verdict.model[n] for n in names]
        got, rest = _rebuild(target, leaves)
        assert not rest
        assert got == value, f"expr {i}: solver {got!r} vs interpreter {value!r}"


def test_encoder_rejects_unresolved_symbolics():
    from srpcut.policies import maint_policy
    from srpcut.smt import EncodeError

    topo, meta = fat20()
    srp = closed_srp(topo, maint_policy(dest=meta.dest, nodes=topo.nodes))
    with pytest.raises(EncodeError):
        encode_fragment(srp, None)


def test_ill_typed_property_is_rejected():
    from srpcut.ir import Add, Lit as L
    from srpcut.smt import IllTypedProperty

    srp = fat20_sp()
    with pytest.raises(IllTypedProperty):
        encode_fragment(srp, Add(L(1, BoundedInt(0, 3)), L(1, BoundedInt(0, 3))))


def test_negative_range_constants_round_trip(solver_cmd):
    from helpers import open_srp
    from srpcut.ir import Lit, PolicySpec, Var
    from srpcut.routes import BoundedInt
    from srpcut.srp import Topology

    signed = BoundedInt(-5, 5)
    policy = PolicySpec(
        route_type=signed,
        merge_expr=Var("r1"),
        trans_expr=Var("r"),
        init_expr=Lit(-3, signed),
    )
    topo = Topology(("v",), frozenset())
    srp = open_srp(topo, policy, guarantees={"v": 0})
    script = encode_fragment(srp, None)
    verdict = run_solver(script, solver_cmd)
    assert isinstance(verdict, Sat)
    lab = parse_model(verdict.model, script)
    assert lab["v"] == -3  # init forces -3, contradicting the guarantee


def test_unknown_verdict_is_inconclusive():
    verdict = run_solver(plain_script("(check-sat)"), "echo unknown")
    assert isinstance(verdict, Unknown)
