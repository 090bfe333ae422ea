import csv
import io
import json
import os

import pytest
from click.testing import CliRunner

from helpers import fat20
from srpcut.cli import main
from srpcut.cutting import cross_edges
from srpcut.interfaces import complete_interface
from srpcut.netgen import fattree_assignment
from srpcut.policies import sp_policy
from srpcut.specfile import value_to_json
from srpcut.srp import closed_srp


@pytest.fixture()
def runner():
    return CliRunner()


def write_fat20_spec(path, partition=True, interface=True, drop=None, bad_annotation=None):
    topo, meta = fat20()
    srp = closed_srp(topo, sp_policy(dest=meta.dest, drop_adverts_from=drop or ()))
    assignment = fattree_assignment(meta, "pods")
    iface = complete_interface(srp, cross_edges(srp, assignment))
    if bad_annotation:
        iface = iface.updated(bad_annotation)
    seen = set()
    undirected = []
    for (u, v) in sorted(topo.edges):
        if (v, u) not in seen:
            seen.add((u, v))
            undirected.append([u, v])
    doc = {
        "name": "fat20-sp",
        "nodes": list(topo.nodes),
        "undirected": True,
        "edges": undirected,
        "policy": {"builtin": "SP", "dest": "d"},
        "property": {"builtin": "max_hops", "bound": 4},
    }
    if drop:
        doc["policy"]["drop_adverts_from"] = list(drop)
    if partition:
        doc["partition"] = assignment
    if interface:
        doc["interface"] = [
            {"edge": list(e), "value": value_to_json(v, srp.route_type)}
            for e, v in sorted(iface.annotations.items())
        ]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
    return doc


def test_solve_prints_a_route_table(runner, tmp_path):
    spec = tmp_path / "net.json"
    write_fat20_spec(spec)
    first = runner.invoke(main, ["solve", str(spec)])
    assert first.exit_code == 0, first.output
    assert "d   Some 0" in first.output
    assert "e0  Some 4" in first.output
    second = runner.invoke(main, ["solve", str(spec)])
    assert second.output == first.output  # byte-identical across runs


def test_solve_rejects_bad_specs_with_exit_2(runner, tmp_path):
    spec = tmp_path / "broken.json"
    doc = write_fat20_spec(spec)
    doc["edges"].append(["c0", "zzz"])
    spec.write_text(json.dumps(doc))
    result = runner.invoke(main, ["solve", str(spec)])
    assert result.exit_code == 2
    assert "zzz" in result.output


def test_check_verified_exits_zero(runner, tmp_path, solver_cmd):
    spec = tmp_path / "net.json"
    write_fat20_spec(spec)
    result = runner.invoke(main, ["check", str(spec), "--solver", solver_cmd])
    assert result.exit_code == 0, result.output
    assert "verified" in result.output


def test_check_black_hole_exits_one_with_counterexample(runner, tmp_path, solver_cmd):
    spec = tmp_path / "buggy.json"
    write_fat20_spec(spec, drop=("a6",), interface=False)
    result = runner.invoke(
        main, ["check", str(spec), "--solver", solver_cmd, "--interface", "complete"]
    )
    assert result.exit_code == 1, result.output
    assert "violation" in result.output
    assert "c0: Some 6" in result.output


def test_check_without_interface_asks_for_one(runner, tmp_path, solver_cmd):
    spec = tmp_path / "net.json"
    write_fat20_spec(spec, interface=False)
    result = runner.invoke(main, ["check", str(spec), "--solver", solver_cmd])
    assert result.exit_code == 2
    assert "interface" in result.output


def test_check_refine_reports_the_repair(runner, tmp_path, solver_cmd):
    from srpcut.routes import Some

    spec = tmp_path / "stale.json"
    write_fat20_spec(
        spec, bad_annotation={("a0", "c0"): Some(1), ("a0", "c1"): Some(1)}
    )
    result = runner.invoke(
        main, ["check", str(spec), "--solver", solver_cmd, "--refine", "3"]
    )
    assert result.exit_code == 0, result.output
    assert "refined a0->c0, a0->c1: Some 1 -> Some 3" in result.output
    assert "rounds: 2" in result.output


def test_check_monolithic_when_no_partition(runner, tmp_path, solver_cmd):
    spec = tmp_path / "mono.json"
    write_fat20_spec(spec, partition=False, interface=False)
    result = runner.invoke(main, ["check", str(spec), "--solver", solver_cmd])
    assert result.exit_code == 0, result.output
    assert "1 checked" in result.output


def test_check_dumps_smt_scripts(runner, tmp_path, solver_cmd):
    spec = tmp_path / "net.json"
    write_fat20_spec(spec)
    dump_dir = tmp_path / "smt"
    result = runner.invoke(
        main,
        ["check", str(spec), "--solver", solver_cmd, "--dump-smt", str(dump_dir)],
    )
    assert result.exit_code == 0
    files = sorted(os.listdir(dump_dir))
    assert files == [f"fat20-sp.{i}.smt2" for i in range(5)]
    text = (dump_dir / files[0]).read_text()
    assert text.startswith("(set-logic")


def test_cut_writes_fragments_that_recheck_clean(runner, tmp_path, solver_cmd):
    spec = tmp_path / "net.json"
    write_fat20_spec(spec)
    out = tmp_path / "frags"
    result = runner.invoke(main, ["cut", str(spec), "--out", str(out)])
    assert result.exit_code == 0, result.output
    files = sorted(os.listdir(out))
    assert len(files) == 5
    # the spines file lists the guaranteed core routes
    spines = json.loads((out / "fat20-sp.frag0.json").read_text())
    assert spines["outputs"] == {"c0": 2, "c1": 2, "c2": 2, "c3": 2}
    # each fragment re-validates and re-checks independently
    for name in files:
        sub = runner.invoke(main, ["check", str(out / name), "--solver", solver_cmd])
        assert sub.exit_code == 0, sub.output


def test_maint_universal_check_via_cli(runner, tmp_path, solver_cmd):
    topo, meta = fat20()
    assignment = fattree_assignment(meta, "pods")
    seen = set()
    undirected = []
    for (u, v) in sorted(topo.edges):
        if (v, u) not in seen:
            seen.add((u, v))
            undirected.append([u, v])
    doc = {
        "name": "fat20-maint",
        "nodes": list(topo.nodes),
        "undirected": True,
        "edges": undirected,
        "policy": {"builtin": "MAINT", "dest": "d"},
        "partition": assignment,
        "property": {"builtin": "max_hops", "bound": 6},
    }
    spec = tmp_path / "maint.json"
    spec.write_text(json.dumps(doc))
    result = runner.invoke(
        main, ["check", str(spec), "--solver", solver_cmd, "--interface", "maint"]
    )
    assert result.exit_code == 0, result.output
    assert result.output.count("ok ") == 19
    assert "aggregate: verified" in result.output


def test_bench_csv_shape(runner, tmp_path, solver_cmd):
    csv_path = tmp_path / "bench.csv"
    result = runner.invoke(
        main,
        [
            "bench", "fattree-sp", "--k", "4", "--cuts", "mono,pods",
            "--solver", solver_cmd, "--trials", "1", "--csv", str(csv_path),
        ],
    )
    assert result.exit_code == 0, result.output
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("#")
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert [r["cut"] for r in rows] == ["mono", "pods"]
    for row in rows:
        assert row["network"] == "fattree-sp"
        assert row["k_or_n"] == "20"
        assert row["verdict"] == "verified"
        assert float(row["max_smt_s"]) <= float(row["total_s"])
    assert rows[0]["fragments"] == "1"
    assert rows[1]["fragments"] == "5"


def test_bench_records_expose_per_query_times(solver_cmd):
    from srpcut.bench import bench_fattree
    from srpcut.checker import SolverSettings

    records = bench_fattree(
        "sp", [4], ["pods"], SolverSettings(command=solver_cmd), trials=1
    )
    (rec,) = records
    assert len(rec.per_fragment_s) == 5
    assert rec.max_smt_s == pytest.approx(max(rec.per_fragment_s))


def test_bench_random_suite(runner, solver_cmd):
    result = runner.invoke(
        main,
        ["bench", "random", "--x", "4", "--cuts", "mono,full", "--solver", solver_cmd],
    )
    assert result.exit_code == 0, result.output
    rows = list(csv.DictReader(io.StringIO(
        "\n".join(ln for ln in result.output.splitlines() if not ln.startswith("#"))
    )))
    assert [r["k_or_n"] for r in rows] == ["16", "16"]
    verdicts = {r["verdict"] for r in rows}
    assert len(verdicts) == 1  # mono and full agree


def test_identity_partition_cut_reproduces_the_instance(runner, tmp_path):
    from srpcut.specfile import load

    spec = tmp_path / "net.json"
    doc = write_fat20_spec(spec, interface=False)
    doc["partition"] = {n: 0 for n in doc["nodes"]}
    spec.write_text(json.dumps(doc))
    out = tmp_path / "frags"
    result = runner.invoke(main, ["cut", str(spec), "--out", str(out)])
    assert result.exit_code == 0, result.output
    files = os.listdir(out)
    assert len(files) == 1
    reloaded = load(str(out / files[0]))
    assert reloaded.srp == load(str(spec)).srp


def test_solve_trace_appends_change_log(runner, tmp_path):
    spec = tmp_path / "net.json"
    write_fat20_spec(spec)
    result = runner.invoke(main, ["solve", str(spec), "--trace"])
    assert result.exit_code == 0
    assert "round,node,old,new" in result.output
    assert "1,a6,None,Some 1" in result.output
