"""Benchmark harness.

Runs the cut-and-check pipeline over generated networks and records,
per configuration and cut kind, the wall time of every SMT query, the
maximum query time (the per-fragment metric: queries are independent
and could run in parallel), and the total pipeline time covering
build + cut + encode + solve executed sequentially. Times average over
the requested trials; verdicts must agree across trials.

CSV columns: network,k_or_n,cut,fragments,max_smt_s,total_s,verdict.
The header carries a comment noting what total_s covers, since there is
no language-transformation pipeline here to compare against.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .checker import (
    PropertySpec,
    SolverSettings,
    Verified,
    Violation,
    check,
    check_universal,
    solve_fragment,
)
from .cutting import Interface, cross_edges
from .interfaces import complete_interface, maint_interface
from .netgen import erdos_renyi, fattree, fattree_assignment
from .policies import fat_policy, maint_policy, sp_policy
from .sim import symbolic_assignments
from .specfile import NetworkSpec, max_hops_property, reachable_property
from .srp import OpenSrp, closed_srp

FATTREE_CUTS = ("mono", "vertical", "horizontal", "pods", "full")

CSV_COMMENT = (
    "# total_s covers build+cut+encode+solve (sequential); "
    "max_smt_s is the largest single solver query wall time"
)
CSV_HEADER = ("network", "k_or_n", "cut", "fragments", "max_smt_s", "total_s", "verdict")


@dataclass(frozen=True)
class BenchRecord:
    network: str
    k_or_n: int
    cut: str
    fragments: int
    max_smt_s: float
    total_s: float
    verdict: str
    per_fragment_s: tuple[float, ...] = ()  # last trial's query times

    def row(self) -> list:
        return [
            self.network,
            self.k_or_n,
            self.cut,
            self.fragments,
            f"{self.max_smt_s:.6f}",
            f"{self.total_s:.6f}",
            self.verdict,
        ]


def _verdict_name(result) -> str:
    if isinstance(result, Verified):
        return "verified"
    if isinstance(result, Violation):
        return f"violation:{result.node}"
    return "inconclusive"


def _run_once(
    srp: OpenSrp,
    prop: Optional[PropertySpec],
    cut_kind: str,
    assignment: Optional[dict],
    settings: SolverSettings,
    maint_family_builder=None,
    total_timeout: Optional[float] = None,
) -> tuple[str, int, float, float, tuple[float, ...]]:
    """One trial: returns (verdict, fragments, max_smt_s, total_s, per-query times).
    Interface generation happens inside the timed region."""
    if total_timeout is not None:
        settings = replace(settings, deadline=time.monotonic() + total_timeout)
    timings: list = []
    started = time.perf_counter()
    if maint_family_builder is not None:
        if cut_kind == "mono":
            assignment = {n: 0 for n in srp.nodes}
            family = {sym: _EMPTY_INTERFACE for sym in symbolic_assignments(srp)}
        else:
            family = maint_family_builder()
        result, per = check_universal(srp, prop, assignment, family, settings, timings=timings)
        fragments = len(set(assignment.values()))
    elif cut_kind == "mono":
        result = solve_fragment(srp, prop, settings, timings=timings)
        fragments = 1
    else:
        iface = complete_interface(srp, cross_edges(srp, assignment))
        result = check(srp, prop, assignment, iface, settings, timings=timings)
        fragments = len(set(assignment.values()))
    total = time.perf_counter() - started
    per_query = tuple(dt for (_i, dt) in timings)
    max_smt = max(per_query, default=0.0)
    return _verdict_name(result), fragments, max_smt, total, per_query


_EMPTY_INTERFACE = Interface({})


def _average(
    srp, prop, cut_kind, assignment, settings, trials, maint_family_builder=None,
    total_timeout: Optional[float] = None,
) -> tuple[str, int, float, float, tuple[float, ...]]:
    verdicts = []
    max_smts = []
    totals = []
    fragments = 0
    per_query: tuple[float, ...] = ()
    for _ in range(trials):
        verdict, fragments, max_smt, total, per_query = _run_once(
            srp, prop, cut_kind, assignment, settings, maint_family_builder, total_timeout
        )
        verdicts.append(verdict)
        max_smts.append(max_smt)
        totals.append(total)
    if len(set(verdicts)) != 1:
        raise RuntimeError(f"verdict changed across trials: {verdicts}")
    return verdicts[0], fragments, sum(max_smts) / trials, sum(totals) / trials, per_query


def bench_fattree(
    policy_kind: str,
    ks: Sequence[int],
    cuts: Sequence[str],
    settings: SolverSettings,
    trials: int = 1,
    max_hops_bound: Optional[int] = None,
    total_timeout: Optional[float] = None,
) -> list[BenchRecord]:
    """Fattree suites: policy_kind is sp, fat or maint."""
    records = []
    for k in ks:
        topo, meta = fattree(k)
        maint_family_builder = None
        if policy_kind == "sp":
            srp = closed_srp(topo, sp_policy(dest=meta.dest))
            prop = max_hops_property(srp.route_type, max_hops_bound or 4)
        elif policy_kind == "fat":
            srp = closed_srp(topo, fat_policy(dest=meta.dest, tiers=meta.tiers))
            prop = max_hops_property(srp.route_type, max_hops_bound or 4)
        elif policy_kind == "maint":
            srp = closed_srp(topo, maint_policy(dest=meta.dest, nodes=topo.nodes))
            prop = max_hops_property(srp.route_type, max_hops_bound or 6)
        else:
            raise ValueError(f"unknown fattree policy {policy_kind!r}")
        for cut_kind in cuts:
            assignment = (
                None if cut_kind == "mono" else fattree_assignment(meta, cut_kind)
            )
            if policy_kind == "maint":
                cutset = [] if cut_kind == "mono" else cross_edges(srp, assignment)

                def maint_family_builder(cutset=cutset):
                    return {
                        (("down", down),): iface
                        for down, iface in maint_interface(topo, meta.dest, cutset).items()
                    }

            verdict, fragments, max_smt, total, per_query = _average(
                srp, prop, cut_kind, assignment, settings, trials, maint_family_builder,
                total_timeout,
            )
            records.append(
                BenchRecord(
                    f"fattree-{policy_kind}", len(topo.nodes), cut_kind,
                    fragments, max_smt, total, verdict, per_query,
                )
            )
    return records


def bench_random(
    xs: Sequence[int],
    cuts: Sequence[str],
    settings: SolverSettings,
    trials: int = 1,
    seed: int = 1,
    total_timeout: Optional[float] = None,
) -> list[BenchRecord]:
    """Random suite: n = 2^x nodes, edge probability p = 2^(2-x)."""
    records = []
    for x in xs:
        n = 2**x
        p = 2.0 ** (2 - x)
        topo = erdos_renyi(n, p, seed)
        srp = closed_srp(topo, sp_policy(dest="n0"))
        prop = reachable_property(srp.route_type)
        for cut_kind in cuts:
            if cut_kind == "mono":
                assignment = None
            elif cut_kind == "full":
                assignment = {node: i for i, node in enumerate(topo.nodes)}
            else:
                raise ValueError(f"random suite supports mono and full cuts, not {cut_kind!r}")
            verdict, fragments, max_smt, total, per_query = _average(
                srp, prop, cut_kind, assignment, settings, trials,
                total_timeout=total_timeout,
            )
            records.append(
                BenchRecord("random", n, cut_kind, fragments, max_smt, total, verdict, per_query)
            )
    return records


def bench_spec(
    spec: NetworkSpec,
    settings: SolverSettings,
    trials: int = 1,
    total_timeout: Optional[float] = None,
) -> list[BenchRecord]:
    """Benchmark a spec file: monolithic plus its own partition if any."""
    records = []
    cuts: list[tuple[str, Optional[dict]]] = [("mono", None)]
    if spec.partition is not None:
        cuts.append(("file", spec.partition))
    for cut_kind, assignment in cuts:
        timings: list = []
        verdicts = []
        max_smts = []
        totals = []
        fragments = 1
        for _ in range(trials):
            if total_timeout is not None:
                settings = replace(settings, deadline=time.monotonic() + total_timeout)
            timings.clear()
            started = time.perf_counter()
            if cut_kind == "mono":
                result = solve_fragment(spec.srp, spec.prop, settings, timings=timings)
            else:
                iface = spec.interface or complete_interface(
                    spec.srp, cross_edges(spec.srp, assignment)
                )
                result = check(spec.srp, spec.prop, assignment, iface, settings, timings=timings)
                fragments = len(set(assignment.values()))
            totals.append(time.perf_counter() - started)
            max_smts.append(max((dt for (_i, dt) in timings), default=0.0))
            verdicts.append(_verdict_name(result))
        if len(set(verdicts)) != 1:
            raise RuntimeError(f"verdict changed across trials: {verdicts}")
        records.append(
            BenchRecord(
                spec.name, len(spec.srp.nodes), cut_kind, fragments,
                sum(max_smts) / trials, sum(totals) / trials, verdicts[0],
                tuple(dt for (_i, dt) in timings),
            )
        )
    return records


def to_csv(records: Sequence[BenchRecord]) -> str:
    buf = io.StringIO()
    buf.write(CSV_COMMENT + "\n")
    writer = csv.writer(buf)
    writer.writerow(CSV_HEADER)
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()
