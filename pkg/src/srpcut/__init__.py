"""Modular control-plane verification toolkit.

Models routing as stable routing problems, cuts networks into
independently checkable fragments along annotated interfaces, and
verifies per-fragment safety properties with an external SMT solver,
backed by a fixed-point simulation oracle.
"""

from .routes import (
    BoolType,
    BoundedInt,
    EnumType,
    OptionType,
    Some,
    TupleType,
    conforms,
    format_value,
)
from .srp import (
    Labeling,
    OpenSrp,
    SrpInstance,
    Topology,
    closed_srp,
    is_solution,
    make_topology,
    restrict_labeling,
    validate_open_srp,
)
from .ir import PolicySpec, Symbolic, evaluate, type_check
from .policies import builtin_policy, fat_policy, maint_policy, sp_policy
from .sim import Diverged, NoSolution, SolveConfig, Solved, solve, solve_all_symbolic
from .cutting import (
    Interface,
    PartitionReport,
    cut,
    cut_n,
    glue_solutions,
    input_free_graph,
    is_input_output_node,
    validate_partition,
)
from .interfaces import complete_interface, maint_interface, yen_two_shortest
from .smt import Sat, SmtScript, Unknown, Unsat, encode_fragment, parse_model, run_solver
from .checker import (
    CheckResult,
    SolverSettings,
    Inconclusive,
    PropertySpec,
    Verified,
    Violation,
    check,
    check_universal,
    check_with_refinement,
    decompose_property,
    refine_interface,
    solve_fragment,
)
from .netgen import erdos_renyi, fattree, fattree_assignment, load_assignment, parse_edge_list

__version__ = "0.1.0"
