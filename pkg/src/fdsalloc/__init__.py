"""Coverage-based coded storage allocation.

Minimize total storage across a node network so that every closed
neighborhood can reassemble the object, via a fully distributed dual
accelerated-gradient solver with feasible iterates; includes an exact LP
oracle, a random-linear-coding recovery verifier, and an experiment CLI.
"""

from .graph import (
    StorageGraph,
    complete_graph,
    cycle_graph,
    erdos_renyi_graph,
    geometric_random_graph,
    graph_power,
    path_graph,
    read_edge_list,
    star_graph,
    write_edge_list,
)
from .problem import (
    FdsInstance,
    TOL_FEAS,
    feasible,
    min_slack,
    neighborhood_sums,
    objective,
    optimum_bounds,
    recovery_probability,
    regularized_objective,
)
from .pcm_solver import (
    NodeState,
    RoundTrace,
    SolverParams,
    advance_round,
    dual_gradient,
    dual_value,
    init_states,
    inner_minimizer,
    iterations_for_epsilon,
    solve,
)
from .lp_oracle import LpSolution, solve_exact, solve_regularized
from .coding import CodedStore, disseminate, gf_rank, try_recover

__all__ = [
    "StorageGraph",
    "complete_graph",
    "cycle_graph",
    "erdos_renyi_graph",
    "geometric_random_graph",
    "graph_power",
    "path_graph",
    "read_edge_list",
    "star_graph",
    "write_edge_list",
    "FdsInstance",
    "TOL_FEAS",
    "feasible",
    "min_slack",
    "neighborhood_sums",
    "objective",
    "optimum_bounds",
    "recovery_probability",
    "regularized_objective",
    "NodeState",
    "RoundTrace",
    "SolverParams",
    "advance_round",
    "dual_gradient",
    "dual_value",
    "init_states",
    "inner_minimizer",
    "iterations_for_epsilon",
    "solve",
    "LpSolution",
    "solve_exact",
    "solve_regularized",
    "CodedStore",
    "disseminate",
    "gf_rank",
    "try_recover",
]
