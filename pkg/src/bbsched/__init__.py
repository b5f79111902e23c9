"""Balanced broadcast scheduling for half-duplex networks.

Solve per-link occupancies that equalize inflow across nodes, compile
them into a cyclic frame schedule, and compare the result against
greedy, binary-tree, and segment-redistribution baselines in a
deterministic synchronous simulator.
"""

from .algorithms import (POLICY_NAMES, BbsPolicy, BinaryTreePolicy,
                         GreedyPolicy, SrdaPolicy, build_binary_tree,
                         build_srda_plan, make_policy, packet_selection)
from .balance import (BalancedSolution, LPError, estimate_stable_time,
                      solve_balanced, trace_to_occupancy, verify_constraints)
from .schedule import (CyclicSchedule, Multigraph, ScheduleError,
                       build_multigraph, compile_balanced,
                       compile_from_occupancies, deserialize_schedule,
                       edge_color_bipartite, edge_color_heuristic,
                       order_frames, orient_frames, rationalize,
                       serialize_schedule)
from .sim import (LivelockError, PhaseBreakdown, ProtocolViolation, RunResult,
                  RunTrace, SimConfig, SimState, apply_step, compute_metrics,
                  detect_phases, initial_state, run, trace_csv, transfers_csv)
from .topology import (Topology, TopologyError, bfs_distances, from_edge_list,
                       grid, grid_dims, is_bipartite, make_topology,
                       to_edge_list)

__version__ = "1.0.0"

__all__ = [
    "POLICY_NAMES", "BbsPolicy", "BinaryTreePolicy", "GreedyPolicy",
    "SrdaPolicy", "build_binary_tree", "build_srda_plan", "make_policy",
    "packet_selection",
    "BalancedSolution", "LPError", "estimate_stable_time", "solve_balanced",
    "trace_to_occupancy", "verify_constraints",
    "CyclicSchedule", "Multigraph", "ScheduleError", "build_multigraph",
    "compile_balanced", "compile_from_occupancies", "deserialize_schedule",
    "edge_color_bipartite", "edge_color_heuristic", "order_frames",
    "orient_frames", "rationalize", "serialize_schedule",
    "LivelockError", "PhaseBreakdown", "ProtocolViolation", "RunResult",
    "RunTrace", "SimConfig", "SimState", "apply_step", "compute_metrics",
    "detect_phases", "initial_state", "run", "trace_csv", "transfers_csv",
    "Topology", "TopologyError", "bfs_distances", "from_edge_list", "grid",
    "grid_dims", "is_bipartite", "make_topology", "to_edge_list",
    "__version__",
]
