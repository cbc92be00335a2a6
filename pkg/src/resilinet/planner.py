"""Top-level recovery planning: network planner, centering baseline, fallback.

Methods are identified by the wire strings "ml-dagl" (the learned planner),
"centering" (every survivor flies to the swarm centroid), and
"fallback-centroid" (the centroid plan substituted when the learned solver
never produced a feasible branch, or produced one worse than the centroid
bound).  Every plan returned here is connected under the communication
range, so downstream simulation always recovers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .damage import DamageScenario, build_input_graph
from .damage_graphs import build_graph_sequence, choose_branch_count
from .gcn import Hyperparams, ModelWeights, build_kernel, solve
from .swarm import SwarmTopology, build_adjacency, count_subnets, diameter_hops

PLAN_VERSION = 1

METHOD_LEARNED = "ml-dagl"
METHOD_CENTERING = "centering"
METHOD_FALLBACK = "fallback-centroid"


@dataclass(frozen=True)
class RecoveryPlan:
    """Target positions for the surviving nodes, in ascending original order."""

    targets: np.ndarray
    planned_time: float
    method: str
    k_star: int | None = None
    iterations: int = 0


def centroid_targets(topology: SwarmTopology, scenario: DamageScenario,
                     max_speed: float) -> tuple[np.ndarray, float]:
    """All survivors target the centroid of the full original swarm."""
    center = topology.positions.mean(axis=0)
    start = topology.positions[scenario.remaining]
    targets = np.tile(center, (scenario.n_remaining, 1))
    planned = float(np.linalg.norm(start - center, axis=1).max()) / max_speed
    return targets, planned


def plan_centering(topology: SwarmTopology, scenario: DamageScenario,
                   max_speed: float = 10.0) -> RecoveryPlan:
    """Centering baseline; its planned time equals the worst-case bound."""
    targets, planned = centroid_targets(topology, scenario, max_speed)
    return RecoveryPlan(targets=targets, planned_time=planned, method=METHOD_CENTERING)


def plan_learned(topology: SwarmTopology, scenario: DamageScenario,
                 weights: ModelWeights, config: Hyperparams | None = None,
                 seed: int = 0) -> RecoveryPlan:
    """Plan with the graph-convolution solver, falling back to the centroid.

    Builds the damage-graph sequence with the branch count derived from the
    pre-damage hop diameter, runs the online solver from the given pretrained
    weights (never mutated), and keeps the selected branch's remaining-row
    targets.  Whenever the solver finds nothing feasible, or nothing better
    than the centroid plan, the centroid fallback is returned instead, so the
    result is always connected and never exceeds the worst-case bound.
    """
    config = config or Hyperparams()
    input_graph = build_input_graph(topology, scenario)
    branches = choose_branch_count(
        diameter_hops(topology.adjacency()), config.branch_cap
    )
    seq = build_graph_sequence(input_graph, branches)
    kernel = build_kernel(seq, config.kernel_step)
    solution = solve(input_graph, seq, kernel, weights, topology.comm_range,
                     config, seed=seed)

    fallback_targets, fallback_time = centroid_targets(
        topology, scenario, config.max_speed
    )
    if solution.feasible:
        k = solution.k_star - 1
        planned = float(solution.flight_times[k])
        if planned <= fallback_time:
            targets = solution.branch_targets[k][: scenario.n_remaining].copy()
            return RecoveryPlan(
                targets=targets, planned_time=planned, method=METHOD_LEARNED,
                k_star=solution.k_star, iterations=solution.iterations,
            )
    return RecoveryPlan(
        targets=fallback_targets, planned_time=fallback_time,
        method=METHOD_FALLBACK, iterations=solution.iterations,
    )


def verify_plan(plan: RecoveryPlan, comm_range: float) -> bool:
    """Hard feasibility gate: the target graph must be a single component."""
    return count_subnets(build_adjacency(plan.targets, comm_range)) == 1


def save_plan(path: str | Path, plan: RecoveryPlan, scenario_ref: str = "") -> None:
    payload = {
        "version": PLAN_VERSION,
        "scenario_ref": scenario_ref,
        "method": plan.method,
        "k_star": plan.k_star,
        "targets": [[float(x), float(y)] for x, y in plan.targets],
        "planned_T_rc_s": float(plan.planned_time),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_plan(path: str | Path) -> RecoveryPlan:
    payload = json.loads(Path(path).read_text())
    if payload.get("version") != PLAN_VERSION:
        raise ValueError(f"unsupported plan file version: {payload.get('version')!r}")
    return RecoveryPlan(
        targets=np.asarray(payload["targets"], dtype=float),
        planned_time=float(payload["planned_T_rc_s"]),
        method=payload["method"],
        k_star=payload.get("k_star"),
    )
