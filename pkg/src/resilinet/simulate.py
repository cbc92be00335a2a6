"""Time-stepped plan execution and the Monte-Carlo experiment harness.

Execution moves every surviving node straight toward its target at maximum
speed in fixed time steps, recording the sub-net count of the moving swarm
at every step.  The recovery time is the first instant the swarm is a
single component; nodes keep flying until everyone reaches their target, so
the series covers the whole maneuver.

Experiments sweep damage sizes and methods over seeded trials.  Every trial
derives its own random stream from (master seed, trial index), methods
within one trial share the same topology and damage draw (paired
comparison), and aggregation is a deterministic reduce, so a spec plus its
seeds reproduces every number exactly.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .damage import DamageError, apply_damage
from .gcn import Hyperparams, ModelWeights
from .planner import (METHOD_CENTERING, METHOD_LEARNED, RecoveryPlan,
                      plan_centering, plan_learned, verify_plan)
from .swarm import (DegreeStats, GenerationError, build_adjacency, count_subnets,
                    degree_stats, generate_swarm)

RESULTS_VERSION = 1

TRIAL_COLUMNS = [
    "method", "n", "n_d", "seed", "converged", "measured_T_rc_s",
    "planned_T_rc_s", "mean_degree", "max_degree", "k_star", "iterations_used",
]
SUMMARY_COLUMNS = [
    "method", "n", "n_d", "R_c", "mean_T", "std_T", "mean_deg", "max_deg",
]


@dataclass(frozen=True)
class SimResult:
    """Outcome of executing one plan.

    ``first_connected_s`` is None when the swarm never became one component
    (possible only for unverified plans); ``converged`` additionally requires
    connecting within the time budget.
    """

    subnet_series: np.ndarray
    first_connected_s: float | None
    converged: bool
    degree: DegreeStats
    final_positions: np.ndarray
    history: np.ndarray | None = None


def simulate_recovery(start: np.ndarray, plan: RecoveryPlan, max_speed: float,
                      step_s: float, comm_range: float, t_max: float,
                      keep_history: bool = False) -> SimResult:
    """Advance every node toward its target until the plan completes.

    Per step each node moves min(max_speed * step_s, remaining distance), so
    motion is overshoot-free and distance-to-target is non-increasing.  The
    series keeps going after first connection, to plan completion.
    """
    if max_speed <= 0 or step_s <= 0:
        raise ValueError("max_speed and step_s must be positive")
    positions = np.asarray(start, dtype=float).copy()
    targets = np.asarray(plan.targets, dtype=float)
    if positions.shape != targets.shape:
        raise ValueError("start and plan target shapes differ")

    max_dist = float(np.linalg.norm(targets - positions, axis=1).max())
    total_steps = int(math.ceil(max_dist / (max_speed * step_s) - 1e-12))

    series = [count_subnets(build_adjacency(positions, comm_range))]
    history = [positions.copy()] if keep_history else None
    first: float | None = 0.0 if series[0] == 1 else None

    reach = max_speed * step_s
    for step in range(1, total_steps + 1):
        delta = targets - positions
        dist = np.linalg.norm(delta, axis=1)
        arrive = dist <= reach
        moving = ~arrive & (dist > 0)
        positions[arrive] = targets[arrive]
        positions[moving] += delta[moving] * (reach / dist[moving])[:, None]
        ns = count_subnets(build_adjacency(positions, comm_range))
        series.append(ns)
        if keep_history:
            history.append(positions.copy())
        if first is None and ns == 1:
            first = step * step_s

    return SimResult(
        subnet_series=np.asarray(series, dtype=int),
        first_connected_s=first,
        converged=first is not None and first <= t_max + 1e-9,
        degree=degree_stats(build_adjacency(positions, comm_range)),
        final_positions=positions,
        history=np.asarray(history) if keep_history else None,
    )


@dataclass(frozen=True)
class ExperimentSpec:
    """Sweep definition: swarm parameters, damage sizes, trials, methods.

    ``t_max`` of None resolves to side / (2 * max_speed).  ``seeds`` may pin
    explicit per-trial seeds; otherwise they derive from ``master_seed`` so
    that growing ``trials`` keeps the existing trials identical.
    """

    n: int
    density_per_km2: float = 200.0
    comm_range: float = 120.0
    max_speed: float = 10.0
    step_s: float = 0.1
    damage_sizes: tuple[int, ...] = (100,)
    trials: int = 50
    master_seed: int = 0
    seeds: tuple[int, ...] | None = None
    methods: tuple[str, ...] = (METHOD_CENTERING,)
    t_max: float | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.step_s <= 0:
            raise ValueError("step_s must be positive")
        if self.seeds is not None and len(self.seeds) < self.trials:
            raise ValueError("seeds must cover every trial")

    @property
    def side(self) -> float:
        return 1000.0 * math.sqrt(self.n / self.density_per_km2)

    def resolve_t_max(self) -> float:
        return self.side / (2.0 * self.max_speed) if self.t_max is None else self.t_max

    def trial_seeds(self) -> tuple[int, ...]:
        if self.seeds is not None:
            return tuple(self.seeds[: self.trials])
        return derive_trial_seeds(self.master_seed, self.trials)


def derive_trial_seeds(master_seed: int, count: int) -> tuple[int, ...]:
    """Per-trial seeds keyed by index, stable under growing the count."""
    return tuple(
        int(np.random.SeedSequence(master_seed, spawn_key=(i,)).generate_state(1)[0])
        for i in range(count)
    )


@dataclass(frozen=True)
class TrialRecord:
    method: str
    n: int
    n_d: int
    seed: int
    skipped: bool = False
    skip_reason: str | None = None
    converged: bool = False
    measured_s: float | None = None
    planned_s: float | None = None
    mean_degree: float | None = None
    max_degree: int | None = None
    k_star: int | None = None
    iterations: int = 0
    subnet_series: tuple[int, ...] = ()
    final_degrees: tuple[int, ...] = ()


@dataclass(frozen=True)
class CellSummary:
    method: str
    n: int
    n_d: int
    r_c: float | None
    mean_t: float | None
    std_t: float | None
    mean_deg: float | None
    max_deg: float | None
    trials: int
    skipped: int
    degree_cdf: tuple[float, ...] = ()


@dataclass(frozen=True)
class ExperimentResults:
    spec: ExperimentSpec
    trials: tuple[TrialRecord, ...]
    summary: tuple[CellSummary, ...]


def _run_trial(spec: ExperimentSpec, n_d: int, seed: int,
               weights: ModelWeights | None, config: Hyperparams) -> list[TrialRecord]:
    topo_seed, damage_seed, solve_seed = (
        int(s) for s in np.random.SeedSequence(seed).generate_state(3)
    )
    try:
        topology = generate_swarm(spec.n, spec.density_per_km2, spec.comm_range, topo_seed)
        scenario = apply_damage(topology, n_d, damage_seed, require_split=True)
    except (GenerationError, DamageError) as exc:
        return [
            TrialRecord(method=m, n=spec.n, n_d=n_d, seed=seed, skipped=True,
                        skip_reason=str(exc))
            for m in spec.methods
        ]

    start = topology.positions[scenario.remaining]
    t_max = spec.resolve_t_max()
    records = []
    for method in spec.methods:
        if method == METHOD_CENTERING:
            plan = plan_centering(topology, scenario, spec.max_speed)
        elif method == METHOD_LEARNED:
            if weights is None:
                raise ValueError("method 'ml-dagl' needs pretrained weights")
            plan = plan_learned(topology, scenario, weights, config, seed=solve_seed)
        else:
            raise ValueError(f"unknown method: {method!r}")
        if not verify_plan(plan, spec.comm_range):
            raise AssertionError(f"{method} produced a disconnected plan")
        sim = simulate_recovery(start, plan, spec.max_speed, spec.step_s,
                                spec.comm_range, t_max)
        degrees = np.asarray(
            build_adjacency(sim.final_positions, spec.comm_range)
        ).sum(axis=1).astype(int)
        records.append(TrialRecord(
            method=method, n=spec.n, n_d=n_d, seed=seed,
            converged=sim.converged, measured_s=sim.first_connected_s,
            planned_s=plan.planned_time,
            mean_degree=sim.degree.mean, max_degree=sim.degree.max_degree,
            k_star=plan.k_star, iterations=plan.iterations,
            subnet_series=tuple(int(v) for v in sim.subnet_series),
            final_degrees=tuple(int(d) for d in degrees),
        ))
    return records


_WORKER_STATE: dict = {}


def _init_worker(spec, weights, config):
    _WORKER_STATE["args"] = (spec, weights, config)


def _worker_trial(task):
    n_d, seed = task
    spec, weights, config = _WORKER_STATE["args"]
    return _run_trial(spec, n_d, seed, weights, config)


def _summarize(spec: ExperimentSpec, trials: list[TrialRecord]) -> list[CellSummary]:
    summary = []
    for n_d in spec.damage_sizes:
        for method in spec.methods:
            cell = [t for t in trials if t.method == method and t.n_d == n_d]
            eligible = [t for t in cell if not t.skipped]
            converged = [t for t in eligible if t.converged]
            times = np.asarray([t.measured_s for t in converged], dtype=float)
            degrees = np.concatenate(
                [np.asarray(t.final_degrees, dtype=int) for t in converged]
            ) if converged else np.empty(0, dtype=int)
            if degrees.size:
                max_d = int(degrees.max())
                cdf = tuple(float(np.mean(degrees <= d)) for d in range(max_d + 1))
            else:
                cdf = ()
            summary.append(CellSummary(
                method=method, n=spec.n, n_d=n_d,
                r_c=(len(converged) / len(eligible)) if eligible else None,
                mean_t=float(times.mean()) if times.size else None,
                std_t=float(times.std(ddof=1)) if times.size > 1 else
                      (0.0 if times.size == 1 else None),
                mean_deg=float(np.mean([t.mean_degree for t in converged]))
                         if converged else None,
                max_deg=float(np.mean([t.max_degree for t in converged]))
                        if converged else None,
                trials=len(eligible),
                skipped=len(cell) - len(eligible),
                degree_cdf=cdf,
            ))
    return summary


def run_experiment(spec: ExperimentSpec, weights: ModelWeights | None = None,
                   config: Hyperparams | None = None, jobs: int = 1) -> ExperimentResults:
    """Run the full sweep; deterministic for a fixed spec regardless of jobs.

    Generation or damage failures are recorded as skipped trials (with the
    reason) and excluded from the aggregates; they are never silently
    dropped.  Methods share each trial's topology and damage draw.
    """
    config = config or Hyperparams(max_speed=spec.max_speed)
    seeds = spec.trial_seeds()
    tasks = [(n_d, seeds[i]) for n_d in spec.damage_sizes for i in range(spec.trials)]

    trials: list[TrialRecord] = []
    if jobs > 1:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker,
            initargs=(spec, weights, config),
        ) as pool:
            for records in pool.map(_worker_trial, tasks):
                trials.extend(records)
    else:
        for n_d, seed in tasks:
            trials.extend(_run_trial(spec, n_d, seed, weights, config))

    summary = _summarize(spec, trials)
    return ExperimentResults(spec=spec, trials=tuple(trials), summary=tuple(summary))


def _trial_row(t: TrialRecord) -> list:
    return [
        t.method, t.n, t.n_d, t.seed, int(t.converged),
        "" if t.measured_s is None else repr(float(t.measured_s)),
        "" if t.planned_s is None else repr(float(t.planned_s)),
        "" if t.mean_degree is None else repr(float(t.mean_degree)),
        "" if t.max_degree is None else t.max_degree,
        "" if t.k_star is None else t.k_star,
        t.iterations,
    ]


def results_to_dict(results: ExperimentResults) -> dict:
    """JSON-ready dict (None for missing values; round-trips exactly)."""
    spec = results.spec
    return {
        "version": RESULTS_VERSION,
        "spec": {
            "n": spec.n, "density_per_km2": spec.density_per_km2,
            "d_tr_m": spec.comm_range, "v_max_mps": spec.max_speed,
            "step_s": spec.step_s, "damage_sizes": list(spec.damage_sizes),
            "trials": spec.trials, "master_seed": spec.master_seed,
            "seeds": list(spec.trial_seeds()), "methods": list(spec.methods),
            "t_max_s": spec.resolve_t_max(),
        },
        "trials": [
            {
                "method": t.method, "n": t.n, "n_d": t.n_d, "seed": t.seed,
                "skipped": t.skipped, "skip_reason": t.skip_reason,
                "converged": t.converged, "measured_T_rc_s": t.measured_s,
                "planned_T_rc_s": t.planned_s, "mean_degree": t.mean_degree,
                "max_degree": t.max_degree, "k_star": t.k_star,
                "iterations_used": t.iterations,
                "subnet_series": list(t.subnet_series),
                "final_degrees": list(t.final_degrees),
            }
            for t in results.trials
        ],
        "summary": [
            {
                "method": s.method, "n": s.n, "n_d": s.n_d, "R_c": s.r_c,
                "mean_T": s.mean_t, "std_T": s.std_t, "mean_deg": s.mean_deg,
                "max_deg": s.max_deg, "trials": s.trials, "skipped": s.skipped,
                "degree_cdf": list(s.degree_cdf),
            }
            for s in results.summary
        ],
    }


def export_results(results: ExperimentResults, out_dir: str | Path) -> dict[str, Path]:
    """Write per-trial CSV, summary CSV, JSON, and plot-ready series files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "trials": out / "trials.csv",
        "summary": out / "summary.csv",
        "json": out / "results.json",
        "subnet_series": out / "subnet_series.csv",
        "degree_cdf": out / "degree_cdf.csv",
    }

    with open(paths["trials"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIAL_COLUMNS)
        for t in results.trials:
            if not t.skipped:
                writer.writerow(_trial_row(t))

    with open(paths["summary"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for s in results.summary:
            writer.writerow([
                s.method, s.n, s.n_d,
                "" if s.r_c is None else repr(float(s.r_c)),
                "" if s.mean_t is None else repr(float(s.mean_t)),
                "" if s.std_t is None else repr(float(s.std_t)),
                "" if s.mean_deg is None else repr(float(s.mean_deg)),
                "" if s.max_deg is None else repr(float(s.max_deg)),
            ])

    paths["json"].write_text(json.dumps(results_to_dict(results), indent=2) + "\n")

    with open(paths["subnet_series"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "n", "n_d", "seed", "step", "t_s", "n_subnets"])
        for t in results.trials:
            for step, ns in enumerate(t.subnet_series):
                writer.writerow([t.method, t.n, t.n_d, t.seed, step,
                                 repr(step * results.spec.step_s), ns])

    with open(paths["degree_cdf"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "n", "n_d", "degree", "cumulative_fraction"])
        for s in results.summary:
            for d, frac in enumerate(s.degree_cdf):
                writer.writerow([s.method, s.n, s.n_d, d, repr(frac)])

    return paths
