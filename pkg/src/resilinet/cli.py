"""Command-line pipeline: gen, damage, pretrain, plan, simulate, experiment, report.

Every command is reproducible from (config, seed) and echoes its effective
configuration into the output metadata.  Option precedence is flags over
config file over defaults; the RESILINET_SEED environment variable supplies
the seed when neither a flag nor the config file does.

Exit codes: 0 success, 2 configuration or usage error, 3 generation/damage
failure, 4 training divergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .damage import (DamageError, apply_damage, load_scenario, save_scenario)
from .gcn import (Hyperparams, TrainingDivergence, load_model, pretrain,
                  save_model, write_loss_curve)
from .planner import (METHOD_CENTERING, METHOD_LEARNED, load_plan, plan_centering,
                      plan_learned, save_plan, verify_plan)
from .simulate import (ExperimentSpec, SUMMARY_COLUMNS, export_results,
                       run_experiment, simulate_recovery)
from .swarm import GenerationError, generate_swarm, load_topology, save_topology

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GENERATION = 3
EXIT_DIVERGENCE = 4

DEFAULTS = {
    "n": 200,
    "density": 200.0,
    "comm_range": 120.0,
    "max_speed": 10.0,
    "step_s": 0.1,
    "seed": 0,
}


class ConfigError(ValueError):
    pass


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError("config file must contain a JSON object")
    return payload


def _pick(args: argparse.Namespace, config: dict, key: str, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _seed(args: argparse.Namespace, config: dict) -> int:
    value = _pick(args, config, "seed")
    if value is None:
        env = os.environ.get("RESILINET_SEED")
        value = int(env) if env else DEFAULTS["seed"]
    return int(value)


def _hyper(args: argparse.Namespace, config: dict, max_speed: float) -> Hyperparams:
    hyper_cfg = dict(config.get("hyper", {}))
    for key in ("hidden_dim", "blocks", "pretrain_iters", "online_iters",
                "dropout", "lagrange_s", "learning_rate"):
        value = getattr(args, key, None)
        if value is not None:
            hyper_cfg[key] = value
    return Hyperparams(max_speed=max_speed, **hyper_cfg)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (flags override it)")
    parser.add_argument("--seed", type=int, help="master seed (or RESILINET_SEED)")


def _add_swarm_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, help="number of nodes")
    parser.add_argument("--density", type=float, help="nodes per km^2")
    parser.add_argument("--comm-range", dest="comm_range", type=float,
                        help="communication range in meters")


def _add_hyper_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    parser.add_argument("--blocks", type=int)
    parser.add_argument("--iters", dest="pretrain_iters", type=int,
                        help="pretraining iterations")
    parser.add_argument("--online-iters", dest="online_iters", type=int)
    parser.add_argument("--dropout", type=float)
    parser.add_argument("--lagrange", dest="lagrange_s", type=float)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)


def cmd_gen(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    n = int(_pick(args, config, "n", DEFAULTS["n"]))
    density = float(_pick(args, config, "density", DEFAULTS["density"]))
    comm_range = float(_pick(args, config, "comm_range", DEFAULTS["comm_range"]))
    topology = generate_swarm(n, density, comm_range, _seed(args, config))
    save_topology(args.out, topology)
    print(f"wrote topology: n={n} side={topology.side:.1f} m -> {args.out}")
    return EXIT_OK


def cmd_damage(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    topology = load_topology(args.topology)
    scenario = apply_damage(topology, args.nd, _seed(args, config),
                            require_split=not args.no_require_split)
    save_scenario(args.out, scenario, topology_ref=str(args.topology))
    print(f"wrote scenario: destroyed {scenario.n_destroyed}/{topology.n} -> {args.out}")
    return EXIT_OK


def cmd_pretrain(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    n = int(_pick(args, config, "n", DEFAULTS["n"]))
    density = float(_pick(args, config, "density", DEFAULTS["density"]))
    comm_range = float(_pick(args, config, "comm_range", DEFAULTS["comm_range"]))
    max_speed = float(_pick(args, config, "max_speed", DEFAULTS["max_speed"]))
    hyper = _hyper(args, config, max_speed)
    seed = _seed(args, config)
    result = pretrain(n, density, comm_range, seed, hyper)
    save_model(args.out, result.weights, init_seed=seed, metadata=result.metadata)
    if args.loss_curve:
        write_loss_curve(args.loss_curve, result.curve)
    print(f"pretrained: loss {result.metadata['first_loss']:.3f} -> "
          f"{result.metadata['final_loss']:.3f} over {len(result.curve)} iters -> {args.out}")
    return EXIT_OK


def cmd_plan(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    topology = load_topology(args.topology)
    scenario = load_scenario(args.scenario, topology.n)
    max_speed = float(_pick(args, config, "max_speed", DEFAULTS["max_speed"]))
    if args.method == METHOD_CENTERING:
        plan = plan_centering(topology, scenario, max_speed)
    else:
        if not args.model:
            raise ConfigError("--model is required for method 'ml-dagl'")
        weights, _ = load_model(args.model)
        hyper = _hyper(args, config, max_speed)
        plan = plan_learned(topology, scenario, weights, hyper, seed=_seed(args, config))
    if not verify_plan(plan, topology.comm_range):
        raise AssertionError("planner produced a disconnected plan")
    save_plan(args.out, plan, scenario_ref=str(args.scenario))
    print(f"wrote plan: method={plan.method} planned_T={plan.planned_time:.2f} s -> {args.out}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    topology = load_topology(args.topology)
    scenario = load_scenario(args.scenario, topology.n)
    plan = load_plan(args.plan)
    max_speed = float(_pick(args, config, "max_speed", DEFAULTS["max_speed"]))
    step_s = float(_pick(args, config, "step_s", DEFAULTS["step_s"]))
    t_max = args.t_max if args.t_max is not None else topology.side / (2 * max_speed)
    start = topology.positions[scenario.remaining]
    sim = simulate_recovery(start, plan, max_speed, step_s, topology.comm_range, t_max)
    payload = {
        "version": 1,
        "plan_ref": str(args.plan),
        "converged": sim.converged,
        "measured_T_rc_s": sim.first_connected_s,
        "t_max_s": t_max,
        "mean_degree": sim.degree.mean,
        "max_degree": sim.degree.max_degree,
        "n_subnets_series": [int(v) for v in sim.subnet_series],
    }
    Path(args.out).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    if args.series:
        with open(args.series, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "t_s", "n_subnets"])
            for step, ns in enumerate(sim.subnet_series):
                writer.writerow([step, repr(step * step_s), int(ns)])
    measured = "none" if sim.first_connected_s is None else f"{sim.first_connected_s:.2f} s"
    print(f"simulated: converged={sim.converged} measured_T={measured} -> {args.out}")
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    methods = tuple(args.methods.split(",")) if args.methods else (METHOD_CENTERING,)
    for method in methods:
        if method not in (METHOD_CENTERING, METHOD_LEARNED):
            raise ConfigError(f"unknown method: {method!r}")
    weights = None
    if METHOD_LEARNED in methods:
        if not args.model:
            raise ConfigError("--model is required when methods include 'ml-dagl'")
        weights, _ = load_model(args.model)
    max_speed = float(_pick(args, config, "max_speed", DEFAULTS["max_speed"]))
    spec = ExperimentSpec(
        n=int(_pick(args, config, "n", DEFAULTS["n"])),
        density_per_km2=float(_pick(args, config, "density", DEFAULTS["density"])),
        comm_range=float(_pick(args, config, "comm_range", DEFAULTS["comm_range"])),
        max_speed=max_speed,
        step_s=float(_pick(args, config, "step_s", DEFAULTS["step_s"])),
        damage_sizes=tuple(int(v) for v in args.nd.split(",")),
        trials=args.trials,
        master_seed=_seed(args, config),
        methods=methods,
        t_max=args.t_max,
    )
    hyper = _hyper(args, config, max_speed)
    results = run_experiment(spec, weights=weights, config=hyper, jobs=args.jobs)
    paths = export_results(results, args.out_dir)
    for cell in results.summary:
        r_c = "n/a" if cell.r_c is None else f"{cell.r_c:.2f}"
        mean_t = "n/a" if cell.mean_t is None else f"{cell.mean_t:.2f}"
        print(f"{cell.method} n_d={cell.n_d}: R_c={r_c} mean_T={mean_t} s "
              f"({cell.trials} trials, {cell.skipped} skipped)")
    print(f"wrote results -> {paths['json'].parent}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    try:
        payload = json.loads(Path(args.results).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read results file: {exc}") from exc
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for s in payload.get("summary", []):
            writer.writerow([
                s["method"], s["n"], s["n_d"],
                "" if s["R_c"] is None else repr(float(s["R_c"])),
                "" if s["mean_T"] is None else repr(float(s["mean_T"])),
                "" if s["std_T"] is None else repr(float(s["std_T"])),
                "" if s["mean_deg"] is None else repr(float(s["mean_deg"])),
                "" if s["max_deg"] is None else repr(float(s["max_deg"])),
            ])
    with open(out / "trc_vs_nd.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "n_d", "mean_T", "std_T"])
        for s in payload.get("summary", []):
            writer.writerow([
                s["method"], s["n_d"],
                "" if s["mean_T"] is None else repr(float(s["mean_T"])),
                "" if s["std_T"] is None else repr(float(s["std_T"])),
            ])
    print(f"wrote report -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resilinet",
        description="Plan and simulate connectivity recovery for damaged swarm networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a connected swarm topology")
    _add_common(p)
    _add_swarm_params(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("damage", help="draw a damage scenario")
    _add_common(p)
    p.add_argument("--topology", required=True)
    p.add_argument("--nd", type=int, required=True, help="number of destroyed nodes")
    p.add_argument("--no-require-split", action="store_true",
                   help="accept draws that leave the survivors connected")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_damage)

    p = sub.add_parser("pretrain", help="pretrain planner weights")
    _add_common(p)
    _add_swarm_params(p)
    _add_hyper_params(p)
    p.add_argument("--max-speed", dest="max_speed", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-curve", help="also write the loss curve CSV here")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("plan", help="plan recovery targets for a scenario")
    _add_common(p)
    _add_hyper_params(p)
    p.add_argument("--topology", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--method", choices=[METHOD_LEARNED, METHOD_CENTERING],
                   default=METHOD_LEARNED)
    p.add_argument("--model", help="pretrained model file (ml-dagl)")
    p.add_argument("--max-speed", dest="max_speed", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="execute a plan step by step")
    _add_common(p)
    p.add_argument("--topology", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--max-speed", dest="max_speed", type=float)
    p.add_argument("--step", dest="step_s", type=float)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--series", help="also write the sub-net count series CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="run a seeded Monte-Carlo sweep")
    _add_common(p)
    _add_swarm_params(p)
    _add_hyper_params(p)
    p.add_argument("--nd", required=True, help="damage sizes, comma separated")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--methods", help="comma separated: centering,ml-dagl")
    p.add_argument("--model", help="pretrained model file (for ml-dagl)")
    p.add_argument("--max-speed", dest="max_speed", type=float)
    p.add_argument("--step", dest="step_s", type=float)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--jobs", type=int, default=1, help="parallel trials")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="re-derive summary CSVs from a results JSON")
    p.add_argument("--results", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GenerationError, DamageError) as exc:
        print(f"generation failure: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except TrainingDivergence as exc:
        print(f"training divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
