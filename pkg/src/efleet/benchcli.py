"""Command-line harness: instance generation, policy evaluation, benchmark
tables with win ratios, trace replay, the protocol server, and figure export.

Exit codes: 0 success, 1 divergence/assertion failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import statistics
import sys
from pathlib import Path

from . import engine, envserver, planners
from .netmodel import (
    GenerationInfeasible,
    GeneratorParams,
    NetworkInstance,
    ParseError,
    ValidationError,
    generate_instance,
    load_instance,
    save_instance,
)

METRIC_FIELDS = (
    "reward_total",
    "success",
    "deliveries_completed",
    "charging_sessions",
    "charging_time_h",
    "waiting_time_h",
    "routing_time_h",
    "unloading_time_h",
    "total_time_h",
    "avg_finish_soc",
    "wall_clock_s",
)

POLICY_NAMES = ("heuristic", "planner", "random", "random-unmasked")


class UsageError(RuntimeError):
    pass


def _read_instance(path: str) -> NetworkInstance:
    try:
        return load_instance(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read instance {path}: {exc}") from exc
    except (ParseError, ValidationError) as exc:
        raise UsageError(f"invalid instance {path}: {exc}") from exc


def _deterministic_copy(inst: NetworkInstance) -> NetworkInstance:
    sp = dataclasses.replace(inst.config.stochastic, deterministic=True)
    cfg = dataclasses.replace(inst.config, stochastic=sp)
    return dataclasses.replace(inst, config=cfg)


def make_policy(name: str):
    """Fresh policy callable for one episode."""
    if name == "heuristic":
        return planners.heuristic_policy
    if name == "planner":
        return planners.PlannerPolicy()
    if name == "random":
        return planners.RandomPolicy()
    if name == "random-unmasked":
        return planners.RandomPolicy(allow_infeasible=True)
    if name.startswith("extern:"):
        return envserver.ExternPolicy(name.split(":", 1)[1])
    raise UsageError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)} or extern:HOST:PORT")


def _instance_provider(args) -> tuple:
    """Return (provider(k) -> instance, description). Generated instances vary by scenario."""
    if args.instance:
        inst = _read_instance(args.instance)
        if getattr(args, "deterministic", False):
            inst = _deterministic_copy(inst)
        return (lambda k: inst), args.instance
    if args.gen_trucks is None:
        raise UsageError("pass --instance FILE or the --gen-* generation flags")
    params = GeneratorParams(
        n_nodes=args.gen_nodes,
        n_chargers=args.gen_chargers,
        n_trucks=args.gen_trucks,
        stops_per_truck=args.gen_stops,
        mode=args.gen_mode,
    )
    base_seed = args.gen_seed

    def provider(k: int) -> NetworkInstance:
        inst = generate_instance(params, base_seed + k)
        if getattr(args, "deterministic", False):
            inst = _deterministic_copy(inst)
        return inst

    return provider, f"generated({params.n_trucks} trucks, {params.stops_per_truck} stops)"


def _summarize(rows: list[dict]) -> dict[str, tuple[float, float]]:
    out = {}
    for fieldname in METRIC_FIELDS:
        vals = [float(r[fieldname]) for r in rows]
        mean = sum(vals) / len(vals) if vals else 0.0
        std = statistics.pstdev(vals) if len(vals) > 1 else 0.0
        out[fieldname] = (mean, std)
    return out


def _print_summary(title: str, rows: list[dict]) -> None:
    print(title)
    if not rows:
        print("  (no episodes)")
        return
    for fieldname, (mean, std) in _summarize(rows).items():
        print(f"  {fieldname:22s} {mean:12.6f} +/- {std:.6f}")


def _run_batch(provider, policy_name: str, episodes: int, seed: int, trace_dir: str | None) -> list[dict]:
    rows = []
    extern = make_policy(policy_name) if policy_name.startswith("extern:") else None
    for k in range(episodes):
        inst = provider(k)
        policy = extern if extern is not None else make_policy(policy_name)
        want_trace = trace_dir is not None
        metrics, trace = engine.run_episode(inst, policy, seed + k, record_trace=want_trace)
        if want_trace:
            path = Path(trace_dir) / f"{policy_name.replace(':', '_')}_{seed + k}.trace.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            envserver.save_trace(trace, str(path))
        row = {"scenario_id": k, "policy": policy_name}
        row.update(metrics.to_dict())
        rows.append(row)
    if extern is not None:
        extern.close()
    return rows


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    params = GeneratorParams(
        n_nodes=args.nodes,
        n_chargers=args.chargers,
        n_trucks=args.trucks,
        stops_per_truck=args.stops,
        mode=args.mode,
    )
    inst = generate_instance(params, args.seed)
    Path(args.out).write_text(save_instance(inst), encoding="utf-8")
    print(f"wrote {args.out} (digest {inst.digest()})")
    return 0


def cmd_run(args) -> int:
    provider, desc = _instance_provider(args)
    rows = _run_batch(provider, args.policy, args.episodes, args.seed, args.trace_dir)
    _print_summary(f"{args.policy} on {desc}, {args.episodes} episodes (seed {args.seed})", rows)
    return 0


def cmd_bench(args) -> int:
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    if len(policies) < 2:
        raise UsageError("bench needs at least two policies (comma-separated)")
    provider, desc = _instance_provider(args)

    all_rows: list[dict] = []
    results: list[list[dict]] = []
    for name in policies:
        rows = _run_batch(provider, name, args.episodes, args.seed, None)
        results.append(rows)
        all_rows.extend(rows)

    wins = [0] * len(policies)
    ties: list[int] = []
    for k in range(args.episodes):
        rewards = [results[i][k]["reward_total"] for i in range(len(policies))]
        best = max(rewards)
        leaders = [i for i, v in enumerate(rewards) if v == best]
        if len(leaders) == 1:
            wins[leaders[0]] += 1
        else:
            ties.append(k)

    ref_idx = policies.index("planner") if "planner" in policies else 0
    ref_mean = _summarize(results[ref_idx])["reward_total"][0] if args.episodes else 0.0

    print(
        f"benchmark on {desc}, {args.episodes} scenarios (seed {args.seed}), "
        f"reference {policies[ref_idx]}"
    )
    for i, name in enumerate(policies):
        _print_summary(f"policy {name}", results[i])
        mean = _summarize(results[i])["reward_total"][0] if args.episodes else 0.0
        norm = mean / ref_mean if ref_mean else float("nan")
        print(f"  normalized_reward      {norm:.6f}")
        print(f"  wins                   {wins[i]}")
    print(f"ties: {len(ties)}" + (f" (scenarios {ties})" if ties else ""))

    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=["scenario_id", "policy", *METRIC_FIELDS])
            writer.writeheader()
            for row in all_rows:
                writer.writerow(row)
        print(f"wrote {args.csv}")
    return 0


def cmd_replay(args) -> int:
    inst = _read_instance(args.instance)
    try:
        trace = envserver.load_trace(args.trace)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read trace {args.trace}: {exc}") from exc
    report = envserver.replay(trace, inst)
    if report.error is not None:
        print(f"replay error: {report.error}", file=sys.stderr)
        return 2
    if not report.ok:
        first = report.first_divergence()
        print(
            f"divergence at record {first['record']} field {first['field']}: "
            f"expected {first['expected']!r}, got {first['actual']!r}",
            file=sys.stderr,
        )
        return 1
    print(f"replay ok: {report.checked_records} records verified, zero divergences")
    return 0


def cmd_serve(args) -> int:
    inst = _read_instance(args.instance) if args.instance else None
    envserver.serve(args.transport, default_instance=inst)
    return 0


def cmd_plots(args) -> int:
    from . import report as report_mod

    written = report_mod.render_figures(args.csv, args.out_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", help="instance JSON file")
    p.add_argument("--gen-trucks", type=int, default=None, help="generate instances: fleet size")
    p.add_argument("--gen-stops", type=int, default=3, help="generate instances: stops per truck")
    p.add_argument("--gen-nodes", type=int, default=20, help="generate instances: node count")
    p.add_argument("--gen-chargers", type=int, default=3, help="generate instances: charger count")
    p.add_argument("--gen-seed", type=int, default=0, help="generate instances: base seed")
    p.add_argument("--gen-mode", choices=("sequential", "flexible"), default="sequential")
    p.add_argument("--deterministic", action="store_true", help="disable exogenous noise")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="efleet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance file")
    p.add_argument("--trucks", type=int, required=True)
    p.add_argument("--stops", type=int, required=True)
    p.add_argument("--nodes", type=int, default=20)
    p.add_argument("--chargers", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("sequential", "flexible"), default="sequential")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="evaluate one policy over seeded episodes")
    _add_instance_flags(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace-dir", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="compare policies under common random numbers")
    _add_instance_flags(p)
    p.add_argument("--policies", required=True, help="comma-separated policy names")
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay", help="verify a trace against an instance")
    p.add_argument("--trace", required=True)
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="serve the environment protocol")
    p.add_argument("--transport", default="stdio", help="stdio or tcp:PORT")
    p.add_argument("--instance", default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("plots", help="render figures from a bench CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_plots)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GenerationInfeasible, ParseError, ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
