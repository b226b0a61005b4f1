"""Experiment runner: run one config, compare policies, sweep a parameter,
or generate a workload trace.

Exit codes: 0 success, 2 usage/validation problems, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import ConfigError, ExperimentConfig, load_config
from .device import DeviceSet
from .engine import run_simulation
from .metrics import export, service_gap_report, summarize
from .policies import PolicyKind, make_policy
from .workload import gen_zipf, save_trace
from . import metrics as _metrics

SWEEP_PARAMS = ("T", "alpha", "d_max", "pool_max_containers", "rate_rps")


def default_out_dir() -> str:
    return os.environ.get("GPUFAIRQ_OUT", "out")


def run_experiment(cfg: ExperimentConfig, out_dir: str, profiles=None, trace=None):
    """One simulation end to end; returns (records, windows, summary)."""
    if profiles is None:
        profiles = cfg.build_profiles()
    if trace is None:
        trace = cfg.build_trace(profiles)
    sched_cfg = cfg.scheduler_config()
    pool_enabled = cfg.pool_enabled and not cfg.policy.pool_disabled
    devices = DeviceSet(cfg.device_configs(pool_enabled=pool_enabled))
    policy = make_policy(cfg.policy, profiles, sched_cfg)
    result = run_simulation(trace, profiles, policy, devices,
                            tau_includes_overheads=cfg.tau_includes_overheads)
    windows = service_gap_report(result.records, result.audit, sched_cfg)
    summary = summarize(cfg.policy.value, result.records, windows,
                        result.audit, cfg.echo, cfg.seed)
    export(result.records, windows, summary, out_dir)
    return result.records, windows, summary


def _summary_line(summary: dict) -> str:
    return (f"policy={summary['policy']} "
            f"weighted_avg_latency_s={summary['weighted_avg_latency_s']:.3f} "
            f"cold_hit_pct={summary['cold_hit_pct']:.1f} "
            f"bound_violations={summary['bound_violations']}")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.policy:
        cfg.policy = PolicyKind(args.policy)
    if args.seed is not None:
        cfg.seed = args.seed
    out_dir = args.out or cfg.out_dir or default_out_dir()
    _, _, summary = run_experiment(cfg, out_dir)
    print(_summary_line(summary))
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    policies = []
    for name in args.policies.split(","):
        kind = PolicyKind(name.strip())
        if kind in policies:
            print(f"warning: policy {kind.value} listed twice, ignoring duplicate",
                  file=sys.stderr)
            continue
        policies.append(kind)
    if len(policies) < 2:
        raise ConfigError("compare needs at least 2 distinct policies")

    out_dir = args.out or cfg.out_dir or default_out_dir()
    os.makedirs(out_dir, exist_ok=True)

    # materialize one trace so every policy sees identical arrivals
    profiles = cfg.build_profiles()
    trace = cfg.build_trace(profiles)
    save_trace(trace, os.path.join(out_dir, "trace.csv"))

    rows = []
    for kind in policies:
        run_cfg = replace(cfg, policy=kind, echo=dict(cfg.echo))
        records, windows, summary = run_experiment(
            run_cfg, os.path.join(out_dir, kind.value), profiles=profiles, trace=trace
        )
        latencies = sorted(r.latency_s for r in records)
        rows.append({
            "policy": kind.value,
            "weighted_avg_latency_s": summary["weighted_avg_latency_s"],
            "p50": _percentile(latencies, 50.0),
            "p99": _percentile(latencies, 99.0),
            "cold_hit_pct": summary["cold_hit_pct"],
            "max_gap_worst_window": max(
                (w.max_gap for w in windows if w.comparable), default=0.0
            ),
        })
        print(_summary_line(summary))

    lines = ["policy,weighted_avg_latency_s,p50,p99,cold_hit_pct,max_gap_worst_window"]
    for row in rows:
        lines.append(
            f"{row['policy']},{row['weighted_avg_latency_s']:.6f},{row['p50']:.6f},"
            f"{row['p99']:.6f},{row['cold_hit_pct']:.6f},{row['max_gap_worst_window']:.6f}"
        )
    _metrics._write_atomic(os.path.join(out_dir, "compare.csv"), lines)
    return 0


def _percentile(sorted_values: list[float], q: float) -> float:
    if not sorted_values:
        return 0.0
    if len(sorted_values) == 1:
        return sorted_values[0]
    pos = (q / 100.0) * (len(sorted_values) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(sorted_values) - 1)
    frac = pos - lo
    return sorted_values[lo] * (1 - frac) + sorted_values[hi] * frac


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep param {args.param!r}, "
                          f"choose from {', '.join(SWEEP_PARAMS)}")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad sweep values: {exc}") from None
    if not values:
        raise ConfigError("sweep needs at least one value")

    out_dir = args.out or cfg.out_dir or default_out_dir()
    os.makedirs(out_dir, exist_ok=True)

    rows = []
    for value in values:
        run_cfg = replace(cfg, echo=dict(cfg.echo))
        _apply_sweep_param(run_cfg, args.param, value)
        label = _format_value(value)
        sub = os.path.join(out_dir, f"{args.param}_{label}")
        records, windows, summary = run_experiment(run_cfg, sub)
        rows.append((label, summary["weighted_avg_latency_s"],
                     summary["cold_hit_pct"], summary["mean_util"]))
        print(f"{args.param}={label} " + _summary_line(summary))

    lines = ["value,weighted_avg_latency_s,cold_hit_pct,mean_util"]
    for label, lat, cold, util in rows:
        lines.append(f"{label},{lat:.6f},{cold:.6f},{util:.6f}")
    _metrics._write_atomic(os.path.join(out_dir, "sweep.csv"), lines)
    return 0


def _format_value(value: float) -> str:
    return str(int(value)) if value == int(value) else str(value)


def _apply_sweep_param(cfg: ExperimentConfig, param: str, value: float) -> None:
    if param == "T":
        cfg.t_overrun = value
    elif param == "alpha":
        cfg.alpha = value
    elif param == "d_max":
        cfg.d_max = int(value)
    elif param == "pool_max_containers":
        cfg.pool_max_containers = int(value)
    elif param == "rate_rps":
        if cfg.rate_rps is None:
            raise ConfigError("rate_rps sweep needs a generator workload")
        cfg.rate_rps = value


def cmd_generate(args) -> int:
    if args.functions < 1 or args.rate <= 0 or args.duration < 0 or args.zipf <= 0:
        raise ConfigError("generate: functions >= 1, zipf > 0, rate > 0, duration >= 0")
    trace = gen_zipf(args.functions, args.zipf, args.rate, args.duration, args.seed)
    save_trace(trace, args.out)
    print(f"wrote {len(trace.entries)} arrivals to {args.out}")
    return 0


CONFIG_KEYS = """\
config file sections and keys (key = value lines):
  [scheduler] policy (mqfq|fcfs|batch|sjf|fcfs_naive), t, d_max, alpha,
              dynamic_d, default_ttl_s, tau_includes_overheads
  [device]    count, mem_mb, d_max, util_threshold, pcie_mb_per_s,
              interference_beta, monitor_period_s, util_window_s,
              pool_max_containers, pool_enabled, dynamic_d, prefetch_overlap_s
  [workload]  profiles_path, trace_path  -- or a generator spec:
              n_functions, zipf_s, rate_rps, duration_s, copies,
              mem_mb, compute_share
  [sim]       seed
  [output]    dir
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpufairq",
        description="Fair-queueing simulator for serverless GPU functions",
        epilog=CONFIG_KEYS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--policy", choices=[k.value for k in PolicyKind])
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out", help="output directory (default $GPUFAIRQ_OUT or ./out)")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several policies on one trace")
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--policies", required=True,
                       help="comma-separated policy names")
    p_cmp.add_argument("--seed", type=int)
    p_cmp.add_argument("--out")
    p_cmp.set_defaults(func=cmd_compare)

    p_sweep = sub.add_parser("sweep", help="run one config across parameter values")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--param", required=True,
                         help=f"one of {', '.join(SWEEP_PARAMS)}")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--out")
    p_sweep.set_defaults(func=cmd_sweep)

    p_gen = sub.add_parser("generate", help="write a synthetic Zipf trace")
    p_gen.add_argument("--functions", type=int, required=True)
    p_gen.add_argument("--zipf", type=float, required=True)
    p_gen.add_argument("--rate", type=float, required=True)
    p_gen.add_argument("--duration", type=float, required=True)
    p_gen.add_argument("--seed", type=int, default=1)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_generate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
