"""Render simulator exports as figures.

Readers are strict about the CSV formats the simulator writes
(invocations.csv, windows.csv, compare.csv, sweep.csv); a missing or
renamed column raises a ValueError naming it.  Plot functions return the
matplotlib figure and axes so callers (and tests) can inspect the rendered
data, and save the image when an output path is given.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

WINDOW_S = 30.0


def read_csv_columns(path: str, required: list[str]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in required:
            if column not in header:
                raise ValueError(f"{path}: missing column {column!r}")
        return list(reader)


def plot_service_timeline(windows_path: str, invocations_path: str,
                          out_path: str | None = None):
    """Per-function service received in each fixed window, as one line per
    function (service = execution-time overlap with the window)."""
    read_csv_columns(windows_path, ["window_start_s", "max_gap", "bound", "violated"])
    rows = read_csv_columns(
        invocations_path,
        ["function", "arrival_s", "dispatch_s", "complete_s", "start_state",
         "device", "queue_latency_s", "exec_s", "latency_s"],
    )
    series: dict[str, dict[int, float]] = {}
    horizon = 0.0
    for row in rows:
        dispatch = float(row["dispatch_s"])
        complete = float(row["complete_s"])
        horizon = max(horizon, complete)
        window = int(dispatch // WINDOW_S)
        while window * WINDOW_S < complete:
            w0 = window * WINDOW_S
            got = min(complete, w0 + WINDOW_S) - max(dispatch, w0)
            if got > 0:
                per = series.setdefault(row["function"], {})
                per[window] = per.get(window, 0.0) + got
            window += 1

    fig, ax = plt.subplots(figsize=(8, 4))
    n_windows = int(horizon // WINDOW_S) + 1 if rows else 0
    xs = [w * WINDOW_S for w in range(n_windows)]
    for function in sorted(series):
        ys = [series[function].get(w, 0.0) for w in range(n_windows)]
        ax.plot(xs, ys, marker="o", markersize=3, label=function)
    ax.set_xlabel("time (s)")
    ax.set_ylabel(f"service per {WINDOW_S:.0f} s window (s)")
    if series:
        ax.legend(fontsize=8)
    ax.set_title("per-function service timeline")
    if out_path:
        fig.savefig(out_path, dpi=120, bbox_inches="tight")
    return fig, ax


def plot_latency_bars(compare_path: str, out_path: str | None = None):
    """Weighted average latency per policy from a compare.csv."""
    rows = read_csv_columns(
        compare_path,
        ["policy", "weighted_avg_latency_s", "p50", "p99", "cold_hit_pct",
         "max_gap_worst_window"],
    )
    policies = [row["policy"] for row in rows]
    latencies = [float(row["weighted_avg_latency_s"]) for row in rows]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(policies)), latencies, color="tab:blue")
    ax.set_xticks(range(len(policies)))
    ax.set_xticklabels(policies)
    ax.set_ylabel("weighted average latency (s)")
    ax.set_title("policy comparison")
    if out_path:
        fig.savefig(out_path, dpi=120, bbox_inches="tight")
    return fig, ax


def plot_miss_rate_curve(sweep_path: str, out_path: str | None = None):
    """Cold-hit percentage against pool size from a sweep.csv."""
    rows = read_csv_columns(
        sweep_path, ["value", "weighted_avg_latency_s", "cold_hit_pct", "mean_util"]
    )
    xs = [float(row["value"]) for row in rows]
    ys = [float(row["cold_hit_pct"]) for row in rows]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel("pool size (containers)")
    ax.set_ylabel("cold-hit %")
    ax.set_ylim(bottom=0)
    ax.set_title("miss-rate curve")
    if out_path:
        fig.savefig(out_path, dpi=120, bbox_inches="tight")
    return fig, ax


def plot_sweep_line(sweep_path: str, out_path: str | None = None):
    """Weighted average latency against the swept parameter value."""
    rows = read_csv_columns(
        sweep_path, ["value", "weighted_avg_latency_s", "cold_hit_pct", "mean_util"]
    )
    xs = [float(row["value"]) for row in rows]
    ys = [float(row["weighted_avg_latency_s"]) for row in rows]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, marker="s")
    ax.set_xlabel("parameter value")
    ax.set_ylabel("weighted average latency (s)")
    ax.set_title("parameter sweep")
    if out_path:
        fig.savefig(out_path, dpi=120, bbox_inches="tight")
    return fig, ax
