"""Post-processing of invocation records and audit logs.

Everything here is pure and re-entrant: records in, reports and files out.
File formats are bit-exact (LF endings, %.6f numerics, UTF-8) so identical
simulations export identical bytes.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

from .mqfq import SchedulerConfig, fairness_bound


@dataclass
class InvocationRecord:
    """Immutable metrics row emitted when an invocation completes."""

    function: str
    arrival_s: float
    dispatch_s: float
    complete_s: float
    start_state: str
    device: int

    @property
    def queue_latency_s(self) -> float:
        return self.dispatch_s - self.arrival_s

    @property
    def exec_s(self) -> float:
        return self.complete_s - self.dispatch_s

    @property
    def latency_s(self) -> float:
        return self.complete_s - self.arrival_s


@dataclass
class WindowReport:
    """Service accounting for one fixed window.

    service maps each function to GPU time received inside the window;
    qualified lists the functions backlogged throughout it.  The gap/bound
    comparison needs at least one qualified function; without any, the
    window is reported as not comparable.
    """

    window_start_s: float
    window_s: float
    service: dict[str, float] = field(default_factory=dict)
    qualified: list[str] = field(default_factory=list)
    comparable: bool = False
    max_gap: float = 0.0
    bound: float = 0.0
    bound_conservative: float = 0.0
    violated: bool = False


def weighted_avg_latency(records: list[InvocationRecord]) -> float:
    """Sum over functions of N_f * mean latency, divided by total N.

    Algebraically the grand mean over all records; computed per-function to
    mirror how the headline metric is defined.
    """
    if not records:
        raise ValueError("no records")
    totals: dict[str, tuple[int, float]] = {}
    for r in records:
        n, s = totals.get(r.function, (0, 0.0))
        totals[r.function] = (n + 1, s + r.latency_s)
    num = sum(n * (s / n) for n, s in totals.values())
    den = sum(n for n, _ in totals.values())
    return num / den


def cold_hit_rate(records: list[InvocationRecord]) -> float:
    """Fraction of invocations that started with no container at all."""
    if not records:
        return 0.0
    return sum(1 for r in records if r.start_state == "cold") / len(records)


def _backlog_intervals(backlog_log) -> dict[str, list[tuple[float, float]]]:
    intervals: dict[str, list[tuple[float, float]]] = {}
    open_at: dict[str, float] = {}
    for t, function, is_backlogged in backlog_log:
        if is_backlogged:
            open_at[function] = t
        else:
            start = open_at.pop(function, None)
            if start is not None:
                intervals.setdefault(function, []).append((start, t))
    for function, start in open_at.items():
        intervals.setdefault(function, []).append((start, math.inf))
    return intervals


def _overlap(a0: float, a1: float, b0: float, b1: float) -> float:
    return max(0.0, min(a1, b1) - max(a0, b0))


def service_gap_report(records: list[InvocationRecord], audit,
                       cfg: SchedulerConfig, window_s: float = 30.0,
                       ) -> list[WindowReport]:
    """Per-window service gaps between co-backlogged functions vs. the bound.

    A function qualifies for a window when it is backlogged (pending or in
    flight) for the window's whole span, judged from the backlog
    transitions in the audit log.  Service is the pure execution component
    (the same currency virtual time charges; cold-init and prefetch
    overheads excluded) apportioned to the window by overlap.  The bound
    uses the window-average pure execution time of the max/min pair (the
    flow with larger normalized service first) and the largest effective D
    observed in the window; a variant with the pair's times added instead
    of subtracted is kept alongside as a conservative reference.
    """
    if not records:
        return []
    end = max(r.complete_s for r in records)
    intervals = _backlog_intervals(audit.backlog)
    exec_rows = audit.exec
    run_mean_exec: dict[str, tuple[int, float]] = {}
    for fn, _, _, pure in exec_rows:
        n, s = run_mean_exec.get(fn, (0, 0.0))
        run_mean_exec[fn] = (n + 1, s + pure)

    reports: list[WindowReport] = []
    w0 = 0.0
    while w0 < end:
        w1 = w0 + window_s
        report = WindowReport(window_start_s=w0, window_s=window_s)

        qualified = sorted(
            fn for fn, spans in intervals.items()
            if any(s <= w0 and e >= w1 for s, e in spans)
        )
        service: dict[str, float] = {fn: 0.0 for fn in qualified}
        window_exec: dict[str, tuple[int, float]] = {}
        for fn, dispatch_s, complete_s, pure in exec_rows:
            if fn not in service:
                continue
            got = _overlap(dispatch_s, complete_s, w0, w1)
            if got > 0.0:
                # spread the pure execution uniformly over the run's span
                service[fn] += pure * got / (complete_s - dispatch_s)
                n, s = window_exec.get(fn, (0, 0.0))
                window_exec[fn] = (n + 1, s + pure)
        report.service = service
        report.qualified = qualified

        if qualified:
            def tau_of(fn: str) -> float:
                if fn in window_exec:
                    n, s = window_exec[fn]
                    return s / n
                if fn in run_mean_exec:
                    n, s = run_mean_exec[fn]
                    return s / n
                return 0.0

            def weight_of(fn: str) -> float:
                return cfg.weights.get(fn, 1.0)

            normalized = {fn: service[fn] / weight_of(fn) for fn in qualified}
            hi = max(qualified, key=lambda fn: (normalized[fn], fn))
            lo = min(qualified, key=lambda fn: (normalized[fn], fn))
            d_eff = _max_effective_d(audit, w0, w1, cfg.d_max)
            report.comparable = True
            report.max_gap = normalized[hi] - normalized[lo]
            report.bound = fairness_bound(
                d_eff, cfg.t_overrun, tau_of(hi), tau_of(lo),
                weight_of(hi), weight_of(lo),
            )
            # same bound with the pair's times added rather than subtracted
            report.bound_conservative = (d_eff - 1) * (
                2.0 * cfg.t_overrun
                + tau_of(hi) / weight_of(hi)
                + tau_of(lo) / weight_of(lo)
            )
            report.violated = report.max_gap > report.bound
        reports.append(report)
        w0 = w1
    return reports


def _max_effective_d(audit, w0: float, w1: float, fallback: int) -> int:
    ds = [d for t, _, _, _, d in audit.util if w0 <= t < w1]
    return max(ds) if ds else fallback


def per_function_summary(records: list[InvocationRecord]) -> dict[str, dict]:
    """Mean/variance of latency and cold-hit percentage per function.

    Variance is the unbiased (n-1) estimator; zero when a function has a
    single record.
    """
    by_fn: dict[str, list[InvocationRecord]] = {}
    for r in records:
        by_fn.setdefault(r.function, []).append(r)
    out: dict[str, dict] = {}
    for fn in sorted(by_fn):
        rows = by_fn[fn]
        lats = [r.latency_s for r in rows]
        mean = sum(lats) / len(lats)
        if len(lats) > 1:
            var = sum((x - mean) ** 2 for x in lats) / (len(lats) - 1)
        else:
            var = 0.0
        colds = sum(1 for r in rows if r.start_state == "cold")
        out[fn] = {
            "mean_latency_s": mean,
            "var_latency_s": var,
            "count": len(rows),
            "cold_hit_pct": 100.0 * colds / len(rows),
        }
    return out


def mean_util(audit) -> float:
    if not audit.util:
        return 0.0
    return sum(u for _, _, u, _, _ in audit.util) / len(audit.util)


def summarize(policy: str, records: list[InvocationRecord],
              windows: list[WindowReport], audit, config_echo: dict,
              seed: int | None) -> dict:
    summary = {
        "policy": policy,
        "weighted_avg_latency_s": weighted_avg_latency(records) if records else 0.0,
        "per_function": per_function_summary(records),
        "cold_hit_pct": 100.0 * cold_hit_rate(records),
        "mean_util": mean_util(audit),
        "bound_violations": sum(1 for w in windows if w.violated),
        "bound_conservative_violations": sum(
            1 for w in windows if w.comparable and w.max_gap > w.bound_conservative
        ),
        "config": config_echo,
        "seed": seed,
    }
    return summary


INVOCATION_COLUMNS = ("function,arrival_s,dispatch_s,complete_s,start_state,"
                      "device,queue_latency_s,exec_s,latency_s")
WINDOW_COLUMNS = "window_start_s,max_gap,bound,violated"


def export(records: list[InvocationRecord], windows: list[WindowReport],
           summary: dict, out_dir: str) -> list[str]:
    """Write invocations.csv, windows.csv and summary.json atomically."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    lines = [INVOCATION_COLUMNS]
    for r in records:
        lines.append(
            f"{r.function},{r.arrival_s:.6f},{r.dispatch_s:.6f},{r.complete_s:.6f},"
            f"{r.start_state},{r.device},{r.queue_latency_s:.6f},"
            f"{r.exec_s:.6f},{r.latency_s:.6f}"
        )
    paths.append(_write_atomic(os.path.join(out_dir, "invocations.csv"), lines))

    lines = [WINDOW_COLUMNS]
    for w in windows:
        if w.comparable:
            lines.append(
                f"{w.window_start_s:.6f},{w.max_gap:.6f},{w.bound:.6f},"
                f"{'true' if w.violated else 'false'}"
            )
        else:
            lines.append(f"{w.window_start_s:.6f},,,false")
    paths.append(_write_atomic(os.path.join(out_dir, "windows.csv"), lines))

    payload = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    paths.append(_write_atomic(os.path.join(out_dir, "summary.json"), [payload], raw=True))
    return paths


def _write_atomic(path: str, lines: list[str], raw: bool = False) -> str:
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            if raw:
                fh.writelines(lines)
            else:
                fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc
    return path
