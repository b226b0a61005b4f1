"""Workload generation and trace files.

Synthetic open-loop traces with Zipf-distributed per-function rates and
exponential inter-arrival times, plus strict CSV ingestion for externally
produced traces.  A small registry of reference function profiles
(warm/cold GPU timings measured on a V100-class part) is bundled; memory
footprints and compute shares are configuration, not measurements.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import FunctionProfile

# name, warm exec (s), cold exec (s); ordered by ascending warm time so that
# Zipf rank-1 traffic lands on the short interactive functions, matching how
# FaaS popularity skews in production traces
REFERENCE_FUNCTIONS = [
    ("isoneural", 0.026, 9.963),
    ("roberta", 0.268, 15.481),
    ("fft", 0.897, 3.322),
    ("pathfinder", 1.472, 1.797),
    ("needle", 1.979, 2.177),
    ("lud", 2.050, 2.359),
    ("imagenet", 2.253, 11.286),
    ("ffmpeg", 4.483, 4.612),
]

DEFAULT_MEM_MB = 1500.0
DEFAULT_COMPUTE_SHARE = 0.38


@dataclass
class Trace:
    """Ordered (arrival_s, function) pairs; equality compares entries only."""

    entries: list[tuple[float, str]]
    duration_s: float = field(compare=False, default=0.0)
    seed: int | None = field(compare=False, default=None)

    def function_names(self) -> list[str]:
        return sorted({name for _, name in self.entries})


def default_profiles(n_functions: int, mem_mb: float = DEFAULT_MEM_MB,
                     compute_share: float = DEFAULT_COMPUTE_SHARE,
                     weight: float = 1.0) -> dict[str, FunctionProfile]:
    """Registry of n functions cycling the bundled reference set.

    Copies beyond the first eight share their base profile under a _cK
    suffix (imagenet, ..., pathfinder, imagenet_c1, ...).
    """
    if n_functions < 1:
        raise ValueError("n_functions must be >= 1")
    profiles: dict[str, FunctionProfile] = {}
    base = len(REFERENCE_FUNCTIONS)
    for i in range(n_functions):
        name, warm, cold = REFERENCE_FUNCTIONS[i % base]
        copy = i // base
        if copy:
            name = f"{name}_c{copy}"
        profiles[name] = FunctionProfile(
            name=name, warm_exec_s=warm, cold_exec_s=cold,
            mem_mb=mem_mb, compute_share=compute_share, weight=weight,
        )
    return profiles


def zipf_rates(n_functions: int, s: float, total_rate_rps: float) -> list[float]:
    """Per-rank arrival rates proportional to rank^-s, summing to the total."""
    if s <= 0:
        raise ValueError("zipf parameter must be > 0")
    weights = [(k + 1) ** (-s) for k in range(n_functions)]
    norm = sum(weights)
    return [total_rate_rps * w / norm for w in weights]


def gen_zipf(n_functions: int, s: float, total_rate_rps: float,
             duration_s: float, seed: int,
             names: list[str] | None = None) -> Trace:
    """Open-loop trace: rank k gets rate ~ k^-s, exponential inter-arrivals.

    Each function draws from its own seeded substream, so the stream for a
    given rank does not depend on how many other functions exist.
    """
    if n_functions < 1:
        raise ValueError("n_functions must be >= 1")
    if total_rate_rps <= 0:
        raise ValueError("total_rate_rps must be > 0")
    if names is None:
        names = list(default_profiles(n_functions))
    if len(names) != n_functions:
        raise ValueError("names must match n_functions")
    rates = zipf_rates(n_functions, s, total_rate_rps)
    root = np.random.SeedSequence(seed)
    substreams = root.spawn(n_functions)
    entries: list[tuple[float, str]] = []
    for name, rate, substream in zip(names, rates, substreams):
        rng = np.random.default_rng(substream)
        t = 0.0
        while True:
            t += rng.exponential(1.0 / rate)
            if t >= duration_s:
                break
            entries.append((round(t, 6), name))
    entries.sort(key=lambda e: (e[0], e[1]))
    return Trace(entries=entries, duration_s=duration_s, seed=seed)


def scale_trace(trace: Trace, factor: float) -> Trace:
    """Divide every arrival time by the factor (rate multiplied by it)."""
    if factor <= 0:
        raise ValueError("factor must be > 0")
    entries = [(round(t / factor, 6), name) for t, name in trace.entries]
    return Trace(entries=entries, duration_s=trace.duration_s / factor, seed=trace.seed)


TRACE_COLUMNS = ["arrival_s", "function"]


def save_trace(trace: Trace, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for arrival_s, name in trace.entries:
            writer.writerow([f"{arrival_s:.6f}", name])


def load_trace(path: str, known_names: set[str] | None = None) -> Trace:
    """Parse and validate a trace CSV; errors carry the offending line number."""
    entries: list[tuple[float, str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty trace file, header required") from None
        if header != TRACE_COLUMNS:
            raise ValueError(f"{path}: bad header {header!r}, expected {TRACE_COLUMNS!r}")
        last = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns")
            try:
                arrival_s = float(row[0])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad arrival time {row[0]!r}") from None
            name = row[1].strip()
            if last is not None and arrival_s < last:
                raise ValueError(f"{path}:{lineno}: decreasing arrival time {arrival_s}")
            if known_names is not None and name not in known_names:
                raise ValueError(f"{path}:{lineno}: unknown function {name!r}")
            entries.append((arrival_s, name))
            last = arrival_s
    duration = entries[-1][0] if entries else 0.0
    return Trace(entries=entries, duration_s=duration, seed=None)
