"""Domain types shared by every scheduling policy.

Holds the static per-function model, single invocations, the running-average
estimators used for service times and inter-arrival times, and the
per-function flow queue whose virtual time drives the fair scheduler.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from enum import Enum


class StartState(str, Enum):
    """Thermal state of a function's container when an invocation starts."""

    GPU_WARM = "gpu_warm"
    HOST_WARM = "host_warm"
    COLD = "cold"


class QueueState(str, Enum):
    ACTIVE = "active"
    THROTTLED = "throttled"
    INACTIVE = "inactive"


@dataclass
class FunctionProfile:
    """Static model of one function: execution times, footprint, weight."""

    name: str
    warm_exec_s: float
    cold_exec_s: float
    mem_mb: float
    compute_share: float = 0.38
    weight: float = 1.0

    def __post_init__(self) -> None:
        if self.warm_exec_s <= 0:
            raise ValueError(f"{self.name}: warm_exec_s must be > 0")
        if self.cold_exec_s < self.warm_exec_s:
            raise ValueError(f"{self.name}: cold_exec_s must be >= warm_exec_s")
        if self.mem_mb <= 0:
            raise ValueError(f"{self.name}: mem_mb must be > 0")
        if not 0 < self.compute_share <= 1:
            raise ValueError(f"{self.name}: compute_share must be in (0, 1]")
        if self.weight <= 0:
            raise ValueError(f"{self.name}: weight must be > 0")


_INVOCATION_SEQ = 0


@dataclass
class Invocation:
    """One request travelling through the system."""

    function: str
    arrival_s: float
    start_tag: float = 0.0
    dispatch_s: float | None = None
    complete_s: float | None = None
    start_state: StartState | None = None
    uid: int = field(default=-1)

    def __post_init__(self) -> None:
        global _INVOCATION_SEQ
        if self.uid < 0:
            self.uid = _INVOCATION_SEQ
            _INVOCATION_SEQ += 1


@dataclass
class RunningMean:
    """All-history arithmetic mean, updated one sample at a time."""

    count: int = 0
    mean: float = 0.0

    def record(self, x: float) -> None:
        if x < 0:
            raise ValueError(f"negative sample: {x}")
        self.count += 1
        self.mean += (x - self.mean) / self.count


def record_sample(est: RunningMean, x: float) -> RunningMean:
    """Functional form of RunningMean.record, returning the estimator."""
    est.record(x)
    return est


@dataclass
class FlowQueue:
    """Per-function dispatch queue with virtual-time bookkeeping.

    vt is the service accrued by this queue, in seconds of (estimated)
    execution time.  It never decreases; the only adjustment besides
    dispatch increments is the reactivation clamp in enqueue(), which can
    only raise it.
    """

    function: str
    vt: float = 0.0
    state: QueueState = QueueState.INACTIVE
    pending: deque[Invocation] = field(default_factory=deque)
    in_flight: int = 0
    last_exec_s: float = 0.0
    tau: RunningMean = field(default_factory=RunningMean)
    iat: RunningMean = field(default_factory=RunningMean)
    last_arrival_s: float | None = None
    last_start_tag: float = 0.0

    def backlogged(self) -> bool:
        return len(self.pending) > 0 or self.in_flight > 0

    def enqueue(self, inv: Invocation, global_vt: float, now: float) -> None:
        """Append an arrival, reactivating (and clamping) an inactive queue.

        A queue returning from inactivity must not replay service credit it
        did not use, so its vt is clamped up to the global virtual time.
        Start tags are kept monotone per queue even when a shrinking
        execution-time estimate would lower the positional term.
        """
        if self.state is QueueState.INACTIVE:
            self.vt = max(self.vt, global_vt)
            self.state = QueueState.ACTIVE
        inv.start_tag = max(
            self.last_start_tag, self.vt + len(self.pending) * self.tau.mean
        )
        self.last_start_tag = inv.start_tag
        self.pending.append(inv)
        if self.last_arrival_s is not None:
            self.iat.record(now - self.last_arrival_s)
        self.last_arrival_s = now

    def ttl(self, alpha: float, default_ttl_s: float) -> float:
        """Keep-alive grace period for an empty queue: alpha x mean IAT.

        Falls back to default_ttl_s until two arrivals have been seen;
        alpha = 0 disables anticipation entirely.
        """
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        if alpha == 0:
            return 0.0
        if self.iat.count >= 1:
            return alpha * self.iat.mean
        return default_ttl_s


PROFILE_COLUMNS = ["name", "warm_s", "cold_s", "mem_mb", "compute_share", "weight"]


def load_profiles(path: str) -> dict[str, FunctionProfile]:
    """Parse the function profile CSV (strict header, '.' decimals only)."""
    profiles: dict[str, FunctionProfile] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty profile file, header required") from None
        if header != PROFILE_COLUMNS:
            raise ValueError(
                f"{path}: bad header {header!r}, expected {PROFILE_COLUMNS!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(PROFILE_COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected {len(PROFILE_COLUMNS)} columns")
            name = row[0].strip()
            try:
                values = [_strict_float(v) for v in row[1:]]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if name in profiles:
                raise ValueError(f"{path}:{lineno}: duplicate function {name!r}")
            try:
                profiles[name] = FunctionProfile(name, *values)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return profiles


def save_profiles(profiles: dict[str, FunctionProfile], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PROFILE_COLUMNS)
        for p in profiles.values():
            writer.writerow(
                [p.name, p.warm_exec_s, p.cold_exec_s, p.mem_mb, p.compute_share, p.weight]
            )


def _strict_float(text: str) -> float:
    text = text.strip()
    if "," in text:
        raise ValueError(f"decimal comma not allowed: {text!r}")
    return float(text)
