"""Deterministic discrete-event core.

Events are processed in (time, insertion-sequence) order; processing an
arrival, completion, or monitor tick re-runs the active policy's dispatch
until it yields nothing.  Identical inputs produce identical outputs: no
wall clock, no unordered iteration.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .core import FunctionProfile, Invocation
from .device import DeviceSet
from .metrics import InvocationRecord
from .policies import Policy
from .workload import Trace

ARRIVAL = 0
COMPLETION = 1
MONITOR_TICK = 2
QUEUE_EXPIRY = 3


@dataclass
class AuditLog:
    """Event-time observations backing the fairness and utilization reports."""

    dispatches: list = field(default_factory=list)
    # (time, function, backlogged?) transitions; backlogged = pending or in flight
    backlog: list[tuple[float, str, bool]] = field(default_factory=list)
    # (time, device, instantaneous util, moving average, effective D)
    util: list[tuple[float, int, float, float, int]] = field(default_factory=list)
    # (function, dispatch_s, complete_s, pure_exec_s): execution stripped of
    # cold-init and prefetch overheads, the currency virtual time charges
    exec: list[tuple[str, float, float, float]] = field(default_factory=list)


@dataclass
class SimResult:
    records: list[InvocationRecord]
    audit: AuditLog


class Simulation:
    def __init__(self, trace: Trace, profiles: dict[str, FunctionProfile],
                 policy: Policy, devices: DeviceSet,
                 tau_includes_overheads: bool = False):
        unknown = {name for _, name in trace.entries} - set(profiles)
        if unknown:
            raise ValueError(f"trace references unknown functions: {sorted(unknown)}")
        self.trace = trace
        self.profiles = profiles
        self.policy = policy
        self.devices = devices
        self.tau_includes_overheads = tau_includes_overheads

        self.now = 0.0
        self._heap: list[tuple[float, int, int, object]] = []
        self._seq = 0
        self._arrivals_left = 0
        self._monitor_scheduled = False
        self._inflight: dict[int, tuple[Invocation, object, float, float]] = {}
        self._backlog_count: dict[str, int] = {}

        self.records: list[InvocationRecord] = []
        self.audit = AuditLog()

        last = None
        for arrival_s, function in trace.entries:
            if last is not None and arrival_s < last:
                raise ValueError("trace arrival times must be non-decreasing")
            last = arrival_s
            self._push(arrival_s, ARRIVAL, Invocation(function=function, arrival_s=arrival_s))
            self._arrivals_left += 1
        if self._arrivals_left:
            self._schedule_monitor(self._monitor_period())

    def _monitor_period(self) -> float:
        return min(dev.cfg.monitor_period_s for dev in self.devices)

    def _push(self, time_s: float, kind: int, payload) -> None:
        if time_s < self.now:
            raise RuntimeError(f"event scheduled in the past: {time_s} < {self.now}")
        heapq.heappush(self._heap, (time_s, self._seq, kind, payload))
        self._seq += 1

    def _schedule_monitor(self, time_s: float) -> None:
        self._push(time_s, MONITOR_TICK, None)
        self._monitor_scheduled = True

    def _work_remains(self) -> bool:
        return (self._arrivals_left > 0 or self.policy.total_pending() > 0
                or self.policy.total_in_flight() > 0)

    # -- event processing ------------------------------------------------

    def step(self):
        """Process the earliest event; returns (time, kind, payload) or None."""
        if not self._heap:
            return None
        time_s, _, kind, payload = heapq.heappop(self._heap)
        self.now = time_s
        if kind == ARRIVAL:
            self._on_arrival(payload)
        elif kind == COMPLETION:
            self._on_completion(payload)
        elif kind == MONITOR_TICK:
            self._on_monitor()
        elif kind == QUEUE_EXPIRY:
            self._on_expiry(payload)
        return (time_s, kind, payload)

    def run(self) -> SimResult:
        while self.step() is not None:
            pass
        self.audit.dispatches = self.policy.dispatch_log
        return SimResult(records=self.records, audit=self.audit)

    def _on_arrival(self, inv: Invocation) -> None:
        self._arrivals_left -= 1
        self._backlog_change(inv.function, +1)
        for dev in self.devices:
            dev.unmark_evictable(inv.function)
        self.policy.on_arrival(inv, self.now)
        if not self._monitor_scheduled:
            self._schedule_monitor(self.now + self._monitor_period())
        self._drain()

    def _on_completion(self, uid: int) -> None:
        inv, token, duration, pure_exec = self._inflight.pop(uid)
        profile = self.profiles[inv.function]
        self.devices[token.device].complete(token, profile, self.now)
        exec_sample = duration if self.tau_includes_overheads else pure_exec
        self.policy.on_completion(inv, exec_sample, self.now)
        inv.complete_s = self.now
        self.records.append(
            InvocationRecord(
                function=inv.function,
                arrival_s=inv.arrival_s,
                dispatch_s=inv.dispatch_s,
                complete_s=inv.complete_s,
                start_state=inv.start_state.value,
                device=token.device,
            )
        )
        self._backlog_change(inv.function, -1)
        self.audit.exec.append((inv.function, inv.dispatch_s, inv.complete_s, pure_exec))
        ttl = self.policy.queue_ttl(inv.function)
        if ttl is not None and self._backlog_count.get(inv.function, 0) == 0:
            self._push(self.now + ttl, QUEUE_EXPIRY, inv.function)
        self._drain()

    def _on_monitor(self) -> None:
        for dev in self.devices:
            eff_d = dev.monitor_tick(self.now)
            self.audit.util.append(
                (self.now, dev.index, dev.instantaneous_util(), dev.util_avg, eff_d)
            )
        if self._work_remains():
            self._schedule_monitor(self.now + self._monitor_period())
        else:
            self._monitor_scheduled = False
        self._drain()

    def _on_expiry(self, function: str) -> None:
        recheck = self.policy.expiry_check(function, self.now)
        self._swap_out_inactive()
        if recheck is not None:
            self._push(recheck, QUEUE_EXPIRY, function)

    def _drain(self) -> None:
        """Dispatch until the policy yields nothing, then apply keep-alive swaps."""
        while True:
            decision = self.policy.dispatch(self.devices, self.now)
            if decision is None and (
                self.policy.total_in_flight() == 0 and self.policy.total_pending() > 0
            ):
                self.policy.unstall()
                decision = self.policy.dispatch(self.devices, self.now)
            if decision is None:
                break
            self._start(decision)
        self._swap_out_inactive()

    def _start(self, decision) -> None:
        inv = decision.invocation
        profile = self.profiles[inv.function]
        device = self.devices[decision.device]
        duration, pure_exec, start_state = device.start_invocation(
            decision.token, profile, inv.uid, self.now
        )
        inv.dispatch_s = self.now
        inv.start_state = start_state
        self._inflight[inv.uid] = (inv, decision.token, duration, pure_exec)
        self._push(self.now + duration, COMPLETION, inv.uid)

    def _swap_out_inactive(self) -> None:
        for function in self.policy.take_newly_inactive():
            for dev in self.devices:
                dev.swap_out(function, self.now)
                dev.mark_evictable(function)

    def _backlog_change(self, function: str, delta: int) -> None:
        count = self._backlog_count.get(function, 0) + delta
        self._backlog_count[function] = count
        if delta > 0 and count == 1:
            self.audit.backlog.append((self.now, function, True))
        elif delta < 0 and count == 0:
            self.audit.backlog.append((self.now, function, False))


def run_simulation(trace: Trace, profiles: dict[str, FunctionProfile],
                   policy: Policy, devices: DeviceSet,
                   tau_includes_overheads: bool = False) -> SimResult:
    sim = Simulation(trace, profiles, policy, devices, tau_includes_overheads)
    return sim.run()
