"""Locality-enhanced fair queueing over per-function flow queues.

One virtual-time counter per function queue, a global reference equal to
the minimum over backlogged queues, an over-run budget T that buys
batching, anticipatory keep-alive for empty queues, and sticky candidate
ordering (longest queue first, fewest in-flight, name for determinism).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import FlowQueue, FunctionProfile, Invocation, QueueState


@dataclass
class SchedulerConfig:
    t_overrun: float = 10.0
    d_max: int = 2
    alpha: float = 2.0
    dynamic_d: bool = False
    default_ttl_s: float = 2.0
    weights: dict[str, float] = field(default_factory=dict)
    tau_includes_overheads: bool = False

    def __post_init__(self) -> None:
        if self.t_overrun < 0:
            raise ValueError("t_overrun must be >= 0")
        if self.d_max < 1:
            raise ValueError("d_max must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")


@dataclass
class DispatchDecision:
    invocation: Invocation
    device: int
    token: object


@dataclass
class DispatchAudit:
    """One row per dispatch decision, consumed by the metrics pipeline."""

    now: float
    function: str
    vt_before: float
    global_vt: float
    queue_len: int
    in_flight: int
    device: int
    start_state: str


def fairness_bound(
    d: int, t_overrun: float, tau_i: float, tau_j: float,
    w_i: float = 1.0, w_j: float = 1.0,
) -> float:
    """Upper bound on the weighted service gap between two backlogged flows.

    (D - 1) * (2T + tau_i/w_i - tau_j/w_j), where the caller puts the flow
    with the larger normalized service first.  Zero at D = 1.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if w_i <= 0 or w_j <= 0:
        raise ValueError("weights must be positive")
    return (d - 1) * (2.0 * t_overrun + tau_i / w_i - tau_j / w_j)


class MqfqScheduler:
    """The fair-queueing state machine.

    Single logical actor: all mutation happens on one dispatch/completion
    event stream (the simulation loop, or an embedding application's own
    serialization).
    """

    def __init__(self, profiles: dict[str, FunctionProfile], cfg: SchedulerConfig):
        self.profiles = profiles
        self.cfg = cfg
        self.queues: dict[str, FlowQueue] = {}
        self.global_vt = 0.0
        self.dispatch_log: list[DispatchAudit] = []
        self._newly_inactive: list[str] = []

    def weight_of(self, function: str) -> float:
        if function in self.cfg.weights:
            return self.cfg.weights[function]
        profile = self.profiles.get(function)
        return profile.weight if profile is not None else 1.0

    def queue_for(self, function: str, now: float) -> FlowQueue:
        q = self.queues.get(function)
        if q is None:
            q = FlowQueue(function=function, last_exec_s=now)
            self.queues[q.function] = q
        return q

    def total_pending(self) -> int:
        return sum(len(q.pending) for q in self.queues.values())

    def total_in_flight(self) -> int:
        return sum(q.in_flight for q in self.queues.values())

    def take_newly_inactive(self) -> list[str]:
        out = self._newly_inactive
        self._newly_inactive = []
        return out

    # -- virtual time --------------------------------------------------------

    def recompute_global_vt(self) -> float:
        """Global VT := min vt over backlogged, non-inactive queues.

        Holds its previous value when nothing is backlogged, and never
        decreases: a queue re-entering with old credit may sit below the
        global reference (it catches up), but cannot drag it back.
        """
        backlogged = [
            q.vt for q in self.queues.values()
            if q.state is not QueueState.INACTIVE and q.backlogged()
        ]
        if backlogged:
            self.global_vt = max(self.global_vt, min(backlogged))
        return self.global_vt

    def unstall(self) -> None:
        """Liveness guard: advance a stale global VT up to the backlog minimum.

        Only legal when nothing is in flight; a normal dispatch cycle keeps
        the global reference fresh, so this should never fire in practice.
        """
        if self.total_in_flight() > 0:
            return
        backlogged = [q.vt for q in self.queues.values() if q.backlogged()]
        if backlogged and self.global_vt < min(backlogged):
            self.global_vt = min(backlogged)

    # -- queue state ---------------------------------------------------------

    def _update_state(self, q: FlowQueue, now: float) -> None:
        old = q.state
        if not q.pending and q.in_flight == 0:
            if now - q.last_exec_s >= q.ttl(self.cfg.alpha, self.cfg.default_ttl_s):
                q.state = QueueState.INACTIVE
            elif q.vt - self.global_vt > self.cfg.t_overrun:
                q.state = QueueState.THROTTLED
            else:
                q.state = QueueState.ACTIVE
        elif q.vt - self.global_vt > self.cfg.t_overrun:
            q.state = QueueState.THROTTLED
        else:
            q.state = QueueState.ACTIVE
        if q.state is QueueState.INACTIVE and old is not QueueState.INACTIVE:
            self._newly_inactive.append(q.function)

    def refresh_states(self, now: float) -> None:
        for name in sorted(self.queues):
            self._update_state(self.queues[name], now)

    def expiry_check(self, function: str, now: float) -> float | None:
        """Re-evaluate keep-alive expiry for one queue.

        Returns the next time a check is due when the queue is idle but not
        yet expired (the TTL may have grown since the check was scheduled).
        """
        q = self.queues.get(function)
        if q is None or q.backlogged():
            return None
        self._update_state(q, now)
        if q.state is QueueState.INACTIVE:
            return None
        due = q.last_exec_s + q.ttl(self.cfg.alpha, self.cfg.default_ttl_s)
        return due if due > now else None

    def queue_ttl(self, function: str) -> float | None:
        q = self.queues.get(function)
        if q is None:
            return None
        return q.ttl(self.cfg.alpha, self.cfg.default_ttl_s)

    # -- event handlers ------------------------------------------------------

    def on_arrival(self, inv: Invocation, now: float) -> None:
        q = self.queue_for(inv.function, now)
        q.enqueue(inv, self.global_vt, now)

    def dispatch(self, devices, now: float) -> DispatchDecision | None:
        """One dispatch attempt; None when nothing can (or may) run.

        Candidates are active queues with pending work whose vt is within
        the over-run budget of the global reference.  The head candidate
        asks the device layer for a token; a refusal dispatches nothing and
        mutates no queue.
        """
        self.recompute_global_vt()
        self.refresh_states(now)
        candidates = [
            q for _, q in sorted(self.queues.items())
            if q.state is QueueState.ACTIVE
            and q.pending
            and q.vt - self.global_vt <= self.cfg.t_overrun
        ]
        if not candidates:
            return None
        # two stable sorts: longest queue first, then (at D != 1) fewest
        # in-flight first.  The re-sort makes in-flight the ranking key with
        # queue length breaking ties, which steers concurrent tokens toward
        # distinct functions; a per-function batch instead pipelines
        # sequentially through its one warm container.
        candidates.sort(key=lambda q: (-len(q.pending), q.function))
        if devices.max_effective_d() != 1:
            candidates.sort(key=lambda q: q.in_flight)
        head = candidates[0]
        profile = self.profiles[head.function]
        token = devices.assign(profile, now)
        if token is None:
            return None
        vt_before = head.vt
        inv = head.pending.popleft()
        head.vt += head.tau.mean / self.weight_of(head.function)
        head.in_flight += 1
        head.last_exec_s = now
        self.dispatch_log.append(
            DispatchAudit(
                now=now,
                function=head.function,
                vt_before=vt_before,
                global_vt=self.global_vt,
                queue_len=len(head.pending) + 1,
                in_flight=head.in_flight,
                device=token.device,
                start_state=token.start_state.value,
            )
        )
        self.recompute_global_vt()
        return DispatchDecision(invocation=inv, device=token.device, token=token)

    def on_completion(self, inv: Invocation, exec_s: float, now: float) -> None:
        q = self.queues.get(inv.function)
        if q is None or q.in_flight <= 0:
            raise RuntimeError(f"completion for function with nothing in flight: {inv.function}")
        q.in_flight -= 1
        q.tau.record(exec_s)
        q.last_exec_s = now
