"""Queueing policies behind one dispatch interface.

Every policy consumes the same device-token layer; swapping the policy
changes only the order invocations leave their queues, never the device
model.  The fair-queueing policy delegates to MqfqScheduler; the baselines
are deliberately plain.
"""

from __future__ import annotations

from collections import deque
from enum import Enum

from .core import FlowQueue, FunctionProfile, Invocation
from .mqfq import DispatchAudit, DispatchDecision, MqfqScheduler, SchedulerConfig


class PolicyKind(str, Enum):
    MQFQ = "mqfq"
    FCFS = "fcfs"
    BATCH = "batch"
    SJF = "sjf"
    FCFS_NAIVE = "fcfs_naive"

    @property
    def pool_disabled(self) -> bool:
        # the naive baseline runs without a container pool: every start is cold
        return self is PolicyKind.FCFS_NAIVE


class Policy:
    """Shared surface the simulation engine drives."""

    kind: str

    def __init__(self, profiles: dict[str, FunctionProfile], cfg: SchedulerConfig):
        self.profiles = profiles
        self.cfg = cfg
        self.dispatch_log: list[DispatchAudit] = []

    def on_arrival(self, inv: Invocation, now: float) -> None:
        raise NotImplementedError

    def dispatch(self, devices, now: float) -> DispatchDecision | None:
        raise NotImplementedError

    def on_completion(self, inv: Invocation, exec_s: float, now: float) -> None:
        raise NotImplementedError

    def total_pending(self) -> int:
        raise NotImplementedError

    def total_in_flight(self) -> int:
        raise NotImplementedError

    # anticipatory keep-alive hooks; only the fair-queueing policy uses them
    def queue_ttl(self, function: str) -> float | None:
        return None

    def expiry_check(self, function: str, now: float) -> float | None:
        return None

    def take_newly_inactive(self) -> list[str]:
        return []

    def unstall(self) -> None:
        pass

    def _log(self, now: float, function: str, queue_len: int, in_flight: int,
             token, vt_before: float = 0.0, global_vt: float = 0.0) -> None:
        self.dispatch_log.append(
            DispatchAudit(
                now=now, function=function, vt_before=vt_before,
                global_vt=global_vt, queue_len=queue_len, in_flight=in_flight,
                device=token.device, start_state=token.start_state.value,
            )
        )


class MqfqPolicy(Policy):
    kind = "mqfq"

    def __init__(self, profiles, cfg):
        super().__init__(profiles, cfg)
        self.sched = MqfqScheduler(profiles, cfg)
        self.dispatch_log = self.sched.dispatch_log

    def on_arrival(self, inv, now):
        self.sched.on_arrival(inv, now)

    def dispatch(self, devices, now):
        return self.sched.dispatch(devices, now)

    def on_completion(self, inv, exec_s, now):
        self.sched.on_completion(inv, exec_s, now)

    def total_pending(self):
        return self.sched.total_pending()

    def total_in_flight(self):
        return self.sched.total_in_flight()

    def queue_ttl(self, function):
        return self.sched.queue_ttl(function)

    def expiry_check(self, function, now):
        return self.sched.expiry_check(function, now)

    def take_newly_inactive(self):
        return self.sched.take_newly_inactive()

    def unstall(self):
        self.sched.unstall()


class FcfsPolicy(Policy):
    """Strict arrival order from one global queue; head-of-line blocking allowed."""

    kind = "fcfs"

    def __init__(self, profiles, cfg):
        super().__init__(profiles, cfg)
        self.queue: deque[Invocation] = deque()
        self.in_flight = 0

    def on_arrival(self, inv, now):
        self.queue.append(inv)

    def dispatch(self, devices, now):
        if not self.queue:
            return None
        head = self.queue[0]
        token = devices.assign(self.profiles[head.function], now)
        if token is None:
            return None
        self.queue.popleft()
        self.in_flight += 1
        self._log(now, head.function, len(self.queue) + 1, self.in_flight, token)
        return DispatchDecision(invocation=head, device=token.device, token=token)

    def on_completion(self, inv, exec_s, now):
        self.in_flight -= 1

    def total_pending(self):
        return len(self.queue)

    def total_in_flight(self):
        return self.in_flight


class BatchPolicy(Policy):
    """Drain the whole queue holding the oldest pending invocation.

    Late arrivals to the draining function join the current drain; when the
    drain empties, the next-oldest queue is selected.
    """

    kind = "batch"

    def __init__(self, profiles, cfg):
        super().__init__(profiles, cfg)
        self.queues: dict[str, FlowQueue] = {}
        self.draining: str | None = None

    def _queue(self, function: str) -> FlowQueue:
        q = self.queues.get(function)
        if q is None:
            q = FlowQueue(function=function)
            self.queues[function] = q
        return q

    def on_arrival(self, inv, now):
        self._queue(inv.function).pending.append(inv)

    def dispatch(self, devices, now):
        drain = self.draining
        q = self.queues.get(drain) if drain else None
        if q is not None and (q.pending or q.in_flight):
            if not q.pending:
                # batch still running; hold so late arrivals can join it
                return None
        else:
            drain = self._oldest_nonempty()
            if drain is None:
                return None
            q = self.queues[drain]
        head = q.pending[0]
        token = devices.assign(self.profiles[head.function], now)
        if token is None:
            return None
        self.draining = drain
        q.pending.popleft()
        q.in_flight += 1
        self._log(now, drain, len(q.pending) + 1, q.in_flight, token)
        return DispatchDecision(invocation=head, device=token.device, token=token)

    def _oldest_nonempty(self) -> str | None:
        best = None
        best_key = None
        for name in sorted(self.queues):
            q = self.queues[name]
            if not q.pending:
                continue
            head = q.pending[0]
            key = (head.arrival_s, head.uid)
            if best_key is None or key < best_key:
                best, best_key = name, key
        return best

    def on_completion(self, inv, exec_s, now):
        q = self.queues[inv.function]
        q.in_flight -= 1
        q.tau.record(exec_s)

    def total_pending(self):
        return sum(len(q.pending) for q in self.queues.values())

    def total_in_flight(self):
        return sum(q.in_flight for q in self.queues.values())


class SjfPolicy(Policy):
    """Pick the function with the smallest mean execution time, run to completion.

    Uses the same all-history running mean as the fair-queueing policy, so
    policy comparisons differ only in ordering.
    """

    kind = "sjf"

    def __init__(self, profiles, cfg):
        super().__init__(profiles, cfg)
        self.queues: dict[str, FlowQueue] = {}

    def _queue(self, function: str) -> FlowQueue:
        q = self.queues.get(function)
        if q is None:
            q = FlowQueue(function=function)
            self.queues[function] = q
        return q

    def on_arrival(self, inv, now):
        self._queue(inv.function).pending.append(inv)

    def dispatch(self, devices, now):
        shortest = None
        for name in sorted(self.queues):
            q = self.queues[name]
            if not q.pending:
                continue
            if shortest is None or q.tau.mean < shortest.tau.mean:
                shortest = q
        if shortest is None:
            return None
        head = shortest.pending[0]
        token = devices.assign(self.profiles[head.function], now)
        if token is None:
            return None
        shortest.pending.popleft()
        shortest.in_flight += 1
        self._log(now, shortest.function, len(shortest.pending) + 1, shortest.in_flight, token)
        return DispatchDecision(invocation=head, device=token.device, token=token)

    def on_completion(self, inv, exec_s, now):
        q = self.queues[inv.function]
        q.in_flight -= 1
        q.tau.record(exec_s)

    def total_pending(self):
        return sum(len(q.pending) for q in self.queues.values())

    def total_in_flight(self):
        return sum(q.in_flight for q in self.queues.values())


def make_policy(kind: PolicyKind | str, profiles: dict[str, FunctionProfile],
                cfg: SchedulerConfig) -> Policy:
    kind = PolicyKind(kind)
    if kind is PolicyKind.MQFQ:
        return MqfqPolicy(profiles, cfg)
    if kind in (PolicyKind.FCFS, PolicyKind.FCFS_NAIVE):
        policy = FcfsPolicy(profiles, cfg)
        policy.kind = kind.value
        return policy
    if kind is PolicyKind.BATCH:
        return BatchPolicy(profiles, cfg)
    if kind is PolicyKind.SJF:
        return SjfPolicy(profiles, cfg)
    raise ValueError(f"unknown policy: {kind}")
