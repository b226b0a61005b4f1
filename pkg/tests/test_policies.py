import random

from gpufairq.core import FunctionProfile, Invocation, StartState
from gpufairq.device import DToken
from gpufairq.mqfq import SchedulerConfig
from gpufairq.policies import (BatchPolicy, FcfsPolicy, PolicyKind, SjfPolicy,
                               make_policy)


class ScriptedDevices:
    def __init__(self, d=1):
        self.d = d
        self.outstanding = 0

    def max_effective_d(self):
        return self.d

    def assign(self, profile, now):
        if self.outstanding >= self.d:
            return None
        self.outstanding += 1
        return DToken(device=0, holder=-1, start_state=StartState.GPU_WARM)

    def release(self):
        self.outstanding -= 1


def profiles_for(*names, taus=None):
    taus = taus or {}
    return {
        n: FunctionProfile(n, taus.get(n, 1.0), taus.get(n, 1.0) + 1.0, 100.0, 0.4, 1.0)
        for n in names
    }


def drain_all(policy, devices, arrivals, exec_time=1.0):
    """Run a policy over scripted arrivals; returns dispatch order."""
    order = []
    running = []
    now = 0.0
    arrivals = sorted(arrivals, key=lambda x: x[0])
    while arrivals or running or policy.total_pending():
        if arrivals and (not running or arrivals[0][0] <= running[0][0]):
            now, fn = arrivals.pop(0)
            policy.on_arrival(Invocation(function=fn, arrival_s=now), now)
        elif running:
            now, inv = running.pop(0)
            devices.release()
            policy.on_completion(inv, exec_time, now)
        while True:
            d = policy.dispatch(devices, now)
            if d is None:
                break
            order.append(d.invocation.function)
            running.append((now + exec_time, d.invocation))
            running.sort(key=lambda x: x[0])
    return order


class TestFcfs:
    def test_arrival_order_regardless_of_queues(self):
        policy = FcfsPolicy(profiles_for("a", "b"), SchedulerConfig())
        devices = ScriptedDevices(d=1)
        order = drain_all(policy, devices, [(1.0, "b"), (2.0, "a")])
        assert order == ["b", "a"]

    def test_token_unavailable_preserves_order(self):
        policy = FcfsPolicy(profiles_for("a", "b"), SchedulerConfig())
        devices = ScriptedDevices(d=0)
        policy.on_arrival(Invocation(function="a", arrival_s=0.0), 0.0)
        assert policy.dispatch(devices, 0.0) is None
        assert policy.total_pending() == 1

    def test_interleaved_matches_sort_by_arrival(self):
        rng = random.Random(5)
        arrivals = [(round(rng.uniform(0, 50), 3), rng.choice("abc")) for _ in range(30)]
        expected = [fn for _, fn in sorted(arrivals, key=lambda x: x[0])]
        policy = FcfsPolicy(profiles_for("a", "b", "c"), SchedulerConfig())
        order = drain_all(policy, ScriptedDevices(d=1), arrivals)
        assert order == expected


class TestBatch:
    def test_drains_queue_with_oldest_item(self):
        policy = BatchPolicy(profiles_for("a", "b"), SchedulerConfig())
        devices = ScriptedDevices(d=1)
        arrivals = [(0.0, "a"), (0.1, "b"), (0.2, "a"), (0.3, "a")]
        order = drain_all(policy, devices, arrivals)
        # a holds the oldest item: its whole queue (3 deep) drains before b
        assert order == ["a", "a", "a", "b"]

    def test_switches_to_next_oldest_when_empty(self):
        policy = BatchPolicy(profiles_for("a", "b", "c"), SchedulerConfig())
        arrivals = [(0.0, "b"), (0.1, "c"), (0.2, "b")]
        order = drain_all(policy, ScriptedDevices(d=1), arrivals)
        assert order == ["b", "b", "c"]

    def test_single_function_equals_fcfs(self):
        rng = random.Random(9)
        arrivals = [(round(rng.uniform(0, 20), 3), "a") for _ in range(15)]
        batch = BatchPolicy(profiles_for("a"), SchedulerConfig())
        fcfs = FcfsPolicy(profiles_for("a"), SchedulerConfig())
        assert (drain_all(batch, ScriptedDevices(), arrivals)
                == drain_all(fcfs, ScriptedDevices(), arrivals))

    def test_late_arrivals_join_current_drain(self):
        policy = BatchPolicy(profiles_for("a", "b"), SchedulerConfig())
        devices = ScriptedDevices(d=1)
        policy.on_arrival(Invocation(function="a", arrival_s=0.0), 0.0)
        policy.on_arrival(Invocation(function="b", arrival_s=0.1), 0.1)
        d1 = policy.dispatch(devices, 0.1)
        assert d1.invocation.function == "a"
        # a is draining; a late a-arrival still beats the older b item
        policy.on_arrival(Invocation(function="a", arrival_s=0.2), 0.2)
        devices.release()
        policy.on_completion(d1.invocation, 1.0, 1.0)
        d2 = policy.dispatch(devices, 1.0)
        assert d2.invocation.function == "a"


class TestSjf:
    def test_picks_smallest_mean_exec(self):
        profs = profiles_for("imagenet", "isoneural")
        policy = SjfPolicy(profs, SchedulerConfig())
        policy.queues_seed = None
        devices = ScriptedDevices(d=1)
        policy.on_arrival(Invocation(function="imagenet", arrival_s=0.0), 0.0)
        policy.on_arrival(Invocation(function="isoneural", arrival_s=0.0), 0.0)
        # seed the estimators with observed times
        policy._queue("imagenet").tau.record(2.253)
        policy._queue("isoneural").tau.record(0.026)
        d = policy.dispatch(devices, 0.0)
        assert d.invocation.function == "isoneural"

    def test_tie_broken_by_name(self):
        policy = SjfPolicy(profiles_for("b", "a"), SchedulerConfig())
        policy.on_arrival(Invocation(function="b", arrival_s=0.0), 0.0)
        policy.on_arrival(Invocation(function="a", arrival_s=0.0), 0.0)
        d = policy.dispatch(ScriptedDevices(d=1), 0.0)
        assert d.invocation.function == "a"

    def test_long_function_starves_behind_short_stream(self):
        policy = SjfPolicy(profiles_for("long", "short"), SchedulerConfig())
        devices = ScriptedDevices(d=1)
        policy._queue("long").tau.record(5.0)
        policy._queue("short").tau.record(0.5)
        # long job arrives into a short-job stream that never drains
        arrivals = [(0.3, "long")] + [(0.4 * i, "short") for i in range(20)]
        order = []
        running = []
        now = 0.0
        arrivals = sorted(arrivals, key=lambda x: x[0])
        while arrivals or running or policy.total_pending():
            if arrivals and (not running or arrivals[0][0] <= running[0][0]):
                now, fn = arrivals.pop(0)
                policy.on_arrival(Invocation(function=fn, arrival_s=now), now)
            elif running:
                now, inv = running.pop(0)
                devices.release()
                policy.on_completion(inv, 0.5 if inv.function == "short" else 5.0, now)
            while True:
                d = policy.dispatch(devices, now)
                if d is None:
                    break
                order.append(d.invocation.function)
                dur = 0.5 if d.invocation.function == "short" else 5.0
                running.append((now + dur, d.invocation))
                running.sort(key=lambda x: x[0])
        assert order.index("long") == len(order) - 1


class TestFactory:
    def test_kinds(self):
        profs = profiles_for("a")
        cfg = SchedulerConfig()
        assert make_policy("mqfq", profs, cfg).kind == "mqfq"
        assert make_policy("fcfs", profs, cfg).kind == "fcfs"
        assert make_policy("batch", profs, cfg).kind == "batch"
        assert make_policy("sjf", profs, cfg).kind == "sjf"
        naive = make_policy("fcfs_naive", profs, cfg)
        assert naive.kind == "fcfs_naive"
        assert PolicyKind("fcfs_naive").pool_disabled

    def test_unknown_rejected(self):
        import pytest
        with pytest.raises(ValueError):
            make_policy("priority", profiles_for("a"), SchedulerConfig())
