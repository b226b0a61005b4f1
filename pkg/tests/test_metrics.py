import json
import random

import pytest

from gpufairq.device import DeviceConfig, DeviceSet
from gpufairq.engine import AuditLog, run_simulation
from gpufairq.metrics import (InvocationRecord, cold_hit_rate, export,
                              per_function_summary, service_gap_report,
                              summarize, weighted_avg_latency)
from gpufairq.mqfq import SchedulerConfig
from gpufairq.policies import make_policy
from gpufairq.workload import default_profiles, gen_zipf


def rec(fn="f", arrival=0.0, dispatch=0.0, complete=1.0, state="gpu_warm", device=0):
    return InvocationRecord(fn, arrival, dispatch, complete, state, device)


class TestWeightedAvgLatency:
    def test_single_function_is_its_mean(self):
        records = [rec(complete=1.0), rec(complete=3.0)]
        assert weighted_avg_latency(records) == pytest.approx(2.0)

    def test_two_function_formula(self):
        # N=(10,5), L=(1.0,4.0) -> (10*1 + 5*4) / 15 = 2.0
        records = [rec("a", complete=1.0) for _ in range(10)]
        records += [rec("b", complete=4.0) for _ in range(5)]
        assert weighted_avg_latency(records) == pytest.approx(2.0)

    def test_equals_grand_mean(self):
        rng = random.Random(21)
        records = [
            rec(fn=rng.choice("abcd"), arrival=0.0, dispatch=rng.uniform(0, 5),
                complete=rng.uniform(5, 20))
            for _ in range(500)
        ]
        grand = sum(r.latency_s for r in records) / len(records)
        assert abs(weighted_avg_latency(records) - grand) < 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            weighted_avg_latency([])


class TestRecordDerivedFields:
    def test_identity(self):
        r = rec(arrival=1.0, dispatch=3.5, complete=7.25)
        assert r.queue_latency_s == pytest.approx(2.5)
        assert r.exec_s == pytest.approx(3.75)
        assert r.latency_s == pytest.approx(r.queue_latency_s + r.exec_s)


class TestColdHitRate:
    def test_all_warm(self):
        assert cold_hit_rate([rec(state="gpu_warm"), rec(state="host_warm")]) == 0.0

    def test_all_cold(self):
        assert cold_hit_rate([rec(state="cold")] * 4 ) == 1.0

    def test_mixed(self):
        records = [rec(state="cold")] + [rec(state="gpu_warm")] * 3
        assert cold_hit_rate(records) == 0.25


def audit_with_backlog(transitions, util=(), records=()):
    audit = AuditLog()
    audit.backlog = list(transitions)
    audit.util = list(util)
    # synthetic runs have no overheads: pure exec equals the full span
    audit.exec = [(r.function, r.dispatch_s, r.complete_s, r.exec_s) for r in records]
    return audit


class TestServiceGapReport:
    def test_single_backlogged_function_gap_zero(self):
        records = [rec("a", 0.0, 0.0, 40.0)]
        audit = audit_with_backlog([(0.0, "a", True), (40.0, "a", False)], records=records)
        cfg = SchedulerConfig(t_overrun=10.0, d_max=2)
        windows = service_gap_report(records, audit, cfg)
        assert windows[0].comparable
        assert windows[0].max_gap == 0.0
        assert not windows[0].violated

    def test_degenerate_single_flow_d1_bound_and_gap_zero(self):
        records = [rec("a", 0.0, 0.0, 35.0)]
        audit = audit_with_backlog([(0.0, "a", True), (35.0, "a", False)],
                                   util=[(1.0, 0, 0.4, 0.4, 1)], records=records)
        cfg = SchedulerConfig(t_overrun=10.0, d_max=1)
        windows = service_gap_report(records, audit, cfg)
        assert windows[0].bound == 0.0
        assert windows[0].max_gap == 0.0
        assert not windows[0].violated

    def test_no_co_backlogged_pair_reported_not_comparable(self):
        records = [rec("a", 0.0, 0.0, 5.0), rec("b", 6.0, 6.0, 12.0)]
        audit = audit_with_backlog(
            [(0.0, "a", True), (5.0, "a", False), (6.0, "b", True), (12.0, "b", False)],
            records=records)
        cfg = SchedulerConfig()
        windows = service_gap_report(records, audit, cfg)
        assert not windows[0].comparable
        assert not windows[0].violated

    def test_gap_uses_window_overlap(self):
        # a served 20s, b served 5s inside the first window
        records = [rec("a", 0.0, 0.0, 20.0), rec("b", 0.0, 20.0, 25.0),
                   rec("b", 25.0, 25.0, 45.0)]
        audit = audit_with_backlog([(0.0, "a", True), (0.0, "b", True),
                                    (45.0, "a", False), (45.0, "b", False)],
                                   records=records)
        cfg = SchedulerConfig(t_overrun=10.0, d_max=2)
        windows = service_gap_report(records, audit, cfg, window_s=30.0)
        w = windows[0]
        assert w.service["a"] == pytest.approx(20.0)
        assert w.service["b"] == pytest.approx(10.0)
        assert w.max_gap == pytest.approx(10.0)

    def test_partial_window_presence_disqualifies(self):
        records = [rec("a", 0.0, 0.0, 30.0), rec("b", 10.0, 10.0, 30.0)]
        audit = audit_with_backlog([(0.0, "a", True), (10.0, "b", True),
                                    (30.0, "a", False), (30.0, "b", False)],
                                   records=records)
        windows = service_gap_report(records, audit, SchedulerConfig())
        assert windows[0].qualified == ["a"]

    def test_weighted_normalization(self):
        records = [rec("a", 0.0, 0.0, 30.0), rec("b", 0.0, 0.0, 15.0)]
        audit = audit_with_backlog([(0.0, "a", True), (0.0, "b", True),
                                    (30.0, "a", False), (30.0, "b", False)],
                                   records=records)
        cfg = SchedulerConfig(t_overrun=10.0, d_max=2, weights={"a": 2.0, "b": 1.0})
        windows = service_gap_report(records, audit, cfg)
        # a: 30/2 = 15, b: 15/1 = 15 -> no gap
        assert windows[0].max_gap == pytest.approx(0.0)

    def test_window_service_bounded_by_capacity(self):
        trace = gen_zipf(4, 1.5, 2.0, 120.0, seed=19)
        profiles = default_profiles(4)
        cfg = SchedulerConfig()
        devices = DeviceSet([DeviceConfig(d_max=2)])
        result = run_simulation(trace, profiles, make_policy("mqfq", profiles, cfg),
                                devices)
        for w in service_gap_report(result.records, result.audit, cfg):
            assert sum(w.service.values()) <= w.window_s * 1 * 2 + 1e-9


class TestPerFunctionSummary:
    def test_unbiased_variance(self):
        records = [rec("a", complete=1.0), rec("a", complete=3.0)]
        summary = per_function_summary(records)
        assert summary["a"]["var_latency_s"] == pytest.approx(2.0)  # n-1 estimator

    def test_single_record_variance_zero(self):
        assert per_function_summary([rec("a")])["a"]["var_latency_s"] == 0.0


class TestExport:
    def _simulate(self, seed=5):
        trace = gen_zipf(4, 1.5, 1.0, 60.0, seed=seed)
        profiles = default_profiles(4)
        cfg = SchedulerConfig()
        policy = make_policy("mqfq", profiles, cfg)
        devices = DeviceSet([DeviceConfig()])
        result = run_simulation(trace, profiles, policy, devices)
        windows = service_gap_report(result.records, result.audit, cfg)
        summary = summarize("mqfq", result.records, windows, result.audit, {}, seed)
        return result, windows, summary

    def test_zero_records_valid_files(self, tmp_path):
        export([], [], summarize("mqfq", [], [], AuditLog(), {}, 1), str(tmp_path))
        inv = (tmp_path / "invocations.csv").read_text()
        win = (tmp_path / "windows.csv").read_text()
        assert inv == ("function,arrival_s,dispatch_s,complete_s,start_state,"
                       "device,queue_latency_s,exec_s,latency_s\n")
        assert win == "window_start_s,max_gap,bound,violated\n"
        json.loads((tmp_path / "summary.json").read_text())

    def test_round_trip_reproduces_values(self, tmp_path):
        result, windows, summary = self._simulate()
        export(result.records, windows, summary, str(tmp_path))
        lines = (tmp_path / "invocations.csv").read_text().splitlines()[1:]
        assert len(lines) == len(result.records)
        first = lines[0].split(",")
        r = result.records[0]
        assert first[0] == r.function
        assert float(first[1]) == pytest.approx(r.arrival_s, abs=1e-6)
        assert float(first[8]) == pytest.approx(r.latency_s, abs=1e-6)
        loaded = json.loads((tmp_path / "summary.json").read_text())
        assert loaded["weighted_avg_latency_s"] == summary["weighted_avg_latency_s"]

    def test_byte_identical_across_runs(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        result, windows, summary = self._simulate()
        export(result.records, windows, summary, str(out_a))
        result2, windows2, summary2 = self._simulate()
        export(result2.records, windows2, summary2, str(out_b))
        for name in ("invocations.csv", "windows.csv", "summary.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
