import matplotlib.pyplot as plt
import pytest

from gpufairq_plots import (plot_latency_bars, plot_miss_rate_curve,
                            plot_service_timeline, plot_sweep_line)
from gpufairq_plots.cli import main

INVOCATIONS_HEADER = ("function,arrival_s,dispatch_s,complete_s,start_state,"
                      "device,queue_latency_s,exec_s,latency_s\n")
WINDOWS_HEADER = "window_start_s,max_gap,bound,violated\n"
COMPARE_HEADER = ("policy,weighted_avg_latency_s,p50,p99,cold_hit_pct,"
                  "max_gap_worst_window\n")
SWEEP_HEADER = "value,weighted_avg_latency_s,cold_hit_pct,mean_util\n"


@pytest.fixture(autouse=True)
def close_figures():
    yield
    plt.close("all")


@pytest.fixture
def invocations_csv(tmp_path):
    path = tmp_path / "invocations.csv"
    path.write_text(
        INVOCATIONS_HEADER
        + "alpha,0.000000,0.000000,20.000000,cold,0,0.000000,20.000000,20.000000\n"
        + "beta,1.000000,20.000000,45.000000,gpu_warm,0,19.000000,25.000000,44.000000\n"
    )
    return str(path)


@pytest.fixture
def windows_csv(tmp_path):
    path = tmp_path / "windows.csv"
    path.write_text(WINDOWS_HEADER
                    + "0.000000,5.000000,22.000000,false\n"
                    + "30.000000,,,false\n")
    return str(path)


@pytest.fixture
def compare_csv(tmp_path):
    path = tmp_path / "compare.csv"
    path.write_text(
        COMPARE_HEADER
        + "mqfq,10.500000,4.000000,60.000000,2.100000,12.000000\n"
        + "fcfs,48.400000,30.000000,200.000000,2.200000,30.000000\n"
        + "batch,157.000000,80.000000,600.000000,6.000000,40.000000\n"
        + "sjf,17.800000,2.000000,300.000000,2.500000,25.000000\n"
    )
    return str(path)


@pytest.fixture
def sweep_csv(tmp_path):
    path = tmp_path / "sweep.csv"
    path.write_text(SWEEP_HEADER
                    + "4,500.000000,22.000000,0.700000\n"
                    + "8,50.000000,8.400000,0.720000\n"
                    + "16,20.000000,3.500000,0.730000\n"
                    + "32,11.000000,0.900000,0.730000\n")
    return str(path)


class TestServiceTimeline:
    def test_writes_nonzero_image(self, windows_csv, invocations_csv, tmp_path):
        out = tmp_path / "timeline.png"
        plot_service_timeline(windows_csv, invocations_csv, str(out))
        assert out.stat().st_size > 0

    def test_two_functions_two_series(self, windows_csv, invocations_csv):
        _, ax = plot_service_timeline(windows_csv, invocations_csv)
        labels = [line.get_label() for line in ax.lines]
        assert labels == ["alpha", "beta"]
        # alpha executes over [0, 20): 30 s window 0 holds all 20 s
        assert ax.lines[0].get_ydata()[0] == pytest.approx(20.0)

    def test_empty_windows_empty_axes(self, tmp_path):
        windows = tmp_path / "w.csv"
        windows.write_text(WINDOWS_HEADER)
        invocations = tmp_path / "i.csv"
        invocations.write_text(INVOCATIONS_HEADER)
        out = tmp_path / "empty.png"
        _, ax = plot_service_timeline(str(windows), str(invocations), str(out))
        assert len(ax.lines) == 0
        assert out.stat().st_size > 0

    def test_corrupted_column_named(self, windows_csv, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text(INVOCATIONS_HEADER.replace("dispatch_s", "started_s"))
        with pytest.raises(ValueError, match="dispatch_s"):
            plot_service_timeline(windows_csv, str(bad))


class TestLatencyBars:
    def test_four_policies_four_bars(self, compare_csv, tmp_path):
        out = tmp_path / "bars.png"
        _, ax = plot_latency_bars(compare_csv, str(out))
        assert len(ax.patches) == 4
        assert out.stat().st_size > 0

    def test_bar_heights_match_csv(self, compare_csv):
        _, ax = plot_latency_bars(compare_csv)
        heights = [patch.get_height() for patch in ax.patches]
        assert heights == pytest.approx([10.5, 48.4, 157.0, 17.8])

    def test_missing_column_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text(COMPARE_HEADER.replace("p99", "tail") + "mqfq,1,1,1,1,1\n")
        with pytest.raises(ValueError, match="p99"):
            plot_latency_bars(str(bad))


class TestMissRateCurve:
    def test_monotone_curve_preserved(self, sweep_csv, tmp_path):
        out = tmp_path / "curve.png"
        _, ax = plot_miss_rate_curve(sweep_csv, str(out))
        ys = list(ax.lines[0].get_ydata())
        assert ys == sorted(ys, reverse=True)
        assert out.stat().st_size > 0

    def test_single_point(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text(SWEEP_HEADER + "8,50.000000,8.400000,0.720000\n")
        _, ax = plot_miss_rate_curve(str(path))
        assert len(ax.lines[0].get_xdata()) == 1

    def test_axes_are_pool_size_vs_cold_hit(self, sweep_csv):
        _, ax = plot_miss_rate_curve(sweep_csv)
        assert "pool size" in ax.get_xlabel()
        assert "cold-hit" in ax.get_ylabel()

    def test_missing_column_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text(SWEEP_HEADER.replace("cold_hit_pct", "chp")
                       + "4,1.000000,1.000000,0.500000\n")
        with pytest.raises(ValueError, match="cold_hit_pct"):
            plot_miss_rate_curve(str(bad))


class TestSweepLine:
    def test_writes_image(self, sweep_csv, tmp_path):
        out = tmp_path / "line.png"
        plot_sweep_line(sweep_csv, str(out))
        assert out.stat().st_size > 0


class TestCliAcceptance:
    """Every plot command produces a nonzero image from fixture CSVs and
    reports the offending column on a corrupted fixture."""

    def test_a12_all_kinds(self, windows_csv, invocations_csv, compare_csv,
                           sweep_csv, tmp_path, capsys):
        commands = [
            (["service_timeline", "--in", windows_csv, "--in", invocations_csv],
             "timeline.png"),
            (["latency_bars", "--in", compare_csv], "bars.png"),
            (["miss_rate_curve", "--in", sweep_csv], "curve.png"),
            (["sweep_line", "--in", sweep_csv], "line.png"),
        ]
        for argv, name in commands:
            out = tmp_path / name
            assert main(argv + ["--out", str(out)]) == 0
            assert out.stat().st_size > 0

        corrupted = tmp_path / "corrupted.csv"
        corrupted.write_text(COMPARE_HEADER.replace("cold_hit_pct", "chp")
                             + "mqfq,1,1,1,1,1\n")
        code = main(["latency_bars", "--in", str(corrupted),
                     "--out", str(tmp_path / "x.png")])
        captured = capsys.readouterr()
        assert code == 2
        assert "cold_hit_pct" in captured.err
        print("\nA12 plot commands: PASS — 4 kinds render nonzero images; "
              "corrupted fixture rejected naming its column")

    def test_wrong_input_count(self, compare_csv, tmp_path, capsys):
        code = main(["service_timeline", "--in", compare_csv,
                     "--out", str(tmp_path / "x.png")])
        assert code == 2
        assert "needs 2" in capsys.readouterr().err
