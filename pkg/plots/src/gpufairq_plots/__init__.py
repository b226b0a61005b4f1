"""Figure rendering for gpufairq simulation exports."""

from .figures import (plot_latency_bars, plot_miss_rate_curve,
                      plot_service_timeline, plot_sweep_line)

__version__ = "0.1.0"

__all__ = ["plot_latency_bars", "plot_miss_rate_curve",
           "plot_service_timeline", "plot_sweep_line"]
