"""Fair-queueing scheduler library and simulator for serverless GPU functions."""

from .core import (FlowQueue, FunctionProfile, Invocation, QueueState,
                   RunningMean, StartState, load_profiles, record_sample)
from .device import DeviceConfig, DeviceSet, DToken
from .engine import Simulation, run_simulation
from .metrics import InvocationRecord, WindowReport
from .mqfq import (DispatchDecision, MqfqScheduler, SchedulerConfig,
                   fairness_bound)
from .policies import PolicyKind, make_policy
from .workload import Trace, default_profiles, gen_zipf, load_trace, save_trace

__version__ = "0.1.0"

__all__ = [
    "DeviceConfig", "DeviceSet", "DispatchDecision", "DToken", "FlowQueue",
    "FunctionProfile", "Invocation", "InvocationRecord", "MqfqScheduler",
    "PolicyKind", "QueueState", "RunningMean", "SchedulerConfig", "Simulation",
    "StartState", "Trace", "WindowReport", "default_profiles", "fairness_bound",
    "gen_zipf", "load_profiles", "load_trace", "make_policy", "record_sample",
    "run_simulation", "save_trace",
]
