"""Experiment configuration: [section] key = value files, strictly validated."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .core import FunctionProfile, load_profiles
from .device import DeviceConfig
from .mqfq import SchedulerConfig
from .policies import PolicyKind
from .workload import (DEFAULT_COMPUTE_SHARE, DEFAULT_MEM_MB, Trace,
                       default_profiles, gen_zipf, load_trace)


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "scheduler": {"policy", "t", "d_max", "alpha", "dynamic_d", "default_ttl_s",
                  "tau_includes_overheads"},
    "device": {"count", "mem_mb", "d_max", "util_threshold", "pcie_mb_per_s",
               "interference_beta", "monitor_period_s", "util_window_s",
               "pool_max_containers", "pool_enabled", "dynamic_d",
               "prefetch_overlap_s"},
    "workload": {"profiles_path", "trace_path", "n_functions", "zipf_s",
                 "rate_rps", "duration_s", "copies", "mem_mb", "compute_share"},
    "sim": {"seed"},
    "output": {"dir"},
}

_GENERATOR_KEYS = {"n_functions", "zipf_s", "rate_rps", "duration_s", "copies"}


@dataclass
class ExperimentConfig:
    policy: PolicyKind = PolicyKind.MQFQ
    t_overrun: float = 10.0
    d_max: int = 2
    alpha: float = 2.0
    dynamic_d: bool = False
    default_ttl_s: float = 2.0
    tau_includes_overheads: bool = False

    device_count: int = 1
    mem_capacity_mb: float = 16384.0
    util_threshold: float = 0.90
    pcie_mb_per_s: float = 12000.0
    interference_beta: float = 0.10
    monitor_period_s: float = 0.2
    util_window_s: float = 1.0
    pool_max_containers: int = 32
    pool_enabled: bool = True
    prefetch_overlap_s: float = 0.0

    profiles_path: str | None = None
    trace_path: str | None = None
    n_functions: int | None = None
    zipf_s: float | None = None
    rate_rps: float | None = None
    duration_s: float | None = None
    copies: int | None = None
    workload_mem_mb: float = DEFAULT_MEM_MB
    workload_compute_share: float = DEFAULT_COMPUTE_SHARE

    seed: int = 1
    out_dir: str | None = None
    base_dir: str = "."
    echo: dict = field(default_factory=dict)

    def scheduler_config(self) -> SchedulerConfig:
        return SchedulerConfig(
            t_overrun=self.t_overrun, d_max=self.d_max, alpha=self.alpha,
            dynamic_d=self.dynamic_d, default_ttl_s=self.default_ttl_s,
            tau_includes_overheads=self.tau_includes_overheads,
        )

    def device_configs(self, pool_enabled: bool | None = None) -> list[DeviceConfig]:
        enabled = self.pool_enabled if pool_enabled is None else pool_enabled
        cfg = DeviceConfig(
            mem_capacity_mb=self.mem_capacity_mb, d_max=self.d_max,
            util_threshold=self.util_threshold, pcie_mb_per_s=self.pcie_mb_per_s,
            interference_beta=self.interference_beta,
            monitor_period_s=self.monitor_period_s,
            util_window_s=self.util_window_s,
            pool_max_containers=self.pool_max_containers,
            pool_enabled=enabled, dynamic_d=self.dynamic_d,
            prefetch_overlap_s=self.prefetch_overlap_s,
        )
        return [cfg for _ in range(self.device_count)]

    def build_profiles(self) -> dict[str, FunctionProfile]:
        if self.profiles_path:
            return load_profiles(self._resolve(self.profiles_path))
        n = self.n_functions
        if n is None and self.copies:
            n = 8 * self.copies
        if n is None:
            raise ConfigError("workload needs profiles_path or a generator spec")
        return default_profiles(n, mem_mb=self.workload_mem_mb,
                                compute_share=self.workload_compute_share)

    def build_trace(self, profiles: dict[str, FunctionProfile]) -> Trace:
        if self.trace_path:
            return load_trace(self._resolve(self.trace_path), known_names=set(profiles))
        names = list(profiles)
        n = self.n_functions if self.n_functions is not None else len(names)
        return gen_zipf(n, self.zipf_s, self.rate_rps, self.duration_s,
                        self.seed, names=names[:n])

    def _resolve(self, path: str) -> str:
        if os.path.isabs(path):
            return path
        return os.path.join(self.base_dir, path)


def _parse_bool(text: str, key: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"bad boolean for {key}: {text!r}")


def load_config(path: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        read = parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from None
    if not read:
        raise ConfigError(f"cannot read config file: {path}")

    cfg = ExperimentConfig(base_dir=os.path.dirname(os.path.abspath(path)))
    echo: dict[str, dict[str, str]] = {}
    seen_d_max: dict[str, str] = {}
    seen_dynamic: dict[str, str] = {}

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section: [{section}]")
        echo[section] = {}
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key: {section}.{key}")
            echo[section][key] = value
            try:
                _apply(cfg, section, key, value, seen_d_max, seen_dynamic)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {exc}") from None

    if len(set(seen_d_max.values())) > 1:
        raise ConfigError(f"conflicting d_max values: {seen_d_max}")
    if len(set(seen_dynamic.values())) > 1:
        raise ConfigError(f"conflicting dynamic_d values: {seen_dynamic}")

    _validate(cfg)
    cfg.echo = echo
    return cfg


def _apply(cfg: ExperimentConfig, section: str, key: str, value: str,
           seen_d_max: dict, seen_dynamic: dict) -> None:
    if section == "scheduler":
        if key == "policy":
            try:
                cfg.policy = PolicyKind(value.strip())
            except ValueError:
                raise ConfigError(f"unknown policy: {value!r}") from None
        elif key == "t":
            cfg.t_overrun = float(value)
        elif key == "d_max":
            cfg.d_max = int(value)
            seen_d_max["scheduler.d_max"] = value.strip()
        elif key == "alpha":
            cfg.alpha = float(value)
        elif key == "dynamic_d":
            cfg.dynamic_d = _parse_bool(value, key)
            seen_dynamic["scheduler.dynamic_d"] = str(cfg.dynamic_d)
        elif key == "default_ttl_s":
            cfg.default_ttl_s = float(value)
        elif key == "tau_includes_overheads":
            cfg.tau_includes_overheads = _parse_bool(value, key)
    elif section == "device":
        if key == "count":
            cfg.device_count = int(value)
        elif key == "mem_mb":
            cfg.mem_capacity_mb = float(value)
        elif key == "d_max":
            cfg.d_max = int(value)
            seen_d_max["device.d_max"] = value.strip()
        elif key == "util_threshold":
            cfg.util_threshold = float(value)
        elif key == "pcie_mb_per_s":
            cfg.pcie_mb_per_s = float(value)
        elif key == "interference_beta":
            cfg.interference_beta = float(value)
        elif key == "monitor_period_s":
            cfg.monitor_period_s = float(value)
        elif key == "util_window_s":
            cfg.util_window_s = float(value)
        elif key == "pool_max_containers":
            cfg.pool_max_containers = int(value)
        elif key == "pool_enabled":
            cfg.pool_enabled = _parse_bool(value, key)
        elif key == "dynamic_d":
            cfg.dynamic_d = _parse_bool(value, key)
            seen_dynamic["device.dynamic_d"] = str(cfg.dynamic_d)
        elif key == "prefetch_overlap_s":
            cfg.prefetch_overlap_s = float(value)
    elif section == "workload":
        if key == "profiles_path":
            cfg.profiles_path = value.strip()
        elif key == "trace_path":
            cfg.trace_path = value.strip()
        elif key == "n_functions":
            cfg.n_functions = int(value)
        elif key == "zipf_s":
            cfg.zipf_s = float(value)
        elif key == "rate_rps":
            cfg.rate_rps = float(value)
        elif key == "duration_s":
            cfg.duration_s = float(value)
        elif key == "copies":
            cfg.copies = int(value)
        elif key == "mem_mb":
            cfg.workload_mem_mb = float(value)
        elif key == "compute_share":
            cfg.workload_compute_share = float(value)
    elif section == "sim":
        if key == "seed":
            cfg.seed = int(value)
    elif section == "output":
        if key == "dir":
            cfg.out_dir = value.strip()


def _validate(cfg: ExperimentConfig) -> None:
    has_trace = cfg.trace_path is not None
    has_generator = any(
        getattr(cfg, k) is not None
        for k in ("n_functions", "zipf_s", "rate_rps", "duration_s", "copies")
    )
    if has_trace and has_generator:
        raise ConfigError("workload: give trace_path or a generator spec, not both")
    if not has_trace and not has_generator:
        raise ConfigError("workload: needs trace_path or a generator spec "
                          f"({', '.join(sorted(_GENERATOR_KEYS))})")
    if has_generator:
        missing = [k for k in ("zipf_s", "rate_rps", "duration_s")
                   if getattr(cfg, k) is None]
        if cfg.n_functions is None and cfg.copies is None:
            missing.append("n_functions")
        if missing:
            raise ConfigError(f"workload generator spec incomplete, missing: {missing}")
    if cfg.trace_path:
        path = cfg._resolve(cfg.trace_path)
        if not os.path.exists(path):
            raise ConfigError(f"trace file not found: {path}")
    if cfg.profiles_path:
        path = cfg._resolve(cfg.profiles_path)
        if not os.path.exists(path):
            raise ConfigError(f"profiles file not found: {path}")
    if cfg.device_count < 1:
        raise ConfigError("device count must be >= 1")
