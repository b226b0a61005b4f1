"""Modeled GPU devices: memory pool, container states, tokens, utilization.

A device is a capacity-limited executor.  It keeps a bounded pool of idle
kept-alive containers (LRU-destroyed under pressure), a device-memory
budget, a concurrency-token budget (D), and a utilization monitor that can
shrink or grow the effective D.

Containers serve one invocation at a time: a warm start claims an idle
container of the function, anything else initializes a fresh one, so
concurrent invocations of one function beyond its idle containers pay cold
starts.  No CUDA anywhere: cold starts, host-to-device prefetch, and
interference are timing parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import FunctionProfile, StartState


@dataclass
class DeviceConfig:
    mem_capacity_mb: float = 16384.0
    d_max: int = 2
    util_threshold: float = 0.90
    pcie_mb_per_s: float = 12000.0
    interference_beta: float = 0.10
    monitor_period_s: float = 0.2
    util_window_s: float = 1.0
    pool_max_containers: int = 32
    pool_enabled: bool = True
    dynamic_d: bool = False
    prefetch_overlap_s: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.util_threshold <= 1:
            raise ValueError("util_threshold must be in (0, 1]")
        if self.d_max < 1:
            raise ValueError("d_max must be >= 1")
        for name in ("mem_capacity_mb", "pcie_mb_per_s", "monitor_period_s",
                     "util_window_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.pool_max_containers < 1:
            raise ValueError("pool_max_containers must be >= 1")
        if self.interference_beta < 0:
            raise ValueError("interference_beta must be >= 0")


@dataclass
class ContainerEntry:
    """One idle kept-alive container in the warm pool."""

    function: str
    thermal: StartState  # GPU_WARM or HOST_WARM
    mem_mb: float
    last_used_s: float
    # set when the owning queue went inactive; such containers are destroyed
    # first under pool pressure, so anticipating queues keep theirs
    evictable: bool = False


@dataclass
class DToken:
    device: int
    holder: int  # invocation uid, set when execution starts
    start_state: StartState  # pool state for the function at grant time


@dataclass
class _Running:
    uid: int
    function: str
    compute_share: float
    mem_mb: float
    claimed: ContainerEntry | None


class Device:
    """One GPU.  Mutated only by the simulation event loop."""

    def __init__(self, index: int, cfg: DeviceConfig):
        self.index = index
        self.cfg = cfg
        self.pool: list[ContainerEntry] = []
        self.running: dict[int, _Running] = {}
        self.outstanding = 0
        self.effective_d = cfg.d_max
        self.util_samples: list[tuple[float, float]] = []
        self.util_avg = 0.0
        self.eviction_log: list[tuple[float, str]] = []

    # -- bookkeeping helpers -------------------------------------------------

    def _idle_entry(self, function: str, thermal: StartState) -> ContainerEntry | None:
        best = None
        for entry in self.pool:
            if entry.function == function and entry.thermal is thermal:
                if best is None or entry.last_used_s > best.last_used_s:
                    best = entry
        return best

    def container_state(self, function: str) -> StartState:
        """Warmest state an invocation of the function could start in now."""
        if not self.cfg.pool_enabled:
            return StartState.COLD
        if self._idle_entry(function, StartState.GPU_WARM) is not None:
            return StartState.GPU_WARM
        if self._idle_entry(function, StartState.HOST_WARM) is not None:
            return StartState.HOST_WARM
        return StartState.COLD

    def resident_mb(self) -> float:
        """Device memory in use: idle warm-pool entries plus running containers."""
        idle = sum(e.mem_mb for e in self.pool if e.thermal is StartState.GPU_WARM)
        return idle + sum(r.mem_mb for r in self.running.values())

    def container_count(self) -> int:
        return len(self.pool) + len(self.running)

    # -- admission -----------------------------------------------------------

    def try_acquire_token(self, profile: FunctionProfile, now: float) -> DToken | None:
        """Grant a concurrency token, or refuse (a normal outcome).

        Grants require a free token slot, a successful memory admission
        (which may evict idle LRU containers), and utilization headroom for
        one more invocation assumed to take 1/d_max of the device.  The
        headroom check gates added concurrency only: an idle device always
        accepts one invocation, otherwise a stale utilization average could
        wedge the device (fatally so at d_max=1, where the assumed share is
        the whole GPU).
        """
        if self.outstanding >= self.effective_d:
            return None
        if (self.outstanding >= 1
                and self.util_avg + 1.0 / self.cfg.d_max > self.cfg.util_threshold):
            return None
        start_state = self.container_state(profile.name)
        if start_state is not StartState.GPU_WARM:
            if self.admit_memory(profile, now) is None:
                return None
        self.outstanding += 1
        return DToken(device=self.index, holder=-1, start_state=start_state)

    def admit_memory(self, profile: FunctionProfile, now: float) -> list[str] | None:
        """Make room for one footprint of the function.

        No-op when an idle GPU-warm container can be claimed.  Otherwise
        idle GPU-warm containers are swapped out in ascending last-used
        order (running containers are never touched) until the footprint
        fits.  Returns the eviction list, or None when it cannot fit.
        """
        if self._idle_entry(profile.name, StartState.GPU_WARM) is not None:
            return []
        needed = profile.mem_mb
        free = self.cfg.mem_capacity_mb - self.resident_mb()
        if free >= needed:
            return []
        victims = sorted(
            (e for e in self.pool if e.thermal is StartState.GPU_WARM),
            key=lambda e: e.last_used_s,
        )
        evicted: list[ContainerEntry] = []
        for victim in victims:
            if free >= needed:
                break
            victim.thermal = StartState.HOST_WARM
            free += victim.mem_mb
            evicted.append(victim)
            self.eviction_log.append((now, victim.function))
        if free < needed:
            # roll back: not enough idle memory to make room
            for entry in evicted:
                entry.thermal = StartState.GPU_WARM
                self.eviction_log.pop()
            return None
        return [e.function for e in evicted]

    # -- execution -----------------------------------------------------------

    def start_invocation(
        self, token: DToken, profile: FunctionProfile, uid: int, now: float
    ) -> tuple[float, float, StartState]:
        """Begin executing; returns (total duration, pure exec component, state).

        A warm start claims the freshest idle container of its thermal
        class; a cold start builds a new container that joins the pool at
        completion.  Duration scales the thermal base time by a linear
        interference factor in the number of concurrently running
        invocations; the pure exec component is the warm execution time
        under the same factor.
        """
        start_state = token.start_state
        token.holder = uid
        claimed = None
        if start_state is StartState.GPU_WARM:
            base = profile.warm_exec_s
            claimed = self._idle_entry(profile.name, StartState.GPU_WARM)
        elif start_state is StartState.HOST_WARM:
            transfer = max(
                0.0, profile.mem_mb / self.cfg.pcie_mb_per_s - self.cfg.prefetch_overlap_s
            )
            base = profile.warm_exec_s + transfer
            claimed = self._idle_entry(profile.name, StartState.HOST_WARM)
        else:
            base = profile.cold_exec_s
        if claimed is not None:
            self.pool.remove(claimed)
        concurrent = len(self.running) + 1
        factor = 1.0 + self.cfg.interference_beta * (concurrent - 1)
        duration = base * factor
        pure_exec = profile.warm_exec_s * factor
        self.running[uid] = _Running(
            uid, profile.name, profile.compute_share, profile.mem_mb, claimed
        )
        return duration, pure_exec, start_state

    def complete(self, token: DToken, profile: FunctionProfile, now: float) -> None:
        """Release the token; the container returns to the pool GPU-warm."""
        if token.holder not in self.running:
            raise RuntimeError(f"completion for unknown invocation {token.holder}")
        run = self.running.pop(token.holder)
        self.outstanding -= 1
        if not self.cfg.pool_enabled:
            return
        entry = run.claimed
        if entry is None:
            entry = ContainerEntry(profile.name, StartState.GPU_WARM,
                                   profile.mem_mb, now)
        else:
            entry.thermal = StartState.GPU_WARM
            entry.last_used_s = now
            entry.evictable = False
        self.pool.append(entry)
        self._enforce_pool_cap()

    def _enforce_pool_cap(self) -> None:
        """Destroy idle containers beyond the pool size cap.

        Victim order: idle spare copies beyond a function's first container
        (unless the function is running right now and about to need it),
        then containers whose queues went inactive, then plain LRU; each
        class oldest-used first.  Running containers pin themselves.
        """
        running = {r.function for r in self.running.values()}
        while self.container_count() > self.cfg.pool_max_containers and self.pool:
            counts: dict[str, int] = {}
            for entry in self.pool:
                counts[entry.function] = counts.get(entry.function, 0) + 1

            def key(e: ContainerEntry):
                spare = counts[e.function] > 1 and e.function not in running
                return (not spare, not e.evictable, e.last_used_s)

            victim = min(self.pool, key=key)
            self.pool.remove(victim)

    def mark_evictable(self, function: str) -> None:
        for entry in self.pool:
            if entry.function == function:
                entry.evictable = True

    def unmark_evictable(self, function: str) -> None:
        for entry in self.pool:
            if entry.function == function:
                entry.evictable = False

    def swap_out(self, function: str, now: float) -> None:
        """Move a function's idle containers off the device (instantaneous)."""
        for entry in self.pool:
            if entry.function == function and entry.thermal is StartState.GPU_WARM:
                entry.thermal = StartState.HOST_WARM
                self.eviction_log.append((now, function))

    # -- utilization ---------------------------------------------------------

    def instantaneous_util(self) -> float:
        return min(1.0, sum(r.compute_share for r in self.running.values()))

    def monitor_tick(self, now: float) -> int:
        """Sample utilization, refresh the moving average, adjust effective D."""
        util = self.instantaneous_util()
        self.util_samples.append((now, util))
        horizon = now - self.cfg.util_window_s
        while self.util_samples and self.util_samples[0][0] <= horizon:
            self.util_samples.pop(0)
        self.util_avg = sum(u for _, u in self.util_samples) / len(self.util_samples)

        if not self.cfg.dynamic_d:
            self.effective_d = self.cfg.d_max
        elif self.util_avg > self.cfg.util_threshold:
            self.effective_d = max(1, self.effective_d - 1)
        elif self.util_avg < self.cfg.util_threshold - 1.0 / self.cfg.d_max:
            self.effective_d = min(self.cfg.d_max, self.effective_d + 1)
        return self.effective_d


class DeviceSet:
    """Multiple GPUs behind one sticky assignment policy."""

    def __init__(self, configs: list[DeviceConfig]):
        if not configs:
            raise ValueError("at least one device required")
        self.devices = [Device(i, cfg) for i, cfg in enumerate(configs)]

    def __iter__(self):
        return iter(self.devices)

    def __len__(self) -> int:
        return len(self.devices)

    def __getitem__(self, i: int) -> Device:
        return self.devices[i]

    def max_effective_d(self) -> int:
        return max(d.effective_d for d in self.devices)

    def assign(self, profile: FunctionProfile, now: float) -> DToken | None:
        """Pick a device for the function, preferring warm locality.

        Order: GPU-warm container, then host-warm container, then fewest
        outstanding tokens; ties go to the lowest device index.  Returns the
        first granted token, or None when every device refuses.
        """
        def rank(dev: Device) -> tuple[int, int, int]:
            state = dev.container_state(profile.name)
            if state is StartState.GPU_WARM:
                pref = 0
            elif state is StartState.HOST_WARM:
                pref = 1
            else:
                pref = 2
            return (pref, dev.outstanding, dev.index)

        for dev in sorted(self.devices, key=rank):
            token = dev.try_acquire_token(profile, now)
            if token is not None:
                return token
        return None
