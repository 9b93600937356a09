"""Domain types shared by the migration engines.

Units: data volumes are megabits, rates are megabits/second and times are
seconds. Container memory is declared in megabytes and converted with
:func:`mb_to_megabits` exactly once, when an engine reads the profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .errors import (
    EmptyTrace,
    InvalidParameter,
    InvalidSpec,
    LambdaNotLessThanOne,
    NonPositiveMemory,
    NonPositiveRate,
)

BITS_PER_BYTE = 8


def mb_to_megabits(memory_mb: float) -> float:
    return memory_mb * BITS_PER_BYTE


def megabits_to_mb(megabits: float) -> float:
    return megabits / BITS_PER_BYTE


@dataclass(frozen=True)
class AveragedParams:
    """Average transfer rate, dirtying rate and inter-round delay."""

    avg_rate_mbps: float
    avg_dirty_mbps: float
    inter_round_delay_s: float = 0.0

    @property
    def lam(self) -> float:
        return self.avg_dirty_mbps / self.avg_rate_mbps


@dataclass(frozen=True)
class TraceEvent:
    rate_mbps: float
    dirty_mbps: float
    gap_s: float


@dataclass(frozen=True)
class RateTrace:
    """Ordered per-event samples for one container."""

    events: tuple[TraceEvent, ...]

    def __post_init__(self):
        if not isinstance(self.events, tuple):
            object.__setattr__(self, "events", tuple(self.events))

    @classmethod
    def from_columns(cls, rates: Sequence[float], dirties: Sequence[float],
                     gaps: Sequence[float]) -> "RateTrace":
        if not len(rates) == len(dirties) == len(gaps):
            raise InvalidParameter("trace columns must have equal length")
        return cls(tuple(TraceEvent(float(r), float(d), float(g))
                         for r, d, g in zip(rates, dirties, gaps)))

    def __len__(self) -> int:
        return len(self.events)

    @property
    def rates(self) -> list[float]:
        return [e.rate_mbps for e in self.events]

    @property
    def dirties(self) -> list[float]:
        return [e.dirty_mbps for e in self.events]

    @property
    def gaps(self) -> list[float]:
        return [e.gap_s for e in self.events]


Params = Union[AveragedParams, RateTrace]


@dataclass(frozen=True)
class ContainerProfile:
    id: str
    memory_mb: float
    handoff_rate_mbps: float
    params: Params

    @property
    def memory_megabits(self) -> float:
        return mb_to_megabits(self.memory_mb)

    @property
    def is_traced(self) -> bool:
        return isinstance(self.params, RateTrace)


# -- hand-off policies ------------------------------------------------------

@dataclass(frozen=True)
class FixedSteps:
    count: int

    def __post_init__(self):
        if isinstance(self.count, bool) or int(self.count) != self.count or self.count < 1:
            raise InvalidSpec(f"FixedSteps count must be a positive integer, got {self.count!r}")


@dataclass(frozen=True)
class Deadline:
    budget_s: float

    def __post_init__(self):
        if not (math.isfinite(self.budget_s) and self.budget_s > 0):
            raise InvalidSpec(f"Deadline budget must be positive, got {self.budget_s!r}")


@dataclass(frozen=True)
class AlignToPrecopy:
    """Hand off when a paired pre-copy run of ``rounds`` rounds would.

    ``inter_round_delay_s`` is the pre-copy delay of the paired run; when
    None an averaged profile's own delay is used.
    """

    rounds: int
    inter_round_delay_s: Optional[float] = None

    def __post_init__(self):
        if isinstance(self.rounds, bool) or int(self.rounds) != self.rounds or self.rounds < 1:
            raise InvalidSpec(f"AlignToPrecopy rounds must be a positive integer, got {self.rounds!r}")
        delay = self.inter_round_delay_s
        if delay is not None and not (math.isfinite(delay) and delay >= 0):
            raise InvalidSpec(f"inter-round delay must be non-negative, got {delay!r}")


HandoffPolicy = Union[FixedSteps, Deadline, AlignToPrecopy]


# -- outcomes ---------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class StepLog:
    """One pre-copy round or mirroring event.

    ``volume_mb`` is in megabits. ``gap_s`` is the idle tail of the step, so
    the transfer occupies ``[start_s, end_s - gap_s)`` at ``rate_mbps``.
    """

    index: int
    volume_mb: float
    duration_s: float
    lam: float
    start_s: float
    end_s: float
    rate_mbps: float
    gap_s: float

    @property
    def transfer_end_s(self) -> float:
        return self.start_s + (self.duration_s - self.gap_s)


@dataclass(frozen=True)
class MigrationOutcome:
    container_id: str
    downtime_s: float
    migration_time_s: float
    overhead_mb: float
    stop_volume_mb: float
    stop_rate_mbps: float
    steps: tuple[StepLog, ...] = field(repr=False)

    @property
    def precopy_end_s(self) -> float:
        """When the stop-and-copy phase begins."""
        return self.steps[-1].end_s if self.steps else 0.0

    def transfer_intervals(self) -> list[tuple[float, float, float]]:
        """``(start, end, rate)`` for every span where data is on the wire."""
        out = []
        for s in self.steps:
            end = s.transfer_end_s
            if end > s.start_s:
                out.append((s.start_s, end, s.rate_mbps))
        stop_start = self.precopy_end_s
        if self.downtime_s > 0:
            out.append((stop_start, stop_start + self.downtime_s, self.stop_rate_mbps))
        return out


@dataclass(frozen=True)
class BandwidthViolation:
    start_s: float
    end_s: float
    aggregate_mbps: float


@dataclass(frozen=True)
class FleetOutcome:
    per_container: tuple[MigrationOutcome, ...]
    fleet_downtime_s: float
    fleet_migration_time_s: float
    fleet_overhead_mb: float
    bandwidth_report: tuple[BandwidthViolation, ...] = ()

    @property
    def bandwidth_feasible(self) -> bool:
        return not self.bandwidth_report


# -- validation -------------------------------------------------------------

def _finite(value: float, what: str) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise InvalidParameter(f"{what} must be a finite number, got {value!r}")


def _validate_trace(trace: RateTrace) -> None:
    if not trace.events:
        raise EmptyTrace("trace has no events")
    prev_dirty = None
    for i, ev in enumerate(trace.events, start=1):
        _finite(ev.rate_mbps, f"event {i} rate_mbps")
        _finite(ev.dirty_mbps, f"event {i} dirty_mbps")
        _finite(ev.gap_s, f"event {i} gap_s")
        if ev.rate_mbps <= 0:
            raise NonPositiveRate(f"event {i} rate_mbps must be > 0, got {ev.rate_mbps}")
        if ev.dirty_mbps < 0:
            raise InvalidParameter(f"event {i} dirty_mbps must be >= 0, got {ev.dirty_mbps}")
        if ev.gap_s < 0:
            raise InvalidParameter(f"event {i} gap_s must be >= 0, got {ev.gap_s}")
        if prev_dirty is not None and prev_dirty / ev.rate_mbps >= 1:
            raise LambdaNotLessThanOne(
                f"event {i}: lambda = {prev_dirty}/{ev.rate_mbps} is not < 1", step=i)
        prev_dirty = ev.dirty_mbps


def validate_profile(profile: ContainerProfile) -> ContainerProfile:
    """Return ``profile`` unchanged if it is usable by the engines, else raise."""
    _finite(profile.memory_mb, "memory_mb")
    if profile.memory_mb <= 0:
        raise NonPositiveMemory(f"memory_mb must be > 0, got {profile.memory_mb}")
    _finite(profile.handoff_rate_mbps, "handoff_rate_mbps")
    if profile.handoff_rate_mbps <= 0:
        raise NonPositiveRate(f"handoff_rate_mbps must be > 0, got {profile.handoff_rate_mbps}")

    params = profile.params
    if isinstance(params, AveragedParams):
        _finite(params.avg_rate_mbps, "avg_rate_mbps")
        _finite(params.avg_dirty_mbps, "avg_dirty_mbps")
        _finite(params.inter_round_delay_s, "inter_round_delay_s")
        if params.avg_rate_mbps <= 0:
            raise NonPositiveRate(f"avg_rate_mbps must be > 0, got {params.avg_rate_mbps}")
        if params.avg_dirty_mbps < 0:
            raise InvalidParameter(f"avg_dirty_mbps must be >= 0, got {params.avg_dirty_mbps}")
        if params.inter_round_delay_s < 0:
            raise InvalidParameter(
                f"inter_round_delay_s must be >= 0, got {params.inter_round_delay_s}")
        if params.lam >= 1:
            raise LambdaNotLessThanOne(
                f"lambda = {params.avg_dirty_mbps}/{params.avg_rate_mbps} is not < 1")
    elif isinstance(params, RateTrace):
        _validate_trace(params)
    else:
        raise InvalidParameter(
            f"params must be AveragedParams or RateTrace, got {type(params).__name__}")
    return profile


def series_mean(values: Sequence[float]) -> float:
    """Mean that returns a constant series' value exactly."""
    if not values:
        raise InvalidParameter("mean of an empty series")
    first = values[0]
    if all(v == first for v in values):
        return first
    return math.fsum(values) / len(values)


def averaged_from_trace(trace: RateTrace, inter_round_delay_s: float) -> AveragedParams:
    """Collapse a trace to its mean rate and mean dirtying rate."""
    return AveragedParams(series_mean(trace.rates), series_mean(trace.dirties),
                          inter_round_delay_s)
