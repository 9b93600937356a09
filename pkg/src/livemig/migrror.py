"""Mirroring migration driven by per-event (non-averaged) traces.

Event 1 ships the whole memory image at the event's rate. Each later event
ships what was dirtied during the previous event, at its own rate, and is
followed by that event's gap. At hand-off the pages dirtied during the last
event go out at the container's hand-off rate.

The number of events is set by a hand-off policy: a fixed count, a
wall-clock deadline, or the hand-off instant of a paired pre-copy run.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterator, Optional

from .errors import InvalidSpec, TraceTooShort
from .model import (
    AlignToPrecopy,
    AveragedParams,
    ContainerProfile,
    Deadline,
    FixedSteps,
    HandoffPolicy,
    MigrationOutcome,
    RateTrace,
    StepLog,
    TraceEvent,
    averaged_from_trace,
    validate_profile,
)
from .precopy import precopy_rounds

DEFAULT_ALIGN_DELAY_S = 0.1

# guards Deadline runs on an expanded averaged profile with a tiny gap
MAX_EXPANDED_EVENTS = 10_000_000


def handoff_deadline(profile: ContainerProfile, policy: AlignToPrecopy) -> float:
    """Pre-hand-off duration of the paired pre-copy run.

    For a traced profile the pair uses the trace's mean rate and mean
    dirtying rate.
    """
    params = profile.params
    if isinstance(params, RateTrace):
        delay = policy.inter_round_delay_s
        paired = averaged_from_trace(params, DEFAULT_ALIGN_DELAY_S if delay is None else delay)
    else:
        paired = params
        if policy.inter_round_delay_s is not None:
            paired = AveragedParams(params.avg_rate_mbps, params.avg_dirty_mbps,
                                    policy.inter_round_delay_s)
    pair = ContainerProfile(profile.id, profile.memory_mb, profile.handoff_rate_mbps, paired)
    return precopy_rounds(pair, policy.rounds)[-1].end_s


def _event_source(profile: ContainerProfile, event_gap_s: Optional[float]) -> tuple[Iterator[TraceEvent], bool]:
    params = profile.params
    if isinstance(params, RateTrace):
        return iter(params.events), False
    gap = params.inter_round_delay_s if event_gap_s is None else event_gap_s
    if not (math.isfinite(gap) and gap >= 0):
        raise InvalidSpec(f"event gap must be non-negative, got {gap!r}")
    return itertools.repeat(TraceEvent(params.avg_rate_mbps, params.avg_dirty_mbps, gap)), True


def migrror_events(profile: ContainerProfile, policy: HandoffPolicy,
                   event_gap_s: Optional[float] = None) -> list[StepLog]:
    """Step log up to hand-off.

    An averaged profile is expanded into a constant trace whose gap is
    ``event_gap_s`` (default: the profile's inter-round delay).
    """
    validate_profile(profile)
    if isinstance(policy, FixedSteps):
        count, deadline = policy.count, None
    elif isinstance(policy, Deadline):
        count, deadline = None, policy.budget_s
    elif isinstance(policy, AlignToPrecopy):
        count, deadline = None, handoff_deadline(profile, policy)
    else:
        raise InvalidSpec(f"unknown hand-off policy {policy!r}")

    events, expanded = _event_source(profile, event_gap_s)
    steps: list[StepLog] = []
    volume = profile.memory_megabits
    prev_dirty = 0.0
    start = 0.0
    for i in itertools.count(1):
        if count is not None and i > count:
            break
        if deadline is not None and steps and steps[-1].end_s >= deadline:
            break
        ev = next(events, None)
        if ev is None:
            raise TraceTooShort(
                f"container {profile.id!r}: trace ended after {i - 1} events before hand-off")
        if expanded and i > MAX_EXPANDED_EVENTS:
            raise TraceTooShort(
                f"container {profile.id!r}: more than {MAX_EXPANDED_EVENTS} events before hand-off")
        if i > 1:
            volume = prev_dirty * steps[-1].duration_s
        duration = volume / ev.rate_mbps + ev.gap_s
        end = start + duration
        lam = prev_dirty / ev.rate_mbps if i > 1 else 0.0
        steps.append(StepLog(i, volume, duration, lam, start, end, ev.rate_mbps, ev.gap_s))
        if expanded and duration == 0 and i > 1:
            # a constant trace has reached a zero-length fixed point
            break
        start = end
        prev_dirty = ev.dirty_mbps
    return steps


def _last_dirty(profile: ContainerProfile, n: int) -> float:
    params = profile.params
    if isinstance(params, RateTrace):
        return params.events[n - 1].dirty_mbps
    return params.avg_dirty_mbps


def migrror_outcome(profile: ContainerProfile, policy: HandoffPolicy,
                    event_gap_s: Optional[float] = None) -> MigrationOutcome:
    steps = migrror_events(profile, policy, event_gap_s)
    stop_volume = _last_dirty(profile, len(steps)) * steps[-1].duration_s
    downtime = stop_volume / profile.handoff_rate_mbps
    return MigrationOutcome(
        container_id=profile.id,
        downtime_s=downtime,
        migration_time_s=math.fsum(s.duration_s for s in steps) + downtime,
        overhead_mb=math.fsum(s.volume_mb for s in steps) + stop_volume,
        stop_volume_mb=stop_volume,
        stop_rate_mbps=profile.handoff_rate_mbps,
        steps=tuple(steps),
    )


def migrror_downtime(profile: ContainerProfile, policy: HandoffPolicy,
                     event_gap_s: Optional[float] = None) -> float:
    return migrror_outcome(profile, policy, event_gap_s).downtime_s


def migrror_migration_time(profile: ContainerProfile, policy: HandoffPolicy,
                           event_gap_s: Optional[float] = None) -> float:
    return migrror_outcome(profile, policy, event_gap_s).migration_time_s


def migrror_overhead(profile: ContainerProfile, policy: HandoffPolicy,
                     event_gap_s: Optional[float] = None) -> float:
    return migrror_outcome(profile, policy, event_gap_s).overhead_mb
