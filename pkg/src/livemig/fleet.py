"""Simultaneous migration of several containers over a shared link."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .errors import InvalidSpec, MigrationError, ZeroContainers
from .migrror import migrror_outcome
from .model import (
    AveragedParams,
    BandwidthViolation,
    ContainerProfile,
    FleetOutcome,
    HandoffPolicy,
    MigrationOutcome,
    RateTrace,
    averaged_from_trace,
)
from .precopy import DEFAULT_ROUNDS, precopy_outcome

DEFAULT_INTER_ROUND_DELAY_S = 0.1
DEFAULT_EVENT_GAP_S = 0.01

# relative slack when comparing an aggregate rate against the budget
BANDWIDTH_RTOL = 1e-9


@dataclass(frozen=True)
class Precopy:
    """Pre-copy for every container.

    ``inter_round_delay_s`` overrides each averaged container's own delay;
    traced containers are collapsed to their mean rates with this delay
    (or the default when it is None).
    """

    rounds: int = DEFAULT_ROUNDS
    inter_round_delay_s: Optional[float] = None


@dataclass(frozen=True)
class Migrror:
    """Mirroring for every container.

    ``event_gap_s`` is the gap used when an averaged container is expanded
    into a constant trace; None means the container's inter-round delay.
    """

    policy: HandoffPolicy
    event_gap_s: Optional[float] = None


Method = Union[Precopy, Migrror]


@dataclass(frozen=True)
class FleetSpec:
    containers: tuple[ContainerProfile, ...]
    total_bandwidth_mbps: float
    method: Method

    def __post_init__(self):
        if not isinstance(self.containers, tuple):
            object.__setattr__(self, "containers", tuple(self.containers))
        if not self.containers:
            raise ZeroContainers("a fleet needs at least one container")
        if not (math.isfinite(self.total_bandwidth_mbps) and self.total_bandwidth_mbps > 0):
            raise InvalidSpec(f"total bandwidth must be > 0, got {self.total_bandwidth_mbps!r}")


def allocate_equal(total_bandwidth_mbps: float, count: int) -> float:
    if count < 1:
        raise ZeroContainers("cannot split bandwidth across zero containers")
    if not total_bandwidth_mbps > 0:
        raise InvalidSpec(f"total bandwidth must be > 0, got {total_bandwidth_mbps!r}")
    return total_bandwidth_mbps / count


def precopy_profile(profile: ContainerProfile, method: Precopy) -> ContainerProfile:
    """The averaged profile the pre-copy engine actually runs on."""
    params = profile.params
    delay = method.inter_round_delay_s
    if isinstance(params, RateTrace):
        new = averaged_from_trace(params, DEFAULT_INTER_ROUND_DELAY_S if delay is None else delay)
    elif delay is not None and delay != params.inter_round_delay_s:
        new = AveragedParams(params.avg_rate_mbps, params.avg_dirty_mbps, delay)
    else:
        return profile
    return dataclasses.replace(profile, params=new)


def run_container(profile: ContainerProfile, method: Method) -> MigrationOutcome:
    try:
        if isinstance(method, Precopy):
            return precopy_outcome(precopy_profile(profile, method), method.rounds)
        if isinstance(method, Migrror):
            return migrror_outcome(profile, method.policy, method.event_gap_s)
    except MigrationError as exc:
        exc.container_id = profile.id
        raise
    raise InvalidSpec(f"unknown migration method {method!r}")


def run_fleet(spec: FleetSpec, check_bandwidth: bool = True) -> FleetOutcome:
    """Migrate every container from t = 0 and aggregate the results.

    Containers with identical parameters share one engine run.
    """
    cache: dict[tuple, MigrationOutcome] = {}
    outcomes = []
    for profile in spec.containers:
        key = (profile.memory_mb, profile.handoff_rate_mbps, profile.params)
        base = cache.get(key)
        if base is None:
            base = cache[key] = run_container(profile, spec.method)
        outcomes.append(base if base.container_id == profile.id
                        else dataclasses.replace(base, container_id=profile.id))
    return aggregate(outcomes, spec.total_bandwidth_mbps if check_bandwidth else None)


def aggregate(outcomes: Sequence[MigrationOutcome],
              total_bandwidth_mbps: Optional[float] = None) -> FleetOutcome:
    if not outcomes:
        raise ZeroContainers("nothing to aggregate")
    report: tuple[BandwidthViolation, ...] = ()
    if total_bandwidth_mbps is not None:
        report = tuple(validate_bandwidth_timeline(outcomes, total_bandwidth_mbps))
    return FleetOutcome(
        per_container=tuple(outcomes),
        fleet_downtime_s=max(o.downtime_s for o in outcomes),
        fleet_migration_time_s=max(o.migration_time_s for o in outcomes),
        fleet_overhead_mb=math.fsum(o.overhead_mb for o in outcomes),
        bandwidth_report=report,
    )


def validate_bandwidth_timeline(outcomes: Iterable[MigrationOutcome],
                                total_bandwidth_mbps: float) -> list[BandwidthViolation]:
    """Intervals where the summed transfer rate of all containers exceeds the budget.

    Transfer spans are half-open ``[start, end)``; idle gaps carry no rate.
    Adjacent violating segments with the same aggregate rate are merged.
    """
    # containers sharing one engine run share the same step tuple
    groups: dict[tuple, list] = {}
    for o in outcomes:
        entry = groups.setdefault((id(o.steps), o.downtime_s, o.stop_rate_mbps), [o, 0])
        entry[1] += 1

    boundaries = []
    for gid, (o, mult) in enumerate(groups.values()):
        for k, (start, end, rate) in enumerate(o.transfer_intervals()):
            key = (gid, k)
            boundaries.append((start, 1, key, rate * mult))
            boundaries.append((end, 0, key, 0.0))
    # ends sort before starts at the same instant
    boundaries.sort(key=lambda b: (b[0], b[1]))

    limit = total_bandwidth_mbps * (1 + BANDWIDTH_RTOL)
    active: dict[tuple, float] = {}
    report: list[BandwidthViolation] = []
    i = 0
    n = len(boundaries)
    while i < n:
        t = boundaries[i][0]
        while i < n and boundaries[i][0] == t:
            _, is_start, key, rate = boundaries[i]
            if is_start:
                active[key] = rate
            else:
                active.pop(key, None)
            i += 1
        if i == n or not active:
            continue
        nxt = boundaries[i][0]
        total = math.fsum(active.values())
        if total > limit:
            if report and report[-1].end_s == t and report[-1].aggregate_mbps == total:
                report[-1] = BandwidthViolation(report[-1].start_s, nxt, total)
            else:
                report.append(BandwidthViolation(t, nxt, total))
    return report
