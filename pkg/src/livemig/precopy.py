"""Pre-copy live migration with averaged parameters.

Round 1 ships the whole memory image; every later round ships what was
dirtied during the round before it, and each round ends with an idle
inter-round delay. After ``rounds`` rounds the container is paused and the
pages dirtied during the last round are sent (stop-and-copy).

The step recursion is the reference computation. The closed forms below are
checked against it in the test suite.
"""

from __future__ import annotations

import math

from .errors import InvalidParameter, InvalidSpec
from .model import AveragedParams, ContainerProfile, MigrationOutcome, StepLog, validate_profile

DEFAULT_ROUNDS = 10


def _averaged(profile: ContainerProfile) -> AveragedParams:
    validate_profile(profile)
    if not isinstance(profile.params, AveragedParams):
        raise InvalidParameter(f"pre-copy needs averaged parameters (container {profile.id!r})")
    return profile.params


def _check_rounds(rounds: int) -> None:
    if isinstance(rounds, bool) or int(rounds) != rounds or rounds < 1:
        raise InvalidSpec(f"rounds must be a positive integer, got {rounds!r}")


def precopy_rounds(profile: ContainerProfile, rounds: int = DEFAULT_ROUNDS) -> list[StepLog]:
    params = _averaged(profile)
    _check_rounds(rounds)
    rate = params.avg_rate_mbps
    dirty = params.avg_dirty_mbps
    tau = params.inter_round_delay_s
    lam = params.lam

    steps = []
    volume = profile.memory_megabits
    start = 0.0
    for i in range(1, rounds + 1):
        if i > 1:
            volume = dirty * steps[-1].duration_s
        duration = volume / rate + tau
        end = start + duration
        steps.append(StepLog(i, volume, duration, lam if i > 1 else 0.0,
                             start, end, rate, tau))
        start = end
    return steps


def precopy_round_time_closed_form(profile: ContainerProfile, i: int) -> float:
    """Duration of round ``i`` without iterating."""
    params = _averaged(profile)
    _check_rounds(i)
    lam = params.lam
    tau = params.inter_round_delay_s
    first = profile.memory_megabits / params.avg_rate_mbps
    return first * lam ** (i - 1) + tau * _geometric_sum(lam, i)


def _geometric_sum(lam: float, n: int) -> float:
    """1 + lam + ... + lam**(n-1)."""
    if lam == 0:
        return 1.0
    return (1 - lam ** n) / (1 - lam)


def precopy_round_sum_closed_form(profile: ContainerProfile, rounds: int = DEFAULT_ROUNDS,
                                  printed: bool = False) -> float:
    """Total duration of the pre-copy rounds, excluding downtime.

    ``printed=True`` swaps in the published delay coefficient
    ``lam * (1 - lam**(rounds + 1))``, which disagrees with the recursion
    whenever the delay is non-zero. It exists for comparison only.
    """
    params = _averaged(profile)
    _check_rounds(rounds)
    lam = params.lam
    tau = params.inter_round_delay_s
    first = profile.memory_megabits / params.avg_rate_mbps
    tail_power = rounds + 1 if printed else rounds
    delay_term = tau * (rounds * (1 - lam) - lam * (1 - lam ** tail_power)) / (1 - lam) ** 2
    return first * _geometric_sum(lam, rounds) + delay_term


def precopy_downtime_closed_form(profile: ContainerProfile, rounds: int = DEFAULT_ROUNDS) -> float:
    params = _averaged(profile)
    _check_rounds(rounds)
    lam = params.lam
    first = profile.memory_megabits / params.avg_rate_mbps
    return first * lam ** rounds + lam * params.inter_round_delay_s * _geometric_sum(lam, rounds)


def precopy_migration_time_closed_form(profile: ContainerProfile, rounds: int = DEFAULT_ROUNDS,
                                       printed: bool = False) -> float:
    return (precopy_round_sum_closed_form(profile, rounds, printed)
            + precopy_downtime_closed_form(profile, rounds))


def precopy_overhead_closed_form(profile: ContainerProfile, rounds: int = DEFAULT_ROUNDS,
                                 printed: bool = False) -> float:
    # every round after the first, plus the stop phase, ships dirty * (previous duration)
    params = _averaged(profile)
    return (profile.memory_megabits
            + params.avg_dirty_mbps * precopy_round_sum_closed_form(profile, rounds, printed))


def precopy_downtime(profile: ContainerProfile, rounds: int = DEFAULT_ROUNDS) -> float:
    return precopy_outcome(profile, rounds).downtime_s


def precopy_migration_time(profile: ContainerProfile, rounds: int = DEFAULT_ROUNDS) -> float:
    return precopy_outcome(profile, rounds).migration_time_s


def precopy_overhead(profile: ContainerProfile, rounds: int = DEFAULT_ROUNDS) -> float:
    return precopy_outcome(profile, rounds).overhead_mb


def precopy_outcome(profile: ContainerProfile, rounds: int = DEFAULT_ROUNDS) -> MigrationOutcome:
    steps = precopy_rounds(profile, rounds)
    params = profile.params
    stop_volume = params.avg_dirty_mbps * steps[-1].duration_s
    downtime = stop_volume / params.avg_rate_mbps
    return MigrationOutcome(
        container_id=profile.id,
        downtime_s=downtime,
        migration_time_s=math.fsum(s.duration_s for s in steps) + downtime,
        overhead_mb=math.fsum(s.volume_mb for s in steps) + stop_volume,
        stop_volume_mb=stop_volume,
        stop_rate_mbps=params.avg_rate_mbps,
        steps=tuple(steps),
    )
