import math

import pytest
from hypothesis import given, settings, strategies as st

from livemig import (
    AlignToPrecopy,
    Deadline,
    FixedSteps,
    LambdaNotLessThanOne,
    TraceTooShort,
    migrror_downtime,
    migrror_events,
    migrror_migration_time,
    migrror_outcome,
    migrror_overhead,
    precopy_outcome,
    precopy_rounds,
)
from livemig.migrror import handoff_deadline

from bruteforce import evaluate
from conftest import averaged, traced


def two_events(dirties, gaps=(1, 1), rates=(200, 200)):
    return traced(list(rates), list(dirties), list(gaps))


def test_event_durations():
    steps = migrror_events(two_events([50, 150]), FixedSteps(2))
    assert [s.duration_s for s in steps] == [9, 3.25]
    assert [s.volume_mb for s in steps] == [1600, 450]
    assert [s.lam for s in steps] == [0.0, 0.25]


def test_zero_dirtying_trace():
    steps = migrror_events(two_events([0, 0], gaps=(0, 0)), FixedSteps(2))
    assert [s.duration_s for s in steps] == [8, 0]
    assert [s.volume_mb for s in steps] == [1600, 0]
    out = migrror_outcome(two_events([0, 0], gaps=(0.5, 0)), FixedSteps(2))
    assert (out.downtime_s, out.migration_time_s, out.overhead_mb) == (0, 8.5, 1600)


@pytest.mark.parametrize("dirties, expected", [
    ([50, 150], 2.4375),
    ([150, 50], 1.9375),
    ([100, 100], 2.75),
])
def test_downtime_depends_on_order(dirties, expected):
    assert migrror_downtime(two_events(dirties), FixedSteps(2)) == expected


def test_migration_time_and_overhead():
    p = two_events([50, 150])
    assert migrror_migration_time(p, FixedSteps(2)) == 14.6875
    assert migrror_overhead(p, FixedSteps(2)) == 2537.5


def test_rate_order_changes_migration_time():
    up = traced([100, 300], [90, 90], [0, 0])
    down = traced([300, 100], [90, 90], [0, 0])
    assert migrror_migration_time(up, FixedSteps(2)) == pytest.approx(22.96, rel=1e-12)
    assert migrror_migration_time(down, FixedSteps(2)) == pytest.approx(12.293333333333333, rel=1e-12)
    assert migrror_downtime(up, FixedSteps(2)) == migrror_downtime(down, FixedSteps(2))


def test_rate_order_example_with_unit_lambda_is_rejected():
    assert migrror_migration_time(traced([100, 300], [100, 100], [0, 0]), FixedSteps(2)) == 24.0
    with pytest.raises(LambdaNotLessThanOne):
        migrror_outcome(traced([300, 100], [100, 100], [0, 0]), FixedSteps(2))


def test_constant_trace_equals_precopy():
    n = 10
    out = migrror_outcome(traced([200] * n, [100] * n, [0] * n), FixedSteps(n))
    ref = precopy_outcome(averaged(), n)
    assert out.steps == ref.steps
    assert (out.downtime_s, out.migration_time_s, out.overhead_mb) == (0.0078125, 15.9921875, 3198.4375)


def test_averaged_profile_expands_to_constant_trace():
    p = averaged(delay=0.1)
    assert migrror_outcome(p, FixedSteps(7)).steps == precopy_outcome(p, 7).steps
    gapped = migrror_events(p, FixedSteps(3), event_gap_s=0.01)
    assert [s.gap_s for s in gapped] == [0.01] * 3


def test_trace_too_short():
    with pytest.raises(TraceTooShort):
        migrror_events(two_events([50, 150]), FixedSteps(3))
    with pytest.raises(TraceTooShort):
        migrror_events(two_events([50, 150]), Deadline(100))


def test_deadline_stops_in_the_event_that_crosses_it():
    p = traced([200] * 5, [100] * 5, [1] * 5)
    steps = migrror_events(p, Deadline(9.5))
    # ends: 9, 14.5 -> the second event crosses 9.5 and is the last one
    assert [s.end_s for s in steps] == [9, 14.5]
    assert len(migrror_events(p, Deadline(1))) == 1
    assert len(migrror_events(p, Deadline(9))) == 1


def test_deadline_on_zero_duration_constant_expansion_terminates():
    steps = migrror_events(averaged(dirty=0), Deadline(100))
    assert [s.duration_s for s in steps] == [8, 0]


def test_align_uses_paired_precopy_duration():
    p = averaged(delay=0.1)
    policy = AlignToPrecopy(10)
    deadline = precopy_rounds(p, 10)[-1].end_s
    assert handoff_deadline(p, policy) == deadline
    steps = migrror_events(p, policy, event_gap_s=0.01)
    assert steps[-1].end_s >= deadline
    assert steps[-2].end_s < deadline


def test_align_on_trace_pairs_with_trace_means():
    p = traced([100, 300] * 50, [50, 50] * 50, [0.01] * 100, memory_mb=10)
    expected = precopy_rounds(averaged(10, 200, 50, 0.1, handoff=200), 3)[-1].end_s
    assert handoff_deadline(p, AlignToPrecopy(3)) == expected
    assert handoff_deadline(p, AlignToPrecopy(3, 0.0)) == precopy_rounds(averaged(10, 200, 50), 3)[-1].end_s


def test_handoff_rate_is_profile_field():
    p = traced([200, 200], [50, 150], [1, 1], handoff=400)
    assert migrror_downtime(p, FixedSteps(2)) == 150 * 3.25 / 400


def test_same_mean_traces_diverge():
    a = migrror_downtime(two_events([50, 150]), FixedSteps(2))
    b = migrror_downtime(two_events([100, 100]), FixedSteps(2))
    assert abs(a - b) / a >= 0.1


rate = st.floats(50, 500)
lam = st.floats(0, 0.95)


@st.composite
def traces(draw, max_len=40):
    n = draw(st.integers(1, max_len))
    rates = [draw(rate) for _ in range(n)]
    # keep each dirtying rate below the next event's rate
    dirties = [draw(lam) * (rates[i + 1] if i + 1 < n else 100) for i in range(n)]
    gaps = [draw(st.floats(0, 2)) for _ in range(n)]
    return traced(rates, dirties, gaps, memory_mb=draw(st.floats(1, 4000)),
                  handoff=draw(rate))


@given(traces())
def test_matches_bruteforce(p):
    t = p.params
    n = len(t)
    durations, volumes, td, tm, ta = evaluate(p.memory_megabits, t.rates, t.dirties, t.gaps,
                                              p.handoff_rate_mbps)
    out = migrror_outcome(p, FixedSteps(n))
    assert [s.duration_s for s in out.steps] == pytest.approx(durations, rel=1e-12)
    assert [s.volume_mb for s in out.steps] == pytest.approx(volumes, rel=1e-12)
    assert out.downtime_s == pytest.approx(td, rel=1e-12)
    assert out.migration_time_s == pytest.approx(tm, rel=1e-12)
    assert out.overhead_mb == pytest.approx(ta, rel=1e-12)


@given(traces())
def test_sum_identities(p):
    out = migrror_outcome(p, FixedSteps(len(p.params)))
    assert out.migration_time_s == pytest.approx(
        math.fsum(s.duration_s for s in out.steps) + out.downtime_s, rel=1e-9)
    assert out.overhead_mb == pytest.approx(
        math.fsum(s.volume_mb for s in out.steps) + out.stop_volume_mb, rel=1e-9)
    for prev, cur in zip(out.steps, out.steps[1:]):
        assert cur.start_s == prev.end_s


@settings(max_examples=50)
@given(traces(), st.data())
def test_deadline_prefix_consistency(p, data):
    # strictly positive gaps so every event moves the clock forward
    t = p.params
    p = traced(t.rates, t.dirties, [g + 0.01 for g in t.gaps], p.memory_mb, p.handoff_rate_mbps)
    n = len(t)
    full = migrror_events(p, FixedSteps(n))
    k = data.draw(st.integers(1, n))
    budget = data.draw(st.floats(full[k - 1].end_s, full[-1].end_s))
    by_deadline = migrror_events(p, Deadline(budget))
    assert len(by_deadline) >= k
    assert by_deadline[:k] == migrror_events(p, FixedSteps(k))


@settings(max_examples=100)
@given(st.lists(st.floats(1, 99), min_size=2, max_size=12), st.randoms())
def test_zero_gap_downtime_is_order_invariant(dirties, rnd):
    n = len(dirties)
    shuffled = dirties[:]
    rnd.shuffle(shuffled)
    a = traced([100] * n, dirties, [0] * n, handoff=150)
    b = traced([100] * n, shuffled, [0] * n, handoff=150)
    assert migrror_downtime(a, FixedSteps(n)) == pytest.approx(migrror_downtime(b, FixedSteps(n)),
                                                               rel=1e-9)
