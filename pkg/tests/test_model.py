import math

import pytest
from hypothesis import given, strategies as st

from livemig import (
    AlignToPrecopy,
    ContainerProfile,
    Deadline,
    EmptyTrace,
    FixedSteps,
    InvalidParameter,
    InvalidSpec,
    LambdaNotLessThanOne,
    NonPositiveMemory,
    NonPositiveRate,
    RateTrace,
    validate_profile,
)
from livemig.model import megabits_to_mb, mb_to_megabits

from conftest import averaged, traced


def test_valid_averaged_profile():
    p = averaged(200, 200, 100)
    assert validate_profile(p) is p
    assert p.params.lam == 0.5
    assert p.memory_megabits == 1600


def test_lambda_of_one_rejected():
    with pytest.raises(LambdaNotLessThanOne):
        validate_profile(averaged(200, 100, 100))


def test_traced_profile_lambda_uses_previous_dirty():
    # lambda_2 = 50 / 200; the final 150 never meets a later rate
    p = traced([200, 200], [50, 150], [0, 0])
    assert validate_profile(p) is p


def test_traced_lambda_violation_reports_step():
    p = traced([200, 100, 200], [50, 250, 10], [0, 0, 0])
    with pytest.raises(LambdaNotLessThanOne) as info:
        validate_profile(p)
    assert info.value.step == 3


@pytest.mark.parametrize("profile, error", [
    (averaged(memory_mb=0), NonPositiveMemory),
    (averaged(memory_mb=-5), NonPositiveMemory),
    (averaged(rate=0, dirty=0), NonPositiveRate),
    (averaged(handoff=0), NonPositiveRate),
    (averaged(dirty=-1), InvalidParameter),
    (averaged(delay=-0.1), InvalidParameter),
    (averaged(memory_mb=math.nan), InvalidParameter),
    (ContainerProfile("x", 10, 10, RateTrace(())), EmptyTrace),
    (traced([100, -1], [1, 1], [0, 0]), NonPositiveRate),
    (traced([100, 100], [1, 1], [0, -1]), InvalidParameter),
    (ContainerProfile("x", 10, 10, {"rate": 1}), InvalidParameter),
])
def test_validation_errors(profile, error):
    with pytest.raises(error):
        validate_profile(profile)


def test_validation_errors_are_value_errors():
    with pytest.raises(ValueError):
        validate_profile(averaged(memory_mb=0))


@given(st.floats(1e-6, 1e9, allow_nan=False), st.floats(1e-3, 1e4), st.floats(0, 0.999))
def test_validate_is_idempotent(memory, rate, lam):
    p = averaged(memory, rate, lam * rate, 0.1)
    assert validate_profile(validate_profile(p)) == p


@given(st.floats(1e-300, 1e300))
def test_unit_round_trip(value):
    assert megabits_to_mb(mb_to_megabits(value)) == value


@pytest.mark.parametrize("make", [
    lambda: FixedSteps(0),
    lambda: FixedSteps(1.5),
    lambda: Deadline(0),
    lambda: AlignToPrecopy(0),
    lambda: AlignToPrecopy(3, -1.0),
])
def test_policy_invariants(make):
    with pytest.raises(InvalidSpec):
        make()


def test_step_log_transfer_span():
    from livemig import StepLog
    s = StepLog(2, 10.0, 1.5, 0.5, 3.0, 4.5, 20.0, 1.0)
    assert s.transfer_end_s == 3.5
