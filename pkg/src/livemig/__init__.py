"""Analytical cost model for simultaneous live migration of VMs and containers.

Two engines are provided: iterative pre-copy driven by averaged parameters,
and per-event mirroring driven by non-averaged rate traces. A fleet layer
runs many containers over a shared link and checks the bandwidth budget.
"""

__version__ = "0.1.0"

from .errors import (
    EmptySeries,
    EmptyTrace,
    InvalidParameter,
    InvalidSpec,
    LambdaNotLessThanOne,
    MigrationError,
    NonPositiveMemory,
    NonPositiveRate,
    SchemaViolation,
    TraceTooShort,
    ValidationError,
    ValidationFailed,
    ZeroContainers,
)
from .fleet import FleetSpec, Migrror, Precopy, allocate_equal, run_fleet, validate_bandwidth_timeline
from .migrror import (
    migrror_downtime,
    migrror_events,
    migrror_migration_time,
    migrror_outcome,
    migrror_overhead,
)
from .model import (
    AlignToPrecopy,
    AveragedParams,
    BandwidthViolation,
    ContainerProfile,
    Deadline,
    FixedSteps,
    FleetOutcome,
    MigrationOutcome,
    RateTrace,
    StepLog,
    TraceEvent,
    validate_profile,
)
from .precopy import (
    precopy_downtime,
    precopy_migration_time,
    precopy_outcome,
    precopy_overhead,
    precopy_round_time_closed_form,
    precopy_rounds,
)

__all__ = [
    "AlignToPrecopy",
    "AveragedParams",
    "BandwidthViolation",
    "ContainerProfile",
    "Deadline",
    "EmptySeries",
    "EmptyTrace",
    "FixedSteps",
    "FleetOutcome",
    "FleetSpec",
    "InvalidParameter",
    "InvalidSpec",
    "LambdaNotLessThanOne",
    "MigrationError",
    "MigrationOutcome",
    "Migrror",
    "NonPositiveMemory",
    "NonPositiveRate",
    "Precopy",
    "RateTrace",
    "SchemaViolation",
    "StepLog",
    "TraceEvent",
    "TraceTooShort",
    "ValidationError",
    "ValidationFailed",
    "ZeroContainers",
    "allocate_equal",
    "migrror_downtime",
    "migrror_events",
    "migrror_migration_time",
    "migrror_outcome",
    "migrror_overhead",
    "precopy_downtime",
    "precopy_migration_time",
    "precopy_outcome",
    "precopy_overhead",
    "precopy_round_time_closed_form",
    "precopy_rounds",
    "run_fleet",
    "validate_bandwidth_timeline",
    "validate_profile",
]
