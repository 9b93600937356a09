"""Sweeps and comparisons over fleets, producing plot-ready rows."""

from __future__ import annotations

import dataclasses
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np

from .errors import EmptySeries, InvalidSpec, MigrationError
from .fleet import (
    DEFAULT_EVENT_GAP_S,
    DEFAULT_INTER_ROUND_DELAY_S,
    FleetSpec,
    Method,
    Migrror,
    Precopy,
    aggregate,
    allocate_equal,
    run_container,
    run_fleet,
)
from .model import (
    AlignToPrecopy,
    AveragedParams,
    ContainerProfile,
    FleetOutcome,
    HandoffPolicy,
    RateTrace,
    series_mean,
)
from .precopy import DEFAULT_ROUNDS
from .traces import (
    Distribution,
    Ordering,
    Shuffled,
    SynthSpec,
    derive_seed,
    format_distribution,
    format_ordering,
    generate_trace,
    list_trace_files,
    method_to_doc,
    parse_distribution,
    parse_ordering,
    read_trace,
    synthesize_trace,
    trace_stats,
    write_fleet_manifest,
)

AXES = ("memory_mb", "transfer_rate_mbps", "dirty_rate_mbps", "lambda")
METRICS = ("downtime_s", "migration_time_s", "overhead_mb")


@dataclass(frozen=True)
class SweepAxis:
    name: str
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.name not in AXES:
            raise InvalidSpec(f"unknown sweep axis {self.name!r}; expected one of {AXES}")
        if not self.values:
            raise InvalidSpec("sweep axis has no values")
        if any(not (math.isfinite(v) and v > 0) for v in self.values):
            raise InvalidSpec("sweep axis values must be positive")
        if self.name == "lambda" and any(v >= 1 for v in self.values):
            raise InvalidSpec("lambda axis values must be < 1")

    @classmethod
    def linear(cls, name: str, start: float, stop: float, steps: int) -> "SweepAxis":
        if steps < 1:
            raise InvalidSpec("a linear axis needs at least one step")
        return cls(name, tuple(np.linspace(start, stop, steps).tolist()))


# -- base configurations ----------------------------------------------------

def preset_fleet_spec(containers: int = 20, total_bandwidth_mbps: float = 1000.0,
                    memory_mb: float = 200.0, rate_mbps: Optional[float] = None,
                    dirty_mbps: Optional[float] = None,
                    inter_round_delay_s: float = DEFAULT_INTER_ROUND_DELAY_S,
                    rounds: int = DEFAULT_ROUNDS) -> FleetSpec:
    """Identical averaged containers sharing the link equally.

    The rate defaults to the equal split and the dirtying rate to a quarter
    of the rate.
    """
    rate = allocate_equal(total_bandwidth_mbps, containers) if rate_mbps is None else rate_mbps
    dirty = 0.25 * rate if dirty_mbps is None else dirty_mbps
    params = AveragedParams(rate, dirty, inter_round_delay_s)
    profiles = tuple(ContainerProfile(f"c{j:03d}", memory_mb, rate, params)
                     for j in range(containers))
    return FleetSpec(profiles, total_bandwidth_mbps, Precopy(rounds))


def paired_methods(base: Method, rounds: Optional[int] = None,
                   policy: Optional[HandoffPolicy] = None,
                   inter_round_delay_s: Optional[float] = None,
                   event_gap_s: Optional[float] = None) -> dict[str, Method]:
    """Pre-copy and mirroring methods configured for a fair comparison.

    Unless told otherwise the mirroring run hands off when the pre-copy run
    does, and expanded averaged containers use the default event gap.
    """
    if rounds is None:
        if isinstance(base, Precopy):
            rounds = base.rounds
        elif isinstance(base.policy, AlignToPrecopy):
            rounds = base.policy.rounds
        else:
            rounds = DEFAULT_ROUNDS
    if inter_round_delay_s is None:
        if isinstance(base, Precopy):
            inter_round_delay_s = base.inter_round_delay_s
        elif isinstance(base.policy, AlignToPrecopy):
            inter_round_delay_s = base.policy.inter_round_delay_s
    if policy is None:
        if isinstance(base, Migrror) and not isinstance(base.policy, AlignToPrecopy):
            policy = base.policy
        else:
            policy = AlignToPrecopy(rounds, inter_round_delay_s)
    if event_gap_s is None:
        event_gap_s = base.event_gap_s if isinstance(base, Migrror) else None
        if event_gap_s is None:
            event_gap_s = DEFAULT_EVENT_GAP_S
    return {"precopy": Precopy(rounds, inter_round_delay_s),
            "migrror": Migrror(policy, event_gap_s)}


def select_methods(which: str, methods: dict[str, Method]) -> dict[str, Method]:
    if which == "both":
        return methods
    if which not in methods:
        raise InvalidSpec(f"method must be precopy, migrror or both, got {which!r}")
    return {which: methods[which]}


# -- overrides --------------------------------------------------------------

def _override_params(profile: ContainerProfile, axis: str, value: float) -> ContainerProfile:
    p = profile.params
    handoff = profile.handoff_rate_mbps
    if axis == "memory_mb":
        return dataclasses.replace(profile, memory_mb=value)
    if isinstance(p, AveragedParams):
        if axis == "transfer_rate_mbps":
            new: Any = dataclasses.replace(p, avg_rate_mbps=value)
            handoff = value
        elif axis == "dirty_rate_mbps":
            new = dataclasses.replace(p, avg_dirty_mbps=value)
        else:
            new = dataclasses.replace(p, avg_dirty_mbps=value * p.avg_rate_mbps)
    else:
        rates, dirties = p.rates, p.dirties
        if axis == "transfer_rate_mbps":
            rates = [value] * len(rates)
            handoff = value
        elif axis == "dirty_rate_mbps":
            dirties = [value] * len(dirties)
        else:
            # hold each event's ratio to the next event's rate (hand-off rate at the end)
            dirties = [value * r for r in rates[1:] + [handoff]]
        new = RateTrace.from_columns(rates, dirties, p.gaps)
    return dataclasses.replace(profile, handoff_rate_mbps=handoff, params=new)


def override_spec(spec: FleetSpec, axis: str, value: float) -> FleetSpec:
    """Set one swept parameter on every container."""
    if axis not in AXES:
        raise InvalidSpec(f"unknown sweep axis {axis!r}")
    return dataclasses.replace(
        spec, containers=tuple(_override_params(c, axis, value) for c in spec.containers))


def scale_rate_keep_lambda(spec: FleetSpec, rate_mbps: float) -> FleetSpec:
    """Move every container to ``rate_mbps`` while keeping its dirty/rate ratio."""
    out = []
    for c in spec.containers:
        p = c.params
        if isinstance(p, AveragedParams):
            new: Any = AveragedParams(rate_mbps, p.lam * rate_mbps, p.inter_round_delay_s)
            handoff = rate_mbps
        else:
            k = rate_mbps / series_mean(p.rates)
            new = RateTrace.from_columns([r * k for r in p.rates], [d * k for d in p.dirties],
                                         p.gaps)
            handoff = c.handoff_rate_mbps * k
        out.append(dataclasses.replace(c, handoff_rate_mbps=handoff, params=new))
    return dataclasses.replace(spec, containers=tuple(out))


# -- sweep ------------------------------------------------------------------

@dataclass
class SweepRow:
    value: float
    method: str
    status: str = "ok"
    downtime_s: Optional[float] = None
    migration_time_s: Optional[float] = None
    overhead_mb: Optional[float] = None
    bandwidth_feasible: Optional[bool] = None
    error: Optional[str] = None


@dataclass
class SweepResult:
    rows: list[SweepRow]
    metadata: dict[str, Any] = field(default_factory=dict)


def _row(value: float, name: str, spec: FleetSpec) -> SweepRow:
    try:
        out = run_fleet(spec)
    except MigrationError as exc:
        return SweepRow(value, name, status="failed", error=exc.code)
    return SweepRow(value, name, "ok", out.fleet_downtime_s, out.fleet_migration_time_s,
                    out.fleet_overhead_mb, out.bandwidth_feasible)


def sweep_specs(base: FleetSpec, axis: SweepAxis,
                methods: dict[str, Method]) -> list[tuple[float, str, FleetSpec]]:
    """The fully overridden fleet behind every sweep row, in row order."""
    out = []
    for value in axis.values:
        spec = override_spec(base, axis.name, value)
        for name, method in methods.items():
            out.append((value, name, dataclasses.replace(spec, method=method)))
    return out


def sweep(base: FleetSpec, axis: SweepAxis, methods: dict[str, Method],
          metadata: Optional[dict] = None) -> SweepResult:
    rows = [_row(v, name, spec) for v, name, spec in sweep_specs(base, axis, methods)]
    meta = {"axis": axis.name, "values": list(axis.values),
            "methods": {k: describe_method(m) for k, m in methods.items()}}
    meta.update(metadata or {})
    return SweepResult(rows, meta)


def downtime_vs_time_curve(base: FleetSpec, rates: Sequence[float],
                           methods: dict[str, Method]) -> list[SweepRow]:
    """(migration time, downtime) per method along a rate axis at fixed dirty/rate ratio.

    Rows are grouped by method and ordered by migration time.
    """
    axis = SweepAxis("transfer_rate_mbps", tuple(rates))
    rows = []
    for name, method in methods.items():
        group = [_row(v, name, dataclasses.replace(scale_rate_keep_lambda(base, v), method=method))
                 for v in axis.values]
        ok = sorted((r for r in group if r.status == "ok"), key=lambda r: r.migration_time_s)
        rows.extend(ok + [r for r in group if r.status != "ok"])
    return rows


def describe_method(method: Method) -> dict:
    return method_to_doc(method)


# -- average vs non-average -------------------------------------------------

@dataclass
class Deviation:
    averaged: float
    traced: float

    @property
    def absolute(self) -> float:
        return self.traced - self.averaged

    @property
    def percent(self) -> Optional[float]:
        if self.averaged == 0:
            return 0.0 if self.traced == 0 else None
        return 100.0 * (self.traced - self.averaged) / self.averaged


@dataclass
class ComparisonRow:
    container_id: str
    metrics: dict[str, Deviation]


def constant_trace_like(trace: RateTrace) -> RateTrace:
    """Same event count and gaps, with every rate and dirtying rate at its mean."""
    rate = series_mean(trace.rates)
    dirty = series_mean(trace.dirties)
    n = len(trace)
    return RateTrace.from_columns([rate] * n, [dirty] * n, trace.gaps)


def compare_avg_vs_nonavg(spec: FleetSpec, method: Optional[Migrror] = None
                          ) -> tuple[list[ComparisonRow], ComparisonRow]:
    """Mirroring on each raw trace against the same trace flattened to its means.

    Returns per-container rows and a fleet-level row (max/max/sum).
    """
    if method is None:
        method = spec.method if isinstance(spec.method, Migrror) else paired_methods(spec.method)["migrror"]
    rows, raw_all, avg_all = [], [], []
    for c in spec.containers:
        if not isinstance(c.params, RateTrace):
            raise InvalidSpec(f"container {c.id!r} has no trace to compare")
        raw = run_container(c, method)
        avg = run_container(dataclasses.replace(c, params=constant_trace_like(c.params)), method)
        raw_all.append(raw)
        avg_all.append(avg)
        rows.append(ComparisonRow(c.id, {m: Deviation(getattr(avg, m), getattr(raw, m))
                                         for m in METRICS}))
    fr, fa = aggregate(raw_all), aggregate(avg_all)
    fleet = ComparisonRow("FLEET", {
        "downtime_s": Deviation(fa.fleet_downtime_s, fr.fleet_downtime_s),
        "migration_time_s": Deviation(fa.fleet_migration_time_s, fr.fleet_migration_time_s),
        "overhead_mb": Deviation(fa.fleet_overhead_mb, fr.fleet_overhead_mb),
    })
    return rows, fleet


# -- synthetic fleets -------------------------------------------------------

@dataclass(frozen=True)
class GeneratorConfig:
    """Recipe for a fleet of synthetic traced containers."""

    count: int
    length: int
    rate: Distribution
    dirty: Distribution
    gap: Union[float, Distribution] = DEFAULT_EVENT_GAP_S
    memory_mb: Union[float, Distribution] = 200.0
    total_bandwidth_mbps: float = 1000.0
    handoff_rate_mbps: Optional[float] = None
    rate_order: Ordering = Shuffled()
    dirty_order: Ordering = Shuffled()
    rounds: int = DEFAULT_ROUNDS
    inter_round_delay_s: float = DEFAULT_INTER_ROUND_DELAY_S
    max_lambda: float = 0.999
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise InvalidSpec(f"count must be >= 1, got {self.count}")

    def to_doc(self) -> dict:
        def dist_or_number(v):
            return v if isinstance(v, (int, float)) else format_distribution(v)
        return {
            "count": self.count, "length": self.length,
            "rate": format_distribution(self.rate), "dirty": format_distribution(self.dirty),
            "gap": dist_or_number(self.gap), "memory_mb": dist_or_number(self.memory_mb),
            "total_bandwidth_mbps": self.total_bandwidth_mbps,
            "handoff_rate_mbps": self.handoff_rate_mbps,
            "rate_order": format_ordering(self.rate_order),
            "dirty_order": format_ordering(self.dirty_order),
            "rounds": self.rounds, "inter_round_delay_s": self.inter_round_delay_s,
            "max_lambda": self.max_lambda, "seed": self.seed,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "GeneratorConfig":
        def dist_or_number(v):
            return float(v) if isinstance(v, (int, float)) else parse_distribution(v)
        try:
            return cls(
                count=int(doc["count"]), length=int(doc["length"]),
                rate=parse_distribution(doc["rate"]), dirty=parse_distribution(doc["dirty"]),
                gap=dist_or_number(doc["gap"]), memory_mb=dist_or_number(doc["memory_mb"]),
                total_bandwidth_mbps=float(doc["total_bandwidth_mbps"]),
                handoff_rate_mbps=doc.get("handoff_rate_mbps"),
                rate_order=parse_ordering(doc["rate_order"]),
                dirty_order=parse_ordering(doc["dirty_order"]),
                rounds=int(doc["rounds"]), inter_round_delay_s=float(doc["inter_round_delay_s"]),
                max_lambda=float(doc["max_lambda"]), seed=int(doc["seed"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"bad generator block: {exc}") from None


def generate_fleet(cfg: GeneratorConfig, seed: Optional[int] = None) -> FleetSpec:
    seed = cfg.seed if seed is None else seed
    handoff = (allocate_equal(cfg.total_bandwidth_mbps, cfg.count)
               if cfg.handoff_rate_mbps is None else cfg.handoff_rate_mbps)
    if isinstance(cfg.memory_mb, (int, float)):
        memories = [float(cfg.memory_mb)] * cfg.count
    else:
        memories = generate_trace(SynthSpec(cfg.count, cfg.memory_mb, Shuffled(),
                                            derive_seed(seed, 1_000_000)))
    containers = []
    for j in range(cfg.count):
        trace = synthesize_trace(cfg.length, cfg.rate, cfg.dirty, cfg.gap, derive_seed(seed, j),
                                 cfg.rate_order, cfg.dirty_order, cfg.max_lambda)
        containers.append(ContainerProfile(f"c{j:03d}", memories[j], handoff, trace))
    method = Migrror(AlignToPrecopy(cfg.rounds, cfg.inter_round_delay_s))
    return FleetSpec(tuple(containers), cfg.total_bandwidth_mbps, method)


def write_generated(cfg: GeneratorConfig, out_dir: Union[str, Path]) -> Path:
    """Write one trace CSV per container plus ``manifest.json``; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.json"
    write_fleet_manifest(generate_fleet(cfg), path, extra={"generator": cfg.to_doc()})
    return path


# -- repeats ----------------------------------------------------------------

@dataclass
class RepeatSummary:
    seeds: list[int]
    outcomes: list[FleetOutcome]

    def stats(self) -> dict[str, tuple[float, float]]:
        """Mean and population std of each fleet metric across repeats."""
        cols = {
            "downtime_s": [o.fleet_downtime_s for o in self.outcomes],
            "migration_time_s": [o.fleet_migration_time_s for o in self.outcomes],
            "overhead_mb": [o.fleet_overhead_mb for o in self.outcomes],
        }
        return {k: (statistics.fmean(v), statistics.pstdev(v)) for k, v in cols.items()}


def repeat_seeds(seed: int, repeat: int) -> list[int]:
    if repeat < 1:
        raise InvalidSpec(f"repeat must be >= 1, got {repeat}")
    return [(seed + k) % 2 ** 64 for k in range(repeat)]


def run_repeats(cfg: GeneratorConfig, method: Method, repeat: int,
                seed: Optional[int] = None) -> RepeatSummary:
    """Regenerate the synthetic fleet ``repeat`` times and run each."""
    seeds = repeat_seeds(cfg.seed if seed is None else seed, repeat)
    outcomes = [run_fleet(dataclasses.replace(generate_fleet(cfg, s), method=method))
                for s in seeds]
    return RepeatSummary(seeds, outcomes)


# -- stats ------------------------------------------------------------------

STAT_COLUMNS = (("rate", "rates"), ("dirty", "dirties"), ("gap", "gaps"))


def _stats_row(source: str, rates, dirties, gaps) -> dict[str, Any]:
    row: dict[str, Any] = {"source": source, "events": len(rates)}
    for prefix, series in (("rate", rates), ("dirty", dirties), ("gap", gaps)):
        st = trace_stats(series)
        for name in ("min", "max", "median", "mean", "std"):
            row[f"{prefix}_{name}"] = getattr(st, name)
    return row


def stats_table(path: Union[str, Path]) -> list[dict[str, Any]]:
    """Per-file summary rows; a directory gets a leading aggregate row named ALL."""
    files = list_trace_files(path)
    traces = [(p.name, read_trace(p)) for p in files]
    rows = [_stats_row(name, t.rates, t.dirties, t.gaps) for name, t in traces]
    if Path(path).is_dir():
        if not traces:
            raise EmptySeries(f"no trace files in {path}")
        everything = [e for _, t in traces for e in t.events]
        rows.insert(0, _stats_row("ALL", [e.rate_mbps for e in everything],
                                  [e.dirty_mbps for e in everything],
                                  [e.gap_s for e in everything]))
    return rows
