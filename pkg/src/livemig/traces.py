"""Trace files, fleet manifests, summary statistics and synthetic traces.

Trace CSV::

    event,rate_mbps,dirty_mbps,gap_s
    1,120.5,30.25,0.01
    ...

Fleet manifest (JSON)::

    {
      "total_bandwidth_mbps": 1000,
      "method": {"precopy": {"rounds": 10, "inter_round_delay_s": 0.1}},
      "containers": [
        {"id": "c0", "memory_mb": 200, "handoff_rate_mbps": 50,
         "averaged": {"avg_rate_mbps": 50, "avg_dirty_mbps": 25, "inter_round_delay_s": 0.1}},
        {"id": "c1", "memory_mb": 200, "handoff_rate_mbps": 50, "trace_file": "c1.csv"}
      ]
    }

``method`` may instead be ``{"migrror": {"policy": POLICY, "event_gap_s": 0.01}}``
where POLICY is one of ``{"kind": "fixed", "count": N}``,
``{"kind": "deadline", "budget_s": T}`` or
``{"kind": "align", "rounds": M, "inter_round_delay_s": D}``.
Trace paths are relative to the manifest's directory.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import statistics
from dataclasses import dataclass
from pathlib import Path
from statistics import NormalDist
from typing import Any, Optional, Sequence, Union

import numpy as np

from .errors import EmptySeries, InvalidSpec, MigrationError, SchemaViolation, ValidationFailed
from .fleet import FleetSpec, Method, Migrror, Precopy
from .model import (
    AlignToPrecopy,
    AveragedParams,
    ContainerProfile,
    Deadline,
    FixedSteps,
    HandoffPolicy,
    RateTrace,
    validate_profile,
)

TRACE_HEADER = ["event", "rate_mbps", "dirty_mbps", "gap_s"]
U64_MAX = 2 ** 64 - 1


# -- trace CSV --------------------------------------------------------------

def _number(text: str, field: str, line: int) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise SchemaViolation(f"line {line}: {field} is not a number: {text!r}",
                              field=field, line=line) from None
    if not math.isfinite(value):
        raise SchemaViolation(f"line {line}: {field} is not finite", field=field, line=line)
    return value


def parse_trace_csv(text: str) -> RateTrace:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != TRACE_HEADER:
        raise SchemaViolation(f"trace header must be {','.join(TRACE_HEADER)}", line=1)
    rates, dirties, gaps = [], [], []
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(TRACE_HEADER):
            raise SchemaViolation(f"line {line}: expected {len(TRACE_HEADER)} columns",
                                  line=line)
        event = _number(row[0], "event", line)
        if event != len(rates) + 1:
            raise SchemaViolation(f"line {line}: events must be numbered 1, 2, ...",
                                  field="event", line=line)
        rates.append(_number(row[1], "rate_mbps", line))
        dirties.append(_number(row[2], "dirty_mbps", line))
        gaps.append(_number(row[3], "gap_s", line))
    return RateTrace.from_columns(rates, dirties, gaps)


def read_trace(path: Union[str, Path]) -> RateTrace:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_trace_csv(fh.read())


def format_trace_csv(trace: RateTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for i, ev in enumerate(trace.events, start=1):
        writer.writerow([i, repr(float(ev.rate_mbps)), repr(float(ev.dirty_mbps)),
                         repr(float(ev.gap_s))])
    return buf.getvalue()


def write_trace(trace: RateTrace, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_trace_csv(trace))


# -- manifest ---------------------------------------------------------------

def _get(obj: dict, key: str, where: str, kind=(int, float)):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaViolation(f"{where}: missing field {key!r}", field=f"{where}.{key}")
    value = obj[key]
    if kind in ((int, float), int) and isinstance(value, bool):
        raise SchemaViolation(f"{where}.{key} must be a number", field=f"{where}.{key}")
    if not isinstance(value, kind):
        raise SchemaViolation(f"{where}.{key} has the wrong type", field=f"{where}.{key}")
    return value


def _optional_number(obj: dict, key: str, where: str) -> Optional[float]:
    if obj.get(key) is None:
        return None
    return float(_get(obj, key, where))


def policy_from_doc(doc: Any, where: str = "policy") -> HandoffPolicy:
    kind = _get(doc, "kind", where, str)
    try:
        if kind == "fixed":
            return FixedSteps(_get(doc, "count", where, int))
        if kind == "deadline":
            return Deadline(float(_get(doc, "budget_s", where)))
        if kind == "align":
            return AlignToPrecopy(_get(doc, "rounds", where, int),
                                  _optional_number(doc, "inter_round_delay_s", where))
    except InvalidSpec as exc:
        raise SchemaViolation(f"{where}: {exc}", field=where) from None
    raise SchemaViolation(f"{where}.kind must be fixed, deadline or align", field=f"{where}.kind")


def policy_to_doc(policy: HandoffPolicy) -> dict:
    if isinstance(policy, FixedSteps):
        return {"kind": "fixed", "count": policy.count}
    if isinstance(policy, Deadline):
        return {"kind": "deadline", "budget_s": policy.budget_s}
    doc: dict[str, Any] = {"kind": "align", "rounds": policy.rounds}
    if policy.inter_round_delay_s is not None:
        doc["inter_round_delay_s"] = policy.inter_round_delay_s
    return doc


def method_from_doc(doc: Any) -> Method:
    if not isinstance(doc, dict) or len(doc) != 1:
        raise SchemaViolation("method must have exactly one of precopy, migrror", field="method")
    if "precopy" in doc:
        body = doc["precopy"] if doc["precopy"] is not None else {}
        rounds = _get(body, "rounds", "method.precopy", int) if "rounds" in body else 10
        if rounds < 1:
            raise SchemaViolation("method.precopy.rounds must be >= 1", field="method.precopy.rounds")
        return Precopy(rounds, _optional_number(body, "inter_round_delay_s", "method.precopy"))
    if "migrror" in doc:
        body = doc["migrror"]
        policy = policy_from_doc(_get(body, "policy", "method.migrror", dict), "method.migrror.policy")
        return Migrror(policy, _optional_number(body, "event_gap_s", "method.migrror"))
    raise SchemaViolation("method must be precopy or migrror", field="method")


def method_to_doc(method: Method) -> dict:
    if isinstance(method, Precopy):
        body: dict[str, Any] = {"rounds": method.rounds}
        if method.inter_round_delay_s is not None:
            body["inter_round_delay_s"] = method.inter_round_delay_s
        return {"precopy": body}
    body = {"policy": policy_to_doc(method.policy)}
    if method.event_gap_s is not None:
        body["event_gap_s"] = method.event_gap_s
    return {"migrror": body}


def _container_from_doc(doc: Any, index: int, base_dir: Path) -> ContainerProfile:
    where = f"containers[{index}]"
    if not isinstance(doc, dict):
        raise SchemaViolation(f"{where} must be an object", field=where)
    cid = _get(doc, "id", where, str)
    memory = float(_get(doc, "memory_mb", where))
    handoff = float(_get(doc, "handoff_rate_mbps", where))
    has_avg, has_trace = "averaged" in doc, "trace_file" in doc
    if has_avg == has_trace:
        raise SchemaViolation(f"{where} needs exactly one of averaged, trace_file", field=where)
    if has_avg:
        avg = _get(doc, "averaged", where, dict)
        w = f"{where}.averaged"
        params: Any = AveragedParams(float(_get(avg, "avg_rate_mbps", w)),
                                     float(_get(avg, "avg_dirty_mbps", w)),
                                     _optional_number(avg, "inter_round_delay_s", w) or 0.0)
    else:
        params = read_trace(base_dir / _get(doc, "trace_file", where, str))
    profile = ContainerProfile(cid, memory, handoff, params)
    try:
        validate_profile(profile)
    except MigrationError as exc:
        raise ValidationFailed(cid, exc) from None
    return profile


def fleet_from_doc(doc: Any, base_dir: Union[str, Path] = ".") -> FleetSpec:
    if not isinstance(doc, dict):
        raise SchemaViolation("manifest must be a JSON object")
    base_dir = Path(base_dir)
    bandwidth = float(_get(doc, "total_bandwidth_mbps", "manifest"))
    if not bandwidth > 0:
        raise SchemaViolation("total_bandwidth_mbps must be > 0", field="total_bandwidth_mbps")
    method = method_from_doc(doc.get("method"))
    items = _get(doc, "containers", "manifest", list)
    if not items:
        raise SchemaViolation("containers must be non-empty", field="containers")
    containers = tuple(_container_from_doc(c, i, base_dir) for i, c in enumerate(items))
    ids = [c.id for c in containers]
    if len(set(ids)) != len(ids):
        raise SchemaViolation("container ids must be unique", field="containers")
    return FleetSpec(containers, bandwidth, method)


def parse_fleet_manifest(path: Union[str, Path]) -> FleetSpec:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return fleet_from_doc(doc, path.parent)


def _trace_filename(cid: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", cid) + ".csv"


def fleet_to_doc(spec: FleetSpec, trace_files: Optional[dict[str, str]] = None) -> dict:
    """Manifest document; ``trace_files`` maps traced container ids to paths."""
    containers = []
    for c in spec.containers:
        item: dict[str, Any] = {"id": c.id, "memory_mb": c.memory_mb,
                                "handoff_rate_mbps": c.handoff_rate_mbps}
        if isinstance(c.params, AveragedParams):
            item["averaged"] = {"avg_rate_mbps": c.params.avg_rate_mbps,
                                "avg_dirty_mbps": c.params.avg_dirty_mbps,
                                "inter_round_delay_s": c.params.inter_round_delay_s}
        else:
            item["trace_file"] = (trace_files or {}).get(c.id, _trace_filename(c.id))
        containers.append(item)
    return {"total_bandwidth_mbps": spec.total_bandwidth_mbps,
            "method": method_to_doc(spec.method),
            "containers": containers}


def write_fleet_manifest(spec: FleetSpec, path: Union[str, Path],
                         extra: Optional[dict] = None) -> dict:
    """Write the manifest and one CSV per traced container next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    files = {}
    for c in spec.containers:
        if isinstance(c.params, RateTrace):
            files[c.id] = _trace_filename(c.id)
            write_trace(c.params, path.parent / files[c.id])
    doc = fleet_to_doc(spec, files)
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return doc


# -- statistics -------------------------------------------------------------

@dataclass(frozen=True)
class TraceStats:
    min: float
    max: float
    median: float
    mean: float
    std: float


def trace_stats(series: Sequence[float]) -> TraceStats:
    """Summary with population standard deviation."""
    values = [float(v) for v in series]
    if not values:
        raise EmptySeries("cannot summarise an empty series")
    return TraceStats(min(values), max(values), statistics.median(values),
                      statistics.fmean(values), statistics.pstdev(values))


# -- synthetic traces -------------------------------------------------------

@dataclass(frozen=True)
class Uniform:
    min: float
    max: float


@dataclass(frozen=True)
class TruncatedNormal:
    mean: float
    std: float
    min: float
    max: float


@dataclass(frozen=True)
class Shuffled:
    """Keep the sampled order."""


@dataclass(frozen=True)
class Ascending:
    pass


@dataclass(frozen=True)
class Descending:
    pass


@dataclass(frozen=True)
class FrontLoaded:
    fraction: float


@dataclass(frozen=True)
class BackLoaded:
    fraction: float


Distribution = Union[Uniform, TruncatedNormal]
Ordering = Union[Shuffled, Ascending, Descending, FrontLoaded, BackLoaded]


@dataclass(frozen=True)
class SynthSpec:
    length: int
    distribution: Distribution
    ordering: Ordering = Shuffled()
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.length, bool) or not isinstance(self.length, int) or self.length < 1:
            raise InvalidSpec(f"length must be a positive integer, got {self.length!r}")
        dist = self.distribution
        if not isinstance(dist, (Uniform, TruncatedNormal)):
            raise InvalidSpec(f"unknown distribution {dist!r}")
        if not (math.isfinite(dist.min) and math.isfinite(dist.max) and dist.min < dist.max):
            raise InvalidSpec(f"distribution needs min < max, got {dist.min}, {dist.max}")
        if isinstance(dist, TruncatedNormal) and not (dist.std > 0 and math.isfinite(dist.mean)):
            raise InvalidSpec("truncated normal needs a finite mean and std > 0")
        if isinstance(self.ordering, (FrontLoaded, BackLoaded)) and not 0 < self.ordering.fraction < 1:
            raise InvalidSpec(f"ordering fraction must be in (0, 1), got {self.ordering.fraction}")
        if not isinstance(self.ordering, (Shuffled, Ascending, Descending, FrontLoaded, BackLoaded)):
            raise InvalidSpec(f"unknown ordering {self.ordering!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed <= U64_MAX:
            raise InvalidSpec(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


def _top_indices(values: Sequence[float], fraction: float) -> set[int]:
    k = min(len(values), max(0, int(round(fraction * len(values)))))
    by_value = sorted(range(len(values)), key=lambda i: values[i], reverse=True)
    return set(by_value[:k])


def reorder(values: Sequence[float], ordering: Ordering) -> list[float]:
    values = list(values)
    if isinstance(ordering, Shuffled):
        return values
    if isinstance(ordering, Ascending):
        return sorted(values)
    if isinstance(ordering, Descending):
        return sorted(values, reverse=True)
    top = _top_indices(values, ordering.fraction)
    high = [v for i, v in enumerate(values) if i in top]
    low = [v for i, v in enumerate(values) if i not in top]
    return high + low if isinstance(ordering, FrontLoaded) else low + high


_MAX_REJECTION_ROUNDS = 1000


def _truncated_mean(loc: float, std: float, lo: float, hi: float) -> float:
    unit = NormalDist()
    a, b = (lo - loc) / std, (hi - loc) / std
    mass = unit.cdf(b) - unit.cdf(a)
    if mass <= 0:
        return lo if loc < lo else hi
    return loc + std * (unit.pdf(a) - unit.pdf(b)) / mass


def normal_location_for_mean(dist: TruncatedNormal) -> float:
    """Location of the parent normal whose truncation to [min, max] has mean ``dist.mean``.

    Falls back to ``dist.mean`` when it lies outside the interval.
    """
    if not dist.min < dist.mean < dist.max:
        return dist.mean
    lo, hi = dist.min - 20 * dist.std, dist.max + 20 * dist.std
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _truncated_mean(mid, dist.std, dist.min, dist.max) < dist.mean:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_trace(spec: SynthSpec) -> list[float]:
    rng = np.random.default_rng(spec.seed)
    dist = spec.distribution
    n = spec.length
    if isinstance(dist, Uniform):
        sample = rng.uniform(dist.min, dist.max, n)
    else:
        loc = normal_location_for_mean(dist)
        kept = np.empty(0)
        for _ in range(_MAX_REJECTION_ROUNDS):
            draw = rng.normal(loc, dist.std, max(2 * (n - kept.size), 64))
            kept = np.concatenate([kept, draw[(draw >= dist.min) & (draw <= dist.max)]])
            if kept.size >= n:
                break
        else:
            raise InvalidSpec("truncated normal acceptance rate is too low to sample")
        sample = kept[:n]
    return reorder([float(v) for v in sample], spec.ordering)


def mean_preserving_permutations(series: Sequence[float],
                                 fraction: float = 0.25) -> dict[str, list[float]]:
    """Reorderings of ``series`` that keep its multiset (and so its mean and std)."""
    values = list(series)
    if not values:
        raise EmptySeries("cannot permute an empty series")
    return {
        "original": values,
        "ascending": reorder(values, Ascending()),
        "descending": reorder(values, Descending()),
        "front_loaded": reorder(values, FrontLoaded(fraction)),
        "back_loaded": reorder(values, BackLoaded(fraction)),
    }


def derive_seed(seed: int, *path: int) -> int:
    """Independent 64-bit seed for a sub-stream, stable across runs."""
    state = np.random.SeedSequence([seed, *path]).generate_state(1, np.uint64)
    return int(state[0])


def synthesize_trace(length: int, rate: Distribution, dirty: Distribution,
                     gap: Union[float, Distribution], seed: int,
                     rate_order: Ordering = Shuffled(), dirty_order: Ordering = Shuffled(),
                     max_lambda: float = 0.999) -> RateTrace:
    """A full trace whose consecutive dirty/rate ratios stay below ``max_lambda``.

    Dirtying values that would push a ratio to ``max_lambda`` or above are
    clipped down to ``max_lambda`` times the next event's rate.
    """
    if not 0 < max_lambda < 1:
        raise InvalidSpec(f"max_lambda must be in (0, 1), got {max_lambda}")
    rates = generate_trace(SynthSpec(length, rate, rate_order, derive_seed(seed, 0)))
    dirties = generate_trace(SynthSpec(length, dirty, dirty_order, derive_seed(seed, 1)))
    if isinstance(gap, (Uniform, TruncatedNormal)):
        gaps = generate_trace(SynthSpec(length, gap, Shuffled(), derive_seed(seed, 2)))
    else:
        gaps = [float(gap)] * length
    for i in range(length - 1):
        cap = max_lambda * rates[i + 1]
        if dirties[i] >= cap:
            dirties[i] = cap
    return RateTrace.from_columns(rates, dirties, gaps)


# -- text forms used on the command line and in generator metadata ---------

def parse_distribution(text: str) -> Distribution:
    """``uniform:LO:HI`` or ``tnorm:MEAN:STD:LO:HI``."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts[1:]]
    except ValueError:
        raise InvalidSpec(f"bad distribution {text!r}") from None
    if parts[0] == "uniform" and len(nums) == 2:
        return Uniform(*nums)
    if parts[0] == "tnorm" and len(nums) == 4:
        return TruncatedNormal(*nums)
    raise InvalidSpec(f"bad distribution {text!r}; use uniform:LO:HI or tnorm:MEAN:STD:LO:HI")


def format_distribution(dist: Distribution) -> str:
    if isinstance(dist, Uniform):
        return f"uniform:{dist.min!r}:{dist.max!r}"
    return f"tnorm:{dist.mean!r}:{dist.std!r}:{dist.min!r}:{dist.max!r}"


def parse_ordering(text: str) -> Ordering:
    """``shuffled``, ``ascending``, ``descending``, ``front:F`` or ``back:F``."""
    simple = {"shuffled": Shuffled(), "ascending": Ascending(), "descending": Descending()}
    if text in simple:
        return simple[text]
    kind, _, frac = text.partition(":")
    try:
        value = float(frac)
    except ValueError:
        raise InvalidSpec(f"bad ordering {text!r}") from None
    if kind == "front":
        return FrontLoaded(value)
    if kind == "back":
        return BackLoaded(value)
    raise InvalidSpec(f"bad ordering {text!r}")


def format_ordering(ordering: Ordering) -> str:
    if isinstance(ordering, FrontLoaded):
        return f"front:{ordering.fraction!r}"
    if isinstance(ordering, BackLoaded):
        return f"back:{ordering.fraction!r}"
    return type(ordering).__name__.lower()


def list_trace_files(path: Union[str, Path]) -> list[Path]:
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix == ".csv" and p.is_file())
    if not path.exists():
        raise FileNotFoundError(os.fspath(path))
    return [path]
