"""Command-line front end: ``livemig run|sweep|compare|curve|gen-traces|stats``.

Exit codes: 0 success, 1 I/O error, 2 validation error, 3 model-domain error.
Errors are reported on stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .errors import InvalidSpec, MigrationError, SchemaViolation
from .experiments import (
    METRICS,
    GeneratorConfig,
    SweepAxis,
    compare_avg_vs_nonavg,
    downtime_vs_time_curve,
    generate_fleet,
    paired_methods,
    preset_fleet_spec,
    repeat_seeds,
    run_repeats,
    select_methods,
    stats_table,
    sweep,
    write_generated,
)
from .fleet import DEFAULT_EVENT_GAP_S, DEFAULT_INTER_ROUND_DELAY_S, FleetSpec, Migrror, run_fleet
from .model import AlignToPrecopy, Deadline, FixedSteps, FleetOutcome, HandoffPolicy
from .precopy import DEFAULT_ROUNDS
from .traces import (
    fleet_from_doc,
    method_to_doc,
    parse_distribution,
    parse_ordering,
)


def parse_policy(text: str) -> HandoffPolicy:
    kind, _, arg = text.partition(":")
    try:
        if kind == "fixed":
            return FixedSteps(int(arg))
        if kind == "deadline":
            return Deadline(float(arg))
        if kind == "align":
            return AlignToPrecopy(int(arg))
    except ValueError:
        pass
    raise InvalidSpec(f"bad policy {text!r}; use fixed:N, deadline:SECONDS or align:M")


def parse_values(values: Optional[str], span: Optional[str]) -> list[float]:
    if values and span:
        raise InvalidSpec("give either --values or --range, not both")
    try:
        if values:
            return [float(v) for v in values.split(",") if v.strip()]
        if span:
            start, stop, steps = span.split(":")
            return np.linspace(float(start), float(stop), int(steps)).tolist()
    except ValueError:
        raise InvalidSpec(f"bad axis values {values or span!r}") from None
    return []


def _load_manifest(path: str) -> tuple[dict, FleetSpec]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return doc, fleet_from_doc(doc, Path(path).parent)


def _base_spec(args) -> tuple[FleetSpec, dict]:
    if args.manifest:
        _, spec = _load_manifest(args.manifest)
        return spec, {"manifest": args.manifest}
    spec = preset_fleet_spec(args.containers, args.bandwidth, args.memory_mb, args.rate,
                           args.dirty, args.delay, args.rounds or DEFAULT_ROUNDS)
    return spec, {"preset": {"containers": args.containers, "total_bandwidth_mbps": args.bandwidth,
                             "memory_mb": args.memory_mb,
                             "rate_mbps": spec.containers[0].params.avg_rate_mbps,
                             "dirty_mbps": spec.containers[0].params.avg_dirty_mbps,
                             "inter_round_delay_s": args.delay}}


def _methods(args, spec: FleetSpec) -> dict:
    policy = parse_policy(args.policy) if args.policy else None
    methods = paired_methods(spec.method, rounds=args.rounds, policy=policy,
                             event_gap_s=getattr(args, "event_gap", None))
    return select_methods(args.method, methods)


# -- output -----------------------------------------------------------------

def _emit(args, text: str) -> None:
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _json(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def fleet_to_json(outcome: FleetOutcome, include_steps: bool = False) -> dict:
    containers = []
    for o in outcome.per_container:
        item: dict[str, Any] = {
            "id": o.container_id, "downtime_s": o.downtime_s,
            "migration_time_s": o.migration_time_s, "overhead_mb": o.overhead_mb,
            "stop_volume_mb": o.stop_volume_mb, "steps_count": len(o.steps),
        }
        if include_steps:
            item["steps"] = [{"index": s.index, "volume_mb": s.volume_mb,
                              "duration_s": s.duration_s, "lambda": s.lam,
                              "start_s": s.start_s, "end_s": s.end_s,
                              "rate_mbps": s.rate_mbps, "gap_s": s.gap_s} for s in o.steps]
        containers.append(item)
    return {
        "fleet": {
            "downtime_s": outcome.fleet_downtime_s,
            "migration_time_s": outcome.fleet_migration_time_s,
            "overhead_mb": outcome.fleet_overhead_mb,
            "bandwidth_feasible": outcome.bandwidth_feasible,
            "bandwidth_report": [dataclasses.asdict(v) for v in outcome.bandwidth_report],
        },
        "containers": containers,
    }


RUN_CSV_HEADER = ("container_id", "downtime_s", "migration_time_s", "overhead_mb",
                  "stop_volume_mb", "steps_count")


def fleet_to_csv(outcome: FleetOutcome) -> str:
    rows = [(o.container_id, o.downtime_s, o.migration_time_s, o.overhead_mb,
             o.stop_volume_mb, len(o.steps)) for o in outcome.per_container]
    rows.append(("FLEET", outcome.fleet_downtime_s, outcome.fleet_migration_time_s,
                 outcome.fleet_overhead_mb, None, None))
    return _csv(RUN_CSV_HEADER, rows)


# -- subcommands ------------------------------------------------------------

def cmd_run(args) -> int:
    doc, spec = _load_manifest(args.manifest)
    method = spec.method
    if args.method or args.rounds or args.policy:
        choice = args.method or ("migrror" if isinstance(spec.method, Migrror) else "precopy")
        if choice == "both":
            raise InvalidSpec("run takes a single method")
        method = _methods(argparse.Namespace(**{**vars(args), "method": choice}), spec)[choice]
    config = {"manifest": args.manifest, "method": method_to_doc(method),
              "total_bandwidth_mbps": spec.total_bandwidth_mbps,
              "containers": len(spec.containers)}

    if args.repeat > 1:
        if "generator" not in doc:
            raise InvalidSpec("--repeat needs a manifest written by gen-traces")
        cfg = GeneratorConfig.from_doc(doc["generator"])
        summary = run_repeats(cfg, method, args.repeat, args.seed)
        config["seeds"] = summary.seeds
        stats = summary.stats()
        if args.format == "csv":
            rows = [(s, o.fleet_downtime_s, o.fleet_migration_time_s, o.fleet_overhead_mb)
                    for s, o in zip(summary.seeds, summary.outcomes)]
            rows.append(("mean", *[stats[m][0] for m in METRICS]))
            rows.append(("std", *[stats[m][1] for m in METRICS]))
            _emit(args, _csv(("seed", *METRICS), rows))
        else:
            _emit(args, _json({
                "config": config,
                "repeats": [{"seed": s, "downtime_s": o.fleet_downtime_s,
                             "migration_time_s": o.fleet_migration_time_s,
                             "overhead_mb": o.fleet_overhead_mb}
                            for s, o in zip(summary.seeds, summary.outcomes)],
                "summary": {m: {"mean": stats[m][0], "std": stats[m][1]} for m in METRICS},
            }))
        return 0

    outcome = run_fleet(dataclasses.replace(spec, method=method))
    if args.format == "csv":
        _emit(args, fleet_to_csv(outcome))
    else:
        _emit(args, _json({"config": config, **fleet_to_json(outcome, args.include_steps)}))
    return 0


SWEEP_CSV_HEADER = ("value", "method", "status", "downtime_s", "migration_time_s",
                    "overhead_mb", "bandwidth_feasible", "error")


def _rows_out(args, rows, meta: dict) -> None:
    if args.format == "csv":
        _emit(args, _csv(SWEEP_CSV_HEADER, [dataclasses.astuple(r) for r in rows]))
    else:
        _emit(args, _json({"metadata": meta, "rows": [dataclasses.asdict(r) for r in rows]}))


def cmd_sweep(args) -> int:
    values = parse_values(args.values, args.range)
    axis = SweepAxis(args.axis, tuple(values))
    spec, source = _base_spec(args)
    methods = _methods(args, spec)
    result = sweep(spec, axis, methods, metadata={"source": source, "seed": args.seed})
    _rows_out(args, result.rows, result.metadata)
    return 0


def cmd_curve(args) -> int:
    values = parse_values(args.values, args.range)
    axis = SweepAxis("transfer_rate_mbps", tuple(values))
    spec, source = _base_spec(args)
    methods = _methods(args, spec)
    rows = downtime_vs_time_curve(spec, axis.values, methods)
    meta = {"source": source, "axis": "transfer_rate_mbps (dirty/rate ratio held)",
            "values": list(axis.values), "seed": args.seed,
            "methods": {k: method_to_doc(m) for k, m in methods.items()}}
    if args.format == "csv":
        _emit(args, _csv(("method", "rate_mbps", "migration_time_s", "downtime_s", "status"),
                         [(r.method, r.value, r.migration_time_s, r.downtime_s, r.status)
                          for r in rows]))
    else:
        _emit(args, _json({"metadata": meta, "rows": [dataclasses.asdict(r) for r in rows]}))
    return 0


def _deviation_json(row) -> dict:
    return {m: {"averaged": d.averaged, "traced": d.traced, "absolute": d.absolute,
                "percent": d.percent} for m, d in row.metrics.items()}


def cmd_compare(args) -> int:
    doc, spec = _load_manifest(args.manifest)
    method = None
    if args.policy or args.rounds:
        method = _methods(argparse.Namespace(**{**vars(args), "method": "migrror"}), spec)["migrror"]
    config = {"manifest": args.manifest}

    if args.repeat > 1:
        if "generator" not in doc:
            raise InvalidSpec("--repeat needs a manifest written by gen-traces")
        cfg = GeneratorConfig.from_doc(doc["generator"])
        seeds = repeat_seeds(cfg.seed if args.seed is None else args.seed, args.repeat)
        fleets = []
        for s in seeds:
            fleet_spec = dataclasses.replace(generate_fleet(cfg, s), method=spec.method)
            fleets.append(compare_avg_vs_nonavg(fleet_spec, method)[1])
        config["seeds"] = seeds
        if args.format == "csv":
            rows = [(s, m, f.metrics[m].averaged, f.metrics[m].traced, f.metrics[m].percent)
                    for s, f in zip(seeds, fleets) for m in METRICS]
            _emit(args, _csv(("seed", "metric", "averaged", "traced", "percent"), rows))
        else:
            _emit(args, _json({"config": config,
                               "repeats": [{"seed": s, **_deviation_json(f)}
                                           for s, f in zip(seeds, fleets)]}))
        return 0

    rows, fleet = compare_avg_vs_nonavg(spec, method)
    if args.format == "csv":
        out = [(r.container_id, m, d.averaged, d.traced, d.absolute, d.percent)
               for r in [*rows, fleet] for m, d in r.metrics.items()]
        _emit(args, _csv(("container_id", "metric", "averaged", "traced", "absolute", "percent"),
                         out))
    else:
        _emit(args, _json({"config": config,
                           "containers": [{"id": r.container_id, **_deviation_json(r)}
                                          for r in rows],
                           "fleet": _deviation_json(fleet)}))
    return 0


def _dist_or_number(text: str):
    try:
        return float(text)
    except ValueError:
        return parse_distribution(text)


def cmd_gen_traces(args) -> int:
    if args.count < 1:
        raise InvalidSpec(f"--count must be >= 1, got {args.count}")
    if args.length < 1:
        raise InvalidSpec(f"--length must be >= 1, got {args.length}")
    cfg = GeneratorConfig(
        count=args.count, length=args.length,
        rate=parse_distribution(args.rate), dirty=parse_distribution(args.dirty),
        gap=_dist_or_number(args.gap), memory_mb=_dist_or_number(args.memory_mb),
        total_bandwidth_mbps=args.bandwidth, handoff_rate_mbps=args.handoff_rate,
        rate_order=parse_ordering(args.rate_order), dirty_order=parse_ordering(args.dirty_order),
        rounds=args.rounds or DEFAULT_ROUNDS, inter_round_delay_s=args.delay,
        max_lambda=args.max_lambda, seed=args.seed or 0,
    )
    path = write_generated(cfg, args.out)
    sys.stdout.write(f"{path}\n")
    return 0


STATS_FIELDS = ("source", "events") + tuple(
    f"{q}_{s}" for q in ("rate", "dirty", "gap") for s in ("min", "max", "median", "mean", "std"))


def cmd_stats(args) -> int:
    rows = stats_table(args.path)
    if args.format == "csv":
        _emit(args, _csv(STATS_FIELDS, [[r[k] for k in STATS_FIELDS] for r in rows]))
    else:
        _emit(args, _json(rows))
    return 0


# -- parser -----------------------------------------------------------------

def _common(p: argparse.ArgumentParser, manifest_required: bool = False) -> None:
    p.add_argument("--manifest", required=manifest_required, help="fleet manifest JSON")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed")
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--method", choices=("precopy", "migrror", "both"), default=None)
    p.add_argument("--rounds", type=int, default=None, help="pre-copy rounds (default 10)")
    p.add_argument("--policy", help="fixed:N | deadline:SECONDS | align:M")


def _preset(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("preset fleet (used when --manifest is absent)")
    g.add_argument("--containers", type=int, default=20)
    g.add_argument("--bandwidth", type=float, default=1000.0)
    g.add_argument("--memory-mb", type=float, default=200.0)
    g.add_argument("--rate", type=float, default=None, help="default: bandwidth / containers")
    g.add_argument("--dirty", type=float, default=None, help="default: rate / 4")
    g.add_argument("--delay", type=float, default=DEFAULT_INTER_ROUND_DELAY_S,
                   help="pre-copy inter-round delay, seconds")
    g.add_argument("--event-gap", type=float, default=DEFAULT_EVENT_GAP_S,
                   help="mirroring event gap for averaged containers, seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="livemig", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a fleet manifest")
    _common(p, manifest_required=True)
    p.add_argument("--include-steps", action="store_true", help="include per-step logs (JSON)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep one parameter for both methods")
    _common(p)
    _preset(p)
    p.add_argument("--axis", required=True,
                   choices=("memory_mb", "transfer_rate_mbps", "dirty_rate_mbps", "lambda"))
    p.add_argument("--values", help="comma-separated values")
    p.add_argument("--range", help="START:STOP:STEPS")
    p.set_defaults(func=cmd_sweep, method_default="both")

    p = sub.add_parser("compare", help="mirroring on raw traces vs their averages")
    _common(p, manifest_required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("curve", help="downtime vs migration time along a rate axis")
    _common(p)
    _preset(p)
    p.add_argument("--values", help="comma-separated rates, Mbps")
    p.add_argument("--range", help="START:STOP:STEPS")
    p.set_defaults(func=cmd_curve, method_default="both")

    p = sub.add_parser("gen-traces", help="write seeded synthetic traces and a manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--length", type=int, default=5000, help="events per trace")
    p.add_argument("--rate", default="uniform:50:150")
    p.add_argument("--dirty", default="tnorm:28.979:31.89:0.02323:145.076")
    p.add_argument("--gap", default=repr(DEFAULT_EVENT_GAP_S), help="seconds or a distribution")
    p.add_argument("--rate-order", default="shuffled")
    p.add_argument("--dirty-order", default="shuffled")
    p.add_argument("--memory-mb", default="200", help="MB or a distribution")
    p.add_argument("--bandwidth", type=float, default=1000.0)
    p.add_argument("--handoff-rate", type=float, default=None, help="default: bandwidth / count")
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--delay", type=float, default=DEFAULT_INTER_ROUND_DELAY_S)
    p.add_argument("--max-lambda", type=float, default=0.999)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_traces)

    p = sub.add_parser("stats", help="summary statistics of a trace file or directory")
    p.add_argument("path")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_stats)
    return parser


def _error(exc: BaseException, code: str, exit_code: int) -> int:
    if isinstance(exc, MigrationError):
        payload = exc.details()
    else:
        payload = {"error": code, "message": str(exc)}
    sys.stderr.write(json.dumps(payload) + "\n")
    return exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "method", None) is None and hasattr(args, "method_default"):
        args.method = args.method_default
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2 ** 64:
        return _error(InvalidSpec("--seed must be an unsigned 64-bit integer"), "InvalidSpec", 2)
    try:
        return args.func(args)
    except MigrationError as exc:
        return _error(exc, exc.code, exc.exit_code)
    except OSError as exc:
        return _error(exc, "Io", 1)


if __name__ == "__main__":
    sys.exit(main())
