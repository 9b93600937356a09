import dataclasses
import statistics

import pytest

from livemig import FixedSteps, FleetSpec, Migrror, Precopy, run_fleet
from livemig.errors import InvalidSpec
from livemig.experiments import (
    GeneratorConfig,
    SweepAxis,
    compare_avg_vs_nonavg,
    constant_trace_like,
    downtime_vs_time_curve,
    generate_fleet,
    override_spec,
    paired_methods,
    preset_fleet_spec,
    run_repeats,
    scale_rate_keep_lambda,
    select_methods,
    stats_table,
    sweep,
    sweep_specs,
    write_generated,
)
from livemig.traces import TruncatedNormal, Uniform, parse_fleet_manifest

from conftest import traced


@pytest.fixture
def base():
    return preset_fleet_spec(memory_mb=200)


@pytest.fixture
def methods(base):
    return paired_methods(base.method)


def test_base_spec_defaults(base):
    assert len(base.containers) == 20
    p = base.containers[0]
    assert (p.memory_mb, p.handoff_rate_mbps) == (200, 50)
    assert (p.params.avg_rate_mbps, p.params.avg_dirty_mbps, p.params.inter_round_delay_s) == (
        50, 12.5, 0.1)
    assert base.method == Precopy(10)


def test_paired_methods_align_handoff(methods):
    assert methods["precopy"] == Precopy(10)
    mig = methods["migrror"]
    assert mig.policy.rounds == 10 and mig.event_gap_s == 0.01


def test_select_methods(methods):
    assert select_methods("both", methods) == methods
    assert list(select_methods("precopy", methods)) == ["precopy"]
    with pytest.raises(InvalidSpec):
        select_methods("neither", methods)


@pytest.mark.parametrize("axis", [
    lambda: SweepAxis("lambda", ()),
    lambda: SweepAxis("lambda", (0.5, 1.0)),
    lambda: SweepAxis("memory_mb", (0,)),
    lambda: SweepAxis("colour", (1,)),
    lambda: SweepAxis.linear("memory_mb", 1, 2, 0),
])
def test_invalid_axes(axis):
    with pytest.raises(InvalidSpec):
        axis()


def test_linear_axis():
    assert SweepAxis.linear("memory_mb", 100, 400, 4).values == (100, 200, 300, 400)


def test_lambda_sweep(base, methods):
    result = sweep(base, SweepAxis("lambda", (0.08, 0.25, 0.5)), methods)
    assert len(result.rows) == 6
    pre = [r.downtime_s for r in result.rows if r.method == "precopy"]
    mig = [r.downtime_s for r in result.rows if r.method == "migrror"]
    assert pre[0] < pre[1] < pre[2]
    assert all(m < p for m, p in zip(mig, pre))
    assert result.metadata["axis"] == "lambda"


def test_size_sweep_keeps_mirroring_downtime(base, methods):
    rows = sweep(base, SweepAxis("memory_mb", (100, 200, 400)), methods).rows
    mig = [r.downtime_s for r in rows if r.method == "migrror"]
    assert (max(mig) - min(mig)) / min(mig) < 0.05


def test_failed_rows_do_not_stop_the_sweep(base, methods):
    rows = sweep(override_spec(base, "dirty_rate_mbps", 50),
                 SweepAxis("transfer_rate_mbps", (50, 100)), methods).rows
    assert [r.status for r in rows] == ["failed", "failed", "ok", "ok"]
    assert rows[0].error == "LambdaNotLessThanOne"


def test_lambda_override_on_traces():
    spec = FleetSpec((traced([100, 300], [10, 10], [0, 0], handoff=200),), 1000, Precopy())
    p = override_spec(spec, "lambda", 0.5).containers[0].params
    assert p.dirties == [150, 100]


def test_rate_override_sets_handoff(base):
    c = override_spec(base, "transfer_rate_mbps", 80).containers[0]
    assert c.handoff_rate_mbps == 80 and c.params.avg_rate_mbps == 80


def test_scale_rate_keeps_lambda(base):
    c = scale_rate_keep_lambda(base, 200).containers[0]
    assert c.params.lam == 0.25 and c.handoff_rate_mbps == 200


def test_sweep_rows_match_standalone_runs(base, methods):
    axis = SweepAxis("dirty_rate_mbps", (5, 20))
    rows = sweep(base, axis, methods).rows
    for row, (value, name, spec) in zip(rows, sweep_specs(base, axis, methods)):
        out = run_fleet(spec)
        assert (row.value, row.method) == (value, name)
        assert row.downtime_s == out.fleet_downtime_s
        assert row.migration_time_s == out.fleet_migration_time_s
        assert row.overhead_mb == out.fleet_overhead_mb


def _fixture(dirties):
    return FleetSpec((traced([200, 200], dirties, [1, 1], memory_mb=200, handoff=200),),
                     200, Migrror(FixedSteps(2)))


def test_compare_same_mean_divergence():
    rows, fleet = compare_avg_vs_nonavg(_fixture([50, 150]))
    d = rows[0].metrics["downtime_s"]
    assert (d.traced, d.averaged) == (2.4375, 2.75)
    assert d.percent == pytest.approx(-11.3636, abs=1e-3)
    assert fleet.metrics["downtime_s"].percent == d.percent


def test_compare_reversed_order():
    # both orders land below the flattened 2.75 s; the front-heavy one further
    up = compare_avg_vs_nonavg(_fixture([50, 150]))[0][0].metrics["downtime_s"]
    down = compare_avg_vs_nonavg(_fixture([150, 50]))[0][0].metrics["downtime_s"]
    assert (down.traced, down.averaged) == (1.9375, 2.75)
    assert down.percent == pytest.approx(-29.5454545, abs=1e-6)
    assert down.percent < up.percent < 0


def test_compare_constant_trace_is_zero():
    rows, fleet = compare_avg_vs_nonavg(_fixture([100, 100]))
    for row in (rows[0], fleet):
        assert all(d.percent == 0 and d.absolute == 0 for d in row.metrics.values())


def test_compare_needs_traces(base):
    with pytest.raises(InvalidSpec):
        compare_avg_vs_nonavg(base)


def test_constant_trace_like():
    t = traced([100, 300], [10, 30], [0.5, 1]).params
    c = constant_trace_like(t)
    assert (c.rates, c.dirties, c.gaps) == ([200, 200], [20, 20], [0.5, 1])


def test_curve_is_near_linear(base, methods):
    rates = [40, 60, 80, 100, 150, 200, 300]
    rows = downtime_vs_time_curve(base, rates, methods)
    pre = [r for r in rows if r.method == "precopy"]
    mig = [r for r in rows if r.method == "migrror"]
    assert len(pre) == len(mig) == len(rates)
    times = [r.migration_time_s for r in pre]
    assert times == sorted(times)
    assert statistics.correlation(times, [r.downtime_s for r in pre]) > 0.99
    by_rate = {r.value: r.downtime_s for r in pre}
    assert all(r.downtime_s < by_rate[r.value] for r in mig)


def test_curve_single_point(base, methods):
    assert len(downtime_vs_time_curve(base, [50], methods)) == 2


@pytest.fixture
def gen_cfg():
    return GeneratorConfig(count=4, length=200, rate=Uniform(50, 150),
                           dirty=TruncatedNormal(28.979, 31.89, 0.02323, 145.076), seed=9)


def test_generator_is_deterministic(gen_cfg):
    a, b = generate_fleet(gen_cfg), generate_fleet(gen_cfg)
    assert a == b
    assert generate_fleet(gen_cfg, 10) != a
    assert len(a.containers) == 4
    assert a.containers[0].handoff_rate_mbps == 250


def test_generator_config_round_trip(gen_cfg):
    assert GeneratorConfig.from_doc(gen_cfg.to_doc()) == gen_cfg
    with pytest.raises(InvalidSpec):
        GeneratorConfig.from_doc({"count": 1})


def test_generator_rejects_zero_count():
    with pytest.raises(InvalidSpec):
        GeneratorConfig(count=0, length=10, rate=Uniform(1, 2), dirty=Uniform(0, 1))


def test_written_fleet_parses_back(tmp_path, gen_cfg):
    path = write_generated(gen_cfg, tmp_path)
    assert parse_fleet_manifest(path) == generate_fleet(gen_cfg)
    assert len(list(tmp_path.glob("*.csv"))) == 4
    rows = stats_table(tmp_path)
    assert [r["source"] for r in rows] == ["ALL", "c000.csv", "c001.csv", "c002.csv", "c003.csv"]
    assert rows[0]["events"] == 800


def test_repeats(gen_cfg):
    summary = run_repeats(gen_cfg, Precopy(10), 3)
    assert summary.seeds == [9, 10, 11]
    mean, std = summary.stats()["downtime_s"]
    values = [o.fleet_downtime_s for o in summary.outcomes]
    assert mean == pytest.approx(statistics.fmean(values))
    assert std == pytest.approx(statistics.pstdev(values))
    again = run_repeats(gen_cfg, Precopy(10), 3)
    assert [o.fleet_downtime_s for o in again.outcomes] == values


def test_override_is_pure(base):
    before = dataclasses.replace(base)
    override_spec(base, "memory_mb", 1000)
    assert base == before
