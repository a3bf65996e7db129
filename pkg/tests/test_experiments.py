import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dcsim.experiments import (
    MB,
    FlowSpec,
    Scenario,
    apply_parameter,
    delivery_probability,
    expected_duplication_goodput,
    fairness_scenario,
    jain_index,
    run_once,
    run_scenario,
    sweep,
    throughput_scenario,
)
from dcsim.netem import LinkConfig
from dcsim.pdcp import Mode
from dcsim.sim import seconds


@pytest.mark.parametrize(
    "xs,expected",
    [([20, 20, 20], 1.0), ([30, 10], 0.8), ([7.5, 0, 0], 1 / 3)],
)
def test_jain_examples(xs, expected):
    assert jain_index(xs) == pytest.approx(expected)


def test_jain_rejects_all_zero_and_negative():
    with pytest.raises(ValueError):
        jain_index([0, 0])
    with pytest.raises(ValueError):
        jain_index([1, -1])
    with pytest.raises(ValueError):
        jain_index([])


@given(st.lists(st.floats(0, 1e4), min_size=1, max_size=20).filter(lambda xs: any(x > 0 for x in xs)))
def test_jain_bounds(xs):
    j = jain_index(xs)
    assert 1 / len(xs) - 1e-9 <= j <= 1 + 1e-9


def test_duplication_goodput():
    assert expected_duplication_goodput(40, 0) == 20
    assert expected_duplication_goodput(40, 0.05) == pytest.approx(21.0)
    assert expected_duplication_goodput(40, 1) == 40
    with pytest.raises(ValueError):
        expected_duplication_goodput(40, 1.5)


def test_delivery_probability():
    assert delivery_probability(0.1, Mode.DUPLICATE) == pytest.approx(0.99)
    assert delivery_probability(0.1, "split") == pytest.approx(0.9)
    assert delivery_probability(0, "duplicate") == delivery_probability(0, "split") == 1


def small(**kw):
    base = dict(flows=[FlowSpec(file_size=4 * MB)], repetitions=2)
    base.update(kw)
    return throughput_scenario(**base)


def test_default_dc_beats_single_link_ceiling():
    result = run_scenario(small(flows=[FlowSpec(file_size=20 * MB)]))
    assert result.mean() > 20.0
    assert not result.flagged


def test_degenerate_split_matches_single_link():
    dc = run_once(apply_parameter(small(), "split_ratio", "1:0"), seed=4)
    sc = run_once(small(flows=[FlowSpec("sc1", "sc1", file_size=4 * MB)]), seed=4)
    assert dc.flows[0].throughput_mbps == pytest.approx(sc.flows[0].throughput_mbps, rel=0.05)


def test_identical_seed_identical_result():
    s = small()
    assert run_once(s, seed=3) == run_once(s, seed=3)


def test_repetitions_use_consecutive_seeds():
    r = run_scenario(small(seed=10, repetitions=3))
    assert [x.seed for x in r.runs] == [10, 11, 12]
    assert r.std() >= 0


def test_result_invariants():
    s = apply_parameter(small(), "duplication_loss", 0.02)
    run = run_once(s)
    f = run.flows[0]
    assert f.goodput_mbps <= f.combined_mbps
    fair = run_once(fairness_scenario(duration=seconds(5)))
    assert 0 < fair.jfi <= 1
    assert len(fair.utilization) == 2


def test_series_has_one_bin_per_second():
    run = run_once(small())
    f = run.flows[0]
    assert len(f.series_mbps) == math.ceil(f.completion_s)
    total_mb = sum(f.series_mbps) / 8
    assert total_mb == pytest.approx(4.0, rel=0.01)


def test_bandwidth_ratio_holds_sum():
    s = apply_parameter(throughput_scenario(), "bandwidth_ratio", "3:1")
    assert [l.rate_bps for l in s.links] == [30e6, 10e6]
    s = apply_parameter(throughput_scenario(), "bw_dc_ratio", "5:1")
    assert s.links[0].rate_bps == pytest.approx(40e6 * 5 / 6)
    assert s.splitter.split == (5.0, 1.0)


def test_delay_ratio_at_high_sum():
    base = throughput_scenario()
    for link in base.links:
        link.delay_mean, link.delay_std = 100_000, 10_000
    s = apply_parameter(base, "delay_ratio", "1:1")
    assert [l.delay_mean for l in s.links] == [100_000, 100_000]
    assert [l.delay_std for l in s.links] == [10_000, 10_000]


def test_other_parameters():
    base = throughput_scenario()
    assert apply_parameter(base, "loss", 0.01).links[1].loss_prob == 0.01
    dup = apply_parameter(base, "duplication_loss", 0.05)
    assert dup.splitter.mode is Mode.DUPLICATE
    assert apply_parameter(base, "cc", "cubic").flows[0].transport.cc == "cubic"
    assert apply_parameter(base, "buffer", "default").flows[0].transport.recv_buffer == 212_992
    assert apply_parameter(base, "split_pct", 30).splitter.split == (30.0, 70.0)
    assert base.splitter.batch_size == 100  # base untouched


def test_unknown_parameter():
    with pytest.raises(ValueError, match="unknown sweep parameter"):
        apply_parameter(throughput_scenario(), "bandwith", 1)


def test_batch_sweep_rows():
    rows = sweep(small(flows=[FlowSpec(file_size=MB)]), "batch_size", [1, 50, 100, 150, 300, 500], repetitions=1)
    assert [p.value for p in rows] == [1, 50, 100, 150, 300, 500]
    assert all(p.result.mean() > 0 for p in rows)


def test_run_cap_flags_unfinished_flow():
    s = small(links=[LinkConfig(loss_prob=1.0), LinkConfig(loss_prob=1.0)], repetitions=1)
    result = run_scenario(s)
    assert result.flagged
    assert not result.runs[0].flows[0].completed
    assert result.runs[0].elapsed_s == pytest.approx(10.0)


def test_fairness_topology():
    s = fairness_scenario()
    assert [f.connectivity for f in s.flows] == ["dc", "sc1", "sc2"]
    assert s.duration == seconds(180)
    assert all(f.file_size == 1000 * MB for f in s.flows)
    assert s.is_fairness and not throughput_scenario().is_fairness


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(links=[LinkConfig()])
    with pytest.raises(ValueError):
        Scenario(flows=[FlowSpec("a"), FlowSpec("a")])
    with pytest.raises(ValueError):
        FlowSpec(connectivity="sc3")


def test_sc_flows_pay_proxy_delay():
    run = run_once(fairness_scenario(duration=seconds(3)), seed=2)
    for f in run.flows:
        assert f.counters["packets_sent"] > 0
        assert f.throughput_mbps > 0
