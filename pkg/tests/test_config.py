import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcsim import catalog, config
from dcsim.config import ConfigError
from dcsim.experiments import MB
from dcsim.pdcp import Mode
from dcsim.transport import DEFAULT_RECV_BUFFER, ENLARGED_RECV_BUFFER


def test_empty_document_takes_defaults():
    s = config.loads("{}").scenario
    assert [l.rate_bps for l in s.links] == [20e6, 20e6]
    assert [(l.delay_mean, l.delay_std) for l in s.links] == [(10_000, 1_000)] * 2
    assert s.splitter.batch_size == 100 and s.splitter.split == (1.0, 1.0)
    assert s.splitter.mode is Mode.SPLIT
    assert s.flows[0].transport.cc == "newreno"
    assert s.flows[0].transport.pacing
    assert s.flows[0].transport.recv_buffer == ENLARGED_RECV_BUFFER
    assert s.flows[0].file_size == 100 * MB
    assert s.repetitions == 10


def test_unknown_key_is_located():
    text = "name: x\nlinks:\n  bandwith: 20\n"
    with pytest.raises(ConfigError) as info:
        config.loads(text, source="x.yaml")
    err = info.value
    assert "bandwith" in str(err)
    assert err.location == "links.bandwith"
    assert err.line == 3


def test_near_miss_gets_a_hint():
    with pytest.raises(ConfigError, match="did you mean 'batch_size'"):
        config.loads("splitter:\n  batch_sise: 50\n")


def test_bad_values_are_rejected():
    for text in (
        "links: {loss: 2}",
        "splitter: {batch_size: 0}",
        "splitter: {split: 'a:b'}",
        "transport: {cc: bbr}",
        "topology: ring",
        "links: [{rate_mbps: 1}]",
        "repetitions: yes",
        "links: {rate_mbps: [1",
    ):
        with pytest.raises(ConfigError):
            config.loads(text)


def test_split_forms():
    for text, expected in (
        ("splitter: {split: '9:1'}", (9.0, 1.0)),
        ("splitter: {split: [3, 1]}", (3.0, 1.0)),
        ("splitter: {split: 30}", (30.0, 70.0)),
    ):
        assert config.loads(text).scenario.splitter.split == expected


def test_per_link_and_buffer_forms():
    doc = config.loads(
        "links:\n  - {rate_mbps: 30, delay_ms: 5}\n  - {rate_mbps: 10, delay_ms: 15, loss: 0.01}\n"
        "transport: {recv_buffer: default}\n"
    )
    s = doc.scenario
    assert [l.rate_bps for l in s.links] == [30e6, 10e6]
    assert s.links[1].delay_std == 1_500
    assert s.flows[0].transport.recv_buffer == DEFAULT_RECV_BUFFER


def test_fairness_topology_defaults():
    s = config.loads("topology: fairness").scenario
    assert [f.connectivity for f in s.flows] == ["dc", "sc1", "sc2"]
    assert s.duration == 180_000_000


def test_builtin_trace():
    s = config.loads("links: {trace: 'builtin:lte_static'}").scenario
    assert s.links[0].trace is not None
    assert s.links[0].trace == s.links[1].trace


@pytest.mark.parametrize("entry", catalog.entries(), ids=lambda e: e.name)
def test_catalog_entries_parse_and_round_trip(entry):
    doc = config.load(entry.path)
    assert doc.figure
    again = config.parse_document(config.to_document(doc.scenario))
    assert again.scenario == doc.scenario
    if doc.sweep is not None:
        assert doc.sweep.values


def test_catalog_reference():
    assert config.load("catalog:fig4a_batch_size").figure == "fig4a batch-size sweep"
    with pytest.raises((ConfigError, FileNotFoundError, KeyError)):
        config.load("catalog:nope")


@settings(max_examples=60, deadline=None)
@given(
    rate=st.integers(1, 200),
    delay=st.integers(0, 300),
    loss=st.sampled_from([0, 0.001, 0.05, 0.2]),
    batch=st.integers(1, 500),
    split=st.tuples(st.integers(0, 9), st.integers(1, 9)),
    mode=st.sampled_from(["split", "duplicate"]),
    cc=st.sampled_from(["newreno", "cubic"]),
    buf=st.sampled_from(["default", "enlarged", "unbounded", 1_000_000]),
    topology=st.sampled_from(["throughput", "fairness"]),
)
def test_round_trip(rate, delay, loss, batch, split, mode, cc, buf, topology):
    text = f"""
topology: {topology}
links: {{rate_mbps: {rate}, delay_ms: {delay}, loss: {loss}}}
splitter: {{batch_size: {batch}, split: [{split[0]}, {split[1]}], mode: {mode}}}
transport: {{cc: {cc}, recv_buffer: {buf}}}
"""
    s = config.loads(text).scenario
    dumped = config.dumps(s)
    assert config.loads(dumped).scenario == s
