"""Scenario construction, runs, sweeps and the metrics reported for them.

Two topologies are supported. The throughput topology has a single flow
downloading over dual connectivity. The fairness topology adds one
single-connectivity flow per link, so three flows compete for the two links.
Every flow has its own server/client proxy pair.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from statistics import fmean, pstdev
from typing import Any, Iterable, Sequence

import numpy as np

from .netem import Link, LinkConfig
from .pdcp import DEFAULT_T_REORDERING, ClientProxy, Mode, ServerProxy, Splitter, SplitterConfig
from .sim import US_PER_S, Simulator, seconds
from .transport import (
    DEFAULT_RECV_BUFFER,
    ENLARGED_RECV_BUFFER,
    Receiver,
    Sender,
    TransportConfig,
    Uplink,
)

MB = 1_000_000
THROUGHPUT_FILE = 100 * MB
FAIRNESS_FILE = 1000 * MB
FAIRNESS_WINDOW = seconds(180)
TOTAL_BANDWIDTH = 40e6
MIN_RUN_CAP = seconds(10)


def jain_index(throughputs: Sequence[float]) -> float:
    """Jain's fairness index of non-negative allocations."""
    xs = [float(x) for x in throughputs]
    if not xs:
        raise ValueError("jain_index needs at least one value")
    if any(x < 0 for x in xs):
        raise ValueError("throughputs must be non-negative")
    top = max(xs)
    if top == 0:
        raise ValueError("jain_index is undefined when every throughput is zero")
    xs = [x / top for x in xs]  # scale first so tiny values cannot underflow
    return sum(xs) ** 2 / (len(xs) * sum(x * x for x in xs))


def expected_duplication_goodput(combined: float, p: float) -> float:
    """Goodput of a duplicated flow whose two copies together carry ``combined``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if combined < 0:
        raise ValueError("combined throughput must be non-negative")
    return combined * (1 + p) / 2


def delivery_probability(p: float, mode: str | Mode = Mode.SPLIT) -> float:
    """End-to-end delivery probability of one packet under independent loss ``p`` per copy."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if str(getattr(mode, "value", mode)).lower() == Mode.DUPLICATE.value:
        return 1 - p * p
    return 1 - p


@dataclass
class FlowSpec:
    name: str = "dc"
    connectivity: str = "dc"  # "dc", "sc1" or "sc2"
    protocol: str = "quic"
    file_size: int = THROUGHPUT_FILE
    transport: TransportConfig = field(default_factory=TransportConfig)

    def __post_init__(self):
        self.connectivity = self.connectivity.lower()
        if self.connectivity not in ("dc", "sc1", "sc2"):
            raise ValueError(f"unknown connectivity {self.connectivity!r}")
        self.protocol = self.protocol.lower()
        if self.protocol not in ("quic", "tcp"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.file_size <= 0:
            raise ValueError("file_size must be positive")

    @property
    def link_ids(self) -> tuple[int, ...]:
        if self.connectivity == "dc":
            return (1, 2)
        return (int(self.connectivity[-1]),)

    def effective_transport(self) -> TransportConfig:
        """TCP flows reuse the QUIC-like stack without pacing and with an unbounded buffer."""
        if self.protocol == "tcp":
            return replace(self.transport, pacing=False, recv_buffer=None)
        return self.transport


def default_links() -> list[LinkConfig]:
    return [LinkConfig(), LinkConfig()]


@dataclass
class Scenario:
    name: str = "throughput"
    links: list[LinkConfig] = field(default_factory=default_links)
    flows: list[FlowSpec] = field(default_factory=lambda: [FlowSpec()])
    splitter: SplitterConfig = field(default_factory=SplitterConfig)
    t_reordering: int = DEFAULT_T_REORDERING
    duration: int | None = None
    seed: int = 1
    repetitions: int = 10
    bin_us: int = US_PER_S

    def __post_init__(self):
        if len(self.links) != 2:
            raise ValueError("a scenario has exactly two links")
        if not self.flows:
            raise ValueError("a scenario needs at least one flow")
        names = [f.name for f in self.flows]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate flow names in {names}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.duration is not None and self.duration <= 0:
            raise ValueError("duration must be positive")

    @property
    def is_fairness(self) -> bool:
        return any(f.connectivity != "dc" for f in self.flows) and len(self.flows) > 1

    def copy(self) -> "Scenario":
        return copy.deepcopy(self)


def throughput_scenario(**overrides) -> Scenario:
    """One DC flow downloading a 100 MB file over two 20 Mbps, 10 ms links."""
    return Scenario(**overrides)


def fairness_scenario(file_size: int = FAIRNESS_FILE, duration: int = FAIRNESS_WINDOW, **overrides) -> Scenario:
    """A DC flow competing with one SC flow per link over a fixed measurement window."""
    flows = [
        FlowSpec("dc", "dc", file_size=file_size),
        FlowSpec("sc1", "sc1", file_size=file_size),
        FlowSpec("sc2", "sc2", file_size=file_size),
    ]
    overrides.setdefault("name", "fairness")
    return Scenario(flows=flows, duration=duration, **overrides)


# --- a single replicate ------------------------------------------------------


@dataclass
class FlowResult:
    name: str
    connectivity: str
    throughput_mbps: float
    completed: bool
    completion_s: float | None
    series_mbps: list[float]
    combined_mbps: float
    goodput_mbps: float
    counters: dict[str, int]


@dataclass
class Replicate:
    seed: int
    elapsed_s: float
    flows: list[FlowResult]
    utilization: dict[int, list[float]]
    link_counters: dict[int, dict[str, int]]
    flagged: bool
    events: int

    @property
    def jfi(self) -> float:
        values = [f.throughput_mbps for f in self.flows]
        if not any(values):
            return float("nan")
        return jain_index(values)

    def flow(self, name: str) -> FlowResult:
        for f in self.flows:
            if f.name == name:
                return f
        raise KeyError(name)


class _Flow:
    def __init__(self, sim: Simulator, spec: FlowSpec, scenario: Scenario, links: list[Link]):
        self.spec = spec
        cfg = spec.effective_transport()
        split = scenario.splitter
        if spec.connectivity != "dc":
            # single connectivity still passes through its own proxy pair
            ratio = (1.0, 0.0) if spec.connectivity == "sc1" else (0.0, 1.0)
            split = replace(split, split=ratio, mode=Mode.SPLIT)
        self.splitter = Splitter(split)
        self.receiver = Receiver(sim, cfg, spec.file_size, self._send_ack, bin_us=scenario.bin_us)
        self.arrived_payload = 0
        self.client = ClientProxy(
            sim, self.receiver.on_packets, scenario.t_reordering, split.proxy_delay, self._on_arrival
        )
        self.sender = Sender(sim, cfg, spec.file_size, self._transmit)
        self.server = ServerProxy(sim, self.splitter, links, self.client, split.proxy_delay)
        # the uplink is one shared path with link-1 propagation delay
        ack_link = scenario.links[0]
        self.uplink = Uplink(sim, ack_link.delay_mean, ack_link.delay_std, f"uplink/{spec.name}")

    def _on_arrival(self, pdu, link_id):
        self.arrived_payload += pdu.payload.payload_bytes

    def _transmit(self, pkt, size):
        self.server.send(pkt, size)

    def _send_ack(self, frame):
        self.uplink.send(frame, self.sender.on_ack)


def _run_cap(scenario: Scenario) -> int:
    worst = 0.0
    for spec in scenario.flows:
        rate = sum(_mean_rate(scenario.links[i - 1]) for i in spec.link_ids)
        worst = max(worst, spec.file_size * 8 / rate)
    return max(MIN_RUN_CAP, int(10 * worst * US_PER_S))


def _mean_rate(link: LinkConfig) -> float:
    if link.trace is None:
        return link.rate_bps
    return link.trace.mean_rate()


def run_once(scenario: Scenario, seed: int | None = None, record: bool = False) -> Replicate:
    """Execute one replicate of ``scenario`` with ``seed`` (defaults to ``scenario.seed``)."""
    seed = scenario.seed if seed is None else seed
    sim = Simulator(seed, record=record)
    links = [Link(sim, cfg, i + 1) for i, cfg in enumerate(scenario.links)]
    flows = [_Flow(sim, spec, scenario, links) for spec in scenario.flows]

    if scenario.duration is not None:
        horizon = scenario.duration
    else:
        horizon = _run_cap(scenario)
        remaining = [len(flows)]

        def _done(t):
            remaining[0] -= 1
            if remaining[0] == 0:
                sim.stop()

        for flow in flows:
            flow.receiver.on_complete = _done

    for flow in flows:
        sim.schedule(0, flow.sender.start)
    events = sim.run_until(horizon)
    end = sim.now if scenario.duration is None else scenario.duration

    results = []
    flagged = False
    for flow in flows:
        rx = flow.receiver
        done = rx.completed_at is not None
        if scenario.duration is None:
            flagged |= not done
            span = rx.completed_at if done else end
            span_s = max(span, 1) / US_PER_S
            useful = rx.file_size if done else rx.unique_bytes
        else:
            span_s = scenario.duration / US_PER_S
            useful = rx.unique_bytes
        n_bins = max(1, math.ceil(span_s * US_PER_S / scenario.bin_us))
        bins = (rx.bins + [0] * n_bins)[:n_bins]
        scale = 8 / (scenario.bin_us / US_PER_S) / MB
        rr = flow.client.reorderer
        counters = {
            "packets_sent": flow.sender.packets_sent,
            "retransmissions": flow.sender.retransmissions,
            "lost_packets": flow.sender.lost_packets,
            "loss_events": flow.sender.loss_events,
            "ptos": flow.sender.ptos,
            "buffer_drops": rx.buffer_drops,
            "timer_expiries": rr.timer_expiries,
            "window_violations": rr.window_violations,
            "pdcp_duplicates": rr.duplicates,
        }
        results.append(
            FlowResult(
                name=flow.spec.name,
                connectivity=flow.spec.connectivity,
                throughput_mbps=useful * 8 / span_s / MB,
                completed=done,
                completion_s=rx.completed_at / US_PER_S if done else None,
                series_mbps=[b * scale for b in bins],
                combined_mbps=flow.arrived_payload * 8 / span_s / MB,
                goodput_mbps=rx.unique_bytes * 8 / span_s / MB,
                counters=counters,
            )
        )
    util = {link.link_id: link.utilization_series(end, scenario.bin_us).tolist() for link in links}
    return Replicate(
        seed=seed,
        elapsed_s=end / US_PER_S,
        flows=results,
        utilization=util,
        link_counters={link.link_id: link.counters for link in links},
        flagged=flagged,
        events=events,
    )


# --- repetitions -------------------------------------------------------------


@dataclass
class RunResult:
    """Replicates of one scenario (seeds ``seed, seed+1, ...``) with mean/stddev views."""

    scenario: Scenario
    runs: list[Replicate]

    @property
    def flagged(self) -> bool:
        return any(r.flagged for r in self.runs)

    @property
    def flow_names(self) -> list[str]:
        return [f.name for f in self.scenario.flows]

    def values(self, metric: str, flow: str | None = None) -> list[float]:
        flow = flow or self.flow_names[0]
        out = []
        for run in self.runs:
            f = run.flow(flow)
            if metric in f.counters:
                out.append(float(f.counters[metric]))
            else:
                out.append(float(getattr(f, metric)))
        return out

    def mean(self, metric: str = "throughput_mbps", flow: str | None = None) -> float:
        return fmean(self.values(metric, flow))

    def std(self, metric: str = "throughput_mbps", flow: str | None = None) -> float:
        return pstdev(self.values(metric, flow))

    @property
    def jfi_values(self) -> list[float]:
        return [r.jfi for r in self.runs]

    @property
    def jfi(self) -> float:
        return fmean(self.jfi_values)

    @property
    def jfi_std(self) -> float:
        return pstdev(self.jfi_values)

    def mean_series(self, flow: str) -> list[float]:
        """Per-bin throughput averaged over replicates (missing bins count as zero)."""
        series = [r.flow(flow).series_mbps for r in self.runs]
        n = max(len(s) for s in series)
        arr = np.zeros((len(series), n))
        for i, s in enumerate(series):
            arr[i, : len(s)] = s
        return arr.mean(axis=0).tolist()

    def mean_utilization(self, link_id: int) -> list[float]:
        series = [r.utilization[link_id] for r in self.runs]
        n = max(len(s) for s in series)
        arr = np.zeros((len(series), n))
        for i, s in enumerate(series):
            arr[i, : len(s)] = s
        return arr.mean(axis=0).tolist()


def run_scenario(scenario: Scenario, repetitions: int | None = None) -> RunResult:
    reps = scenario.repetitions if repetitions is None else repetitions
    runs = [run_once(scenario, scenario.seed + i) for i in range(reps)]
    return RunResult(scenario, runs)


# --- sweeps ------------------------------------------------------------------

SWEEP_PARAMETERS = (
    "batch_size",
    "split_ratio",
    "bandwidth_ratio",
    "bandwidth_ratio_matched_split",
    "delay_ratio",
    "loss_prob",
    "duplication_loss",
    "cc_algorithm",
    "recv_buffer",
)

ALIASES = {
    "batch": "batch_size",
    "split": "split_ratio",
    "split_pct": "split_ratio",
    "bw_ratio": "bandwidth_ratio",
    "bandwidth": "bandwidth_ratio",
    "bw_dc_ratio": "bandwidth_ratio_matched_split",
    "delay": "delay_ratio",
    "loss": "loss_prob",
    "duplication": "duplication_loss",
    "cc": "cc_algorithm",
    "buffer": "recv_buffer",
}


def canonical_parameter(name: str) -> str:
    key = ALIASES.get(name, name)
    if key not in SWEEP_PARAMETERS:
        raise ValueError(f"unknown sweep parameter {name!r}; expected one of {', '.join(SWEEP_PARAMETERS)}")
    return key


def parse_ratio(value: Any) -> float:
    """``3``, ``3.0`` or ``"3:1"`` -> 3.0."""
    if isinstance(value, str) and ":" in value:
        a, b = (float(x) for x in value.split(":"))
        if b <= 0:
            raise ValueError(f"invalid ratio {value!r}")
        return a / b
    r = float(value)
    if r <= 0:
        raise ValueError(f"ratio must be positive, got {value!r}")
    return r


def _split_from(value: Any) -> tuple[float, float]:
    if isinstance(value, str) and ":" in value:
        a, b = (float(x) for x in value.split(":"))
        return (a, b)
    if isinstance(value, (tuple, list)):
        a, b = value
        return (float(a), float(b))
    pct = float(value)
    if not 0 <= pct <= 100:
        raise ValueError(f"split percentage {value!r} outside [0, 100]")
    return (pct, 100.0 - pct)


def _buffer_from(value: Any) -> int | None:
    if isinstance(value, str):
        key = value.lower()
        if key == "default":
            return DEFAULT_RECV_BUFFER
        if key in ("enlarged", "modified", "large"):
            return ENLARGED_RECV_BUFFER
        if key in ("unbounded", "none"):
            return None
    return int(value)


def apply_parameter(base: Scenario, parameter: str, value: Any) -> Scenario:
    """Return a copy of ``base`` with one sweep parameter set to ``value``."""
    key = canonical_parameter(parameter)
    s = base.copy()
    if key == "batch_size":
        s.splitter = replace(s.splitter, batch_size=int(value))
    elif key == "split_ratio":
        s.splitter = replace(s.splitter, split=_split_from(value))
    elif key in ("bandwidth_ratio", "bandwidth_ratio_matched_split"):
        r = parse_ratio(value)
        total = sum(l.rate_bps for l in base.links)
        s.links[0].rate_bps = total * r / (r + 1)
        s.links[1].rate_bps = total / (r + 1)
        if key == "bandwidth_ratio_matched_split":
            s.splitter = replace(s.splitter, split=(r, 1.0))
    elif key == "delay_ratio":
        r = parse_ratio(value)
        total = sum(l.delay_mean for l in base.links)
        for link, mean in zip(s.links, (total * r / (r + 1), total / (r + 1))):
            rel = link.delay_std / link.delay_mean if link.delay_mean else 0.1
            link.delay_mean = int(round(mean))
            link.delay_std = int(round(mean * rel))
    elif key in ("loss_prob", "duplication_loss"):
        p = float(value)
        for link in s.links:
            link.loss_prob = p
        for link in s.links:
            link.__post_init__()
        if key == "duplication_loss":
            s.splitter = replace(s.splitter, mode=Mode.DUPLICATE)
    elif key == "cc_algorithm":
        for f in s.flows:
            f.transport = replace(f.transport, cc=str(value))
    elif key == "recv_buffer":
        size = _buffer_from(value)
        for f in s.flows:
            f.transport = replace(f.transport, recv_buffer=size)
    s.name = f"{base.name}[{key}={value}]"
    return s


@dataclass
class SweepPoint:
    parameter: str
    value: Any
    result: RunResult


def sweep(base: Scenario, parameter: str, values: Iterable[Any], repetitions: int | None = None) -> list[SweepPoint]:
    key = canonical_parameter(parameter)
    return [
        SweepPoint(key, v, run_scenario(apply_parameter(base, key, v), repetitions)) for v in values
    ]
