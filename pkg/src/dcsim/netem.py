"""Downlink path emulation in the style of a tc rate limiter followed by netem.

Each packet is serialized at the link rate behind a drop-tail queue, may be
lost (Bernoulli, applied after the queue), and then incurs a normally
distributed propagation delay. Deliveries never overtake each other unless
``reorder_jitter`` is enabled.
"""

from __future__ import annotations

import bisect
import csv
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .sim import US_PER_S, Simulator, draw_normal

DEFAULT_QUEUE_LIMIT = 100


@dataclass(frozen=True)
class BandwidthTrace:
    """Piecewise-constant rate schedule that repeats after ``period`` microseconds.

    ``times`` are sample start times in microseconds (strictly increasing,
    first one 0) and ``rates`` the matching rates in bits per second. When
    ``period`` is omitted the last sample is assumed to last as long as the
    one before it. Zero-rate samples (outages) are allowed as long as some
    sample is positive. ``source`` only records where the trace came from.
    """

    times: tuple[int, ...]
    rates: tuple[float, ...]
    period: int = 0
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.times:
            raise ValueError("bandwidth trace is empty")
        if len(self.times) != len(self.rates):
            raise ValueError("times and rates differ in length")
        if self.times[0] != 0:
            raise ValueError("bandwidth trace must start at t=0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("trace sample times must be strictly increasing")
        if any(r < 0 for r in self.rates):
            raise ValueError("trace rates must be non-negative")
        if not any(r > 0 for r in self.rates):
            raise ValueError("trace never carries any traffic")
        if not self.period:
            if len(self.times) > 1:
                step = self.times[-1] - self.times[-2]
            else:
                step = US_PER_S
            object.__setattr__(self, "period", self.times[-1] + step)
        if self.period <= self.times[-1]:
            raise ValueError("trace period must extend past the last sample")
        bounds = list(self.times) + [self.period]
        cum = [0.0]
        for i, rate in enumerate(self.rates):
            cum.append(cum[-1] + rate * (bounds[i + 1] - bounds[i]) / US_PER_S)
        object.__setattr__(self, "_bounds", bounds)
        object.__setattr__(self, "_cum_bits", cum)

    @classmethod
    def from_samples(
        cls,
        samples: Iterable[tuple[float, float]],
        period_s: float | None = None,
        source: str | None = None,
    ):
        """Build from ``(time_s, rate_bps)`` pairs."""
        pairs = list(samples)
        times = tuple(int(round(t * US_PER_S)) for t, _ in pairs)
        rates = tuple(float(r) for _, r in pairs)
        period = int(round(period_s * US_PER_S)) if period_s else 0
        return cls(times, rates, period, source)

    @classmethod
    def read_csv(cls, path: str | Path) -> "BandwidthTrace":
        """Read the canonical ``time_s,throughput_kbps`` file."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
                "time_s",
                "throughput_kbps",
            ]:
                raise ValueError(f"{path}: expected header 'time_s,throughput_kbps'")
            samples = [(float(row["time_s"]), float(row["throughput_kbps"]) * 1e3) for row in reader]
        return cls.from_samples(samples, source=str(path))

    def rate_at(self, t: int) -> float:
        t %= self.period
        return self.rates[bisect.bisect_right(self.times, t) - 1]

    def next_active(self, t: int) -> int:
        """Earliest time at or after ``t`` with a positive rate."""
        loops, rem = divmod(t, self.period)
        i = bisect.bisect_right(self.times, rem) - 1
        if self.rates[i] > 0:
            return t
        n = len(self.times)
        for step in range(1, n + 1):
            j = (i + step) % n
            if self.rates[j] > 0:
                wrap = (i + step) // n
                return (loops + wrap) * self.period + self.times[j]
        raise AssertionError("unreachable: trace has a positive rate")

    def bits_until(self, t: float) -> float:
        """Bits a saturated link would carry over ``[0, t)``."""
        loops, rem = divmod(t, self.period)
        i = bisect.bisect_right(self.times, rem) - 1
        cum = self._cum_bits
        partial = cum[i] + self.rates[i] * (rem - self.times[i]) / US_PER_S
        return loops * cum[-1] + partial

    def mean_rate(self, t_end: int | None = None) -> float:
        t_end = self.period if t_end is None else t_end
        return self.bits_until(t_end) * US_PER_S / t_end


@dataclass
class LinkConfig:
    rate_bps: float = 20e6
    delay_mean: int = 10_000
    delay_std: int = 1_000
    loss_prob: float = 0.0
    queue_limit: int = DEFAULT_QUEUE_LIMIT
    trace: BandwidthTrace | None = None
    reorder_jitter: bool = False

    def __post_init__(self):
        if self.trace is None and not self.rate_bps > 0:
            raise ValueError("link needs rate_bps > 0 or a bandwidth trace")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError(f"loss_prob {self.loss_prob} outside [0, 1]")
        if self.queue_limit < 1:
            raise ValueError("queue_limit must be at least 1 packet")
        if self.delay_mean < 0 or self.delay_std < 0:
            raise ValueError("delays must be non-negative")

    def rate_at(self, t: int) -> float:
        if self.trace is None:
            return self.rate_bps
        return self.trace.rate_at(t)


class Link:
    """One emulated downlink path shared by every flow routed over it."""

    def __init__(self, sim: Simulator, config: LinkConfig, link_id: int = 1):
        self.sim = sim
        self.config = config
        self.link_id = link_id
        self.jitter_rng = sim.stream(f"link{link_id}/jitter")
        self.loss_rng = sim.stream(f"link{link_id}/loss")
        self._departures: deque[int] = deque()
        self.last_departure = 0
        self.last_delivery = 0
        self.sent = 0
        self.delivered = 0
        self.dropped_queue = 0
        self.dropped_loss = 0
        self.bytes_sent = 0
        # serialization intervals, for utilization accounting
        self._busy_start: list[int] = []
        self._busy_end: list[int] = []
        self._busy_bits: list[int] = []

    @property
    def occupancy(self) -> int:
        return len(self._departures)

    def rate_at(self, t: int) -> float:
        return self.config.rate_at(t)

    def ingress(self, pdu, t: int, sink: Callable) -> None:
        """Offer ``pdu`` to the link at time ``t``; ``sink(pdu, link_id)`` runs on delivery.

        ``t`` may lie in the future as long as calls on one link come in
        non-decreasing ``t`` order.
        """
        cfg = self.config
        self.sent += 1
        deps = self._departures
        while deps and deps[0] <= t:
            deps.popleft()
        if len(deps) >= cfg.queue_limit:
            self.dropped_queue += 1
            return
        start = t if t > self.last_departure else self.last_departure
        bits = pdu.wire_size * 8
        if cfg.trace is None:
            rate = cfg.rate_bps
        else:
            # an outage holds the packet until the trace carries traffic again
            start = cfg.trace.next_active(start)
            rate = cfg.trace.rate_at(start)
        depart = start + int(-(-bits * US_PER_S // rate))
        self.last_departure = depart
        deps.append(depart)
        self.bytes_sent += pdu.wire_size
        self._busy_start.append(start)
        self._busy_end.append(depart)
        self._busy_bits.append(bits)
        if cfg.loss_prob > 0.0 and self.loss_rng.random() < cfg.loss_prob:
            self.dropped_loss += 1
            return
        delay = draw_normal(self.jitter_rng, cfg.delay_mean, cfg.delay_std)
        arrive = depart + int(round(delay))
        if not cfg.reorder_jitter:
            if arrive < self.last_delivery:
                arrive = self.last_delivery
            self.last_delivery = arrive
        self.sim.schedule(arrive, self._deliver, pdu, sink)

    def _deliver(self, pdu, sink: Callable) -> None:
        self.delivered += 1
        sink(pdu, self.link_id)

    def capacity_bits(self, t0: int, t1: int) -> float:
        if self.config.trace is None:
            return self.config.rate_bps * (t1 - t0) / US_PER_S
        tr = self.config.trace
        return tr.bits_until(t1) - tr.bits_until(t0)

    def departed_bits(self, t0: int, t1: int) -> float:
        """Bits serialized inside ``[t0, t1)``, splitting packets that straddle the edges."""
        if not self._busy_start:
            return 0.0
        start = np.asarray(self._busy_start, dtype=np.float64)
        end = np.asarray(self._busy_end, dtype=np.float64)
        bits = np.asarray(self._busy_bits, dtype=np.float64)
        return float(_overlap_bits(start, end, bits, t0, t1))

    def utilization(self, window: tuple[int, int]) -> float:
        t0, t1 = window
        if t1 <= t0:
            raise ValueError("empty utilization window")
        cap = self.capacity_bits(t0, t1)
        if cap <= 0:
            return 0.0
        return min(1.0, self.departed_bits(t0, t1) / cap)

    def utilization_series(self, t_end: int, bin_us: int = US_PER_S) -> np.ndarray:
        """Per-bin utilization over ``[0, t_end)``."""
        n = max(1, -(-t_end // bin_us))
        caps = np.array([self.capacity_bits(i * bin_us, (i + 1) * bin_us) for i in range(n)])
        if not self._busy_start:
            return np.zeros(n)
        start = np.asarray(self._busy_start, dtype=np.float64)
        end = np.asarray(self._busy_end, dtype=np.float64)
        bits = np.asarray(self._busy_bits, dtype=np.float64)
        if np.any(end - start > bin_us):
            edges = np.arange(n + 1) * bin_us
            used = np.array([_overlap_bits(start, end, bits, edges[i], edges[i + 1]) for i in range(n)])
            return _ratio(used, caps)
        # every packet straddles at most one bin edge
        b0 = (start // bin_us).astype(np.int64)
        b1 = ((end - 1e-9) // bin_us).astype(np.int64)
        edge = (b0 + 1) * float(bin_us)
        span = np.maximum(end - start, 1.0)
        first = np.where(b1 > b0, bits * (edge - start) / span, bits)
        used = np.bincount(b0, weights=first, minlength=n)[:n]
        split = b1 > b0
        if split.any():
            used = used + np.bincount(b1[split], weights=bits[split] - first[split], minlength=n)[:n]
        return _ratio(used, caps)

    @property
    def counters(self) -> dict[str, int]:
        return {
            "sent": self.sent,
            "delivered": self.delivered,
            "dropped_queue": self.dropped_queue,
            "dropped_loss": self.dropped_loss,
        }


def _ratio(used, caps):
    # bins with no capacity (trace outages) report zero utilization
    out = np.divide(used, caps, out=np.zeros_like(used, dtype=np.float64), where=caps > 0)
    return np.minimum(out, 1.0)


def _overlap_bits(start, end, bits, t0, t1):
    lo = np.maximum(start, t0)
    hi = np.minimum(end, t1)
    span = np.maximum(end - start, 1.0)
    frac = np.clip(hi - lo, 0.0, None) / span
    return np.dot(frac, bits)


def links_from_configs(sim: Simulator, configs: Sequence[LinkConfig]) -> list[Link]:
    return [Link(sim, cfg, i + 1) for i, cfg in enumerate(configs)]
