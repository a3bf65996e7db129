"""A QUIC-like bulk transfer: paced sender with NewReno or CUBIC, and an acking receiver.

Only the parts that shape throughput are modeled: congestion control, pacing,
RTT estimation, packet/time-threshold loss detection, probe timeouts, delayed
ACKs, and a finite UDP receive buffer drained at a fixed rate. There is no
handshake, no stream multiplexing and no flow control.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable

from .sim import US_PER_S, Simulator, draw_normal

DEFAULT_RECV_BUFFER = 212_992
ENLARGED_RECV_BUFFER = 4 * 1024 * 1024
INITIAL_RTT = 333_000
GRANULARITY = 1_000

NEWRENO = "newreno"
CUBIC = "cubic"


@dataclass
class TransportConfig:
    cc: str = NEWRENO
    pacing: bool = True
    pacing_gain: float = 1.25
    pacing_burst: int = 10
    payload_bytes: int = 1200
    overhead_bytes: int = 48
    initial_window: int = 10
    min_window: int = 2
    recv_buffer: int | None = ENLARGED_RECV_BUFFER
    drain_rate: float = 150e6
    ack_every: int = 2
    max_ack_delay: int = 25_000
    packet_threshold: int = 3
    time_threshold: float = 9 / 8
    tcp_friendly: bool = True

    def __post_init__(self):
        self.cc = self.cc.lower()
        if self.cc not in (NEWRENO, CUBIC):
            raise ValueError(f"unknown congestion controller {self.cc!r}")
        if self.recv_buffer is not None and self.recv_buffer < self.max_datagram:
            raise ValueError("receive buffer smaller than one datagram")
        if self.drain_rate <= 0:
            raise ValueError("drain_rate must be positive")
        if self.ack_every < 1:
            raise ValueError("ack_every must be at least 1")

    @property
    def max_datagram(self) -> int:
        return self.payload_bytes + self.overhead_bytes


@dataclass(slots=True)
class TransportPacket:
    pkt_num: int
    chunk: int
    payload_bytes: int
    overhead_bytes: int
    sent_at: int
    retransmission: bool = False

    @property
    def size(self) -> int:
        return self.payload_bytes + self.overhead_bytes


@dataclass(slots=True)
class AckFrame:
    """Acknowledges the packet-number ranges received since the previous ACK.

    The uplink is lossless and order-preserving, so carrying only new ranges
    loses nothing compared with re-sending the full range set.
    """

    largest_acked: int
    ack_ranges: list
    ack_delay: int


class RttEstimator:
    def __init__(self, initial_rtt: int = INITIAL_RTT):
        self.srtt = float(initial_rtt)
        self.rttvar = initial_rtt / 2
        self.min_rtt = math.inf
        self.latest_rtt = 0.0
        self.samples = 0

    @property
    def has_sample(self) -> bool:
        return self.samples > 0

    def update(self, latest: float, ack_delay: float = 0.0) -> None:
        self.latest_rtt = latest
        if latest < self.min_rtt:
            self.min_rtt = latest
        if not self.samples:
            self.srtt = latest
            self.rttvar = latest / 2
        else:
            adjusted = latest - ack_delay if latest >= self.min_rtt + ack_delay else latest
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - adjusted)
            self.srtt = 0.875 * self.srtt + 0.125 * adjusted
        self.samples += 1

    def pto(self, max_ack_delay: int) -> float:
        return self.srtt + max(4 * self.rttvar, GRANULARITY) + max_ack_delay


class NewReno:
    """Slow start, +1 datagram per window in congestion avoidance, halving on loss."""

    beta = 0.5

    def __init__(self, mss: int = 1248, initial_window: int = 10, min_window: int = 2):
        self.mss = mss
        self.cwnd = initial_window * mss
        self.min_cwnd = min_window * mss
        self.ssthresh = math.inf
        self.recovery_end = -1
        self._acked_in_ca = 0

    @property
    def in_slow_start(self) -> bool:
        return self.cwnd < self.ssthresh

    def on_ack(self, pkt_num: int, size: int, now: int) -> None:
        if pkt_num <= self.recovery_end:
            return
        if self.cwnd < self.ssthresh:
            self.cwnd += size
            return
        self._acked_in_ca += size
        if self._acked_in_ca >= self.cwnd:
            self._acked_in_ca -= self.cwnd
            self.cwnd += self.mss

    def on_loss(self, largest_lost: int, largest_sent: int, now: int) -> bool:
        """React once per recovery round; returns whether the window was reduced."""
        if largest_lost <= self.recovery_end:
            return False
        self.recovery_end = largest_sent
        self.ssthresh = max(self.cwnd * self.beta, self.min_cwnd)
        self.cwnd = self.ssthresh
        self._acked_in_ca = 0
        return True


class Cubic(NewReno):
    """CUBIC window growth with an optional Reno-friendly floor."""

    beta = 0.7
    C = 0.4

    def __init__(self, mss: int = 1248, initial_window: int = 10, min_window: int = 2, tcp_friendly: bool = True):
        super().__init__(mss, initial_window, min_window)
        self.tcp_friendly = tcp_friendly
        self.w_max = 0.0
        self.k = 0.0
        self.epoch_start: int | None = None
        self.w_est = 0.0

    def window(self, t_since_epoch: float) -> float:
        """Cubic curve in bytes, ``t_since_epoch`` in seconds."""
        return self.C * self.mss * (t_since_epoch - self.k) ** 3 + self.w_max

    def on_ack(self, pkt_num: int, size: int, now: int) -> None:
        if pkt_num <= self.recovery_end:
            return
        if self.cwnd < self.ssthresh:
            self.cwnd += size
            return
        if self.epoch_start is None:
            # congestion avoidance entered without a loss epoch
            self.epoch_start = now
            self.w_max = self.cwnd
            self.k = 0.0
            self.w_est = self.cwnd
        target = self.window((now - self.epoch_start) / US_PER_S)
        if self.tcp_friendly:
            alpha = 3 * (1 - self.beta) / (1 + self.beta)
            self.w_est += alpha * self.mss * size / self.cwnd
            if self.w_est > target:
                target = self.w_est
        self.cwnd = max(self.min_cwnd, min(target, 1.5 * self.cwnd))

    def on_loss(self, largest_lost: int, largest_sent: int, now: int) -> bool:
        if largest_lost <= self.recovery_end:
            return False
        self.recovery_end = largest_sent
        self.w_max = self.cwnd
        self.cwnd = max(self.cwnd * self.beta, self.min_cwnd)
        self.ssthresh = self.cwnd
        self.k = (self.w_max / self.mss * (1 - self.beta) / self.C) ** (1 / 3)
        self.epoch_start = now
        self.w_est = self.cwnd
        return True


def make_cc(config: TransportConfig):
    mss = config.max_datagram
    if config.cc == CUBIC:
        return Cubic(mss, config.initial_window, config.min_window, config.tcp_friendly)
    return NewReno(mss, config.initial_window, config.min_window)


class Sender:
    """Bulk-transfer sender of ``file_size`` bytes.

    ``transmit(packet, size)`` hands a packet to the network (normally a
    `dcsim.pdcp.ServerProxy`). ACKs come back through `on_ack`.
    """

    def __init__(
        self,
        sim: Simulator,
        config: TransportConfig,
        file_size: int,
        transmit: Callable[[TransportPacket, int], None],
    ):
        if file_size <= 0:
            raise ValueError("file_size must be positive")
        self.sim = sim
        self.config = config
        self.transmit = transmit
        self.file_size = file_size
        payload = config.payload_bytes
        self.n_chunks = -(-file_size // payload)
        self._last_chunk_bytes = file_size - (self.n_chunks - 1) * payload
        self.next_chunk = 0
        self.retx: deque[int] = deque()
        self.chunk_acked = bytearray(self.n_chunks)
        self.acked_chunks = 0
        self.acked_bytes = 0
        self.next_pkt_num = 0
        self.unacked: dict[int, TransportPacket] = {}
        self.bytes_in_flight = 0
        self.largest_acked = -1
        self.rtt = RttEstimator()
        self.cc = make_cc(config)
        self.pacing_next = 0.0
        self.loss_time: float | None = None
        self.pto_count = 0
        self.last_sent_at = 0
        self.done = False
        self.completed_at: int | None = None
        self._deadline: float | None = None
        self._timer_at: int | None = None
        self._wake_at: int | None = None
        self.packets_sent = 0
        self.retransmissions = 0
        self.lost_packets = 0
        self.loss_events = 0
        self.ptos = 0
        self.unknown_acks = 0
        self.max_in_flight_over_cwnd = 0.0
        self.send_log: list[tuple[int, int]] | None = None

    def chunk_bytes(self, chunk: int) -> int:
        if chunk == self.n_chunks - 1:
            return self._last_chunk_bytes
        return self.config.payload_bytes

    @property
    def cwnd(self) -> float:
        return self.cc.cwnd

    def start(self) -> None:
        self.maybe_send(self.sim.now)

    def _next_chunk(self) -> int | None:
        retx = self.retx
        acked = self.chunk_acked
        while retx:
            if not acked[retx[0]]:
                return retx[0]
            retx.popleft()
        if self.next_chunk < self.n_chunks:
            return self.next_chunk
        return None

    def pacing_interval(self, size: int) -> float:
        """Microseconds between departures at 1.25·cwnd/srtt; 0 before the first RTT sample."""
        if not self.config.pacing or not self.rtt.has_sample:
            return 0.0
        return size * self.rtt.srtt / (self.config.pacing_gain * self.cc.cwnd)

    def maybe_send(self, t: int) -> list[TransportPacket]:
        sent = []
        if self.done:
            return sent
        overhead = self.config.overhead_bytes
        cc = self.cc
        pacing = self.config.pacing
        while True:
            chunk = self._next_chunk()
            if chunk is None:
                break
            size = self.chunk_bytes(chunk) + overhead
            if self.bytes_in_flight + size > cc.cwnd:
                break
            if pacing and self.rtt.has_sample and t < self.pacing_next:
                self._wake(math.ceil(self.pacing_next))
                break
            sent.append(self._send(chunk, t))
            if pacing:
                interval = self.pacing_interval(size)
                # idle time earns at most ``pacing_burst`` packets of credit
                floor = t - (self.config.pacing_burst - 1) * interval
                self.pacing_next = max(self.pacing_next, floor) + interval
        return sent

    def _send(self, chunk: int, t: int, probe: bool = False) -> TransportPacket:
        retransmission = chunk != self.next_chunk
        if retransmission:
            self.retx.popleft()
            self.retransmissions += 1
        else:
            self.next_chunk += 1
        pn = self.next_pkt_num
        self.next_pkt_num = pn + 1
        pkt = TransportPacket(pn, chunk, self.chunk_bytes(chunk), self.config.overhead_bytes, t, retransmission)
        size = pkt.size
        self.unacked[pn] = pkt
        self.bytes_in_flight += size
        if not probe:
            over = self.bytes_in_flight / self.cc.cwnd
            if over > self.max_in_flight_over_cwnd:
                self.max_in_flight_over_cwnd = over
        self.last_sent_at = t
        self.packets_sent += 1
        if self.send_log is not None:
            self.send_log.append((t, size))
        self.transmit(pkt, size)
        self._arm_timer()
        return pkt

    def _wake(self, at: int) -> None:
        if self._wake_at is None or at < self._wake_at:
            self._wake_at = at
            self.sim.schedule(at, self._on_wake)

    def _on_wake(self) -> None:
        now = self.sim.now
        if self._wake_at != now:
            return
        self._wake_at = None
        self.maybe_send(now)

    # --- acknowledgements and loss recovery ---------------------------------

    def on_ack(self, ack: AckFrame, t: int | None = None) -> None:
        if t is None:
            t = self.sim.now
        unacked = self.unacked
        newly = []
        for lo, hi in ack.ack_ranges:
            for pn in range(lo, hi + 1):
                pkt = unacked.pop(pn, None)
                if pkt is None:
                    self.unknown_acks += 1
                else:
                    newly.append(pkt)
        if ack.largest_acked > self.largest_acked:
            self.largest_acked = ack.largest_acked
        if newly:
            last = newly[-1] if newly[-1].pkt_num == ack.largest_acked else None
            if last is None:
                for pkt in newly:
                    if pkt.pkt_num == ack.largest_acked:
                        last = pkt
            if last is not None:
                delay = min(ack.ack_delay, self.config.max_ack_delay)
                self.rtt.update(t - last.sent_at, delay)
            cc = self.cc
            acked = self.chunk_acked
            for pkt in newly:
                self.bytes_in_flight -= pkt.size
                if not acked[pkt.chunk]:
                    acked[pkt.chunk] = 1
                    self.acked_chunks += 1
                    self.acked_bytes += pkt.payload_bytes
                cc.on_ack(pkt.pkt_num, pkt.size, t)
            self.pto_count = 0
        self.detect_losses(t)
        if self.acked_chunks == self.n_chunks:
            self._finish(t)
            return
        self._arm_timer()
        self.maybe_send(t)

    def loss_delay(self) -> float:
        rtt = self.rtt
        return max(self.config.time_threshold * max(rtt.srtt, rtt.latest_rtt), GRANULARITY)

    def detect_losses(self, t: int) -> list[int]:
        largest = self.largest_acked
        self.loss_time = None
        if largest < 0:
            return []
        delay = self.loss_delay()
        horizon = t - delay
        threshold = self.config.packet_threshold
        lost = []
        for pn, pkt in self.unacked.items():
            if pn > largest:
                break
            if largest - pn >= threshold or pkt.sent_at <= horizon:
                lost.append(pkt)
            else:
                self.loss_time = pkt.sent_at + delay
                break
        if not lost:
            return []
        unacked = self.unacked
        acked = self.chunk_acked
        for pkt in lost:
            del unacked[pkt.pkt_num]
            self.bytes_in_flight -= pkt.size
            if not acked[pkt.chunk]:
                self.retx.append(pkt.chunk)
        self.lost_packets += len(lost)
        if self.cc.on_loss(lost[-1].pkt_num, self.next_pkt_num - 1, t):
            self.loss_events += 1
        return [pkt.pkt_num for pkt in lost]

    def _arm_timer(self) -> None:
        if self.loss_time is not None:
            deadline = self.loss_time
        elif self.unacked:
            deadline = self.last_sent_at + self.rtt.pto(self.config.max_ack_delay) * (1 << self.pto_count)
        else:
            self._deadline = None
            return
        self._deadline = deadline
        at = math.ceil(deadline)
        if self._timer_at is None or at < self._timer_at:
            self._timer_at = at
            self.sim.schedule(at, self._on_timer)

    def _on_timer(self) -> None:
        now = self.sim.now
        if self._timer_at != now:
            return
        self._timer_at = None
        if self.done or self._deadline is None:
            return
        if self._deadline > now:
            self._arm_timer()
            return
        if self.loss_time is not None:
            self.detect_losses(now)
            self._arm_timer()
            self.maybe_send(now)
            return
        self.pto_fire(now)

    def pto_fire(self, t: int) -> None:
        """Send one probe outside the congestion window and back off the timer."""
        self.ptos += 1
        self.pto_count += 1
        chunk = self._next_chunk()
        if chunk is None:
            chunk = next((p.chunk for p in self.unacked.values() if not self.chunk_acked[p.chunk]), None)
            if chunk is not None:
                self.retx.appendleft(chunk)
        if chunk is not None:
            self._send(chunk, t, probe=True)
        else:
            self._arm_timer()

    def _finish(self, t: int) -> None:
        self.done = True
        self.completed_at = t
        self._deadline = None


class Receiver:
    """Admits packets into a finite socket buffer and acknowledges them.

    The buffer drains continuously at ``drain_rate`` bytes per second; a packet
    that does not fit is dropped as a UDP socket overflow would drop it.
    """

    def __init__(
        self,
        sim: Simulator,
        config: TransportConfig,
        file_size: int,
        send_ack: Callable[[AckFrame], None],
        bin_us: int = US_PER_S,
    ):
        self.sim = sim
        self.config = config
        self.send_ack = send_ack
        self.file_size = file_size
        self.capacity = config.recv_buffer
        self._drain_per_us = config.drain_rate / US_PER_S
        self.occupancy = 0.0
        self._drained_at = 0
        payload = config.payload_bytes
        self.n_chunks = -(-file_size // payload)
        self.have = bytearray(self.n_chunks)
        self.unique_chunks = 0
        self.unique_bytes = 0
        self.contiguous_chunks = 0
        self.completed_at: int | None = None
        self.on_complete: Callable[[int], None] | None = None
        self._ranges: list[list[int]] = []
        self.largest = -1
        self._largest_at = 0
        self.pending = 0
        self._first_pending_at = 0
        self._ack_timer_at: int | None = None
        self.bin_us = bin_us
        self.bins: list[int] = []
        self.admitted = 0
        self.buffer_drops = 0
        self.duplicate_payloads = 0
        self.acks_sent = 0

    def flow_progress(self) -> int:
        """In-order application bytes received so far."""
        n = self.contiguous_chunks
        if n == self.n_chunks:
            return self.file_size
        return n * self.config.payload_bytes

    def on_packets(self, packets: list) -> AckFrame | None:
        """Process a batch released together; it is acknowledged by one cumulative ACK."""
        t = self.sim.now
        for pkt in packets:
            self.on_packet(pkt, t, coalesce=True)
        if self.pending >= self.config.ack_every:
            return self._emit_ack(t)
        return None

    def on_packet(self, pkt: TransportPacket, t: int, coalesce: bool = False) -> AckFrame | None:
        size = pkt.size
        if self.capacity is not None:
            occ = self.occupancy - (t - self._drained_at) * self._drain_per_us
            self._drained_at = t
            if occ < 0.0:
                occ = 0.0
            if occ + size > self.capacity:
                self.occupancy = occ
                self.buffer_drops += 1
                return None
            self.occupancy = occ + size
        self.admitted += 1
        pn = pkt.pkt_num
        ranges = self._ranges
        if ranges and ranges[-1][1] == pn - 1:
            ranges[-1][1] = pn
        else:
            ranges.append([pn, pn])
        if pn > self.largest:
            self.largest = pn
            self._largest_at = t
        chunk = pkt.chunk
        if self.have[chunk]:
            self.duplicate_payloads += 1
        else:
            self.have[chunk] = 1
            self.unique_chunks += 1
            self.unique_bytes += pkt.payload_bytes
            b = t // self.bin_us
            bins = self.bins
            while len(bins) <= b:
                bins.append(0)
            bins[b] += pkt.payload_bytes
            if chunk == self.contiguous_chunks:
                have = self.have
                n = self.n_chunks
                c = chunk + 1
                while c < n and have[c]:
                    c += 1
                self.contiguous_chunks = c
                if c == n:
                    self.completed_at = t
                    if self.on_complete is not None:
                        self.on_complete(t)
        self.pending += 1
        if self.pending >= self.config.ack_every and not coalesce:
            return self._emit_ack(t)
        if self.pending == 1:
            self._first_pending_at = t
            self._arm_ack_timer(t + self.config.max_ack_delay)
        return None

    def _arm_ack_timer(self, at: int) -> None:
        if self._ack_timer_at is None or at < self._ack_timer_at:
            self._ack_timer_at = at
            self.sim.schedule(at, self._on_ack_timer)

    def _on_ack_timer(self) -> None:
        now = self.sim.now
        if self._ack_timer_at != now:
            return
        self._ack_timer_at = None
        if not self.pending:
            return
        due = self._first_pending_at + self.config.max_ack_delay
        if due <= now:
            self._emit_ack(now)
        else:
            self._arm_ack_timer(due)

    def _emit_ack(self, t: int) -> AckFrame:
        frame = AckFrame(self.largest, [tuple(r) for r in self._ranges], t - self._largest_at)
        self._ranges = []
        self.pending = 0
        self.acks_sent += 1
        self.send_ack(frame)
        return frame


class Uplink:
    """Lossless, unshaped return path with a per-ACK normal delay that never reorders."""

    def __init__(self, sim: Simulator, delay_mean: int, delay_std: int, stream_name: str = "uplink"):
        self.sim = sim
        self.delay_mean = delay_mean
        self.delay_std = delay_std
        self.rng = sim.stream(stream_name)
        self._last = 0

    def send(self, frame: AckFrame, deliver: Callable[[AckFrame], None]) -> None:
        now = self.sim.now
        arrive = now + int(round(draw_normal(self.rng, self.delay_mean, self.delay_std)))
        if arrive < self._last:
            arrive = self._last
        self._last = arrive
        self.sim.schedule(arrive, deliver, frame)
