"""PDCP-style traffic split and in-order reassembly for a dual-connectivity bearer.

The server side (`Splitter`) stamps every transport packet with a 16-bit
sequence number and routes it over one of two links in batches, or over both
links when duplicating. The client side (`Reorderer`) restores sequence order,
discards duplicates, and bounds how long a packet may wait for a missing
predecessor with the t-Reordering timer.

Internally the reorderer works on unbounded counts; a received SN is mapped to
the count nearest to ``rx_deliv`` in the forward half-window, the same way a
PDCP receiver reconstructs COUNT from SN and HFN.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable

SN_BITS = 16
SN_MOD = 1 << SN_BITS
WINDOW = SN_MOD >> 1
PDCP_HEADER_BYTES = 2
DEFAULT_T_REORDERING = 200_000
DEFAULT_PROXY_DELAY = 500


def sn_after(x: int, y: int) -> bool:
    """True when ``y`` follows ``x`` within half the sequence space."""
    return 0 < (y - x) % SN_MOD < WINDOW


class Mode(str, Enum):
    SPLIT = "split"
    DUPLICATE = "duplicate"


@dataclass(slots=True)
class PdcpPdu:
    sn: int
    payload: Any
    payload_size: int
    stamped_at: int = 0
    header_bytes: int = PDCP_HEADER_BYTES

    @property
    def wire_size(self) -> int:
        return self.payload_size + self.header_bytes


@dataclass
class SplitterConfig:
    batch_size: int = 100
    split: tuple[float, float] = (1.0, 1.0)
    mode: Mode = Mode.SPLIT
    proxy_delay: int = DEFAULT_PROXY_DELAY

    def __post_init__(self):
        self.mode = Mode(self.mode)
        a, b = self.split
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if a < 0 or b < 0 or a + b <= 0:
            raise ValueError(f"invalid split ratio {self.split!r}")
        if self.proxy_delay < 0:
            raise ValueError("proxy_delay must be non-negative")

    @property
    def link1_share(self) -> int:
        """Packets per batch sent on link 1; ties round half up."""
        a, b = self.split
        exact = self.batch_size * a / (a + b)
        return min(self.batch_size, int(exact + 0.5))


class Splitter:
    """Server-side proxy: assigns SNs and picks the outgoing link(s)."""

    def __init__(self, config: SplitterConfig):
        self.config = config
        self.next_sn = 0
        self._pos = 0
        self._share = config.link1_share
        self._batch = config.batch_size
        self._duplicate = config.mode is Mode.DUPLICATE
        self.emitted = [0, 0]

    def route(self, payload: Any, size: int, t: int) -> list[tuple[int, PdcpPdu]]:
        """Stamp ``payload`` and return ``(link_id, pdu)`` emissions, link ids 1 and 2."""
        pdu = PdcpPdu(self.next_sn, payload, size, t)
        self.next_sn = (self.next_sn + 1) & (SN_MOD - 1)
        if self._duplicate:
            self.emitted[0] += 1
            self.emitted[1] += 1
            return [(1, pdu), (2, pdu)]
        link = 1 if self._pos < self._share else 2
        self._pos += 1
        if self._pos == self._batch:
            self._pos = 0
        self.emitted[link - 1] += 1
        return [(link, pdu)]


class Reorderer:
    """Client-side receive window with duplicate discard and t-Reordering.

    `receive` and `on_timer` return the payloads released for in-order
    delivery. The caller owns the clock: it must invoke `on_timer` at
    `timer_deadline` whenever that is not ``None``.

    The timer deadline is the arrival time of the oldest buffered PDU plus
    ``t_reordering``. When the timer starts on a fresh gap this equals
    ``now + t_reordering``; on a restart it keeps every PDU's hold time within
    ``t_reordering``.
    """

    def __init__(self, t_reordering: int = DEFAULT_T_REORDERING):
        self.t_reordering = t_reordering
        self.rx_deliv = 0  # count
        self.rx_next = 0
        self.rx_reord: int | None = None
        self.timer_deadline: int | None = None
        self.buffer: dict[int, tuple[Any, int]] = {}
        self._arrivals: deque[tuple[int, int]] = deque()
        self._skipped: set[int] = set()
        self.received = 0
        self.delivered = 0
        self.duplicates = 0
        self.window_violations = 0
        self.timer_expiries = 0
        self.max_buffered = 0

    def count_of(self, sn: int) -> int:
        """Map an on-air SN to a count in ``[rx_deliv - WINDOW, rx_deliv + WINDOW)``."""
        ahead = (sn - self.rx_deliv) % SN_MOD
        if ahead < WINDOW:
            return self.rx_deliv + ahead
        return self.rx_deliv + ahead - SN_MOD

    def receive(self, pdu: PdcpPdu, t: int) -> list:
        self.received += 1
        count = self.count_of(pdu.sn)
        buf = self.buffer
        if count < self.rx_deliv:
            if count < 0 or count in self._skipped:
                self._skipped.discard(count)
                self.window_violations += 1
            else:
                self.duplicates += 1
            return []
        if count in buf:
            self.duplicates += 1
            return []
        if count >= self.rx_next:
            self.rx_next = count + 1
        if count == self.rx_deliv:
            out = [pdu.payload]
            nxt = count + 1
            while nxt in buf:
                out.append(buf.pop(nxt)[0])
                nxt += 1
            self.rx_deliv = nxt
            self.delivered += len(out)
        else:
            buf[count] = (pdu.payload, t)
            self._arrivals.append((t, count))
            if len(buf) > self.max_buffered:
                self.max_buffered = len(buf)
            out = []
        if self.timer_deadline is not None and self.rx_deliv >= self.rx_reord:
            self.timer_deadline = None
            self.rx_reord = None
        if self.timer_deadline is None and self.rx_deliv < self.rx_next:
            self._start_timer(t)
        return out

    def _start_timer(self, now: int) -> None:
        arrivals = self._arrivals
        buf = self.buffer
        while arrivals and arrivals[0][1] not in buf:
            arrivals.popleft()
        oldest = arrivals[0][0] if arrivals else now
        self.rx_reord = self.rx_next
        self.timer_deadline = max(now, oldest + self.t_reordering)

    def on_timer(self, t: int) -> list:
        """Expire t-Reordering: give up on every gap below ``rx_reord``."""
        if self.timer_deadline is None or t < self.timer_deadline:
            return []
        self.timer_expiries += 1
        buf = self.buffer
        reord = self.rx_reord
        skipped = self._skipped
        # forget skip marks that fell a full window behind
        if len(skipped) > WINDOW:
            floor = self.rx_deliv - WINDOW
            self._skipped = skipped = {c for c in skipped if c >= floor}
        out = []
        for count in range(self.rx_deliv, reord):
            item = buf.pop(count, None)
            if item is None:
                skipped.add(count)
            else:
                out.append(item[0])
        nxt = reord
        while nxt in buf:
            out.append(buf.pop(nxt)[0])
            nxt += 1
        self.rx_deliv = nxt
        self.delivered += len(out)
        self.timer_deadline = None
        self.rx_reord = None
        if self.rx_deliv < self.rx_next:
            self._start_timer(t)
        return out


class ClientProxy:
    """Binds a `Reorderer` to the simulator clock and forwards releases to the receiver.

    Released packets reach ``deliver(packets)`` after ``proxy_delay``.
    ``on_arrival`` is optional instrumentation invoked for every PDU copy that
    reaches the proxy.
    """

    def __init__(
        self,
        sim,
        deliver: Callable[[list], None],
        t_reordering: int = DEFAULT_T_REORDERING,
        proxy_delay: int = DEFAULT_PROXY_DELAY,
        on_arrival: Callable[[PdcpPdu, int], None] | None = None,
    ):
        self.sim = sim
        self.reorderer = Reorderer(t_reordering)
        self.deliver = deliver
        self.proxy_delay = proxy_delay
        self.on_arrival = on_arrival
        self.arrived_bytes = 0
        self.arrived_payload_bytes = 0
        self._timer_at: int | None = None

    def receive(self, pdu: PdcpPdu, link_id: int) -> None:
        now = self.sim.now
        self.arrived_bytes += pdu.wire_size
        self.arrived_payload_bytes += pdu.payload_size
        if self.on_arrival is not None:
            self.on_arrival(pdu, link_id)
        out = self.reorderer.receive(pdu, now)
        if out:
            self.sim.schedule(now + self.proxy_delay, self.deliver, out)
        self._sync_timer()

    def _sync_timer(self) -> None:
        deadline = self.reorderer.timer_deadline
        if deadline is not None and (self._timer_at is None or deadline < self._timer_at):
            self._timer_at = deadline
            self.sim.schedule(deadline, self._fire)

    def _fire(self) -> None:
        now = self.sim.now
        if self._timer_at != now:
            return
        self._timer_at = None
        deadline = self.reorderer.timer_deadline
        if deadline is None:
            return
        if deadline > now:
            self._sync_timer()
            return
        out = self.reorderer.on_timer(now)
        if out:
            self.sim.schedule(now + self.proxy_delay, self.deliver, out)
        self._sync_timer()


class ServerProxy:
    """Splits one flow's packets over the links after ``proxy_delay``."""

    def __init__(self, sim, splitter: Splitter, links, client: ClientProxy, proxy_delay: int):
        self.sim = sim
        self.splitter = splitter
        self.links = links
        self.client = client
        self.proxy_delay = proxy_delay

    def send(self, packet, size: int) -> None:
        t = self.sim.now
        at = t + self.proxy_delay
        sink = self.client.receive
        for link_id, pdu in self.splitter.route(packet, size, t):
            self.links[link_id - 1].ingress(pdu, at, sink)
