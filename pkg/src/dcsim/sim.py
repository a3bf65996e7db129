"""Discrete-event engine: integer microsecond clock, FIFO tie-breaking, named RNG streams."""

from __future__ import annotations

import hashlib
import heapq
import random
from typing import Any, Callable, NamedTuple

US_PER_MS = 1_000
US_PER_S = 1_000_000


def ms(value: float) -> int:
    return int(round(value * US_PER_MS))


def seconds(value: float) -> int:
    return int(round(value * US_PER_S))


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current simulation time."""


class Event(NamedTuple):
    fire_at: int
    seq: int
    target: Callable[..., Any]
    payload: tuple


class RngStream(random.Random):
    """A `random.Random` whose state is derived from ``(name, seed)`` only.

    The derivation goes through blake2b so it does not depend on Python's
    per-process string hash salt.
    """

    def __new__(cls, name: str, seed: int):
        return super().__new__(cls)

    def __init__(self, name: str, seed: int):
        self.name = name
        self.base_seed = seed
        digest = hashlib.blake2b(f"{seed}/{name}".encode(), digest_size=8).digest()
        super().__init__(int.from_bytes(digest, "little"))


def draw_normal(stream: random.Random, mean: float, std: float) -> float:
    """One normal draw clamped below at zero."""
    if std < 0:
        raise ValueError("std must be non-negative")
    if std == 0:
        return mean
    value = stream.gauss(mean, std)
    return value if value > 0.0 else 0.0


class Simulator:
    """Single-threaded event loop.

    Events are ``(fire_at, seq, target, payload)`` tuples kept in a binary heap;
    ``seq`` is a global insertion counter, so ties on ``fire_at`` dispatch in
    scheduling order. Dispatch calls ``target(*payload)``.
    """

    def __init__(self, seed: int = 0, record: bool = False):
        self.seed = seed
        self.now = 0
        self.dispatched = 0
        self._heap: list[tuple] = []
        self._seq = 0
        self._streams: dict[str, RngStream] = {}
        self._stopped = False
        self.log: list[tuple[int, int, str]] | None = [] if record else None

    def stream(self, name: str) -> RngStream:
        rng = self._streams.get(name)
        if rng is None:
            rng = self._streams[name] = RngStream(name, self.seed)
        return rng

    def schedule(self, fire_at: int, target: Callable[..., Any], *payload: Any) -> int:
        if fire_at < self.now:
            raise SchedulingError(
                f"event for {getattr(target, '__qualname__', target)!r} at t={fire_at}us "
                f"is before now={self.now}us"
            )
        seq = self._seq
        self._seq = seq + 1
        heapq.heappush(self._heap, (fire_at, seq, target, payload))
        return seq

    def call_in(self, delay: int, target: Callable[..., Any], *payload: Any) -> int:
        return self.schedule(self.now + delay, target, *payload)

    def stop(self) -> None:
        """Ask `run_until` to return after the event being dispatched."""
        self._stopped = True

    def pending(self) -> int:
        return len(self._heap)

    def peek(self) -> Event | None:
        return Event(*self._heap[0]) if self._heap else None

    def run_until(self, t_end: int) -> int:
        """Dispatch every event with ``fire_at <= t_end`` and leave the clock at ``t_end``.

        Returns the number of events dispatched. If a target calls `stop`, the
        loop returns early with the clock at the last dispatched event.
        """
        heap = self._heap
        pop = heapq.heappop
        log = self.log
        count = 0
        self._stopped = False
        while heap and heap[0][0] <= t_end:
            fire_at, seq, target, payload = pop(heap)
            self.now = fire_at
            if log is not None:
                log.append((fire_at, seq, getattr(target, "__qualname__", repr(target))))
            target(*payload)
            count += 1
            if self._stopped:
                self.dispatched += count
                return count
        if t_end > self.now:
            self.now = t_end
        self.dispatched += count
        return count
