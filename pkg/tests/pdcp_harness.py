"""Randomized splitter -> links -> reorderer instances for the PDCP property suites."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from dcsim.netem import Link, LinkConfig
from dcsim.pdcp import ClientProxy, Mode, Splitter, SplitterConfig
from dcsim.sim import Simulator, ms, seconds

T_REORDERING = ms(200)


@dataclass
class Outcome:
    sent: list
    delivered: list = field(default_factory=list)  # (time, payload)
    arrivals: dict = field(default_factory=dict)  # payload -> first accepted arrival time
    rejected: int = 0


def run_instance(
    rng: random.Random,
    *,
    lossless: bool = False,
    n_max: int = 120,
    payload_bytes: bool = False,
) -> Outcome:
    """Build and run one random instance; returns what went in and what came out."""
    n = rng.randint(1, n_max)
    batch = rng.randint(1, 500)
    a, b = rng.choice([(1, 1), (9, 1), (1, 9), (3, 1), (1, 0), (0, 1), (rng.random(), rng.random() + 0.01)])
    mode = rng.choice([Mode.SPLIT, Mode.SPLIT, Mode.DUPLICATE])
    splitter = Splitter(SplitterConfig(batch_size=batch, split=(a, b), mode=mode, proxy_delay=0))
    start_sn = rng.randrange(1 << 16)
    splitter.next_sn = start_sn

    sim = Simulator(rng.randrange(1 << 30))
    links = []
    for i in (1, 2):
        if lossless:
            cfg = LinkConfig(
                rate_bps=rng.uniform(10e6, 100e6),
                delay_mean=rng.randint(0, ms(90)),
                delay_std=rng.randint(0, ms(3)),
                queue_limit=10**6,
            )
        else:
            cfg = LinkConfig(
                rate_bps=rng.uniform(1e6, 50e6),
                delay_mean=rng.randint(0, ms(150)),
                delay_std=rng.randint(0, ms(30)),
                loss_prob=rng.uniform(0, 0.2),
                queue_limit=rng.randint(5, 200),
                reorder_jitter=rng.random() < 0.3,
            )
        links.append(Link(sim, cfg, i))

    out = Outcome(sent=[])

    def deliver(payloads):
        now = sim.now
        out.delivered.extend((now, p) for p in payloads)

    def on_arrival(pdu, link_id):
        rr = client.reorderer
        c = rr.count_of(pdu.sn)
        if c >= rr.rx_deliv and c not in rr.buffer:
            out.arrivals.setdefault(pdu.payload, sim.now)
        else:
            out.rejected += 1

    client = ClientProxy(sim, deliver, T_REORDERING, 0, on_arrival)
    client.reorderer.rx_deliv = client.reorderer.rx_next = start_sn

    t = 0
    for i in range(n):
        t += rng.randint(ms(1.3), ms(3)) if lossless else rng.randint(0, ms(2))
        payload = rng.randbytes(rng.randint(1, 16)) if payload_bytes else i
        out.sent.append(payload)
        for link_id, pdu in splitter.route(payload, 1200, t):
            links[link_id - 1].ingress(pdu, t, client.receive)
    sim.run_until(t + seconds(5))
    return out


def check_exactly_once_in_order(out: Outcome) -> None:
    order = [p for _, p in out.delivered]
    assert all(x < y for x, y in zip(order, order[1:])), "delivered sequence not strictly increasing"
    delivered_at = {p: t for t, p in out.delivered}
    for payload, arrived in out.arrivals.items():
        assert payload in delivered_at, f"accepted payload {payload} never delivered"
        assert delivered_at[payload] - arrived <= T_REORDERING + 1, "held past t-Reordering"
