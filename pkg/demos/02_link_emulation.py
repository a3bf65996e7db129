"""
Emulated links
==============

A rate-limited drop-tail queue followed by normal delay and Bernoulli loss.
"""

from dataclasses import dataclass

import numpy as np

from dcsim.netem import BandwidthTrace, Link, LinkConfig
from dcsim.sim import Simulator, ms, seconds


@dataclass
class Packet:
    ident: int
    wire_size: int = 1500


sim = Simulator(seed=3)
link = Link(sim, LinkConfig(rate_bps=20e6, delay_mean=ms(10), delay_std=ms(1), loss_prob=0.01, queue_limit=100))
arrivals = []

# offer 400 packets back to back; the queue holds 100 of them
for i in range(400):
    link.ingress(Packet(i), 0, lambda pdu, link_id: arrivals.append((sim.now, pdu.ident)))
sim.run_until(seconds(1))

print("counters:", link.counters)
print("first delivery at %.2f ms" % (arrivals[0][0] / 1000))
print("order preserved:", [i for _, i in arrivals] == sorted(i for _, i in arrivals))

# a piecewise-constant trace; zero-rate samples are outages
trace = BandwidthTrace.from_samples([(0, 4e6), (1, 0.0), (2, 8e6)])
print("rate at 0.5 s, 1.5 s, 2.5 s:", [trace.rate_at(seconds(t)) / 1e6 for t in (0.5, 1.5, 2.5)], "Mbps")

sim = Simulator()
link = Link(sim, LinkConfig(trace=trace, queue_limit=10**6))
for i in range(2000):
    link.ingress(Packet(i), 0, lambda pdu, link_id: None)
sim.run_until(seconds(4))
print("per-second utilization:", np.round(link.utilization_series(seconds(3)), 3))
