"""
Congestion control
==================

NewReno and CUBIC windows driven by hand, then one paced flow over a link.
"""

from dcsim.transport import Cubic, NewReno

MSS = 1248

reno = NewReno(MSS)
for pn in range(10):
    reno.on_ack(pn, MSS, 0)
print("slow start, one window acked: cwnd =", round(reno.cwnd / MSS), "MSS")
reno.on_loss(5, 10, 0)
print("after a loss: cwnd =", round(reno.cwnd / MSS), "MSS")
for pn in range(11, 21):
    reno.on_ack(pn, MSS, 0)
print("one more window in congestion avoidance:", round(reno.cwnd / MSS), "MSS")

cubic = Cubic(MSS, tcp_friendly=False)
cubic.cwnd = 100 * MSS
cubic.on_loss(1, 1, 0)
print("CUBIC K = %.3f s" % cubic.k)
for t in (0, cubic.k / 2, cubic.k, 1.5 * cubic.k):
    print("  W(%.2f s) = %.1f MSS" % (t, cubic.window(t) / MSS))

# the same controllers inside a full dual-connectivity run
from dcsim.experiments import MB, FlowSpec, apply_parameter, run_once, throughput_scenario

base = throughput_scenario(flows=[FlowSpec(file_size=20 * MB)])
for cc in ("newreno", "cubic"):
    rep = run_once(apply_parameter(base, "cc_algorithm", cc))
    f = rep.flows[0]
    print(f"{cc:>8}: {f.throughput_mbps:.2f} Mbps, loss events {f.counters['loss_events']}")
