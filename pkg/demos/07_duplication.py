"""
Packet duplication
==================

Every packet travels on both links. The links carry B in total, but only
the first copy of each packet is useful, so goodput X is B(1+p)/2.
"""

from dcsim.experiments import (
    MB,
    FlowSpec,
    apply_parameter,
    delivery_probability,
    expected_duplication_goodput,
    run_scenario,
    throughput_scenario,
)

base = throughput_scenario(flows=[FlowSpec(file_size=20 * MB)], repetitions=2)

for p in (0.0, 0.01, 0.05):
    r = run_scenario(apply_parameter(base, "duplication_loss", p))
    b, x = r.mean("combined_mbps"), r.mean("goodput_mbps")
    print(f"p={p:<5} B={b:6.2f}  X={x:6.2f}  X/B={x / b:.4f}  law={expected_duplication_goodput(1, p):.4f}")

print("delivery probability at p=0.1: split %.2f, duplicate %.2f"
      % (delivery_probability(0.1, "split"), delivery_probability(0.1, "duplicate")))
