"""
Fairness against single-connectivity flows
==========================================

A dual-connectivity flow shares both links with one single-connectivity flow
per link. Symmetric links give a near-equal split; duplication does not.
"""

from dcsim.experiments import apply_parameter, fairness_scenario, run_scenario
from dcsim.sim import seconds

base = fairness_scenario(duration=seconds(30), repetitions=2)

for label, scenario in (
    ("split, p=0", base),
    ("split, p=0.01", apply_parameter(base, "loss_prob", 0.01)),
    ("duplicate, p=0.01", apply_parameter(base, "duplication_loss", 0.01)),
    ("split, bandwidth 5:1", apply_parameter(base, "bandwidth_ratio", "5:1")),
):
    r = run_scenario(scenario)
    flows = "  ".join(f"{n}={r.mean(flow=n):5.2f}" for n in r.flow_names)
    print(f"{label:<22} {flows}   JFI {r.jfi:.4f}")
