"""
Batch size and split ratio
==========================

One dual-connectivity download over two 20 Mbps links. Large batches leave a
link idle while the other drains its share; uneven splits waste capacity.
"""

import numpy as np

from dcsim.experiments import MB, FlowSpec, apply_parameter, run_once, sweep, throughput_scenario

base = throughput_scenario(flows=[FlowSpec(file_size=20 * MB)], repetitions=2)

for point in sweep(base, "batch_size", [1, 50, 100, 300, 500]):
    r = point.result
    print(f"batch {point.value:>3}: {r.mean():6.2f} +- {r.std():.2f} Mbps")

for point in sweep(base, "split_ratio", [10, 30, 50, 70, 90]):
    print(f"split {point.value:>2}% on link 1: {point.result.mean():6.2f} Mbps")

# per-second link utilization shows the idle periods of a large batch
rep = run_once(apply_parameter(base, "batch_size", 500))
for link_id, series in rep.utilization.items():
    print(f"link {link_id} utilization per second:", np.round(series, 2))
