"""
Replaying a bandwidth trace
===========================

Convert a raw drive-test log to the canonical two-column trace, then replay
it on both links.
"""

from dcsim.config import builtin_trace_path, load_trace
from dcsim.experiments import MB, FlowSpec, run_scenario, sweep, throughput_scenario
from dcsim.traces import convert_file, format_canonical, mean_kbps

raw = builtin_trace_path("lte_static").with_name("lte_static_raw.csv")
samples = convert_file(raw, time_col=0, rate_col=12)
print(format_canonical(samples[:4]), end="")
print("mean of the first 200 s: %.0f kbps" % mean_kbps(samples, 200))

trace = load_trace("builtin:lte_static")
base = throughput_scenario(flows=[FlowSpec(file_size=10 * MB)], repetitions=2)
for link in base.links:
    link.trace = trace

for point in sweep(base, "batch_size", [100, 500]):
    print(f"batch {point.value}: {point.result.mean():.2f} Mbps")
