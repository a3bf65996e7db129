"""Generate the bundled synthetic LTE downlink trace in raw drive-test CSV layout.

The output mimics a stationary-user LTE log sampled once per second: a
timestamp column, radio measurements, and the downlink bitrate in kbps. The
bitrate follows a log-normal AR(1) process with occasional short outages and
is rescaled so the first 200 s average exactly 4500 kbps.

    python scripts/make_lte_trace.py src/dcsim/catalog/traces/lte_static_raw.csv
"""

import argparse
import csv
from datetime import datetime, timedelta

import numpy as np

COLUMNS = [
    "Timestamp", "Longitude", "Latitude", "Speed", "Operatorname", "CellID",
    "NetworkMode", "RSRP", "RSRQ", "SNR", "CQI", "RSSI", "DL_bitrate",
    "UL_bitrate", "State",
]


def bitrates(n, seed, head=200, head_mean=4500.0):
    rng = np.random.default_rng(seed)
    x = np.empty(n)
    x[0] = 0.0
    for i in range(1, n):
        x[i] = 0.85 * x[i - 1] + rng.normal(0.0, 0.3)
    rate = np.exp(x)
    rate = np.minimum(rate, 3.0 * np.median(rate))
    outage = rng.random(n) < 0.02
    rate[outage] = 0.0
    rate *= head_mean / rate[:head].mean()
    kbps = np.round(rate).astype(int)
    # absorb rounding so the head mean is exact
    kbps[np.argmax(kbps[:head])] += int(round(head_mean * head)) - int(kbps[:head].sum())
    return kbps


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--seconds", type=int, default=600)
    ap.add_argument("--seed", type=int, default=20180212)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed + 1)
    kbps = bitrates(args.seconds, args.seed)
    t0 = datetime(2024, 3, 5, 10, 0, 0)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for i, dl in enumerate(kbps):
            rsrp = int(rng.normal(-95, 3))
            w.writerow([
                (t0 + timedelta(seconds=i)).strftime("%Y.%m.%d_%H.%M.%S"),
                "-8.4969", "51.8947", 0, "A", 11, "LTE",
                rsrp, int(rng.normal(-11, 1.5)), int(rng.normal(8, 3)),
                int(np.clip(rng.normal(9, 2), 1, 15)), rsrp + 20,
                int(dl), int(rng.integers(20, 120)), "D" if dl > 0 else "I",
            ])


if __name__ == "__main__":
    main()
