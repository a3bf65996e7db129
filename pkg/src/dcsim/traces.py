"""Conversion of raw bandwidth logs into the canonical ``time_s,throughput_kbps`` CSV."""

from __future__ import annotations

import csv
import io
from datetime import datetime
from pathlib import Path

RATE_UNITS = {"bps": 1e-3, "kbps": 1.0, "mbps": 1e3}
TIMESTAMP_FORMATS = ("%Y.%m.%d_%H.%M.%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S")
CANONICAL_HEADER = ("time_s", "throughput_kbps")


class TraceFormatError(ValueError):
    """A raw trace cell could not be interpreted; ``row`` is 1-based."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(f"row {row}: {message}" if row is not None else message)
        self.row = row


def parse_time(cell: str) -> float:
    """Seconds from a numeric cell or a timestamp in one of `TIMESTAMP_FORMATS`."""
    text = cell.strip()
    try:
        return float(text)
    except ValueError:
        pass
    for fmt in TIMESTAMP_FORMATS:
        try:
            return datetime.strptime(text, fmt).timestamp()
        except ValueError:
            continue
    raise ValueError(f"not a number or timestamp: {cell!r}")


def _sniff_delimiter(sample: str) -> str:
    try:
        return csv.Sniffer().sniff(sample, delimiters=",;\t ").delimiter
    except csv.Error:
        return ","


def convert_rows(
    lines: list[str],
    time_col: int = 0,
    rate_col: int = 1,
    rate_unit: str = "kbps",
    delimiter: str | None = None,
) -> list[tuple[float, float]]:
    """Return ``(time_s, kbps)`` samples rebased to start at zero.

    A first row whose selected cells are not numeric is taken as a header.
    Samples sharing a timestamp are averaged.
    """
    unit = rate_unit.lower()
    if unit not in RATE_UNITS:
        raise TraceFormatError(f"unknown rate unit {rate_unit!r}; expected one of {', '.join(RATE_UNITS)}")
    scale = RATE_UNITS[unit]
    if delimiter is None:
        delimiter = _sniff_delimiter("".join(lines[:5]))
    reader = csv.reader(io.StringIO("".join(lines)), delimiter=delimiter, skipinitialspace=True)
    merged: dict[float, list[float]] = {}
    order: list[float] = []
    for rowno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if max(time_col, rate_col) >= len(row):
            raise TraceFormatError(f"expected at least {max(time_col, rate_col) + 1} columns, got {len(row)}", rowno)
        try:
            t = parse_time(row[time_col])
            rate = float(row[rate_col]) * scale
        except ValueError as exc:
            if rowno == 1 and not order:
                continue  # header
            raise TraceFormatError(str(exc), rowno) from None
        if rate < 0:
            raise TraceFormatError(f"negative rate {row[rate_col]!r}", rowno)
        if order and t < order[-1]:
            raise TraceFormatError(f"time goes backwards ({row[time_col]!r})", rowno)
        if t not in merged:
            merged[t] = []
            order.append(t)
        merged[t].append(rate)
    if not order:
        raise TraceFormatError("trace has no samples")
    t0 = order[0]
    return [(round(t - t0, 6), sum(merged[t]) / len(merged[t])) for t in order]


def convert_file(raw_path: str | Path, **kwargs) -> list[tuple[float, float]]:
    with open(raw_path, newline="") as fh:
        return convert_rows(fh.readlines(), **kwargs)


def format_canonical(samples: list[tuple[float, float]]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CANONICAL_HEADER)
    for t, kbps in samples:
        w.writerow([f"{t:g}", f"{kbps:.3f}".rstrip("0").rstrip(".")])
    return out.getvalue()


def mean_kbps(samples: list[tuple[float, float]], until_s: float | None = None) -> float:
    """Time-weighted mean rate over ``[0, until_s)``; each sample lasts until the next one."""
    if not samples:
        raise ValueError("no samples")
    times = [t for t, _ in samples]
    step = times[-1] - times[-2] if len(times) > 1 else 1.0
    ends = times[1:] + [times[-1] + step]
    end = ends[-1] if until_s is None else until_s
    total = 0.0
    for (t, rate), t_next in zip(samples, ends):
        lo, hi = t, min(t_next, end)
        if hi > lo:
            total += rate * (hi - lo)
    return total / end
