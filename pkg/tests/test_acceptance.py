"""Acceptance suite: every primary criterion at its stated tolerance.

Each test prints one ``PASS``/``FAIL`` line (also collected into the pytest
terminal summary). Simulation results shared between criteria are computed
once per session.

    pytest tests/test_acceptance.py -v
"""

from __future__ import annotations

import random
import time
from pathlib import Path

import pytest

from acceptance_report import record
from dcsim import catalog
from dcsim.cli import main
from dcsim.config import load_trace
from dcsim.experiments import (
    RunResult,
    apply_parameter,
    fairness_scenario,
    run_scenario,
    throughput_scenario,
)
from dcsim.sim import seconds
from dcsim.transport import Cubic, NewReno
from pdcp_harness import check_exactly_once_in_order, run_instance

REPS = 10
_cache: dict[str, RunResult] = {}


def cached(key: str, build) -> RunResult:
    if key not in _cache:
        _cache[key] = run_scenario(build())
    return _cache[key]


def base():
    return throughput_scenario(repetitions=REPS)


def with_params(scenario, *pairs):
    for name, value in pairs:
        scenario = apply_parameter(scenario, name, value)
    return scenario


def batch(n):
    return cached(f"batch={n}", lambda: with_params(base(), ("batch_size", n)))


def split(pct):
    if pct == 50:
        return batch(100)
    return cached(f"split={pct}", lambda: with_params(base(), ("split_ratio", pct)))


def ratio_5_1(buffer="enlarged"):
    return cached(f"5:1/{buffer}", lambda: with_params(base(), ("bandwidth_ratio", "5:1"), ("recv_buffer", buffer)))


def high_delay(scenario, ratio):
    for link in scenario.links:
        link.delay_mean, link.delay_std = 100_000, 10_000
    return apply_parameter(scenario, "delay_ratio", ratio)


# --- 1, 2: PDCP property suites -----------------------------------------------------


def test_c01_pdcp_exactly_once_in_order():
    rng = random.Random(20240501)
    start = time.perf_counter()
    packets = 0
    for _ in range(10_000):
        out = run_instance(rng)
        check_exactly_once_in_order(out)
        packets += len(out.sent)
    elapsed = time.perf_counter() - start
    ok = elapsed < 30
    record(1, "PDCP exactly-once/in-order", ok, f"10^4 instances, {packets} packets, {elapsed:.1f} s (< 30 s)")
    assert ok


def test_c02_ideal_path_identity():
    rng = random.Random(77)
    start = time.perf_counter()
    for _ in range(1_000):
        out = run_instance(rng, lossless=True, payload_bytes=True)
        assert b"".join(p for _, p in out.delivered) == b"".join(out.sent)
        assert [p for _, p in out.delivered] == out.sent
    elapsed = time.perf_counter() - start
    ok = elapsed < 5
    record(2, "ideal-path identity", ok, f"10^3 instances byte-exact, {elapsed:.2f} s (< 5 s)")
    assert ok


# --- 3 to 10: trend reproduction -------------------------------------------------------


def test_c03_batch_size_trend():
    start = time.perf_counter()
    t = {n: batch(n).mean() for n in (50, 100, 500)}
    elapsed = time.perf_counter() - start
    ok = t[500] <= 0.8 * t[100] and t[100] > 20 and elapsed < 120
    record(
        3, "batch-size trend", ok,
        f"T(50)={t[50]:.2f} T(100)={t[100]:.2f} T(500)={t[500]:.2f} Mbps, "
        f"T(500)/T(100)={t[500] / t[100]:.3f} (<= 0.8), {elapsed:.0f} s (< 120 s)",
    )
    assert ok


def test_c04_split_peak():
    t = {p: split(p).mean() for p in (10, 30, 50, 70, 90)}
    ok = t[10] < t[30] < t[50] > t[70] > t[90]
    shown = " ".join(f"{p}%={v:.2f}" for p, v in t.items())
    record(4, "split peak at 50%", ok, shown)
    assert ok


def test_c05_matched_split_dominance():
    even = ratio_5_1().mean()
    matched = cached("5:1/matched", lambda: with_params(base(), ("bandwidth_ratio_matched_split", "5:1"))).mean()
    ok = matched >= 1.1 * even
    record(5, "matched split at 5:1", ok, f"matched {matched:.2f} vs 50/50 {even:.2f} Mbps, ratio {matched / even:.2f} (>= 1.1)")
    assert ok


def test_c06_symmetric_fairness():
    result = run_scenario(fairness_scenario(repetitions=REPS))
    means = [result.mean(flow=n) for n in result.flow_names]
    ok = result.jfi >= 0.99
    record(6, "symmetric fairness", ok, f"JFI {result.jfi:.4f} (>= 0.99), flows " + " ".join(f"{m:.2f}" for m in means))
    assert ok


def test_c07_duplication_goodput_law():
    parts = []
    ok = True
    for p in (0.0, 0.01, 0.05):
        r = run_scenario(with_params(throughput_scenario(repetitions=3), ("duplication_loss", p)))
        x, b = r.mean("goodput_mbps"), r.mean("combined_mbps")
        law = (1 + p) / 2
        good = abs(x / b - law) <= 0.05 * law
        ok &= good
        parts.append(f"p={p}: X/B={x / b:.4f} vs {law:.4f}")
    record(7, "duplication goodput law", ok, "; ".join(parts))
    assert ok


def test_c08_duplication_unfairness():
    parts = []
    ok = True
    for p in (0.01, 0.05):
        fair = fairness_scenario(duration=seconds(60), repetitions=3)
        dup = run_scenario(with_params(fair, ("duplication_loss", p))).jfi
        spl = run_scenario(with_params(fair, ("loss_prob", p))).jfi
        good = dup <= 0.7 and dup <= spl - 0.15
        ok &= good
        parts.append(f"p={p}: dup {dup:.4f} vs split {spl:.4f}")
    record(8, "duplication unfairness", ok, "; ".join(parts))
    assert ok


def test_c09_buffer_effect():
    small = ratio_5_1("default").mean()
    large = ratio_5_1().mean()
    sym_small = cached("sym/default", lambda: with_params(base(), ("recv_buffer", "default"))).mean()
    sym_large = batch(100).mean()
    gap = (sym_large - sym_small) / sym_large
    ok = small < large and abs(gap) <= 0.10
    record(
        9, "buffer effect", ok,
        f"5:1 default {small:.3f} < enlarged {large:.3f} Mbps; symmetric gap {gap * 100:.1f}% (<= 10%)",
    )
    assert ok


def test_c10_high_delay_degradation():
    tp = {}
    jfi = {}
    for ratio in ("1:1", "5:1"):
        tp[ratio] = run_scenario(high_delay(throughput_scenario(repetitions=5), ratio)).mean()
        jfi[ratio] = run_scenario(high_delay(fairness_scenario(duration=seconds(60), repetitions=3), ratio)).jfi
    ok = tp["5:1"] < tp["1:1"] and jfi["5:1"] < jfi["1:1"]
    record(
        10, "high-delay degradation", ok,
        f"throughput {tp['1:1']:.2f} -> {tp['5:1']:.2f} Mbps, JFI {jfi['1:1']:.4f} -> {jfi['5:1']:.4f}",
    )
    assert ok


# --- 11: congestion-control oracles --------------------------------------------------------


def test_c11_cc_oracles():
    start = time.perf_counter()
    mss = 1248
    reno = NewReno(mss)
    for pn in range(10):
        reno.on_ack(pn, mss, 0)
    doubling = reno.cwnd == 20 * mss
    reno.on_loss(10, 20, 0)
    for pn in range(21, 31):
        reno.on_ack(pn, mss, 0)
    ca = reno.cwnd == 11 * mss

    cubic = Cubic(mss, tcp_friendly=False)
    cubic.cwnd = 100 * mss
    cubic.on_loss(1, 1, 0)
    k = (100 * 0.3 / 0.4) ** (1 / 3)
    errors = []
    for i, t in enumerate((0.0, k / 2, k)):
        cubic.on_ack(2 + i, mss, int(round(t * 1e6)))
        closed = 0.4 * mss * (t - k) ** 3 + 100 * mss
        errors.append(abs(cubic.cwnd - closed) / mss)
    elapsed = time.perf_counter() - start
    ok = doubling and ca and max(errors) <= 1 and elapsed < 1
    record(
        11, "CC unit oracles", ok,
        f"slow start x2 {doubling}, CA +1 MSS {ca}, CUBIC max error {max(errors):.3f} MSS, {elapsed * 1e3:.1f} ms",
    )
    assert ok


# --- 12: determinism ----------------------------------------------------------------------


def _outputs(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_c12_determinism(tmp_path):
    mismatched = []
    entries = catalog.entries()
    for entry in entries:
        runs = []
        for attempt in ("a", "b"):
            out = tmp_path / f"{entry.name}-{attempt}"
            rc = main(["run", str(entry.path), "--reps", "1", "--seed", "11", "--out", str(out), "-q"])
            assert rc in (0, 3)
            runs.append(_outputs(out))
        if runs[0] != runs[1]:
            mismatched.append(entry.name)
    sweeps = []
    for attempt in ("a", "b"):
        out = tmp_path / f"sweep-{attempt}"
        assert main(["sweep", "catalog:fig15a_trace_batch", "--seed", "11", "--out", str(out), "-q"]) == 0
        sweeps.append(_outputs(out))
    if sweeps[0] != sweeps[1]:
        mismatched.append("fig15a sweep")
    ok = not mismatched
    record(
        12, "determinism", ok,
        f"{len(entries)} catalog configs + 1 full sweep byte-identical" if ok else f"differs: {mismatched}",
    )
    assert ok


# --- 13: trace-driven scenario ------------------------------------------------------------


def test_c13_trace_scenario():
    trace = load_trace("builtin:lte_static")
    t = {}
    for n in (100, 500):
        s = throughput_scenario(repetitions=3)
        for link in s.links:
            link.trace = trace
        t[n] = run_scenario(apply_parameter(s, "batch_size", n)).mean()
    ok = t[500] <= t[100]
    record(13, "trace scenario", ok, f"T(100)={t[100]:.2f} T(500)={t[500]:.2f} Mbps")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
