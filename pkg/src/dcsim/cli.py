"""``dcsim`` command line: run scenarios and sweeps, convert traces, list the catalog.

Exit codes: 0 success, 2 configuration or input error, 3 a flow did not
finish within the run-length cap (results are still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from . import catalog as catalog_mod
from . import config as config_mod
from .experiments import FAIRNESS_FILE, FAIRNESS_WINDOW, FlowSpec, RunResult, Scenario, apply_parameter, canonical_parameter, run_scenario
from .traces import TraceFormatError, convert_file, format_canonical

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FLAGGED = 3

COUNTERS = (
    "packets_sent",
    "retransmissions",
    "lost_packets",
    "loss_events",
    "ptos",
    "buffer_drops",
    "timer_expiries",
    "window_violations",
    "pdcp_duplicates",
)


class UsageError(Exception):
    pass


def r3(x: float) -> float:
    return round(float(x), 3)


def r4(x: float) -> float:
    return round(float(x), 4)


# --- value parsing ---------------------------------------------------------------

_RANGE = re.compile(r"^\s*(-?[\d.]+)\s*\.\.\s*(-?[\d.]+)\s*(?:step\s*(-?[\d.]+))?\s*$")


def _scalar(text: str) -> Any:
    text = text.strip()
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def parse_values(tokens: Sequence[str]) -> list:
    """``["1,50,100"]``, ``["10..90", "step", "10"]`` or ``["1:1", "5:1"]`` -> values."""
    text = " ".join(tokens).strip()
    if not text:
        raise UsageError("no sweep values given")
    m = _RANGE.match(text)
    if m:
        lo, hi = _scalar(m.group(1)), _scalar(m.group(2))
        step = _scalar(m.group(3)) if m.group(3) else 1
        if not isinstance(step, (int, float)) or step <= 0:
            raise UsageError(f"range step must be positive in {text!r}")
        out = []
        i = 0
        while True:
            v = lo + i * step
            if v > hi + 1e-9 * abs(step):
                break
            out.append(round(v, 10) if isinstance(v, float) else v)
            i += 1
        return out
    parts = [p for p in re.split(r"[,\s]+", text) if p]
    return [_scalar(p) for p in parts]


# --- report assembly ---------------------------------------------------------------


def flow_summary(result: RunResult, name: str) -> dict:
    runs = [r.flow(name) for r in result.runs]
    completion = [f.completion_s for f in runs if f.completion_s is not None]
    return {
        "flow_id": name,
        "connectivity": runs[0].connectivity,
        "throughput_mbps": r3(result.mean("throughput_mbps", name)),
        "throughput_std_mbps": r3(result.std("throughput_mbps", name)),
        "goodput_mbps": r3(result.mean("goodput_mbps", name)),
        "combined_mbps": r3(result.mean("combined_mbps", name)),
        "completion_s": r3(sum(completion) / len(completion)) if completion else None,
        "completed_runs": sum(1 for f in runs if f.completed),
        "counters": {k: r3(result.mean(k, name)) for k in COUNTERS},
    }


def result_summary(result: RunResult) -> dict:
    out: dict[str, Any] = {
        "scenario": result.scenario.name,
        "repetitions": len(result.runs),
        "seeds": [r.seed for r in result.runs],
        "flagged": result.flagged,
        "flows": [flow_summary(result, n) for n in result.flow_names],
    }
    if len(result.flow_names) > 1:
        out["jfi"] = r4(result.jfi)
        out["jfi_std"] = r4(result.jfi_std)
    out["links"] = {
        str(k): {c: r3(sum(r.link_counters[k][c] for r in result.runs) / len(result.runs)) for c in v}
        for k, v in sorted(result.runs[0].link_counters.items())
    }
    return out


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_series(out: Path, result: RunResult, bin_s: float) -> None:
    with open(out / "throughput.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "flow_id", "throughput_mbps"])
        series = {n: result.mean_series(n) for n in result.flow_names}
        n_bins = max(len(s) for s in series.values())
        for i in range(n_bins):
            for name in result.flow_names:
                s = series[name]
                w.writerow([f"{i * bin_s:g}", name, f"{s[i] if i < len(s) else 0.0:.3f}"])
    with open(out / "utilization.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "link_id", "utilization"])
        util = {k: result.mean_utilization(k) for k in sorted(result.runs[0].utilization)}
        n_bins = max(len(s) for s in util.values())
        for i in range(n_bins):
            for link_id, s in util.items():
                w.writerow([f"{i * bin_s:g}", link_id, f"{s[i] if i < len(s) else 0.0:.4f}"])


SWEEP_COLUMNS = (
    "scenario", "parameter", "value", "flow_id", "throughput_mbps", "throughput_std_mbps",
    "goodput_mbps", "combined_mbps", "jfi", "jfi_std", "seed", "repetitions", "flagged",
) + COUNTERS


def sweep_rows(scenario_name: str, parameter: str, value: Any, result: RunResult) -> list[dict]:
    rows = []
    multi = len(result.flow_names) > 1
    for name in result.flow_names:
        fs = flow_summary(result, name)
        row = {
            "scenario": scenario_name,
            "parameter": parameter,
            "value": value,
            "flow_id": name,
            "throughput_mbps": f"{fs['throughput_mbps']:.3f}",
            "throughput_std_mbps": f"{fs['throughput_std_mbps']:.3f}",
            "goodput_mbps": f"{fs['goodput_mbps']:.3f}",
            "combined_mbps": f"{fs['combined_mbps']:.3f}",
            "jfi": f"{result.jfi:.4f}" if multi else "",
            "jfi_std": f"{result.jfi_std:.4f}" if multi else "",
            "seed": result.scenario.seed,
            "repetitions": len(result.runs),
            "flagged": int(result.flagged),
        }
        for k in COUNTERS:
            row[k] = f"{fs['counters'][k]:.3f}"
        rows.append(row)
    return rows


# --- scenario preparation ------------------------------------------------------------


def resolve_seed(args, scenario: Scenario) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("DCSIM_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"DCSIM_SEED must be an integer, got {env!r}") from None
    return scenario.seed


def prepare(args, doc: config_mod.ConfigDocument) -> Scenario:
    s = doc.scenario.copy()
    s.seed = resolve_seed(args, s)
    if args.reps is not None:
        if args.reps < 1:
            raise UsageError("--reps must be at least 1")
        s.repetitions = args.reps
    return s


def load_doc(ref: str | None) -> config_mod.ConfigDocument:
    if ref is None:
        return config_mod.parse_document({})
    return config_mod.load(ref)


def as_fairness(s: Scenario) -> Scenario:
    """Same links/splitter/transport, three-flow topology, fixed measurement window."""
    base = s.flows[0].transport
    s = s.copy()
    if sorted(f.connectivity for f in s.flows) != ["dc", "sc1", "sc2"]:
        size = max(f.file_size for f in s.flows)
        size = max(size, FAIRNESS_FILE)
        s.flows = [FlowSpec(n, n, file_size=size, transport=replace(base)) for n in ("dc", "sc1", "sc2")]
    if s.duration is None:
        s.duration = FAIRNESS_WINDOW
    return s


def document_stamp(doc: config_mod.ConfigDocument, scenario: Scenario, figure: str | None = None) -> dict:
    return {
        "figure": figure if figure is not None else doc.figure,
        "config": config_mod.to_document(scenario),
    }


def resolve_figure(tag: str) -> str:
    entries = catalog_mod.entries()
    for e in entries:
        if tag == e.name or tag == e.figure:
            return e.figure
    matches = [e for e in entries if e.figure.split()[0] == tag or e.name.startswith(tag)]
    if len(matches) == 1:
        return matches[0].figure
    if not matches:
        raise UsageError(f"--paper-figure {tag!r} matches no catalog entry (see `dcsim catalog`)")
    raise UsageError(f"--paper-figure {tag!r} is ambiguous: {', '.join(e.name for e in matches)}")


# --- commands ------------------------------------------------------------------------


def _run_and_write(args, doc, scenario: Scenario) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_scenario(scenario)
    summary = result_summary(result)
    summary.update(document_stamp(doc, scenario))
    write_json(out / "summary.json", summary)
    write_series(out, result, scenario.bin_us / 1e6)
    _report(args, result)
    return EXIT_FLAGGED if result.flagged else EXIT_OK


def _report(args, result: RunResult) -> None:
    if args.quiet:
        return
    for name in result.flow_names:
        fs = flow_summary(result, name)
        print(f"{name:>6}  {fs['throughput_mbps']:8.3f} Mbps  (std {fs['throughput_std_mbps']:.3f})")
    if len(result.flow_names) > 1:
        print(f"   JFI  {result.jfi:.4f}")
    if result.flagged:
        print("warning: a flow did not complete within the run-length cap", file=sys.stderr)


def cmd_run(args) -> int:
    doc = load_doc(args.config)
    return _run_and_write(args, doc, prepare(args, doc))


def cmd_fairness(args) -> int:
    doc = load_doc(args.config)
    scenario = as_fairness(prepare(args, doc))
    if args.duration is not None:
        scenario.duration = int(round(args.duration * 1e6))
    return _run_and_write(args, doc, scenario)


def cmd_sweep(args) -> int:
    doc = load_doc(args.config)
    base = prepare(args, doc)
    if args.parameter is not None:
        try:
            parameter = canonical_parameter(args.parameter)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        values = parse_values(args.values) if args.values else None
    else:
        parameter, values = None, None
    if parameter is None or values is None:
        if doc.sweep is None:
            raise UsageError("give a parameter and values, or use a config with a sweep section")
        parameter = parameter or doc.sweep.parameter
        if values is None:
            values = list(doc.sweep.values)
    figure = resolve_figure(args.paper_figure) if args.paper_figure else doc.figure

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    points = []
    rows: list[dict] = []
    flagged = False
    for value in values:
        try:
            scenario = apply_parameter(base, parameter, value)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value {value!r} for {parameter}: {exc}") from None
        result = run_scenario(scenario)
        flagged |= result.flagged
        summary = result_summary(result)
        summary["value"] = value
        points.append(summary)
        rows.extend(sweep_rows(base.name, parameter, value, result))
        if not args.quiet:
            tp = ", ".join(f"{n}={result.mean('throughput_mbps', n):.3f}" for n in result.flow_names)
            jfi = f"  JFI={result.jfi:.4f}" if len(result.flow_names) > 1 else ""
            print(f"{parameter}={value}: {tp}{jfi}")
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    summary = {
        "scenario": base.name,
        "parameter": parameter,
        "values": values,
        "points": points,
        "flagged": flagged,
    }
    summary.update(document_stamp(doc, base, figure))
    write_json(out / "summary.json", summary)
    return EXIT_FLAGGED if flagged else EXIT_OK


def cmd_trace_convert(args) -> int:
    try:
        samples = convert_file(
            args.raw,
            time_col=args.time_col,
            rate_col=args.rate_col,
            rate_unit=args.rate_unit,
            delimiter=args.delimiter,
        )
    except TraceFormatError as exc:
        raise UsageError(f"{args.raw}: {exc}") from None
    except OSError as exc:
        raise UsageError(f"{args.raw}: {exc.strerror}") from None
    text = format_canonical(samples)
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)
    return EXIT_OK


def cmd_catalog(args) -> int:
    for e in catalog_mod.entries():
        print(f"{e.name:<30} {e.figure}")
        if args.verbose and e.description:
            print(f"{'':<30} {e.description}")
    return EXIT_OK


# --- argument parsing ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcsim", description="Dual-connectivity transport simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False):
        sp.add_argument("config", nargs=None if config_required else "?",
                        help="scenario YAML file or catalog:<name>")
        sp.add_argument("--seed", type=int, default=None, help="base seed (falls back to $DCSIM_SEED, then the config)")
        sp.add_argument("--reps", type=int, default=None, help="repetitions per point")
        sp.add_argument("--out", default="dcsim-out", help="output directory (default: %(default)s)")
        sp.add_argument("-q", "--quiet", action="store_true")

    sp = sub.add_parser("run", help="run one scenario")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("fairness", help="run a scenario with the DC + two SC flow topology")
    common(sp)
    sp.add_argument("--duration", type=float, default=None, help="measurement window in seconds")
    sp.set_defaults(func=cmd_fairness)

    sp = sub.add_parser("sweep", help="vary one parameter")
    common(sp, config_required=True)
    sp.add_argument("parameter", nargs="?", help="sweep parameter (default: the config's sweep section)")
    sp.add_argument("values", nargs="*", help="e.g. 1,50,100  or  10..90 step 10")
    sp.add_argument("--paper-figure", default=None, help="catalog figure tag to stamp on the output")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("trace-convert", help="convert a raw bandwidth log to time_s,throughput_kbps")
    sp.add_argument("raw")
    sp.add_argument("-o", "--output", default=None, help="output file (default: stdout)")
    sp.add_argument("--time-col", type=int, default=0)
    sp.add_argument("--rate-col", type=int, default=1)
    sp.add_argument("--rate-unit", choices=("bps", "kbps", "mbps"), default="kbps")
    sp.add_argument("--delimiter", default=None, help="field separator (default: sniffed)")
    sp.set_defaults(func=cmd_trace_convert)

    sp = sub.add_parser("catalog", help="list bundled scenarios")
    sp.add_argument("-v", "--verbose", action="store_true")
    sp.set_defaults(func=cmd_catalog)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (config_mod.ConfigError, UsageError) as exc:
        print(f"dcsim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"dcsim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
