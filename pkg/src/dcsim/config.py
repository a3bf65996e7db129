"""YAML scenario documents: strict parsing into `Scenario` objects and back.

A document is a mapping with the keys below; every key is optional and falls
back to the default testbed (two 20 Mbps links with 10 ms +/- 1 ms delay, no
random loss, batch 100, 1:1 split, NewReno with pacing, 4 MiB receive buffer)::

    name: my-run
    figure: fig4a batch-size sweep      # catalog annotation, informational
    description: free text
    topology: throughput                # throughput | fairness | custom
    seed: 1
    repetitions: 10
    duration_s: null                    # measurement window; fairness default 180
    t_reordering_ms: 200
    bin_s: 1
    links:                              # one mapping for both links, or a list of two
      rate_mbps: 20                     # or rate_bps
      delay_ms: 10
      delay_std_ms: 1                   # default: 10% of delay_ms
      loss: 0.0
      queue_limit: 100
      trace: null                       # CSV path (relative to the document) or builtin:<name>
      reorder_jitter: false
    splitter:
      batch_size: 100
      split: "1:1"                      # "a:b", [a, b] or link-1 percentage
      mode: split                       # split | duplicate
      proxy_delay_ms: 0.5
    transport: {cc: newreno, pacing: true, recv_buffer: enlarged, ...}
    flows:                              # default depends on topology
      - {name: dc, connectivity: dc, protocol: quic, file_mb: 100}
    sweep: {parameter: batch_size, values: [50, 100, 500]}

Unknown keys raise `ConfigError` naming the dotted key path and line.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .experiments import (
    FAIRNESS_FILE,
    FAIRNESS_WINDOW,
    MB,
    THROUGHPUT_FILE,
    FlowSpec,
    Scenario,
    canonical_parameter,
)
from .netem import BandwidthTrace, LinkConfig
from .pdcp import Mode, SplitterConfig
from .sim import US_PER_MS, US_PER_S
from .transport import DEFAULT_RECV_BUFFER, ENLARGED_RECV_BUFFER, TransportConfig

TOPOLOGIES = ("throughput", "fairness", "custom")
BUILTIN_PREFIX = "builtin:"

TOP_KEYS = {
    "name", "figure", "description", "topology", "seed", "repetitions", "duration_s",
    "t_reordering_ms", "bin_s", "links", "splitter", "transport", "flows", "sweep",
}
LINK_KEYS = {
    "rate_mbps", "rate_bps", "delay_ms", "delay_std_ms", "loss", "queue_limit", "trace", "reorder_jitter",
}
SPLITTER_KEYS = {"batch_size", "split", "mode", "proxy_delay_ms"}
TRANSPORT_KEYS = {
    "cc", "pacing", "pacing_gain", "pacing_burst", "payload_bytes", "overhead_bytes",
    "initial_window", "min_window", "recv_buffer", "drain_rate", "ack_every",
    "max_ack_delay_ms", "packet_threshold", "time_threshold", "tcp_friendly",
}
FLOW_KEYS = {"name", "connectivity", "protocol", "file_mb", "file_bytes", "transport"}
SWEEP_KEYS = {"parameter", "values"}


class ConfigError(ValueError):
    """Invalid scenario document; ``location`` is the dotted key path."""

    def __init__(self, message: str, location: str = "", line: int | None = None, source: str | None = None):
        where = location or "<document>"
        if line is not None:
            where = f"{where} (line {line})"
        if source:
            where = f"{source}: {where}"
        super().__init__(f"{where}: {message}")
        self.location = location
        self.line = line


@dataclass
class SweepSpec:
    parameter: str
    values: list


@dataclass
class ConfigDocument:
    """A parsed document: the scenario plus catalog metadata and an optional sweep."""

    scenario: Scenario
    topology: str = "throughput"
    figure: str | None = None
    description: str | None = None
    sweep: SweepSpec | None = None
    path: Path | None = field(default=None, compare=False)


# --- location tracking ---------------------------------------------------------


def _line_index(text: str) -> dict[str, int]:
    """Map dotted key paths to 1-based source lines."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return {}
    index: dict[str, int] = {}

    def walk(node, path):
        index.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                sub = f"{path}.{key.value}" if path else str(key.value)
                index[sub] = key.start_mark.line + 1
                walk(value, sub)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                walk(item, f"{path}[{i}]")

    if root is not None:
        walk(root, "")
    return index


class _Reader:
    def __init__(self, lines: dict[str, int], source: str | None):
        self.lines = lines
        self.source = source

    def error(self, message: str, path: str) -> ConfigError:
        line = self.lines.get(path)
        return ConfigError(message, path, line, self.source)

    def mapping(self, value: Any, path: str, allowed: set[str]) -> dict:
        if value is None:
            return {}
        if not isinstance(value, dict):
            raise self.error(f"expected a mapping, got {type(value).__name__}", path)
        for key in value:
            if not isinstance(key, str) or key not in allowed:
                hint = difflib.get_close_matches(str(key), sorted(allowed), n=1)
                extra = f"; did you mean {hint[0]!r}?" if hint else ""
                sub = f"{path}.{key}" if path else str(key)
                raise self.error(f"unknown key {key!r}{extra}", sub)
        return value

    def number(self, value: Any, path: str, kind=float, minimum: float | None = None) -> Any:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(f"expected a number, got {value!r}", path)
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise self.error(f"expected an integer, got {value!r}", path)
            value = int(value)
        else:
            value = float(value)
        if minimum is not None and value < minimum:
            raise self.error(f"must be at least {minimum}, got {value!r}", path)
        return value

    def boolean(self, value: Any, path: str) -> bool:
        if not isinstance(value, bool):
            raise self.error(f"expected true or false, got {value!r}", path)
        return value

    def string(self, value: Any, path: str) -> str:
        if not isinstance(value, str):
            raise self.error(f"expected a string, got {value!r}", path)
        return value


def _us(ms: float) -> int:
    return int(round(ms * US_PER_MS))


def _ms(us: int) -> float | int:
    value = us / US_PER_MS
    return int(value) if value.is_integer() else value


def _plain(x: float) -> float | int:
    return int(x) if float(x).is_integer() else x


# --- traces -----------------------------------------------------------------


def builtin_trace_path(name: str) -> Path:
    path = resources.files("dcsim") / "catalog" / "traces" / f"{name}.csv"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled trace named {name!r}")
    return Path(str(path))


def load_trace(ref: str, base_dir: Path | None = None) -> BandwidthTrace:
    """Load a canonical trace from a path or a ``builtin:<name>`` reference."""
    if ref.startswith(BUILTIN_PREFIX):
        path = builtin_trace_path(ref[len(BUILTIN_PREFIX):])
    else:
        path = Path(ref)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
    trace = BandwidthTrace.read_csv(path)
    return replace(trace, source=ref)


# --- parsing ----------------------------------------------------------------


def _parse_link(r: _Reader, raw: Any, path: str, base_dir: Path | None) -> LinkConfig:
    d = r.mapping(raw, path, LINK_KEYS)
    kw: dict[str, Any] = {}
    if "rate_mbps" in d and "rate_bps" in d:
        raise r.error("give rate_mbps or rate_bps, not both", f"{path}.rate_bps")
    if "rate_mbps" in d:
        kw["rate_bps"] = r.number(d["rate_mbps"], f"{path}.rate_mbps") * 1e6
    if "rate_bps" in d:
        kw["rate_bps"] = r.number(d["rate_bps"], f"{path}.rate_bps")
    if "delay_ms" in d:
        kw["delay_mean"] = _us(r.number(d["delay_ms"], f"{path}.delay_ms", minimum=0))
        kw["delay_std"] = int(round(kw["delay_mean"] / 10))
    if "delay_std_ms" in d:
        kw["delay_std"] = _us(r.number(d["delay_std_ms"], f"{path}.delay_std_ms", minimum=0))
    if "loss" in d:
        kw["loss_prob"] = r.number(d["loss"], f"{path}.loss", minimum=0)
    if "queue_limit" in d:
        kw["queue_limit"] = r.number(d["queue_limit"], f"{path}.queue_limit", int, 1)
    if d.get("trace") is not None:
        ref = r.string(d["trace"], f"{path}.trace")
        try:
            kw["trace"] = load_trace(ref, base_dir)
        except (OSError, ValueError) as exc:
            raise r.error(f"cannot load trace: {exc}", f"{path}.trace") from None
    if "reorder_jitter" in d:
        kw["reorder_jitter"] = r.boolean(d["reorder_jitter"], f"{path}.reorder_jitter")
    try:
        return LinkConfig(**kw)
    except ValueError as exc:
        raise r.error(str(exc), path) from None


def _parse_split(r: _Reader, value: Any, path: str) -> tuple[float, float]:
    try:
        if isinstance(value, str) and ":" in value:
            a, b = (float(x) for x in value.split(":"))
        elif isinstance(value, (list, tuple)) and len(value) == 2:
            a, b = (r.number(x, path) for x in value)
        else:
            pct = r.number(value, path)
            if not 0 <= pct <= 100:
                raise ValueError("percentage outside [0, 100]")
            a, b = pct, 100.0 - pct
    except ValueError as exc:
        raise r.error(f"invalid split {value!r}: {exc}", path) from None
    return (float(a), float(b))


def _parse_splitter(r: _Reader, raw: Any) -> SplitterConfig:
    d = r.mapping(raw, "splitter", SPLITTER_KEYS)
    kw: dict[str, Any] = {}
    if "batch_size" in d:
        kw["batch_size"] = r.number(d["batch_size"], "splitter.batch_size", int, 1)
    if "split" in d:
        kw["split"] = _parse_split(r, d["split"], "splitter.split")
    if "mode" in d:
        mode = r.string(d["mode"], "splitter.mode").lower()
        if mode not in (m.value for m in Mode):
            raise r.error(f"unknown mode {mode!r}; expected split or duplicate", "splitter.mode")
        kw["mode"] = Mode(mode)
    if "proxy_delay_ms" in d:
        kw["proxy_delay"] = _us(r.number(d["proxy_delay_ms"], "splitter.proxy_delay_ms", minimum=0))
    try:
        return SplitterConfig(**kw)
    except ValueError as exc:
        raise r.error(str(exc), "splitter") from None


def _parse_buffer(r: _Reader, value: Any, path: str) -> int | None:
    if value is None:
        return None
    if isinstance(value, str):
        key = value.lower()
        named = {"default": DEFAULT_RECV_BUFFER, "enlarged": ENLARGED_RECV_BUFFER, "unbounded": None}
        if key not in named:
            raise r.error(f"expected bytes or one of {', '.join(named)}, got {value!r}", path)
        return named[key]
    return r.number(value, path, int, 1)


def _parse_transport(r: _Reader, raw: Any, path: str, base: TransportConfig) -> TransportConfig:
    d = r.mapping(raw, path, TRANSPORT_KEYS)
    kw: dict[str, Any] = {}
    for key, value in d.items():
        p = f"{path}.{key}"
        if key == "cc":
            kw["cc"] = r.string(value, p)
        elif key in ("pacing", "tcp_friendly"):
            kw[key] = r.boolean(value, p)
        elif key in ("pacing_gain", "time_threshold", "drain_rate"):
            kw[key] = r.number(value, p, minimum=0)
        elif key == "recv_buffer":
            kw[key] = _parse_buffer(r, value, p)
        elif key == "max_ack_delay_ms":
            kw["max_ack_delay"] = _us(r.number(value, p, minimum=0))
        else:
            kw[key] = r.number(value, p, int, 0)
    try:
        return replace(base, **kw)
    except ValueError as exc:
        raise r.error(str(exc), path) from None


def _default_flows(topology: str, transport: TransportConfig) -> list[FlowSpec]:
    if topology == "fairness":
        return [
            FlowSpec("dc", "dc", file_size=FAIRNESS_FILE, transport=replace(transport)),
            FlowSpec("sc1", "sc1", file_size=FAIRNESS_FILE, transport=replace(transport)),
            FlowSpec("sc2", "sc2", file_size=FAIRNESS_FILE, transport=replace(transport)),
        ]
    return [FlowSpec("dc", "dc", file_size=THROUGHPUT_FILE, transport=replace(transport))]


def _parse_flows(r: _Reader, raw: Any, topology: str, transport: TransportConfig) -> list[FlowSpec]:
    if raw is None:
        return _default_flows(topology, transport)
    if not isinstance(raw, list) or not raw:
        raise r.error("expected a non-empty list of flows", "flows")
    default_size = FAIRNESS_FILE if topology == "fairness" else THROUGHPUT_FILE
    flows = []
    for i, item in enumerate(raw):
        path = f"flows[{i}]"
        d = r.mapping(item, path, FLOW_KEYS)
        if "file_mb" in d and "file_bytes" in d:
            raise r.error("give file_mb or file_bytes, not both", f"{path}.file_bytes")
        size = default_size
        if "file_mb" in d:
            size = int(round(r.number(d["file_mb"], f"{path}.file_mb", minimum=0) * MB))
        if "file_bytes" in d:
            size = r.number(d["file_bytes"], f"{path}.file_bytes", int, 1)
        tcfg = _parse_transport(r, d.get("transport"), f"{path}.transport", transport)
        try:
            flows.append(
                FlowSpec(
                    name=r.string(d.get("name", f"flow{i}"), f"{path}.name"),
                    connectivity=r.string(d.get("connectivity", "dc"), f"{path}.connectivity"),
                    protocol=r.string(d.get("protocol", "quic"), f"{path}.protocol"),
                    file_size=size,
                    transport=tcfg,
                )
            )
        except ValueError as exc:
            raise r.error(str(exc), path) from None
    return flows


def _check_topology(r: _Reader, topology: str, flows: list[FlowSpec]) -> None:
    kinds = sorted(f.connectivity for f in flows)
    if topology == "throughput" and kinds != ["dc"]:
        raise r.error("a throughput scenario has exactly one dc flow", "flows")
    if topology == "fairness" and kinds != ["dc", "sc1", "sc2"]:
        raise r.error("a fairness scenario has one dc flow and one flow on each of sc1 and sc2", "flows")


def parse_document(data: Any, *, text: str | None = None, source: str | None = None,
                   base_dir: Path | None = None) -> ConfigDocument:
    """Validate a loaded YAML tree and build the `ConfigDocument`."""
    r = _Reader(_line_index(text) if text else {}, source)
    d = r.mapping(data, "", TOP_KEYS)

    topology = r.string(d.get("topology", "throughput"), "topology").lower()
    if topology not in TOPOLOGIES:
        raise r.error(f"unknown topology {topology!r}; expected one of {', '.join(TOPOLOGIES)}", "topology")

    links_raw = d.get("links")
    if isinstance(links_raw, list):
        if len(links_raw) != 2:
            raise r.error(f"expected exactly two links, got {len(links_raw)}", "links")
        links = [_parse_link(r, item, f"links[{i}]", base_dir) for i, item in enumerate(links_raw)]
    else:
        links = [_parse_link(r, links_raw, "links", base_dir) for _ in range(2)]

    splitter = _parse_splitter(r, d.get("splitter"))
    transport = _parse_transport(r, d.get("transport"), "transport", TransportConfig())
    flows = _parse_flows(r, d.get("flows"), topology, transport)
    if topology != "custom":
        _check_topology(r, topology, flows)

    kw: dict[str, Any] = {}
    if "duration_s" in d:
        if d["duration_s"] is not None:
            kw["duration"] = int(round(r.number(d["duration_s"], "duration_s", minimum=0) * US_PER_S))
        else:
            kw["duration"] = None
    elif topology == "fairness":
        kw["duration"] = FAIRNESS_WINDOW
    if "t_reordering_ms" in d:
        kw["t_reordering"] = _us(r.number(d["t_reordering_ms"], "t_reordering_ms", minimum=0))
    if "bin_s" in d:
        kw["bin_us"] = int(round(r.number(d["bin_s"], "bin_s", minimum=0) * US_PER_S))
    if "seed" in d:
        kw["seed"] = r.number(d["seed"], "seed", int)
    if "repetitions" in d:
        kw["repetitions"] = r.number(d["repetitions"], "repetitions", int, 1)
    name = r.string(d.get("name", topology), "name")
    try:
        scenario = Scenario(name=name, links=links, flows=flows, splitter=splitter, **kw)
    except ValueError as exc:
        raise r.error(str(exc), "") from None

    sweep = None
    if d.get("sweep") is not None:
        s = r.mapping(d["sweep"], "sweep", SWEEP_KEYS)
        if "parameter" not in s or "values" not in s:
            raise r.error("sweep needs both parameter and values", "sweep")
        try:
            param = canonical_parameter(r.string(s["parameter"], "sweep.parameter"))
        except ValueError as exc:
            raise r.error(str(exc), "sweep.parameter") from None
        values = s["values"]
        if not isinstance(values, list) or not values:
            raise r.error("expected a non-empty list", "sweep.values")
        sweep = SweepSpec(param, values)

    return ConfigDocument(
        scenario=scenario,
        topology=topology,
        figure=d.get("figure"),
        description=d.get("description"),
        sweep=sweep,
    )


def loads(text: str, source: str | None = None, base_dir: Path | None = None) -> ConfigDocument:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"not valid YAML: {getattr(exc, 'problem', exc)}", "", line, source) from None
    return parse_document(data, text=text, source=source, base_dir=base_dir)


def load(path: str | Path) -> ConfigDocument:
    """Read a document from a file path or a ``catalog:<name>`` reference."""
    ref = str(path)
    if ref.startswith("catalog:"):
        from .catalog import catalog_path

        path = catalog_path(ref[len("catalog:"):])
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", "", None, str(path)) from None
    doc = loads(text, source=str(path), base_dir=path.parent)
    doc.path = path
    return doc


# --- serialization ------------------------------------------------------------


def _link_dict(link: LinkConfig) -> dict:
    out: dict[str, Any] = {}
    mbps = link.rate_bps / 1e6
    if mbps * 1e6 == link.rate_bps:
        out["rate_mbps"] = _plain(mbps)
    else:
        out["rate_bps"] = link.rate_bps
    out["delay_ms"] = _ms(link.delay_mean)
    out["delay_std_ms"] = _ms(link.delay_std)
    out["loss"] = link.loss_prob
    out["queue_limit"] = link.queue_limit
    if link.trace is not None:
        if not link.trace.source:
            raise ValueError("cannot serialize a trace that was not loaded from a file")
        out["trace"] = link.trace.source
    out["reorder_jitter"] = link.reorder_jitter
    return out


def _transport_dict(t: TransportConfig) -> dict:
    out: dict[str, Any] = {}
    for f in fields(TransportConfig):
        value = getattr(t, f.name)
        if f.name == "max_ack_delay":
            out["max_ack_delay_ms"] = _ms(value)
        elif f.name == "recv_buffer":
            out["recv_buffer"] = "unbounded" if value is None else value
        else:
            out[f.name] = value
    return out


def to_document(scenario: Scenario, topology: str | None = None, figure: str | None = None,
                description: str | None = None, sweep: SweepSpec | None = None) -> dict:
    """Serialize ``scenario`` to a plain tree that `parse_document` maps back to an equal scenario."""
    if topology is None:
        kinds = sorted(f.connectivity for f in scenario.flows)
        topology = {("dc",): "throughput", ("dc", "sc1", "sc2"): "fairness"}.get(tuple(kinds), "custom")
    doc: dict[str, Any] = {"name": scenario.name, "topology": topology}
    if figure:
        doc["figure"] = figure
    if description:
        doc["description"] = description
    doc["seed"] = scenario.seed
    doc["repetitions"] = scenario.repetitions
    doc["duration_s"] = None if scenario.duration is None else _plain(scenario.duration / US_PER_S)
    doc["t_reordering_ms"] = _ms(scenario.t_reordering)
    doc["bin_s"] = _plain(scenario.bin_us / US_PER_S)
    doc["links"] = [_link_dict(link) for link in scenario.links]
    sp = scenario.splitter
    doc["splitter"] = {
        "batch_size": sp.batch_size,
        "split": [_plain(sp.split[0]), _plain(sp.split[1])],
        "mode": sp.mode.value,
        "proxy_delay_ms": _ms(sp.proxy_delay),
    }
    flows = []
    for f in scenario.flows:
        entry: dict[str, Any] = {"name": f.name, "connectivity": f.connectivity, "protocol": f.protocol}
        if f.file_size % MB == 0:
            entry["file_mb"] = f.file_size // MB
        else:
            entry["file_bytes"] = f.file_size
        entry["transport"] = _transport_dict(f.transport)
        flows.append(entry)
    doc["flows"] = flows
    if sweep is not None:
        doc["sweep"] = {"parameter": sweep.parameter, "values": list(sweep.values)}
    return doc


def dumps(scenario: Scenario, **kwargs) -> str:
    return yaml.safe_dump(to_document(scenario, **kwargs), sort_keys=False)
