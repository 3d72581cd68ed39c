"""Scenario files: a line-oriented format wiring a whole simulation.

A scenario declares the physical topology, the cells and user
populations feeding each radio unit, the timing sources, the session
requests, and the engine knobs, in five sections:

    [topology]
    node = rrh1 rrh            # name kind (rrh|bbu|switch|timing)
    link = rrh1 hub cap=10e9 delay=5e-6 jitter=1e-9 class=fiber

    [cells]
    cell = rrh1 scheme=modulation_bits role=dbs
    ues = rrh1 count=10 mean_on=40 mean_off=40 demand=10 mcs_step=0.3
    control = rrh1 pdcch=144 prach_period=10 prach_res=144

    [sync]
    source = bbu1 quality=0 offset_ppb=0
    regen = 0.5

    [sessions]
    session = dl pattern=p2p src=rrh1 dst=bbu1 class=2 mean=1e8 \
              peak=2e8 bound=1e-3 traffic=trace
    # patterns: p2p, aggregation (srcs=a,b,c), multi_bbu (dsts=x,y),
    # bbu_to_bbu; traffic: trace (from the ingress cell) or cbr rate=...

    [engine]
    scheduler = strict_priority
    horizon = 0.1
    subframes = 100
    seed = 1

Unknown keys, bad values, and dangling node references are rejected
with the offending line number. Parsing a rendered scenario yields an
equal Scenario value.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

from .control import Controller, Infeasible, SessionRequest
from .engine import (
    N_CLASSES,
    CircuitFeed,
    RegulatorPolicy,
    Scheduler,
    SwitchConfig,
    World,
    run,
)
from .metrics import assemble_report, overhead_sweep, write_report_csvs, write_sweep_csv
from .sync import ClockSource, build_sync_tree, propagate_sync, write_sync_csv
from .topology import (
    AggregationToOneBbu,
    BbuToBbu,
    LogicalPattern,
    Node,
    NodeKind,
    PhysLink,
    PhysicalTopology,
    PointToPoint,
    RrhToMultiBbu,
)
from .traffic import (
    CellConfig,
    ClassicalIQ,
    ControlSchedule,
    FilteredIQ,
    ModulationBits,
    PduLevel,
    ReExtraction,
    SplitScheme,
    TrafficTrace,
    UeProfile,
    constant_trace,
    generate_trace,
    scheme_name,
    write_trace_csv,
)


class ScenarioError(Exception):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


_KINDS = {
    "rrh": NodeKind.RRH,
    "bbu": NodeKind.BBU,
    "switch": NodeKind.FH_SWITCH,
    "timing": NodeKind.TIMING_SOURCE,
}
_SCHEDULERS = {s.value: s for s in Scheduler}


@dataclass(frozen=True)
class NodeSpec:
    name: str
    kind: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class LinkSpec:
    a: str
    b: str
    capacity: float = 10e9
    delay: float = 5e-6
    jitter: float = 1e-9
    link_class: str = "fiber"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class UeSpec:
    count: int = 10
    mean_on: float = 40.0
    mean_off: float = 40.0
    demand: int = 10
    mcs_step: float = 0.3
    mcs_init: int | None = None


@dataclass(frozen=True)
class CellSpec:
    node: str
    scheme: SplitScheme = ClassicalIQ()
    role: str = ""
    cell: CellConfig = CellConfig()
    ues: UeSpec = UeSpec()
    control: ControlSchedule = ControlSchedule(0, 10, 0)
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SourceSpec:
    node: str
    quality: int = 0
    offset_ppb: float = 0.0
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SessionSpec:
    name: str
    pattern: str  # p2p | aggregation | multi_bbu | bbu_to_bbu
    srcs: tuple[str, ...]
    dsts: tuple[str, ...]
    latency_class: int
    mean_rate: float
    peak_rate: float
    latency_bound: float
    scheme: SplitScheme | None = None
    traffic: str = "trace"  # trace | cbr
    cbr_rate: float | None = None
    frame: int | None = None
    timeout: float | None = None
    ue: int | None = None
    optional: bool = False
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class EngineSpec:
    scheduler: str = "strict_priority"
    wrr_weights: tuple[tuple[int, int], ...] = ()  # sparse (class, weight) pairs
    queue_bytes: int = 256 * 1024
    input_buffer_bytes: int = 256 * 1024
    header_proc: float = 1e-6
    frame_bytes: int = 1000
    frame_timeout: float = 1e-3
    horizon: float = 0.1
    subframes: int = 100
    seed: int = 1


@dataclass(frozen=True)
class Scenario:
    nodes: tuple[NodeSpec, ...]
    links: tuple[LinkSpec, ...]
    cells: tuple[CellSpec, ...]
    sources: tuple[SourceSpec, ...]
    regen_factor: float
    sessions: tuple[SessionSpec, ...]
    engine: EngineSpec
    name: str = field(default="", compare=False)


def _split_attrs(line_no: int, tokens: list[str], positional: int, allowed: set[str]):
    if len(tokens) < positional:
        raise ScenarioError(line_no, f"expected at least {positional} positional values")
    attrs = {}
    for token in tokens[positional:]:
        if "=" not in token:
            raise ScenarioError(line_no, f"expected key=value, got {token!r}")
        key, _, value = token.partition("=")
        if key not in allowed:
            raise ScenarioError(line_no, f"unknown key {key!r} (allowed: {sorted(allowed)})")
        if key in attrs:
            raise ScenarioError(line_no, f"duplicate key {key!r}")
        attrs[key] = value
    return tokens[:positional], attrs


def _number(line_no: int, key: str, raw: str) -> float:
    try:
        if raw == "inf":
            return math.inf
        return float(raw)
    except ValueError:
        raise ScenarioError(line_no, f"{key}: not a number: {raw!r}") from None


def _integer(line_no: int, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(line_no, f"{key}: not an integer: {raw!r}") from None


def _boolean(line_no: int, key: str, raw: str) -> bool:
    if raw in ("true", "yes", "1"):
        return True
    if raw in ("false", "no", "0"):
        return False
    raise ScenarioError(line_no, f"{key}: expected true/false, got {raw!r}")


def _parse_scheme(line_no: int, name: str, attrs: dict) -> SplitScheme:
    if name == "classical_iq":
        return ClassicalIQ()
    if name == "filtered_iq":
        return FilteredIQ(filter_factor=_number(line_no, "filter", attrs.pop("filter", "0.5")))
    if name == "re_extraction":
        return ReExtraction()
    if name == "modulation_bits":
        return ModulationBits(n_layers=_integer(line_no, "layers", attrs.pop("layers", "1")))
    if name == "pdu_level":
        return PduLevel(code_rate_applied=_boolean(line_no, "coded", attrs.pop("coded", "true")))
    raise ScenarioError(line_no, f"unknown split scheme {name!r}")


_CELL_KEYS = {
    "scheme",
    "role",
    "filter",
    "layers",
    "coded",
    "bandwidth",
    "sampling",
    "antennas",
    "iq_bits",
    "prb",
    "res_per_prb",
    "subframe",
    "overhead",
    "compression",
}
_SESSION_KEYS = {
    "pattern",
    "src",
    "srcs",
    "dst",
    "dsts",
    "class",
    "mean",
    "peak",
    "bound",
    "scheme",
    "filter",
    "layers",
    "coded",
    "traffic",
    "rate",
    "frame",
    "timeout",
    "ue",
    "optional",
}


def parse_scenario(text: str, name: str = "") -> Scenario:
    """Parse scenario text into a validated Scenario, or raise ScenarioError."""
    nodes: list[NodeSpec] = []
    links: list[LinkSpec] = []
    cells: list[CellSpec] = []
    cell_extras: dict[str, dict] = {}  # node -> {"ues": ..., "control": ...}
    sources: list[SourceSpec] = []
    regen_factor = 1.0
    sessions: list[SessionSpec] = []
    engine_attrs: dict[str, tuple[int, str]] = {}
    section = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError(line_no, f"malformed section header {line!r}")
            section = line[1:-1]
            if section not in ("topology", "cells", "sync", "sessions", "engine"):
                raise ScenarioError(line_no, f"unknown section [{section}]")
            continue
        if section is None:
            raise ScenarioError(line_no, "content before the first section header")
        if "=" not in line:
            raise ScenarioError(line_no, f"expected key = value, got {line!r}")
        key, _, rest = line.partition("=")
        key = key.strip()
        tokens = rest.strip().split()

        if section == "topology":
            if key == "node":
                (node_name, kind), _ = _split_attrs(line_no, tokens, 2, set())
                if kind not in _KINDS:
                    raise ScenarioError(line_no, f"unknown node kind {kind!r}")
                if any(n.name == node_name for n in nodes):
                    raise ScenarioError(line_no, f"duplicate node {node_name!r}")
                nodes.append(NodeSpec(node_name, kind, line_no))
            elif key == "link":
                (a, b), attrs = _split_attrs(
                    line_no, tokens, 2, {"cap", "delay", "jitter", "class"}
                )
                links.append(
                    LinkSpec(
                        a,
                        b,
                        capacity=_number(line_no, "cap", attrs.get("cap", "10e9")),
                        delay=_number(line_no, "delay", attrs.get("delay", "5e-6")),
                        jitter=_number(line_no, "jitter", attrs.get("jitter", "1e-9")),
                        link_class=attrs.get("class", "fiber"),
                        line=line_no,
                    )
                )
            else:
                raise ScenarioError(line_no, f"unknown key {key!r} in [topology]")

        elif section == "cells":
            if key == "cell":
                (node_name,), attrs = _split_attrs(line_no, tokens, 1, _CELL_KEYS)
                scheme = _parse_scheme(line_no, attrs.pop("scheme", "classical_iq"), attrs)
                defaults = CellConfig()
                cell = CellConfig(
                    radio_bandwidth=_number(line_no, "bandwidth", attrs.get("bandwidth", repr(defaults.radio_bandwidth))),
                    sampling_rate=_number(line_no, "sampling", attrs.get("sampling", repr(defaults.sampling_rate))),
                    n_antennas=_integer(line_no, "antennas", attrs.get("antennas", str(defaults.n_antennas))),
                    iq_bitwidth=_integer(line_no, "iq_bits", attrs.get("iq_bits", str(defaults.iq_bitwidth))),
                    n_prb=_integer(line_no, "prb", attrs.get("prb", str(defaults.n_prb))),
                    res_per_prb=_integer(line_no, "res_per_prb", attrs.get("res_per_prb", str(defaults.res_per_prb))),
                    subframe_duration=_number(line_no, "subframe", attrs.get("subframe", repr(defaults.subframe_duration))),
                    transport_overhead_factor=_number(line_no, "overhead", attrs.get("overhead", repr(defaults.transport_overhead_factor))),
                    compression_factor=_number(line_no, "compression", attrs.get("compression", repr(defaults.compression_factor))),
                )
                if any(c.node == node_name for c in cells):
                    raise ScenarioError(line_no, f"duplicate cell for node {node_name!r}")
                cells.append(
                    CellSpec(node=node_name, scheme=scheme, role=attrs.get("role", ""), cell=cell, line=line_no)
                )
            elif key == "ues":
                (node_name,), attrs = _split_attrs(
                    line_no, tokens, 1, {"count", "mean_on", "mean_off", "demand", "mcs_step", "mcs_init"}
                )
                cell_extras.setdefault(node_name, {})["ues"] = (
                    line_no,
                    UeSpec(
                        count=_integer(line_no, "count", attrs.get("count", "10")),
                        mean_on=_number(line_no, "mean_on", attrs.get("mean_on", "40")),
                        mean_off=_number(line_no, "mean_off", attrs.get("mean_off", "40")),
                        demand=_integer(line_no, "demand", attrs.get("demand", "10")),
                        mcs_step=_number(line_no, "mcs_step", attrs.get("mcs_step", "0.3")),
                        mcs_init=_integer(line_no, "mcs_init", attrs["mcs_init"]) if "mcs_init" in attrs else None,
                    ),
                )
            elif key == "control":
                (node_name,), attrs = _split_attrs(
                    line_no, tokens, 1, {"pdcch", "prach_period", "prach_res"}
                )
                cell_extras.setdefault(node_name, {})["control"] = (
                    line_no,
                    ControlSchedule(
                        pdcch_res_per_subframe=_integer(line_no, "pdcch", attrs.get("pdcch", "0")),
                        prach_period=_integer(line_no, "prach_period", attrs.get("prach_period", "10")),
                        prach_res=_integer(line_no, "prach_res", attrs.get("prach_res", "0")),
                    ),
                )
            else:
                raise ScenarioError(line_no, f"unknown key {key!r} in [cells]")

        elif section == "sync":
            if key == "source":
                (node_name,), attrs = _split_attrs(line_no, tokens, 1, {"quality", "offset_ppb"})
                sources.append(
                    SourceSpec(
                        node=node_name,
                        quality=_integer(line_no, "quality", attrs.get("quality", "0")),
                        offset_ppb=_number(line_no, "offset_ppb", attrs.get("offset_ppb", "0")),
                        line=line_no,
                    )
                )
            elif key == "regen":
                regen_factor = _number(line_no, "regen", tokens[0] if tokens else "")
            else:
                raise ScenarioError(line_no, f"unknown key {key!r} in [sync]")

        elif section == "sessions":
            if key != "session":
                raise ScenarioError(line_no, f"unknown key {key!r} in [sessions]")
            (session_name,), attrs = _split_attrs(line_no, tokens, 1, _SESSION_KEYS)
            if any(s.name == session_name for s in sessions):
                raise ScenarioError(line_no, f"duplicate session {session_name!r}")
            pattern = attrs.get("pattern", "p2p")
            if pattern not in ("p2p", "aggregation", "multi_bbu", "bbu_to_bbu"):
                raise ScenarioError(line_no, f"unknown pattern {pattern!r}")
            srcs = tuple(attrs["srcs"].split(",")) if "srcs" in attrs else (
                (attrs["src"],) if "src" in attrs else ()
            )
            dsts = tuple(attrs["dsts"].split(",")) if "dsts" in attrs else (
                (attrs["dst"],) if "dst" in attrs else ()
            )
            if not srcs or not dsts:
                raise ScenarioError(line_no, "session needs src/srcs and dst/dsts")
            scheme = (
                _parse_scheme(line_no, attrs["scheme"], attrs) if "scheme" in attrs else None
            )
            traffic = attrs.get("traffic", "trace")
            if traffic not in ("trace", "cbr"):
                raise ScenarioError(line_no, f"unknown traffic kind {traffic!r}")
            if traffic == "cbr" and "rate" not in attrs:
                raise ScenarioError(line_no, "cbr traffic needs rate=")
            sessions.append(
                SessionSpec(
                    name=session_name,
                    pattern=pattern,
                    srcs=srcs,
                    dsts=dsts,
                    latency_class=_integer(line_no, "class", attrs.get("class", "7")),
                    mean_rate=_number(line_no, "mean", attrs["mean"]) if "mean" in attrs else None,
                    peak_rate=_number(line_no, "peak", attrs["peak"]) if "peak" in attrs else None,
                    latency_bound=_number(line_no, "bound", attrs.get("bound", "1e-2")),
                    scheme=scheme,
                    traffic=traffic,
                    cbr_rate=_number(line_no, "rate", attrs["rate"]) if "rate" in attrs else None,
                    frame=_integer(line_no, "frame", attrs["frame"]) if "frame" in attrs else None,
                    timeout=_number(line_no, "timeout", attrs["timeout"]) if "timeout" in attrs else None,
                    ue=_integer(line_no, "ue", attrs["ue"]) if "ue" in attrs else None,
                    optional=_boolean(line_no, "optional", attrs.get("optional", "false")),
                    line=line_no,
                )
            )
            if sessions[-1].mean_rate is None or sessions[-1].peak_rate is None:
                raise ScenarioError(line_no, "session needs mean= and peak=")

        elif section == "engine":
            allowed = {
                "scheduler",
                "wrr_weights",
                "queue_bytes",
                "input_buffer_bytes",
                "header_proc",
                "frame_bytes",
                "frame_timeout",
                "horizon",
                "subframes",
                "seed",
            }
            if key not in allowed:
                raise ScenarioError(line_no, f"unknown key {key!r} in [engine]")
            if key in engine_attrs:
                raise ScenarioError(line_no, f"duplicate engine key {key!r}")
            engine_attrs[key] = (line_no, rest.strip())

    defaults = EngineSpec()

    def engine_value(key: str, default):
        if key not in engine_attrs:
            return default
        line_no, raw = engine_attrs[key]
        if key == "scheduler":
            if raw not in _SCHEDULERS:
                raise ScenarioError(line_no, f"unknown scheduler {raw!r}")
            return raw
        if key == "wrr_weights":
            pairs = []
            for chunk in raw.split(","):
                cls, _, weight = chunk.partition(":")
                pair = (
                    _integer(line_no, "wrr class", cls.strip()),
                    _integer(line_no, "wrr weight", weight.strip()),
                )
                if not 0 <= pair[0] < N_CLASSES or pair[1] < 1:
                    raise ScenarioError(line_no, f"bad wrr pair {chunk!r}")
                pairs.append(pair)
            return tuple(pairs)
        if key in ("queue_bytes", "input_buffer_bytes", "frame_bytes", "subframes", "seed"):
            return _integer(line_no, key, raw)
        return _number(line_no, key, raw)

    engine = EngineSpec(
        scheduler=engine_value("scheduler", defaults.scheduler),
        wrr_weights=engine_value("wrr_weights", defaults.wrr_weights),
        queue_bytes=engine_value("queue_bytes", defaults.queue_bytes),
        input_buffer_bytes=engine_value("input_buffer_bytes", defaults.input_buffer_bytes),
        header_proc=engine_value("header_proc", defaults.header_proc),
        frame_bytes=engine_value("frame_bytes", defaults.frame_bytes),
        frame_timeout=engine_value("frame_timeout", defaults.frame_timeout),
        horizon=engine_value("horizon", defaults.horizon),
        subframes=engine_value("subframes", defaults.subframes),
        seed=engine_value("seed", defaults.seed),
    )

    # attach ue/control lines to their cells
    final_cells = []
    for cell in cells:
        extras = cell_extras.pop(cell.node, {})
        if "ues" in extras:
            cell = replace(cell, ues=extras["ues"][1])
        if "control" in extras:
            cell = replace(cell, control=extras["control"][1])
        final_cells.append(cell)
    for node_name, extras in cell_extras.items():
        stray_line = next(iter(extras.values()))[0]
        raise ScenarioError(stray_line, f"ues/control for node {node_name!r} without a cell line")

    scenario = Scenario(
        nodes=tuple(nodes),
        links=tuple(links),
        cells=tuple(final_cells),
        sources=tuple(sources),
        regen_factor=regen_factor,
        sessions=tuple(sessions),
        engine=engine,
        name=name,
    )
    _validate(scenario)
    return scenario


def _validate(scenario: Scenario) -> None:
    names = {n.name for n in scenario.nodes}
    kind_of = {n.name: n.kind for n in scenario.nodes}
    if not scenario.nodes:
        raise ScenarioError(0, "no nodes declared")
    for link in scenario.links:
        for end in (link.a, link.b):
            if end not in names:
                raise ScenarioError(link.line, f"link references undeclared node {end!r}")
    for cell in scenario.cells:
        if cell.node not in names:
            raise ScenarioError(cell.line, f"cell references undeclared node {cell.node!r}")
        if kind_of[cell.node] != "rrh":
            raise ScenarioError(cell.line, f"cells attach to rrh nodes, {cell.node!r} is {kind_of[cell.node]}")
    for source in scenario.sources:
        if source.node not in names:
            raise ScenarioError(source.line, f"sync source references undeclared node {source.node!r}")
    cells_by_node = {c.node: c for c in scenario.cells}
    for session in scenario.sessions:
        for end in session.srcs + session.dsts:
            if end not in names:
                raise ScenarioError(session.line, f"session references undeclared node {end!r}")
        if session.pattern in ("p2p", "multi_bbu", "aggregation"):
            expected_src, expected_dst = "rrh", "bbu"
        else:
            expected_src, expected_dst = "bbu", "bbu"
        for src in session.srcs:
            if kind_of[src] != expected_src:
                raise ScenarioError(session.line, f"{session.pattern} source {src!r} must be {expected_src}")
        for dst in session.dsts:
            if kind_of[dst] != expected_dst:
                raise ScenarioError(session.line, f"{session.pattern} destination {dst!r} must be {expected_dst}")
        if session.pattern in ("p2p", "bbu_to_bbu") and (len(session.srcs), len(session.dsts)) != (1, 1):
            raise ScenarioError(session.line, f"{session.pattern} takes one src and one dst")
        if session.pattern == "aggregation" and len(session.dsts) != 1:
            raise ScenarioError(session.line, "aggregation takes one dst")
        if session.pattern == "multi_bbu" and len(session.srcs) != 1:
            raise ScenarioError(session.line, "multi_bbu takes one src")
        if session.traffic == "trace":
            for src in session.srcs:
                if src not in cells_by_node:
                    raise ScenarioError(
                        session.line, f"trace traffic needs a cell at {src!r} (or use traffic=cbr)"
                    )


def _render_scheme(scheme: SplitScheme) -> str:
    parts = [f"scheme={scheme_name(scheme)}"]
    if isinstance(scheme, FilteredIQ):
        parts.append(f"filter={scheme.filter_factor!r}")
    elif isinstance(scheme, ModulationBits) and scheme.n_layers != 1:
        parts.append(f"layers={scheme.n_layers}")
    elif isinstance(scheme, PduLevel) and not scheme.code_rate_applied:
        parts.append("coded=false")
    return " ".join(parts)


def render_scenario(scenario: Scenario) -> str:
    """Canonical text form; parsing it back yields an equal Scenario."""
    out = ["[topology]"]
    for node in scenario.nodes:
        out.append(f"node = {node.name} {node.kind}")
    for link in scenario.links:
        out.append(
            f"link = {link.a} {link.b} cap={link.capacity!r} delay={link.delay!r} "
            f"jitter={link.jitter!r} class={link.link_class}"
        )
    if scenario.cells:
        out.append("")
        out.append("[cells]")
        for cell in scenario.cells:
            cfg = cell.cell
            role = f" role={cell.role}" if cell.role else ""
            out.append(
                f"cell = {cell.node} {_render_scheme(cell.scheme)}{role} "
                f"bandwidth={cfg.radio_bandwidth!r} sampling={cfg.sampling_rate!r} "
                f"antennas={cfg.n_antennas} iq_bits={cfg.iq_bitwidth} prb={cfg.n_prb} "
                f"res_per_prb={cfg.res_per_prb} subframe={cfg.subframe_duration!r} "
                f"overhead={cfg.transport_overhead_factor!r} compression={cfg.compression_factor!r}"
            )
            ues = cell.ues
            init = f" mcs_init={ues.mcs_init}" if ues.mcs_init is not None else ""
            out.append(
                f"ues = {cell.node} count={ues.count} mean_on={ues.mean_on!r} "
                f"mean_off={ues.mean_off!r} demand={ues.demand} mcs_step={ues.mcs_step!r}{init}"
            )
            ctl = cell.control
            out.append(
                f"control = {cell.node} pdcch={ctl.pdcch_res_per_subframe} "
                f"prach_period={ctl.prach_period} prach_res={ctl.prach_res}"
            )
    if scenario.sources or scenario.regen_factor != 1.0:
        out.append("")
        out.append("[sync]")
        for source in scenario.sources:
            out.append(
                f"source = {source.node} quality={source.quality} offset_ppb={source.offset_ppb!r}"
            )
        out.append(f"regen = {scenario.regen_factor!r}")
    if scenario.sessions:
        out.append("")
        out.append("[sessions]")
        for s in scenario.sessions:
            bits = [f"session = {s.name} pattern={s.pattern}"]
            bits.append(f"srcs={','.join(s.srcs)}" if len(s.srcs) > 1 else f"src={s.srcs[0]}")
            bits.append(f"dsts={','.join(s.dsts)}" if len(s.dsts) > 1 else f"dst={s.dsts[0]}")
            bits.append(f"class={s.latency_class}")
            bits.append(f"mean={s.mean_rate!r} peak={s.peak_rate!r} bound={s.latency_bound!r}")
            if s.scheme is not None:
                bits.append(_render_scheme(s.scheme))
            bits.append(f"traffic={s.traffic}")
            if s.cbr_rate is not None:
                bits.append(f"rate={s.cbr_rate!r}")
            if s.frame is not None:
                bits.append(f"frame={s.frame}")
            if s.timeout is not None:
                bits.append(f"timeout={s.timeout!r}")
            if s.ue is not None:
                bits.append(f"ue={s.ue}")
            if s.optional:
                bits.append("optional=true")
            out.append(" ".join(bits))
    out.append("")
    out.append("[engine]")
    e = scenario.engine
    out.append(f"scheduler = {e.scheduler}")
    if e.wrr_weights:
        out.append("wrr_weights = " + ",".join(f"{c}:{w}" for c, w in e.wrr_weights))
    out.append(f"queue_bytes = {e.queue_bytes}")
    out.append(f"input_buffer_bytes = {e.input_buffer_bytes}")
    out.append(f"header_proc = {e.header_proc!r}")
    out.append(f"frame_bytes = {e.frame_bytes}")
    out.append(f"frame_timeout = {e.frame_timeout!r}")
    out.append(f"horizon = {e.horizon!r}")
    out.append(f"subframes = {e.subframes}")
    out.append(f"seed = {e.seed}")
    out.append("")
    return "\n".join(out)


@dataclass
class BuiltScenario:
    """Everything run_scenario assembles before pressing go."""

    scenario: Scenario
    topology: PhysicalTopology
    node_id: dict[str, int]
    controller: Controller
    world: World
    traces: dict[str, TrafficTrace]  # per cell node name
    bounds: dict[str, float]
    infeasible: list[tuple[str, str]]  # (session name, cause)


def build_scenario(
    scenario: Scenario,
    seed: int | None = None,
    subframes: int | None = None,
    scheduler: str | None = None,
) -> BuiltScenario:
    """Materialize topology, control state, traces, and the engine world.

    Optional overrides replace the scenario's seed, trace length, and
    scheduler (the latter for controlled A/B comparisons).
    """
    seed = scenario.engine.seed if seed is None else seed
    subframes = scenario.engine.subframes if subframes is None else subframes
    engine_spec = scenario.engine
    if scheduler is not None:
        engine_spec = replace(engine_spec, scheduler=scheduler)

    node_id = {spec.name: index for index, spec in enumerate(scenario.nodes)}
    port_counter = {spec.name: 0 for spec in scenario.nodes}
    links = []
    for spec in scenario.links:
        pa, pb = port_counter[spec.a], port_counter[spec.b]
        port_counter[spec.a] += 1
        port_counter[spec.b] += 1
        links.append(
            PhysLink(
                node_a=node_id[spec.a],
                port_a=pa,
                node_b=node_id[spec.b],
                port_b=pb,
                capacity=spec.capacity,
                propagation_delay=spec.delay,
                jitter_std=spec.jitter,
                link_class=spec.link_class,
            )
        )
    nodes = [
        Node(
            id=node_id[spec.name],
            kind=_KINDS[spec.kind],
            ports=max(port_counter[spec.name], 2 if spec.kind == "switch" else 1),
            name=spec.name,
        )
        for spec in scenario.nodes
    ]
    topology = PhysicalTopology(nodes, links)

    weights = [1] * N_CLASSES
    for cls, weight in engine_spec.wrr_weights:
        weights[cls] = weight
    switch_config = SwitchConfig(
        scheduler=_SCHEDULERS[engine_spec.scheduler],
        wrr_weights=tuple(weights),
        queue_bytes=engine_spec.queue_bytes,
        input_buffer_bytes=engine_spec.input_buffer_bytes,
        header_processing_delay=engine_spec.header_proc,
    )
    controller = Controller(
        topology,
        {n.id: switch_config for n in nodes if n.kind is NodeKind.FH_SWITCH},
    )

    # Traffic traces, one per cell, seeded per declaration order.
    traces: dict[str, TrafficTrace] = {}
    for index, cell in enumerate(scenario.cells):
        profiles = [
            UeProfile(
                ue_id=u,
                mean_on=cell.ues.mean_on,
                mean_off=cell.ues.mean_off,
                demand_prbs=cell.ues.demand,
                mcs_step_prob=cell.ues.mcs_step,
                mcs_init=cell.ues.mcs_init,
            )
            for u in range(cell.ues.count)
        ]
        traces[cell.node] = generate_trace(
            cell.cell, cell.scheme, profiles, cell.control, subframes, seed + index
        )

    infeasible: list[tuple[str, str]] = []
    bounds: dict[str, float] = {}
    feeds: list[CircuitFeed] = []
    cells_by_node = {c.node: c for c in scenario.cells}
    for spec in scenario.sessions:
        srcs = tuple(node_id[s] for s in spec.srcs)
        dsts = tuple(node_id[d] for d in spec.dsts)
        if spec.pattern == "p2p":
            shape = PointToPoint(srcs[0], dsts[0])
        elif spec.pattern == "aggregation":
            shape = AggregationToOneBbu(srcs, dsts[0])
        elif spec.pattern == "multi_bbu":
            shape = RrhToMultiBbu(srcs[0], dsts)
        else:
            shape = BbuToBbu(srcs[0], dsts[0])
        policy = RegulatorPolicy(
            max_frame_bytes=spec.frame if spec.frame is not None else engine_spec.frame_bytes,
            frame_timeout=spec.timeout if spec.timeout is not None else engine_spec.frame_timeout,
        )
        request = SessionRequest(
            pattern=LogicalPattern(shape, ue_id=spec.ue),
            mean_rate=spec.mean_rate,
            peak_rate=spec.peak_rate,
            latency_class=spec.latency_class,
            latency_bound=spec.latency_bound,
            scheme=spec.scheme,
            policy=policy,
        )
        try:
            session = controller.setup(request, name=spec.name)
        except Infeasible as exc:
            infeasible.append((spec.name, exc.cause))
            continue
        bounds[spec.name] = spec.latency_bound
        if spec.pattern == "multi_bbu":
            # one regulator per distinct ingress edge of the tree (normally one)
            seen_edges = set()
            ingress_circuits = []
            for circuit in session.circuits:
                edge = (circuit.ingress_port, circuit.ingress_label)
                if edge not in seen_edges:
                    seen_edges.add(edge)
                    ingress_circuits.append(circuit)
        else:
            ingress_circuits = session.circuits
        for circuit in ingress_circuits:
            src_name = scenario.nodes[circuit.ingress].name
            if spec.traffic == "cbr":
                cell_cfg = (
                    cells_by_node[src_name].cell if src_name in cells_by_node else CellConfig()
                )
                trace = constant_trace(cell_cfg, spec.scheme or ClassicalIQ(), spec.cbr_rate, subframes)
            else:
                trace = traces[src_name]
            feeds.append(
                CircuitFeed(
                    session_id=session.id,
                    circuit_id=circuit.circuit_id,
                    ingress_node=circuit.ingress,
                    ingress_port=circuit.ingress_port,
                    label=circuit.ingress_label,
                    latency_class=spec.latency_class,
                    policy=policy,
                    volumes=list(trace.volumes),
                    subframe_duration=trace.cell.subframe_duration,
                )
            )

    world = World(
        topology=topology,
        switches=controller.switches,
        circuits=feeds,
        egress=dict(controller.egress),
        host_scheduler=_SCHEDULERS[engine_spec.scheduler],
        host_queue_bytes=engine_spec.queue_bytes,
        wrr_weights=tuple(weights),
    )
    return BuiltScenario(
        scenario=replace(scenario, engine=engine_spec),
        topology=topology,
        node_id=node_id,
        controller=controller,
        world=world,
        traces=traces,
        bounds=bounds,
        infeasible=infeasible,
    )


def run_scenario(
    scenario: Scenario,
    out_dir: str,
    seed: int | None = None,
    subframes: int | None = None,
    sweep: list[int] | None = None,
) -> int:
    """Build, simulate, and export every report table to out_dir.

    Returns the process exit status: 0 on success, 1 when a mandatory
    session is infeasible (reports for the rest are still written).
    Identical inputs produce byte-identical files.
    """
    built = build_scenario(scenario, seed=seed, subframes=subframes)
    os.makedirs(out_dir, exist_ok=True)

    tree = build_sync_tree(
        built.topology,
        [
            ClockSource(
                node=built.node_id[s.node], quality_rank=s.quality, frequency_offset=s.offset_ppb
            )
            for s in scenario.sources
        ],
    )
    status = propagate_sync(tree, built.topology, scenario.regen_factor)
    write_sync_csv(tree, status, os.path.join(out_dir, "sync.csv"))

    for node_name, trace in built.traces.items():
        write_trace_csv(trace, os.path.join(out_dir, f"trace_{node_name}.csv"))

    horizon = built.scenario.engine.horizon
    result = run(built.world, horizon, built.scenario.engine.seed)
    report = assemble_report(result, built.bounds)
    write_report_csvs(report, out_dir)
    built.controller.write_log_csv(os.path.join(out_dir, "control_log.csv"))

    if sweep:
        rows = overhead_sweep(built.world, sweep, horizon, built.scenario.engine.seed)
        write_sweep_csv(rows, os.path.join(out_dir, "sweep.csv"))

    mandatory = {s.name for s in scenario.sessions if not s.optional}
    failed = [(name, cause) for name, cause in built.infeasible if name in mandatory]
    if failed:
        details = "; ".join(f"{name}: {cause}" for name, cause in failed)
        print(f"infeasible mandatory sessions: {details}")
        return 1
    return 0
