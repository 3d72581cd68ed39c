"""Fronthaul traffic model for the supported function-splitting schemes.

Volume per subframe depends on where the processing chain is cut:

* classical I/Q: constant, proportional to sampling rate x antennas x
  quantization width, independent of cell load;
* low-pass-filtered I/Q: the classical stream scaled by a filter factor;
* resource-element extraction: only samples on occupied resource
  elements cross the fronthaul, so volume follows cell load;
* modulation bits: information bits before the modulator, roughly two
  orders of magnitude below classical I/Q at full load;
* PDU level: transport-block bits after rate matching (code rate applied).

A seeded generator produces multi-subframe traces with two-state on/off
user activity, a reflected random walk over the MCS table, round-robin
resource-block scheduling, and periodic control (PDCCH every subframe,
PRACH bursts at a fixed period).
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from typing import NamedTuple, Union

# Defaults reproduce a 20 MHz, 8 antenna, 15-bit cell whose classical
# stream is exactly 9.8304 Gbps. The 4/3 overhead is the usual control
# word (16/15) times line code (10/8) expansion.
DEFAULT_SAMPLING_RATE = 30.72e6
DEFAULT_OVERHEAD_FACTOR = 4 / 3
DEFAULT_RES_PER_PRB = 168  # 12 subcarriers x 14 symbols per 1 ms subframe

# Control resource elements are carried as robustly modulated symbols.
CONTROL_MODULATION_ORDER = 2


@dataclass(frozen=True)
class CellConfig:
    """Radio configuration of one cell feeding a fronthaul link."""

    radio_bandwidth: float = 20e6  # Hz
    sampling_rate: float = DEFAULT_SAMPLING_RATE  # samples/s
    n_antennas: int = 8
    iq_bitwidth: int = 15  # bits per I or Q component
    n_prb: int = 100
    res_per_prb: int = DEFAULT_RES_PER_PRB
    subframe_duration: float = 1e-3  # s
    transport_overhead_factor: float = DEFAULT_OVERHEAD_FACTOR  # >= 1
    compression_factor: float = 1.0  # (0, 1]

    def __post_init__(self) -> None:
        if self.sampling_rate <= 0:
            raise ValueError("sampling_rate must be > 0")
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if self.iq_bitwidth < 1:
            raise ValueError("iq_bitwidth must be >= 1")
        if self.n_prb < 1:
            raise ValueError("n_prb must be >= 1")
        if self.res_per_prb < 1:
            raise ValueError("res_per_prb must be >= 1")
        if self.subframe_duration <= 0:
            raise ValueError("subframe_duration must be > 0")
        if self.transport_overhead_factor < 1:
            raise ValueError("transport_overhead_factor must be >= 1")
        if not 0 < self.compression_factor <= 1:
            raise ValueError("compression_factor must be in (0, 1]")


@dataclass(frozen=True)
class ClassicalIQ:
    """Time-domain I/Q samples for the whole band."""


@dataclass(frozen=True)
class FilteredIQ:
    """Low-pass-filtered I/Q; the guard band is removed before transport."""

    filter_factor: float = 0.5

    def __post_init__(self) -> None:
        if not 0 < self.filter_factor <= 1:
            raise ValueError("filter_factor must be in (0, 1]")


@dataclass(frozen=True)
class ReExtraction:
    """I/Q samples on occupied resource elements only."""


@dataclass(frozen=True)
class ModulationBits:
    """Information bits at the modulator input, one spatial layer."""

    n_layers: int = 1

    def __post_init__(self) -> None:
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")


@dataclass(frozen=True)
class PduLevel:
    """MAC/L3 PDU bits; code rate optionally applied (transport-block view)."""

    code_rate_applied: bool = True


SplitScheme = Union[ClassicalIQ, FilteredIQ, ReExtraction, ModulationBits, PduLevel]

_SCHEME_NAMES = {
    ClassicalIQ: "classical_iq",
    FilteredIQ: "filtered_iq",
    ReExtraction: "re_extraction",
    ModulationBits: "modulation_bits",
    PduLevel: "pdu_level",
}


def scheme_name(scheme: SplitScheme) -> str:
    return _SCHEME_NAMES[type(scheme)]


class McsEntry(NamedTuple):
    """Modulation and coding point: bits per symbol and code rate."""

    modulation_order: int  # 2 = QPSK, 4 = 16QAM, 6 = 64QAM
    code_rate: float


def _check_mcs(mcs: McsEntry) -> None:
    if mcs.modulation_order not in (2, 4, 6):
        raise ValueError(f"modulation_order must be 2, 4 or 6, got {mcs.modulation_order}")
    if not 0 < mcs.code_rate <= 1:
        raise ValueError("code_rate must be in (0, 1]")


# Index ordering is worst to best channel; the random walk moves over it.
DEFAULT_MCS_TABLE: tuple[McsEntry, ...] = (
    McsEntry(2, 1 / 3),
    McsEntry(2, 1 / 2),
    McsEntry(4, 1 / 2),
    McsEntry(4, 3 / 4),
    McsEntry(6, 2 / 3),
    McsEntry(6, 5 / 6),
)


class Allocation(NamedTuple):
    ue_id: int
    n_prbs: int
    mcs: McsEntry


@dataclass(frozen=True)
class SubframeLoad:
    """Scheduled allocations plus periodic control for one subframe."""

    subframe_index: int
    allocations: tuple[Allocation, ...] = ()
    control_res: int = 0

    def __post_init__(self) -> None:
        if self.control_res < 0:
            raise ValueError("control_res must be >= 0")
        for alloc in self.allocations:
            if alloc.n_prbs < 0:
                raise ValueError("allocation n_prbs must be >= 0")
            _check_mcs(alloc.mcs)

    def total_prbs(self) -> int:
        return sum(a.n_prbs for a in self.allocations)


class ControlSchedule(NamedTuple):
    """Periodic control overlay: PDCCH every subframe, PRACH bursts."""

    pdcch_res_per_subframe: int = 0
    prach_period: int = 10  # subframes
    prach_res: int = 0


@dataclass(frozen=True)
class UeProfile:
    """Stochastic behaviour of one user.

    Activity is a two-state process with the given mean on/off durations
    (in subframes, math.inf pins the state). The MCS index performs a
    reflected random walk over the table: each subframe it moves one step
    up or down with probability mcs_step_prob. demand_prbs is how many
    resource blocks the user asks for per subframe while active.
    """

    ue_id: int
    mean_on: float = 40.0
    mean_off: float = 40.0
    demand_prbs: int = 10
    mcs_step_prob: float = 0.3
    mcs_init: int | None = None

    def __post_init__(self) -> None:
        if self.mean_on <= 0 or self.mean_off <= 0:
            raise ValueError("mean on/off durations must be > 0")
        if self.demand_prbs < 1:
            raise ValueError("demand_prbs must be >= 1")
        if not 0 <= self.mcs_step_prob <= 1:
            raise ValueError("mcs_step_prob must be in [0, 1]")
        if self.mcs_init is not None and not 0 <= self.mcs_init < len(DEFAULT_MCS_TABLE):
            raise ValueError("mcs_init outside the MCS table")


@dataclass
class TrafficTrace:
    """Per-subframe fronthaul volumes for one cell under one split scheme."""

    cell: CellConfig
    scheme: SplitScheme
    volumes: list[float]  # bits per subframe
    loads: list[SubframeLoad]
    seed: int

    def __post_init__(self) -> None:
        if len(self.volumes) != len(self.loads):
            raise ValueError("volumes and loads must have equal length")
        if any(v < 0 for v in self.volumes):
            raise ValueError("volumes must be >= 0")

    def mean_rate(self) -> float:
        """Average offered rate in bits/s over the trace."""
        if not self.volumes:
            return 0.0
        return sum(self.volumes) / (len(self.volumes) * self.cell.subframe_duration)


def subframe_volume(scheme: SplitScheme, cell: CellConfig, load: SubframeLoad) -> float:
    """Fronthaul payload bits produced by one subframe under `scheme`."""
    if load.total_prbs() > cell.n_prb:
        raise ValueError(
            f"load allocates {load.total_prbs()} PRBs, cell has {cell.n_prb}"
        )
    if isinstance(scheme, ClassicalIQ):
        return (
            cell.sampling_rate
            * cell.subframe_duration
            * (2 * cell.iq_bitwidth)
            * cell.n_antennas
            * cell.transport_overhead_factor
            * cell.compression_factor
        )
    if isinstance(scheme, FilteredIQ):
        return subframe_volume(ClassicalIQ(), cell, load) * scheme.filter_factor
    if isinstance(scheme, ReExtraction):
        active_res = load.total_prbs() * cell.res_per_prb + load.control_res
        return active_res * (2 * cell.iq_bitwidth) * cell.n_antennas * cell.compression_factor
    if isinstance(scheme, ModulationBits):
        data_bits = sum(
            a.n_prbs * cell.res_per_prb * a.mcs.modulation_order for a in load.allocations
        )
        control_bits = load.control_res * CONTROL_MODULATION_ORDER
        return data_bits * scheme.n_layers + control_bits
    if isinstance(scheme, PduLevel):
        return sum(
            a.n_prbs
            * cell.res_per_prb
            * a.mcs.modulation_order
            * (a.mcs.code_rate if scheme.code_rate_applied else 1.0)
            for a in load.allocations
        )
    raise TypeError(f"unknown split scheme: {scheme!r}")


def peak_rate(scheme: SplitScheme, cell: CellConfig, max_control_res: int = 0) -> float:
    """Sustained peak bit rate of `scheme` for the given cell.

    Load-dependent schemes are evaluated with every PRB granted at the
    best entry of the MCS table plus `max_control_res` control elements.
    The constant-rate schemes return their fixed line rate directly.
    """
    if isinstance(scheme, ClassicalIQ):
        return (
            cell.sampling_rate
            * (2 * cell.iq_bitwidth)
            * cell.n_antennas
            * cell.transport_overhead_factor
            * cell.compression_factor
        )
    if isinstance(scheme, FilteredIQ):
        return peak_rate(ClassicalIQ(), cell) * scheme.filter_factor
    best = DEFAULT_MCS_TABLE[-1]
    full = SubframeLoad(
        subframe_index=0,
        allocations=(Allocation(0, cell.n_prb, best),),
        control_res=max_control_res,
    )
    return subframe_volume(scheme, cell, full) / cell.subframe_duration


def _stationary_on_probability(profile: UeProfile) -> float:
    if math.isinf(profile.mean_on) and math.isinf(profile.mean_off):
        return 0.5
    if math.isinf(profile.mean_on):
        return 1.0
    if math.isinf(profile.mean_off):
        return 0.0
    return profile.mean_on / (profile.mean_on + profile.mean_off)


def generate_trace(
    cell: CellConfig,
    scheme: SplitScheme,
    profiles: list[UeProfile],
    control_schedule: ControlSchedule,
    n_subframes: int,
    seed: int,
) -> TrafficTrace:
    """Generate a deterministic multi-subframe traffic trace.

    Per subframe every user advances its activity and MCS processes, whole
    PRBs are granted round-robin among active users up to their demand,
    control resources are overlaid, and the scheme volume is recorded.
    The same seed always yields the identical trace.
    """
    if n_subframes < 1:
        raise ValueError("n_subframes must be >= 1")
    load_dependent = not isinstance(scheme, (ClassicalIQ, FilteredIQ))
    if load_dependent and not profiles:
        raise ValueError("load-dependent schemes require at least one UE profile")

    rng = random.Random(seed)
    table = DEFAULT_MCS_TABLE
    on = [rng.random() < _stationary_on_probability(p) for p in profiles]
    mcs_idx = [
        p.mcs_init if p.mcs_init is not None else rng.randrange(len(table))
        for p in profiles
    ]

    volumes: list[float] = []
    loads: list[SubframeLoad] = []
    for sf in range(n_subframes):
        for i, p in enumerate(profiles):
            if on[i]:
                if rng.random() < 1.0 / p.mean_on:
                    on[i] = False
            else:
                if rng.random() < 1.0 / p.mean_off:
                    on[i] = True
            if p.mcs_step_prob and rng.random() < p.mcs_step_prob:
                step = rng.choice((-1, 1))
                nxt = mcs_idx[i] + step
                mcs_idx[i] = min(max(nxt, 0), len(table) - 1)  # reflect at the edges

        active = [i for i, a in enumerate(on) if a]
        granted = {i: 0 for i in active}
        if active:
            remaining = cell.n_prb
            start = sf % len(active)  # rotate the grant order between subframes
            queue = active[start:] + active[:start]
            while remaining > 0 and queue:
                nxt = []
                for i in queue:
                    if remaining > 0:
                        granted[i] += 1
                        remaining -= 1
                    if granted[i] < profiles[i].demand_prbs:
                        nxt.append(i)
                queue = nxt

        control = control_schedule.pdcch_res_per_subframe
        if control_schedule.prach_res and sf % control_schedule.prach_period == 0:
            control += control_schedule.prach_res

        allocations = tuple(
            Allocation(profiles[i].ue_id, granted[i], table[mcs_idx[i]])
            for i in active
            if granted[i] > 0
        )
        load = SubframeLoad(subframe_index=sf, allocations=allocations, control_res=control)
        loads.append(load)
        volumes.append(subframe_volume(scheme, cell, load))

    return TrafficTrace(cell=cell, scheme=scheme, volumes=volumes, loads=loads, seed=seed)


def constant_trace(
    cell: CellConfig, scheme: SplitScheme, rate: float, n_subframes: int
) -> TrafficTrace:
    """Trace with a fixed offered rate in bits/s, for constant-bit-rate sources."""
    if rate < 0:
        raise ValueError("rate must be >= 0")
    per_subframe = rate * cell.subframe_duration
    loads = [SubframeLoad(subframe_index=sf) for sf in range(n_subframes)]
    return TrafficTrace(
        cell=cell,
        scheme=scheme,
        volumes=[per_subframe] * n_subframes,
        loads=loads,
        seed=0,
    )


def write_trace_csv(trace: TrafficTrace, path: str) -> None:
    """Export a trace as the standard five-column table."""
    name = scheme_name(trace.scheme)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subframe_index", "scheme", "volume_bits", "allocated_prbs", "control_res"])
        for load, volume in zip(trace.loads, trace.volumes):
            writer.writerow(
                [load.subframe_index, name, repr(volume), load.total_prbs(), load.control_res]
            )
