"""Event-driven model of a TrustZone heterogeneous SoC: two cores on one shared
CPU clock, four gateable programmable-logic clocks, and a partitioned memory.

The clock controller keeps the full register history of every clock. Writes are
access-controlled, reads are not: any master can read any clock register, which
is the leak every attack relies on.
"""

from __future__ import annotations

import bisect
import copy
import enum
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .errors import (
    FrequencyOutOfRange,
    NoSegment,
    NotGateable,
    Overlap,
    PermissionDenied,
    SameInstantConflict,
    ScheduleError,
    SocError,
    TimeRegression,
    UnmappedAddress,
)
from .traces import Burst, FrequencyTrace, GateTrace, Segment, TraceRow, cycles_to_ns

PL_CLOCK_MAX_HZ = 250_000_000


class SecurityState(enum.Enum):
    SECURE = "secure"
    NON_SECURE = "non-secure"


class MasterId(enum.Enum):
    CORE0 = "core0"
    CORE1 = "core1"
    PL_IP_SECURE = "pl-ip-secure"
    PL_IP_NON_SECURE = "pl-ip-non-secure"

    @property
    def security(self) -> SecurityState:
        if self in (MasterId.CORE0, MasterId.PL_IP_SECURE):
            return SecurityState.SECURE
        return SecurityState.NON_SECURE

    @property
    def is_core(self) -> bool:
        return self in (MasterId.CORE0, MasterId.CORE1)

    @property
    def can_write_clocks(self) -> bool:
        # the non-secure core only reads; every other master holds write permission
        return self is not MasterId.CORE1


class ClockId(enum.Enum):
    CPU_CLK = "cpu_clk"
    FCLK0 = "fclk0"
    FCLK1 = "fclk1"
    FCLK2 = "fclk2"
    FCLK3 = "fclk3"

    @property
    def gateable(self) -> bool:
        return self is not ClockId.CPU_CLK

    @property
    def max_freq(self) -> int | None:
        return PL_CLOCK_MAX_HZ if self.gateable else None


class Gate(enum.Enum):
    RUNNING = "run"
    OFF = "off"


# -- schedule actions --------------------------------------------------------

@dataclass(frozen=True)
class WriteFreq:
    master: MasterId
    clock: ClockId
    freq: int
    at: int


@dataclass(frozen=True)
class GateBurst:
    master: MasterId
    clock: ClockId
    n_cycles: int
    at: int


@dataclass(frozen=True)
class SetGate:
    master: MasterId
    clock: ClockId
    running: bool
    at: int


Action = Union[WriteFreq, GateBurst, SetGate]


class ClockController:
    """Clock-controller register file with a recorded history per clock."""

    def __init__(self):
        self.now = 0
        self._writes: dict[ClockId, list[tuple[int, int]]] = {c: [] for c in ClockId}
        self._bursts: dict[ClockId, list[Burst]] = {c: [] for c in ClockId}
        self._gate_events: dict[ClockId, list[tuple[int, bool]]] = {c: [] for c in ClockId}
        self._last_action: dict[ClockId, int] = {}

    # -- bookkeeping -------------------------------------------------------

    def _advance(self, clock: ClockId, at: int) -> None:
        if at < 0:
            raise TimeRegression(f"negative time {at}")
        if at < self.now:
            raise TimeRegression(f"action at {at} ns precedes controller time {self.now} ns")
        if self._last_action.get(clock) == at:
            raise SameInstantConflict(f"second action on {clock.value} at {at} ns")
        self.now = at
        self._last_action[clock] = at

    @staticmethod
    def _check_writer(master: MasterId) -> None:
        if not master.can_write_clocks:
            raise PermissionDenied(f"{master.value} may read but not write clock registers")

    def copy(self) -> ClockController:
        return copy.deepcopy(self)

    def snapshot(self) -> tuple:
        return (
            self.now,
            tuple((c.value, tuple(self._writes[c])) for c in ClockId),
            tuple((c.value, tuple(self._bursts[c])) for c in ClockId),
            tuple((c.value, tuple(self._gate_events[c])) for c in ClockId),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, ClockController):
            return NotImplemented
        return self.snapshot() == other.snapshot()

    # -- register access ---------------------------------------------------

    def write_clock_register(self, master: MasterId, clock: ClockId, freq: int, at: int) -> ClockController:
        self._check_writer(master)
        if freq <= 0 or (clock.max_freq is not None and freq > clock.max_freq):
            raise FrequencyOutOfRange(f"{freq} Hz is outside the legal range of {clock.value}")
        self._advance(clock, at)
        self._writes[clock].append((at, freq))
        return self

    def read_clock_register(self, master: MasterId, clock: ClockId, at: int) -> int:
        """Frequency of ``clock`` at time ``at``. Any master may read."""
        writes = self._writes[clock]
        if at < 0 or not writes or at < writes[0][0]:
            raise NoSegment(f"{clock.value} has no segment covering {at} ns")
        i = bisect.bisect_right(writes, (at, float("inf"))) - 1
        return writes[i][1]

    def gate_state(self, clock: ClockId, at: int) -> Gate:
        if not clock.gateable:
            return Gate.RUNNING
        bursts = self._bursts[clock]
        j = bisect.bisect_right(bursts, (at, float("inf"), 0)) - 1
        if j >= 0 and at < bursts[j].end:
            return Gate.RUNNING
        events = self._gate_events[clock]
        i = bisect.bisect_right(events, (at, True)) - 1
        if i >= 0 and events[i][1]:
            return Gate.RUNNING
        return Gate.OFF

    def set_gate(self, master: MasterId, clock: ClockId, running: bool, at: int) -> ClockController:
        if not clock.gateable:
            raise NotGateable(f"{clock.value} cannot be gated")
        self._check_writer(master)
        bursts = self._bursts[clock]
        if bursts and at < bursts[-1].end:
            raise Overlap(f"gate change at {at} ns falls inside a burst on {clock.value}")
        self._advance(clock, at)
        self._gate_events[clock].append((at, running))
        return self

    def gate_clock_burst(self, master: MasterId, clock: ClockId, n_cycles: int, at: int) -> ClockController:
        """Run ``clock`` for exactly ``n_cycles`` at its current frequency, then gate it off."""
        if not clock.gateable:
            raise NotGateable(f"{clock.value} cannot be gated")
        self._check_writer(master)
        if n_cycles <= 0:
            raise ValueError("n_cycles must be positive")
        bursts = self._bursts[clock]
        if bursts and at < bursts[-1].end:
            raise Overlap(f"burst at {at} ns overlaps burst ending at {bursts[-1].end} ns")
        if self.gate_state(clock, at) is not Gate.OFF:
            raise Overlap(f"{clock.value} is already running at {at} ns")
        freq = self.read_clock_register(master, clock, at)
        self._advance(clock, at)
        bursts.append(Burst(at, freq, n_cycles))
        return self

    def apply(self, action: Action) -> ClockController:
        if isinstance(action, WriteFreq):
            return self.write_clock_register(action.master, action.clock, action.freq, action.at)
        if isinstance(action, GateBurst):
            return self.gate_clock_burst(action.master, action.clock, action.n_cycles, action.at)
        if isinstance(action, SetGate):
            return self.set_gate(action.master, action.clock, action.running, action.at)
        raise TypeError(f"unknown action {action!r}")

    # -- recorded traces ---------------------------------------------------

    def frequency_trace(self, clock: ClockId, until: int | None = None) -> FrequencyTrace:
        """Register history of ``clock`` as a trace, the open last segment closed at ``until``."""
        until = self.now if until is None else until
        writes = [w for w in self._writes[clock] if w[0] < until]
        segs = []
        for (start, freq), nxt in zip(writes, writes[1:] + [(until, None)]):
            segs.append(Segment(start, freq, nxt[0] - start))
        return FrequencyTrace(tuple(segs))

    def gate_trace(self, clock: ClockId) -> GateTrace:
        return GateTrace(tuple(self._bursts[clock]))

    def export_rows(self, until: int | None = None, clocks: Iterable[ClockId] | None = None) -> list[TraceRow]:
        """Rows for the trace CSV: one per interval of constant frequency and gate state."""
        until = self.now if until is None else until
        rows: list[TraceRow] = []
        for clock in clocks if clocks is not None else ClockId:
            writes = self._writes[clock]
            if not writes or writes[0][0] >= until:
                continue
            points = {t for t, _ in writes}
            for b in self._bursts[clock]:
                points.update((b.start, b.end))
            points.update(t for t, _ in self._gate_events[clock])
            points = sorted(p for p in points if writes[0][0] <= p < until) + [until]
            for start, end in zip(points, points[1:]):
                freq = self.read_clock_register(MasterId.CORE0, clock, start)
                gate = self.gate_state(clock, start).value
                rows.append(TraceRow(clock.value, start, end - start, freq, gate))
        return rows


def run_schedule(actions: Sequence[Action], state: ClockController | None = None) -> ClockController:
    """Apply ``actions`` in order to a copy of ``state`` (a fresh controller by default)."""
    ctl = ClockController() if state is None else state.copy()
    for i, action in enumerate(actions):
        try:
            ctl.apply(action)
        except SocError as exc:
            raise ScheduleError(i, exc) from exc
    return ctl


def trace_to_actions(trace: FrequencyTrace, master: MasterId, clock: ClockId) -> list[WriteFreq]:
    """One register write per segment: how an intruder replays an encoded trace."""
    return [WriteFreq(master, clock, seg.freq, seg.start) for seg in trace]


def burst_actions(gates: GateTrace, master: MasterId, clock: ClockId) -> list[GateBurst]:
    return [GateBurst(master, clock, b.n_cycles, b.start) for b in gates]


# -- memory ------------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    base: int
    data: bytes
    security: SecurityState

    @property
    def end(self) -> int:
        return self.base + len(self.data)

    def __contains__(self, address: int) -> bool:
        return self.base <= address < self.end


class MemoryPartition:
    """External memory split into disjoint secure and non-secure regions."""

    def __init__(self, regions: Iterable[Region]):
        self.regions = tuple(sorted(regions, key=lambda r: r.base))
        for a, b in zip(self.regions, self.regions[1:]):
            if b.base < a.end:
                raise ValueError(f"regions at {a.base:#x} and {b.base:#x} overlap")

    def region_of(self, address: int) -> Region:
        for r in self.regions:
            if address in r:
                return r
        raise UnmappedAddress(f"{address:#x} is not in any region")

    def read(self, master: MasterId, address: int) -> int:
        region = self.region_of(address)
        if region.security is SecurityState.SECURE and master.security is not SecurityState.SECURE:
            raise PermissionDenied(f"{master.value} cannot read secure address {address:#x}")
        return region.data[address - region.base]

    def read_block(self, master: MasterId, address: int, length: int) -> bytes:
        return bytes(self.read(master, address + i) for i in range(length))


def read_secure_memory(memory: MemoryPartition, master: MasterId, address: int) -> int:
    return memory.read(master, address)


@dataclass
class SoC:
    clocks: ClockController
    memory: MemoryPartition


SECURE_BASE = 0x1000_0000
NON_SECURE_BASE = 0x0010_0000


def build_soc(secret: bytes, non_secure_data: bytes = b"hello from the normal world") -> SoC:
    """A fresh SoC whose secure region holds ``secret`` at :data:`SECURE_BASE`."""
    secure = Region(SECURE_BASE, bytes(secret).ljust(max(4096, len(secret)), b"\x00"), SecurityState.SECURE)
    normal = Region(NON_SECURE_BASE, bytes(non_secure_data).ljust(4096, b"\x00"), SecurityState.NON_SECURE)
    return SoC(ClockController(), MemoryPartition([secure, normal]))
