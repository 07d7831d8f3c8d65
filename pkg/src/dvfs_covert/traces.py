"""Frequency and gate traces, the integer-nanosecond time base, and the trace CSV schema.

All times are integer nanoseconds and all frequencies integer hertz.
"""

from __future__ import annotations

import bisect
import csv
import io
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence, TextIO

NS_PER_S = 1_000_000_000

TRACE_CSV_COLUMNS = ("clock", "start_ns", "duration_ns", "freq_hz", "gate")


def cycles_to_ns(cycles: int, freq_hz: int) -> int:
    """Duration of ``cycles`` clock cycles at ``freq_hz``, rounded half up to whole ns."""
    if cycles < 0 or freq_hz <= 0:
        raise ValueError(f"bad cycle count/frequency: {cycles}, {freq_hz}")
    # floor(x + 1/2) on the exact rational cycles*1e9/freq
    return (2 * cycles * NS_PER_S + freq_hz) // (2 * freq_hz)


class Segment(NamedTuple):
    start: int
    freq: int
    duration: int

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass(frozen=True)
class FrequencyTrace:
    """Contiguous, time-ordered run of constant-frequency segments."""

    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        segs = tuple(Segment(*s) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        for prev, seg in zip(segs, segs[1:]):
            if seg.start != prev.end:
                raise ValueError(f"segments not contiguous at {prev.end} -> {seg.start}")
        for seg in segs:
            if seg.duration <= 0:
                raise ValueError(f"non-positive segment duration at {seg.start}")
            if seg.freq <= 0:
                raise ValueError(f"non-positive frequency at {seg.start}")
            if seg.start < 0:
                raise ValueError("negative start time")

    @classmethod
    def from_levels(cls, start: int, levels: Iterable[tuple[int, int]]) -> FrequencyTrace:
        """Build a trace from ``(freq, duration)`` pairs laid end to end from ``start``."""
        segs = []
        t = start
        for freq, duration in levels:
            segs.append(Segment(t, freq, duration))
            t += duration
        return cls(tuple(segs))

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self) -> Iterator[Segment]:
        return iter(self.segments)

    def __getitem__(self, i):
        return self.segments[i]

    @property
    def start(self) -> int:
        return self.segments[0].start if self.segments else 0

    @property
    def end(self) -> int:
        return self.segments[-1].end if self.segments else 0

    @property
    def duration(self) -> int:
        return self.end - self.start

    def freq_at(self, t: int) -> int | None:
        """Frequency in force at ``t``; a segment owns its start instant. None outside the trace."""
        if not self.segments or t < self.start or t >= self.end:
            return None
        i = bisect.bisect_right([s.start for s in self.segments], t) - 1
        return self.segments[i].freq

    def coalesced(self) -> FrequencyTrace:
        """Merge neighbouring segments that share a frequency."""
        out: list[Segment] = []
        for seg in self.segments:
            if out and out[-1].freq == seg.freq:
                last = out[-1]
                out[-1] = Segment(last.start, last.freq, last.duration + seg.duration)
            else:
                out.append(seg)
        return FrequencyTrace(tuple(out))

    def rows(self, clock: str) -> list[TraceRow]:
        return [TraceRow(clock, s.start, s.duration, s.freq, "run") for s in self.segments]


class Burst(NamedTuple):
    start: int
    freq: int
    n_cycles: int

    @property
    def duration(self) -> int:
        return cycles_to_ns(self.n_cycles, self.freq)

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass(frozen=True)
class GateTrace:
    """Ordered, non-overlapping bursts of a gated clock; off time is implied between them."""

    bursts: tuple[Burst, ...] = ()

    def __post_init__(self):
        bursts = tuple(Burst(*b) for b in self.bursts)
        object.__setattr__(self, "bursts", bursts)
        for b in bursts:
            if b.n_cycles <= 0:
                raise ValueError(f"burst at {b.start} has no cycles")
        for prev, b in zip(bursts, bursts[1:]):
            if b.start < prev.end:
                raise ValueError(f"burst at {b.start} overlaps burst ending at {prev.end}")

    def __len__(self) -> int:
        return len(self.bursts)

    def __iter__(self) -> Iterator[Burst]:
        return iter(self.bursts)

    @property
    def start(self) -> int:
        return self.bursts[0].start if self.bursts else 0

    @property
    def end(self) -> int:
        return self.bursts[-1].end if self.bursts else 0

    @property
    def duration(self) -> int:
        return self.end - self.start

    def rows(self, clock: str) -> list[TraceRow]:
        """Alternating run/off rows between the first burst start and the last burst end."""
        out = []
        for prev, b in zip((None,) + self.bursts, self.bursts):
            if prev is not None and b.start > prev.end:
                out.append(TraceRow(clock, prev.end, b.start - prev.end, prev.freq, "off"))
            out.append(TraceRow(clock, b.start, b.duration, b.freq, "run"))
        return out


class TraceRow(NamedTuple):
    clock: str
    start_ns: int
    duration_ns: int
    freq_hz: int
    gate: str  # "run" | "off"


def write_trace_csv(rows: Iterable[TraceRow], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRACE_CSV_COLUMNS)
    for r in rows:
        w.writerow([r.clock, r.start_ns, r.duration_ns, r.freq_hz, r.gate])


def trace_csv_text(rows: Iterable[TraceRow]) -> str:
    buf = io.StringIO()
    write_trace_csv(rows, buf)
    return buf.getvalue()


def read_trace_csv(src: TextIO) -> list[TraceRow]:
    reader = csv.DictReader(src)
    if tuple(reader.fieldnames or ()) != TRACE_CSV_COLUMNS:
        raise ValueError(f"unexpected trace CSV header: {reader.fieldnames}")
    rows = []
    for rec in reader:
        if rec["gate"] not in ("run", "off"):
            raise ValueError(f"bad gate value {rec['gate']!r}")
        rows.append(TraceRow(rec["clock"], int(rec["start_ns"]), int(rec["duration_ns"]),
                             int(rec["freq_hz"]), rec["gate"]))
    return rows


def rows_to_frequency_trace(rows: Sequence[TraceRow]) -> FrequencyTrace:
    """Inverse of :meth:`FrequencyTrace.rows` for a single always-running clock."""
    return FrequencyTrace(tuple(Segment(r.start_ns, r.freq_hz, r.duration_ns) for r in rows))
