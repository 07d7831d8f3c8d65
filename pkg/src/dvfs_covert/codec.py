"""Modulation codecs: dwell-time keying, mid-bit edge keying and clock-burst counting.

Encoders are pure functions from a bitstream (ASCII ``'0'``/``'1'``) to a
:class:`FrequencyTrace` or :class:`GateTrace`. Decoders go the other way, the
edge decoder working from timestamped register samples as a polling receiver
would see them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MalformedAlternation, UnknownCount, UnknownFrequency
from .framing import check_bits
from .soc import PL_CLOCK_MAX_HZ
from .traces import Burst, FrequencyTrace, GateTrace, Segment, cycles_to_ns

# relative distance within which an observed frequency snaps to a nominal one
SNAP_TOLERANCE = 0.01

Sample = tuple[int, int]


def tempo_to_duration(iterations: int, freq: int, cycles_per_iteration: int = 1) -> int:
    """Wall time in ns of a busy loop of ``iterations`` at ``freq`` (rounded half up)."""
    if iterations <= 0 or freq <= 0 or cycles_per_iteration <= 0:
        raise ValueError("iterations, frequency and cycles_per_iteration must be positive")
    return cycles_to_ns(iterations * cycles_per_iteration, freq)


def snap_frequency(freq: float, freq_1: int, freq_2: int, tolerance: float = SNAP_TOLERANCE) -> int:
    """Map an observed frequency onto ``freq_1`` or ``freq_2``, or raise UnknownFrequency."""
    best = min((freq_1, freq_2), key=lambda f: abs(freq - f))
    if abs(freq - best) > tolerance * best:
        raise UnknownFrequency(f"{freq:.0f} Hz is not within {tolerance:.1%} of {freq_1} or {freq_2} Hz")
    return best


# -- parameters --------------------------------------------------------------

@dataclass(frozen=True)
class DwellParams:
    """Dwell-time keying: a bit is how long ``freq_1`` is held, bits are separated by ``freq_2``."""

    freq_1: int
    freq_2: int
    tempo_1: int
    tempo_2: int
    tempo_3: int
    cycles_per_iteration: int = 1

    def __post_init__(self):
        if min(self.freq_1, self.freq_2) <= 0:
            raise ValueError("frequencies must be positive")
        if self.freq_1 == self.freq_2:
            raise ValueError("freq_1 and freq_2 must differ")
        if not self.tempo_1 > self.tempo_2 > 0 or self.tempo_3 <= 0:
            raise ValueError("need tempo_1 > tempo_2 > 0 and tempo_3 > 0")
        if not self.one_ns > self.zero_ns > 0 or self.separator_ns <= 0:
            raise ValueError("tempos are too short to resolve at 1 ns")

    @property
    def one_ns(self) -> int:
        return tempo_to_duration(self.tempo_1, self.freq_1, self.cycles_per_iteration)

    @property
    def zero_ns(self) -> int:
        return tempo_to_duration(self.tempo_2, self.freq_1, self.cycles_per_iteration)

    @property
    def separator_ns(self) -> int:
        return tempo_to_duration(self.tempo_3, self.freq_2, self.cycles_per_iteration)

    @property
    def threshold_ns(self) -> float:
        return (self.one_ns + self.zero_ns) / 2


@dataclass(frozen=True)
class EdgeParams:
    """Mid-bit edge keying. ``freq_1`` is the low level and ``freq_2`` the high level.

    Both half-bits last ``half_bit_ns``, the loop time of ``tempo_1`` iterations at the
    slower frequency. ``tempo_sampling`` is the receiver's polling period in ns and
    defaults to half a half-bit.
    """

    freq_1: int
    freq_2: int
    tempo_1: int
    cycles_per_iteration: int = 1
    tempo_sampling: int | None = None

    def __post_init__(self):
        if not 0 < self.freq_1 < self.freq_2:
            raise ValueError("need 0 < freq_1 < freq_2")
        if self.tempo_1 <= 0 or self.cycles_per_iteration <= 0:
            raise ValueError("tempo_1 and cycles_per_iteration must be positive")
        if self.half_bit_ns < 2:
            raise ValueError("half-bit shorter than 2 ns")
        if self.tempo_sampling is None:
            object.__setattr__(self, "tempo_sampling", self.half_bit_ns // 2)
        if self.tempo_sampling <= 0:
            raise ValueError("tempo_sampling must be positive")

    @property
    def half_bit_ns(self) -> int:
        return tempo_to_duration(self.tempo_1, self.freq_1, self.cycles_per_iteration)

    @property
    def bit_ns(self) -> int:
        return 2 * self.half_bit_ns

    @property
    def adequately_sampled(self) -> bool:
        """Whether polling is faster than one half-bit (needed for error-free decoding)."""
        return self.tempo_sampling < self.half_bit_ns


@dataclass(frozen=True)
class BurstParams:
    """Clock-burst keying on a gated PL clock. ``gap_cycles`` of off time separate bursts."""

    frequency: int
    cycles_for_1: int
    cycles_for_0: int
    gap_cycles: int = 2

    def __post_init__(self):
        if not 0 < self.frequency <= PL_CLOCK_MAX_HZ:
            raise ValueError(f"PL clock frequency must be in (0, {PL_CLOCK_MAX_HZ}] Hz")
        if self.cycles_for_1 <= 0 or self.cycles_for_0 <= 0:
            raise ValueError("cycle counts must be positive")
        if self.cycles_for_1 == self.cycles_for_0:
            raise ValueError("cycles_for_1 and cycles_for_0 must differ")
        if self.gap_cycles < 0:
            raise ValueError("gap_cycles must be non-negative")

    @property
    def gap_ns(self) -> int:
        return cycles_to_ns(self.gap_cycles, self.frequency)


# -- dwell-time keying -------------------------------------------------------

def dwell_encode(bits: str, p: DwellParams, start: int = 0) -> FrequencyTrace:
    check_bits(bits)
    levels = []
    for b in bits:
        levels.append((p.freq_1, p.one_ns if b == "1" else p.zero_ns))
        levels.append((p.freq_2, p.separator_ns))
    return FrequencyTrace.from_levels(start, levels)


def dwell_decode(trace: FrequencyTrace, p: DwellParams, tolerance: float = SNAP_TOLERANCE) -> str:
    """Classify every ``freq_1`` segment against the midpoint of the two expected dwells.

    A dwell exactly on the midpoint reads as 1.
    """
    out = []
    prev_low = False
    twice_threshold = p.one_ns + p.zero_ns
    for seg in trace:
        low = snap_frequency(seg.freq, p.freq_1, p.freq_2, tolerance) == p.freq_1
        if low:
            if prev_low:
                raise MalformedAlternation(f"two adjacent freq_1 segments at {seg.start} ns")
            out.append("1" if 2 * seg.duration >= twice_threshold else "0")
        prev_low = low
    return "".join(out)


# -- mid-bit edge keying -----------------------------------------------------

def edge_encode(bits: str, p: EdgeParams, start: int = 0) -> FrequencyTrace:
    check_bits(bits)
    h = p.half_bit_ns
    levels = []
    for b in bits:
        first, second = (p.freq_1, p.freq_2) if b == "1" else (p.freq_2, p.freq_1)
        levels += [(first, h), (second, h)]
    return FrequencyTrace.from_levels(start, levels).coalesced()


def sample_times(start: int, end: int, period_ns: int, jitter_ns: int = 0, seed: int = 0) -> np.ndarray:
    """Polling instants ``start + k*period + u_k`` inside ``[start, end)``, u_k uniform in ±jitter."""
    if period_ns <= 0 or jitter_ns < 0:
        raise ValueError("period must be positive and jitter non-negative")
    if period_ns <= 2 * jitter_ns:
        raise ValueError("period must exceed twice the jitter")
    if end <= start:
        return np.zeros(0, dtype=np.int64)
    n = (end - start + jitter_ns) // period_ns + 1
    times = start + period_ns * np.arange(n, dtype=np.int64)
    if jitter_ns:
        rng = np.random.default_rng(seed)
        times = times + rng.integers(-jitter_ns, jitter_ns, size=n, endpoint=True)
    return times[(times >= start) & (times < end)]


def sample_trace(trace: FrequencyTrace, period_ns: int, jitter_ns: int = 0, seed: int = 0) -> list[Sample]:
    times = sample_times(trace.start, trace.end, period_ns, jitter_ns, seed)
    if not len(times):
        return []
    starts = np.array([s.start for s in trace], dtype=np.int64)
    freqs = np.array([s.freq for s in trace], dtype=np.int64)
    idx = np.searchsorted(starts, times, side="right") - 1
    return list(zip(times.tolist(), freqs[idx].tolist()))


def _transitions(samples: Sequence[Sample], p: EdgeParams, tolerance: float) -> list[tuple[int, int, bool]]:
    """(last time at old level, first time at new level, rising) for every level change."""
    out = []
    prev_t = prev_high = None
    for t, f in samples:
        high = snap_frequency(f, p.freq_1, p.freq_2, tolerance) == p.freq_2
        if prev_high is not None and high != prev_high:
            out.append((prev_t, t, high))
        prev_t, prev_high = t, high
    return out


def _phase_arcs(brackets: list[tuple[int, int, bool]], h: int) -> list[tuple[int, int]]:
    """Arcs ``[a, b)`` of half-bit grid phases (mod ``h``, ``b`` may exceed ``h``)
    consistent with the most transitions.

    Each transition happened somewhere in ``(lo, hi]`` and on the grid, so it
    votes for the residues of that interval.
    """
    events: list[tuple[int, int]] = []
    for lo, hi, _ in brackets:
        width = hi - lo
        if width >= h:
            continue
        s = (lo + 1) % h
        e = s + width
        if e <= h:
            events += [(s, 1), (e, -1)]
        else:
            events += [(s, 1), (h, -1), (0, 1), (e - h, -1)]
    if not events:
        return [(0, h)]
    events.sort(key=lambda ev: (ev[0], ev[1]))
    best, level, pieces = 0, 0, []
    for i, (x, d) in enumerate(events):
        level += d
        nxt = events[i + 1][0] if i + 1 < len(events) else h
        if nxt <= x:
            continue
        if level > best:
            best, pieces = level, [[x, nxt]]
        elif level == best and best > 0:
            if pieces and pieces[-1][1] == x:
                pieces[-1][1] = nxt
            else:
                pieces.append([x, nxt])
    if len(pieces) > 1 and pieces[0][0] == 0 and pieces[-1][1] == h:
        last = pieces.pop()
        pieces[0] = [last[0], pieces[0][1] + h]
    return [(a, b) for a, b in pieces]


def _decode_on_grid(brackets, h: int, phase: int) -> tuple[str, int, int | None, int | None]:
    """Decode with transitions pinned to ``phase + m*h``.

    Also returns the number of structural violations and the grid times of the
    first and last accepted (data) transitions.
    """
    bits = []
    anomalies = 0
    first = last = None
    dangling = False
    for lo, hi, rising in brackets:
        if hi - lo >= h:
            g = phase + h * math.floor(((lo + hi) / 2 - phase) / h + 0.5)
        else:
            g = phase + h * ((lo - phase) // h + 1)
            if g > hi:
                anomalies += 1
                continue
        if last is None or 2 * (g - last) >= 3 * h:
            if last is not None and g - last != 2 * h:
                anomalies += 1
            bits.append("1" if rising else "0")
            if first is None:
                first = g
            last = g
            dangling = False
        else:
            dangling = True
    # a bit-boundary transition is always followed by a data transition
    return "".join(bits), anomalies + dangling, first, last


def _window_misfit(lead: int, tail: int, lo: int, hi: int, slack: int) -> tuple[int, int]:
    """Smallest distance of (lead, tail) from [0, slack] when the phase moves by d in [lo, hi].

    Moving the phase later by d shortens the lead and lengthens the tail by d.
    """
    def cost(d):
        x, y = lead - d, tail + d
        return (max(0, -x, x - slack) + max(0, -y, y - slack), abs(x) + abs(y))

    ds = {lo, hi, 0, lead, lead - slack, -tail, slack - tail}
    return min(cost(d) for d in ds if lo <= d <= hi)


def edge_decode_samples(samples: Sequence[Sample], p: EdgeParams, tolerance: float = SNAP_TOLERANCE) -> str:
    """Decode polled register samples: freq_1 -> freq_2 is a 1, freq_2 -> freq_1 a 0.

    A transition within 1.5 half-bits of the last accepted one is the boundary
    between two equal bits and is ignored. Edge times are first snapped to the
    half-bit grid recovered from all observed transitions, which keeps the guard
    exact for any unjittered polling period below a half-bit (a detection-time
    guard breaks once the period exceeds half a half-bit). When several grid
    phases fit, the one with the fewest structural violations wins, then the one
    whose implied transmission (first data transition minus a half-bit to last
    plus a half-bit) best matches the polling window. Jittered polling that
    leaves almost no margin (period + 2*jitter close to a half-bit) can still be
    ambiguous.
    """
    brackets = _transitions(samples, p, tolerance)
    if not brackets:
        return ""
    h = p.half_bit_ns
    t_first, t_last = samples[0][0], samples[-1][0]
    # the first poll lands within about one period of the start, the last within one of the end
    times = [t for t, _ in samples]
    slack = max((b - a for a, b in zip(times, times[1:])), default=0)
    best = None
    for a, b in _phase_arcs(brackets, h):
        centre = (a + b - 1) // 2
        bits, anomalies, first, last = _decode_on_grid(brackets, h, centre % h)
        if first is None:
            key = (anomalies, 0, 0)
        else:
            lead = t_first - (first - h)
            tail = (last + h) - t_last
            key = (anomalies,) + _window_misfit(lead, tail, a - centre, b - 1 - centre, slack)
        if best is None or key < best[0]:
            best = (key, bits)
    return best[1]


def trace_from_samples(samples: Sequence[Sample], freq_1: int, freq_2: int,
                       tolerance: float = SNAP_TOLERANCE) -> FrequencyTrace:
    """Rebuild a two-level trace from observations; boundaries sit midway between samples."""
    if not samples:
        return FrequencyTrace()
    snapped = [(t, snap_frequency(f, freq_1, freq_2, tolerance)) for t, f in samples]
    segs = []
    seg_start, seg_freq = snapped[0]
    for (t_prev, f_prev), (t, f) in zip(snapped, snapped[1:]):
        if f != f_prev:
            boundary = (t_prev + t + 1) // 2
            segs.append(Segment(seg_start, seg_freq, boundary - seg_start))
            seg_start, seg_freq = boundary, f
    segs.append(Segment(seg_start, seg_freq, snapped[-1][0] + 1 - seg_start))
    return FrequencyTrace(tuple(segs))


# -- clock-burst keying ------------------------------------------------------

def burst_encode(bits: str, p: BurstParams, start: int = 0) -> GateTrace:
    check_bits(bits)
    bursts = []
    t = start
    for b in bits:
        burst = Burst(t, p.frequency, p.cycles_for_1 if b == "1" else p.cycles_for_0)
        bursts.append(burst)
        t = burst.end + p.gap_ns
    return GateTrace(tuple(bursts))


def count_rising_edges(burst: Burst) -> int:
    """What the PL counter holds when the clock stops: one tick per delivered cycle.

    Rising edges fall at ``start + k/freq``; an edge counts if a full half-period of
    high time fits inside the active window, which absorbs the 1 ns window rounding.
    """
    return max(0, math.ceil(burst.duration * burst.freq / 1e9 - 0.5))


def burst_decode(trace: GateTrace, p: BurstParams) -> str:
    out = []
    for burst in trace:
        count = count_rising_edges(burst)
        if count == p.cycles_for_1:
            out.append("1")
        elif count == p.cycles_for_0:
            out.append("0")
        else:
            raise UnknownCount(f"burst at {burst.start} ns counted {count} cycles")
    return "".join(out)
