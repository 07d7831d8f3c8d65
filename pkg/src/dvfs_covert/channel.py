"""Observation channels between the intruder's clean trace and the receiver's decoder.

``em_observe`` stands in for a probe and spectrum analyser watching the CPU clock
from outside the chip; ``inject_interference`` adds the benign frequency-governor
writes a real system would interleave with the intruder's.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .soc import Action, ClockId, MasterId, WriteFreq


@dataclass(frozen=True)
class EmNoiseParams:
    freq_sigma: float = 0.0  # Hz, std-dev of the peak-frequency estimate
    dropout_prob: float = 0.0  # probability a spectrogram frame is lost
    seed: int = 0

    def __post_init__(self):
        if self.freq_sigma < 0:
            raise ValueError("freq_sigma must be non-negative")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError("dropout_prob must lie in [0, 1]")


@dataclass(frozen=True)
class InterferenceParams:
    rate_per_second: float
    freq_set: tuple[int, ...]
    seed: int = 0
    master: MasterId = MasterId.CORE0
    clock: ClockId = ClockId.CPU_CLK

    def __post_init__(self):
        object.__setattr__(self, "freq_set", tuple(self.freq_set))
        if self.rate_per_second < 0:
            raise ValueError("rate must be non-negative")
        if not self.freq_set:
            raise ValueError("freq_set must not be empty")


def em_observe(samples: Sequence[tuple[int, int]], p: EmNoiseParams) -> list[tuple[int, int]]:
    """Perturb and thin a sample stream. Timestamps and order are never changed."""
    n = len(samples)
    rng = np.random.default_rng(p.seed)
    # draw both streams in full so the dropout pattern does not depend on sigma
    keep = rng.random(n) >= p.dropout_prob
    noise = rng.normal(0.0, 1.0, n) * p.freq_sigma
    out = []
    for (t, f), k, e in zip(samples, keep, noise):
        if k:
            out.append((t, int(round(f + e))))
    return out


def inject_interference(schedule: Sequence[Action], p: InterferenceParams, horizon: int) -> list[Action]:
    """Merge Poisson-timed benign register writes into ``schedule``.

    A benign write landing on an instant already used on the same clock moves
    1 ns later until free; benign writes past ``horizon`` are dropped.
    """
    merged = list(schedule)
    if p.rate_per_second <= 0 or horizon <= 0:
        return merged
    rng = np.random.default_rng(p.seed)
    mean_gap_ns = 1e9 / p.rate_per_second
    taken = {(a.clock, a.at) for a in schedule}
    t = 0.0
    while True:
        t += rng.exponential(mean_gap_ns)
        if not t <= horizon:  # also catches inf for vanishing rates
            break
        at = int(t)
        freq = p.freq_set[int(rng.integers(len(p.freq_set)))]
        while (p.clock, at) in taken:
            at += 1
        if at > horizon:
            continue
        taken.add((p.clock, at))
        merged.append(WriteFreq(p.master, p.clock, freq, at))
    # stable sort keeps the original relative order of same-instant actions
    merged.sort(key=lambda a: a.at)
    return merged
