"""Channel metrics: bit error rate, measured bandwidth and the peak burst-keying rate."""

from __future__ import annotations

from .errors import ZeroDuration
from .traces import NS_PER_S


def bit_errors(sent: str, received: str) -> int:
    """Mismatches over the longer stream; positions missing on either side count as errors."""
    common = sum(a != b for a, b in zip(sent, received))
    return common + abs(len(sent) - len(received))


def bit_error_rate(sent: str, received: str) -> float:
    n = max(len(sent), len(received))
    if n == 0:
        return 0.0
    return bit_errors(sent, received) / n


def measure_bandwidth(bits_sent: int, elapsed_ns: int) -> float:
    if elapsed_ns <= 0:
        raise ZeroDuration("elapsed time must be positive")
    return bits_sent * NS_PER_S / elapsed_ns


def table1_peak_bandwidth(frequency: int, cycles_for_0: int) -> float:
    """Peak burst-keying rate: back-to-back logical 0s with no gap, ``frequency / cycles_for_0``."""
    if frequency <= 0 or cycles_for_0 <= 0:
        raise ValueError("frequency and cycles_for_0 must be positive")
    return frequency / cycles_for_0
