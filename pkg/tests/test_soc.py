import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvfs_covert.errors import (
    FrequencyOutOfRange,
    NoSegment,
    NotGateable,
    Overlap,
    PermissionDenied,
    SameInstantConflict,
    ScheduleError,
    TimeRegression,
    UnmappedAddress,
)
from dvfs_covert.soc import (
    NON_SECURE_BASE,
    PL_CLOCK_MAX_HZ,
    SECURE_BASE,
    ClockController,
    ClockId,
    Gate,
    MasterId,
    SetGate,
    WriteFreq,
    build_soc,
    read_secure_memory,
    run_schedule,
    trace_to_actions,
)
from dvfs_covert.codec import EdgeParams, edge_encode
from dvfs_covert.traces import FrequencyTrace, read_trace_csv, rows_to_frequency_trace, trace_csv_text

MHZ = 1_000_000


def scan_read(writes, t):
    """Oracle: walk the write log linearly, last write at or before t wins."""
    current = None
    for at, f in writes:
        if at <= t:
            current = f
    return current


# -- clock registers ---------------------------------------------------------

def test_first_write_starts_trace():
    ctl = ClockController().write_clock_register(MasterId.CORE0, ClockId.CPU_CLK, 325 * MHZ, 0)
    tr = ctl.frequency_trace(ClockId.CPU_CLK, until=10)
    assert tr.segments[0].start == 0 and tr.segments[0].freq == 325 * MHZ


def test_pl_master_may_write_cpu_clock():
    ctl = ClockController().write_clock_register(MasterId.PL_IP_SECURE, ClockId.CPU_CLK, 433 * MHZ, 100)
    assert ctl.read_clock_register(MasterId.CORE1, ClockId.CPU_CLK, 100) == 433 * MHZ


def test_receiver_core_cannot_write():
    with pytest.raises(PermissionDenied):
        ClockController().write_clock_register(MasterId.CORE1, ClockId.CPU_CLK, 433 * MHZ, 0)


def test_pl_clock_cap():
    with pytest.raises(FrequencyOutOfRange):
        ClockController().write_clock_register(MasterId.CORE0, ClockId.FCLK0, 300 * MHZ, 0)
    ClockController().write_clock_register(MasterId.CORE0, ClockId.FCLK0, PL_CLOCK_MAX_HZ, 0)


def test_read_back_and_before_first_write():
    ctl = ClockController().write_clock_register(MasterId.CORE0, ClockId.CPU_CLK, 325 * MHZ, 10)
    assert ctl.read_clock_register(MasterId.CORE1, ClockId.CPU_CLK, 50) == 325 * MHZ
    with pytest.raises(NoSegment):
        ctl.read_clock_register(MasterId.CORE1, ClockId.CPU_CLK, 9)


def test_new_segment_owns_its_start_instant():
    writes = [(0, 325 * MHZ), (1000, 433 * MHZ)]
    ctl = ClockController()
    for at, f in writes:
        ctl.write_clock_register(MasterId.CORE0, ClockId.CPU_CLK, f, at)
    expected = scan_read(writes, 1000)
    assert expected == 433 * MHZ
    assert ctl.read_clock_register(MasterId.CORE1, ClockId.CPU_CLK, 1000) == expected
    assert ctl.read_clock_register(MasterId.CORE1, ClockId.CPU_CLK, 999) == 325 * MHZ


def test_time_regression_and_same_instant():
    ctl = ClockController().write_clock_register(MasterId.CORE0, ClockId.CPU_CLK, 325 * MHZ, 10)
    with pytest.raises(TimeRegression):
        ctl.write_clock_register(MasterId.CORE0, ClockId.CPU_CLK, 433 * MHZ, 5)
    with pytest.raises(SameInstantConflict):
        ctl.write_clock_register(MasterId.CORE0, ClockId.CPU_CLK, 433 * MHZ, 10)


# -- gating --------------------------------------------------------------------

def cycle_enumeration_ns(n_cycles, freq):
    """Oracle: add up one clock period per cycle, exactly."""
    from fractions import Fraction
    return sum(Fraction(10**9, freq) for _ in range(n_cycles))


@pytest.mark.parametrize("freq, n, window", [(250 * MHZ, 10, 40), (100 * MHZ, 5, 50)])
def test_burst_window(freq, n, window):
    assert cycle_enumeration_ns(n, freq) == window
    ctl = ClockController().write_clock_register(MasterId.CORE0, ClockId.FCLK0, freq, 0)
    ctl.gate_clock_burst(MasterId.CORE0, ClockId.FCLK0, n, 1)
    (burst,) = ctl.gate_trace(ClockId.FCLK0).bursts
    assert burst.duration == window
    assert ctl.gate_state(ClockId.FCLK0, 1) is Gate.RUNNING
    assert ctl.gate_state(ClockId.FCLK0, 1 + window) is Gate.OFF


def test_gate_errors():
    ctl = ClockController().write_clock_register(MasterId.CORE0, ClockId.FCLK0, 250 * MHZ, 0)
    with pytest.raises(NotGateable):
        ctl.gate_clock_burst(MasterId.CORE0, ClockId.CPU_CLK, 10, 1)
    with pytest.raises(PermissionDenied):
        ctl.gate_clock_burst(MasterId.CORE1, ClockId.FCLK0, 10, 1)
    ctl.gate_clock_burst(MasterId.CORE0, ClockId.FCLK0, 10, 1)
    with pytest.raises(Overlap):
        ctl.gate_clock_burst(MasterId.CORE0, ClockId.FCLK0, 10, 20)


# -- schedules -----------------------------------------------------------------

def test_empty_schedule_leaves_state_unchanged():
    before = ClockController()
    assert run_schedule([], before) == before


def test_edge_schedule_for_single_one():
    p = EdgeParams(325 * MHZ, 433 * MHZ, tempo_1=100)
    actions = trace_to_actions(edge_encode("1", p), MasterId.CORE0, ClockId.CPU_CLK)
    tr = run_schedule(actions).frequency_trace(ClockId.CPU_CLK, until=2 * p.half_bit_ns)
    assert [s.freq for s in tr.segments] == [325 * MHZ, 433 * MHZ]


def test_schedule_conflict_reports_index():
    actions = [WriteFreq(MasterId.CORE0, ClockId.CPU_CLK, 325 * MHZ, 0),
               WriteFreq(MasterId.CORE0, ClockId.CPU_CLK, 433 * MHZ, 0)]
    with pytest.raises(ScheduleError) as info:
        run_schedule(actions)
    assert info.value.index == 1
    assert isinstance(info.value.cause, SameInstantConflict)


def test_schedule_does_not_mutate_input_state():
    base = ClockController()
    run_schedule([WriteFreq(MasterId.CORE0, ClockId.CPU_CLK, 325 * MHZ, 0)], base)
    assert base == ClockController()


def test_set_gate_and_export_rows():
    actions = [WriteFreq(MasterId.CORE0, ClockId.FCLK1, 250 * MHZ, 0),
               SetGate(MasterId.CORE0, ClockId.FCLK1, True, 5),
               SetGate(MasterId.CORE0, ClockId.FCLK1, False, 25)]
    ctl = run_schedule(actions)
    assert ctl.gate_state(ClockId.FCLK1, 4) is Gate.OFF
    assert ctl.gate_state(ClockId.FCLK1, 5) is Gate.RUNNING
    rows = ctl.export_rows(until=30, clocks=[ClockId.FCLK1])
    assert [(r.start_ns, r.duration_ns, r.gate) for r in rows] == [(0, 5, "off"), (5, 20, "run"), (25, 5, "off")]


# -- invariants ----------------------------------------------------------------

write_lists = st.lists(
    st.tuples(st.integers(1, 500), st.sampled_from([100, 200, 325, 433, 800])), min_size=1, max_size=20)


def _apply_writes(steps):
    ctl, log, t = ClockController(), [], 0
    for gap, mhz in steps:
        t += gap
        ctl.write_clock_register(MasterId.CORE0, ClockId.CPU_CLK, mhz * MHZ, t)
        log.append((t, mhz * MHZ))
    return ctl, log, t


@settings(max_examples=200)
@given(write_lists, st.data())
def test_read_matches_brute_force(steps, data):
    ctl, log, last = _apply_writes(steps)
    t = data.draw(st.integers(log[0][0], last + 1000))
    assert ctl.read_clock_register(MasterId.CORE1, ClockId.CPU_CLK, t) == scan_read(log, t)


@settings(max_examples=200)
@given(write_lists)
def test_traces_well_formed_and_deterministic(steps):
    a, _, last = _apply_writes(steps)
    b, _, _ = _apply_writes(steps)
    tr = a.frequency_trace(ClockId.CPU_CLK, until=last + 1)
    starts = [s.start for s in tr.segments]
    assert starts == sorted(set(starts))
    assert all(s.duration > 0 for s in tr.segments)
    assert a == b and a.snapshot() == b.snapshot()


@given(st.lists(st.integers(1, 10**9), min_size=1, max_size=10))
def test_pl_traces_never_exceed_cap(freqs):
    ctl, t, accepted = ClockController(), 0, 0
    for f in freqs:
        t += 1
        try:
            ctl.write_clock_register(MasterId.CORE0, ClockId.FCLK2, f, t)
            accepted += 1
        except FrequencyOutOfRange:
            assert f > PL_CLOCK_MAX_HZ
    if accepted:
        tr = ctl.frequency_trace(ClockId.FCLK2, until=t + 1)
        assert max(s.freq for s in tr.segments) <= PL_CLOCK_MAX_HZ


# -- memory --------------------------------------------------------------------

def test_secure_memory_permissions():
    soc = build_soc(b"\x42secret")
    with pytest.raises(PermissionDenied):
        read_secure_memory(soc.memory, MasterId.CORE1, SECURE_BASE)
    assert read_secure_memory(soc.memory, MasterId.CORE0, SECURE_BASE) == 0x42
    assert read_secure_memory(soc.memory, MasterId.CORE1, NON_SECURE_BASE) == ord("h")
    with pytest.raises(UnmappedAddress):
        soc.memory.read(MasterId.CORE0, 0)


@given(st.binary(min_size=1, max_size=64),
       st.sampled_from([MasterId.CORE1, MasterId.PL_IP_NON_SECURE]),
       st.integers(0, 8191))
def test_non_secure_master_never_reads_secure_bytes(secret, master, offset):
    soc = build_soc(secret)
    for base in (SECURE_BASE, NON_SECURE_BASE):
        try:
            soc.memory.read(master, base + offset)
        except (PermissionDenied, UnmappedAddress):
            continue
        assert soc.memory.region_of(base + offset).security.value != "secure"


# -- trace CSV -------------------------------------------------------------------

def test_trace_csv_round_trip():
    tr = FrequencyTrace.from_levels(100, [(325 * MHZ, 1231), (433 * MHZ, 462)])
    text = trace_csv_text(tr.rows("cpu_clk"))
    assert text.splitlines()[0] == "clock,start_ns,duration_ns,freq_hz,gate"
    rows = read_trace_csv(io.StringIO(text))
    assert rows_to_frequency_trace(rows) == tr


def test_trace_csv_rejects_bad_header():
    with pytest.raises(ValueError):
        read_trace_csv(io.StringIO("a,b\n1,2\n"))
