import pytest

from dvfs_covert.attacks import AttackId, apply_overrides, default_scenario, run_attack, with_seed
from dvfs_covert.errors import ScenarioInvalid
from dvfs_covert.harness import (
    ChannelStats,
    SweepSpec,
    SweepSpecError,
    parse_sweep_spec,
    run_sweep,
    sweep_csv_text,
)

TEMPO_SPEC = """\
# tempo sweep, noiseless core-to-core channel
scenario = a2
repetitions = 2
seed = 3
grid.tempo_1 = 100, 200, 400
"""


def test_tempo_sweep_is_error_free_and_monotone():
    points = run_sweep(parse_sweep_spec(TEMPO_SPEC))
    assert [p.params["tempo_1"] for p in points] == [100, 200, 400]
    assert all(p.stats.ber == 0 for p in points)
    bw = [p.stats.bandwidth_bps for p in points]
    assert bw[0] > bw[1] > bw[2]


def test_repetitions_of_noiseless_point_agree():
    spec = SweepSpec(AttackId.A2_CORE_TO_CORE, {"tempo_1": [150]}, repetitions=3, base_seed=1)
    (point,) = run_sweep(spec)
    assert len(point.runs) == 3 and len(set(point.runs)) == 1


def test_faster_dwell_config_has_higher_bandwidth():
    slow = run_attack(default_scenario("a1"))
    fast = run_attack(apply_overrides(default_scenario("a1"), {"tempo_1": 200, "tempo_2": 100, "tempo_3": 25}))
    assert slow.recovered and fast.recovered
    assert fast.bandwidth_bps > slow.bandwidth_bps


def test_sweep_csv_is_deterministic_and_parallel_safe():
    spec = parse_sweep_spec(TEMPO_SPEC + "jitter_ns = 40\n")
    text = sweep_csv_text(spec, run_sweep(spec))
    assert text == sweep_csv_text(spec, run_sweep(spec))
    assert text == sweep_csv_text(spec, run_sweep(spec, workers=2))
    assert text.splitlines()[0] == "tempo_1,bits_sent,bit_errors,ber,bandwidth_bps"


def test_ber_nondecreasing_in_dropout():
    means = []
    for dropout in (0.0, 0.05, 0.2):
        spec = SweepSpec(AttackId.A1_EM_EXFIL, {"dropout_prob": [dropout]}, repetitions=10, base_seed=8,
                         secret=b"\x5a" * 4)
        means.append(run_sweep(spec)[0].stats.ber)
    assert means[0] == 0.0
    assert means == sorted(means)


def test_channel_stats_from_report():
    r = run_attack(default_scenario("a3"))
    st = ChannelStats.from_report(r)
    assert st.bits_sent == len(r.sent_bits) and st.ber == st.bit_errors / st.bits_sent == 0


def test_noisy_stats_ratio_when_receiver_is_not_longer():
    s = apply_overrides(default_scenario("a2"), {"jitter_ns": 500, "interference_rate": 2000})
    for seed in range(5):
        r = run_attack(with_seed(s, seed))
        st = ChannelStats.from_report(r)
        if len(r.received_bits) <= len(r.sent_bits):
            assert st.ber == st.bit_errors / st.bits_sent


def test_spec_validation():
    with pytest.raises(ScenarioInvalid):
        SweepSpec(AttackId.A2_CORE_TO_CORE, {})
    with pytest.raises(ScenarioInvalid):
        SweepSpec(AttackId.A2_CORE_TO_CORE, {"tempo_1": [1]}, repetitions=0)


@pytest.mark.parametrize("text, line, fragment", [
    ("scenario = a2\n", 0, "grid"),
    ("grid.tempo_1 = 1\n", 0, "scenario"),
    ("scenario = a2\nthis is not valid\n", 2, "key = value"),
    ("scenario = a9\n", 1, "a9"),
    ("scenario = a2\n\ngrid.tempo_1 = 1,,2\n", 3, "grid"),
    ("scenario = a2\ngrid.cycles_for_1 = 3\n", 2, "cycles_for_1"),
])
def test_spec_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(SweepSpecError) as info:
        parse_sweep_spec(text, source="s.txt")
    assert info.value.line == line
    assert str(info.value).startswith(f"s.txt:{line}:")
    assert fragment in str(info.value)


def test_spec_parsing_fixed_and_secret():
    spec = parse_sweep_spec("scenario=a3\nsecret=0xdead\ngap_cycles = 0\ngrid.cycles_for_0 = 2, 5\n")
    assert spec.secret == b"\xde\xad" and spec.fixed == {"gap_cycles": 0}
    assert spec.points() == [{"cycles_for_0": 2}, {"cycles_for_0": 5}]
