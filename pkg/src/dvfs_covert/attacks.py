"""End-to-end attack runs on the simulated SoC.

Each run first shows that the receiver cannot read the secret directly, then has
the intruder read it from secure memory, frame it, modulate it through the clock
controller, and lets the receiver decode it from whatever it can observe.

=====  ==========================  ===========  =======================
id     path                        codec        receiver observes
=====  ==========================  ===========  =======================
a1     secure core -> outside      dwell        EM samples of CPU clock
a2     secure core -> normal core  edge         CPU clock register polls
a3     secure core -> PL IP        burst        FCLK0 gate line
a4     secure PL IP -> normal core edge         CPU clock register polls
=====  ==========================  ===========  =======================
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .channel import EmNoiseParams, InterferenceParams, em_observe, inject_interference
from .codec import (
    BurstParams,
    DwellParams,
    EdgeParams,
    burst_decode,
    burst_encode,
    dwell_decode,
    dwell_encode,
    edge_decode_samples,
    edge_encode,
    sample_times,
    sample_trace,
    trace_from_samples,
)
from .errors import DecodeError, PermissionDenied, ScenarioInvalid
from .framing import frame_decode, frame_encode
from .metrics import bit_error_rate, bit_errors, measure_bandwidth, table1_peak_bandwidth
from .soc import (
    SECURE_BASE,
    ClockId,
    MasterId,
    SecurityState,
    SetGate,
    WriteFreq,
    build_soc,
    burst_actions,
    run_schedule,
    trace_to_actions,
)
from .traces import FrequencyTrace, GateTrace, TraceRow

DEFAULT_SECRET = b"TRUSTZONE-SECRET"

MHZ = 1_000_000


class AttackId(enum.Enum):
    A1_EM_EXFIL = "a1"
    A2_CORE_TO_CORE = "a2"
    A3_CORE_TO_PL_IP = "a3"
    A4_PL_IP_TO_CORE = "a4"

    @classmethod
    def parse(cls, text: str) -> AttackId:
        for a in cls:
            if text.lower() in (a.value, a.name.lower()):
                return a
        raise ScenarioInvalid(f"unknown attack {text!r}; expected one of a1, a2, a3, a4")


class CodecKind(enum.Enum):
    DWELL = "dwell"
    EDGE = "edge"
    BURST = "burst"


Params = Union[DwellParams, EdgeParams, BurstParams]

_PARAMS_TYPE = {CodecKind.DWELL: DwellParams, CodecKind.EDGE: EdgeParams, CodecKind.BURST: BurstParams}

# (codec, intruder, receiver); receiver None is the external EM observer
_WIRING = {
    AttackId.A1_EM_EXFIL: (CodecKind.DWELL, MasterId.CORE0, None),
    AttackId.A2_CORE_TO_CORE: (CodecKind.EDGE, MasterId.CORE0, MasterId.CORE1),
    AttackId.A3_CORE_TO_PL_IP: (CodecKind.BURST, MasterId.CORE0, MasterId.PL_IP_NON_SECURE),
    AttackId.A4_PL_IP_TO_CORE: (CodecKind.EDGE, MasterId.PL_IP_SECURE, MasterId.CORE1),
}


@dataclass(frozen=True)
class ChannelNoise:
    em: EmNoiseParams | None = None
    jitter_ns: int = 0
    interference: InterferenceParams | None = None


@dataclass(frozen=True)
class AttackScenario:
    id: AttackId
    intruder: MasterId
    receiver: MasterId | None
    codec: CodecKind
    params: Params
    secret: bytes = DEFAULT_SECRET
    noise: ChannelNoise = field(default_factory=ChannelNoise)
    seed: int = 0
    observe_period_ns: int = 10  # EM observer sampling period (a1 only)
    start_ns: int = 100  # first modulated instant; clocks are configured before it

    @property
    def data_clock(self) -> ClockId:
        return ClockId.FCLK0 if self.codec is CodecKind.BURST else ClockId.CPU_CLK


def validate_scenario(s: AttackScenario) -> None:
    codec, intruder, receiver = _WIRING[s.id]
    if s.codec is not codec:
        raise ScenarioInvalid(f"{s.id.value} uses the {codec.value} codec, not {s.codec.value}")
    if not isinstance(s.params, _PARAMS_TYPE[codec]):
        raise ScenarioInvalid(f"{s.id.value} needs {_PARAMS_TYPE[codec].__name__}")
    if s.intruder is not intruder:
        raise ScenarioInvalid(f"{s.id.value} intruder must be {intruder.value}")
    if s.receiver is not receiver:
        raise ScenarioInvalid(f"{s.id.value} receiver must be {receiver.value if receiver else 'external'}")
    if s.intruder.security is not SecurityState.SECURE:
        raise ScenarioInvalid("intruder must be a secure master")
    if s.noise.em is not None and s.id is not AttackId.A1_EM_EXFIL:
        raise ScenarioInvalid("EM observation noise only applies to a1")
    if s.codec is CodecKind.BURST and (s.noise.jitter_ns or s.noise.interference):
        raise ScenarioInvalid("the a3 gate line is not sampled and sees no governor traffic")
    if s.start_ns < 2:
        raise ScenarioInvalid("start_ns must leave room for clock setup")


def default_scenario(attack: AttackId | str, secret: bytes = DEFAULT_SECRET, seed: int = 0) -> AttackScenario:
    """Canonical configuration of each attack, using the parameter values reported for it."""
    attack = AttackId.parse(attack) if isinstance(attack, str) else attack
    codec, intruder, receiver = _WIRING[attack]
    if codec is CodecKind.DWELL:
        params = DwellParams(325 * MHZ, 433 * MHZ, tempo_1=400, tempo_2=200, tempo_3=200)
    elif codec is CodecKind.EDGE:
        # 2708 iterations at 325 MHz: a 16.66 us bit, i.e. about 6e4 bps
        params = EdgeParams(325 * MHZ, 433 * MHZ, tempo_1=2708)
    else:
        params = BurstParams(250 * MHZ, cycles_for_1=10, cycles_for_0=5, gap_cycles=2)
    return AttackScenario(attack, intruder, receiver, codec, params, secret=bytes(secret), seed=seed)


def with_seed(s: AttackScenario, seed: int) -> AttackScenario:
    """Reseed the scenario and every noise source it carries."""
    noise = s.noise
    if noise.em is not None:
        noise = dataclasses.replace(noise, em=dataclasses.replace(noise.em, seed=seed + 1))
    if noise.interference is not None:
        noise = dataclasses.replace(noise, interference=dataclasses.replace(noise.interference, seed=seed + 2))
    return dataclasses.replace(s, seed=seed, noise=noise)


# -- overrides ---------------------------------------------------------------

NOISE_KEYS = ("freq_sigma", "dropout_prob", "jitter_ns", "interference_rate")
SCENARIO_KEYS = ("observe_period_ns", "start_ns")
_EDGE_TIMING = ("freq_1", "tempo_1", "cycles_per_iteration")


def overridable(attack: AttackId) -> tuple[str, ...]:
    codec = _WIRING[attack][0]
    names = [f.name for f in dataclasses.fields(_PARAMS_TYPE[codec])]
    if codec is CodecKind.BURST:
        return tuple(names) + ("start_ns",)
    noise = list(NOISE_KEYS) if attack is AttackId.A1_EM_EXFIL else ["jitter_ns", "interference_rate"]
    extra = list(SCENARIO_KEYS) if attack is AttackId.A1_EM_EXFIL else ["start_ns"]
    return tuple(names + noise + extra)


def _coerce(name: str, value, want_int: bool):
    if isinstance(value, str):
        try:
            value = int(value, 0)
        except ValueError:
            try:
                value = float(value)
            except ValueError:
                raise ScenarioInvalid(f"{name}: {value!r} is not a number") from None
    if want_int:
        if isinstance(value, float):
            if not value.is_integer():
                raise ScenarioInvalid(f"{name} must be an integer, got {value}")
            value = int(value)
        return value
    return float(value)


def apply_overrides(s: AttackScenario, overrides: Mapping[str, object]) -> AttackScenario:
    """Return ``s`` with named parameters replaced. Unknown names raise ScenarioInvalid.

    Changing the edge-keying timing without giving ``tempo_sampling`` keeps the
    receiver polling at half a half-bit.
    """
    allowed = overridable(s.id)
    for name in overrides:
        if name not in allowed:
            raise ScenarioInvalid(f"{name!r} is not a parameter of {s.id.value}; choose from {', '.join(allowed)}")
    param_names = {f.name for f in dataclasses.fields(type(s.params))}
    p_changes = {k: _coerce(k, v, True) for k, v in overrides.items() if k in param_names}
    if isinstance(s.params, EdgeParams) and "tempo_sampling" not in p_changes \
            and any(k in p_changes for k in _EDGE_TIMING):
        p_changes["tempo_sampling"] = None
    try:
        params = dataclasses.replace(s.params, **p_changes)
    except (TypeError, ValueError) as exc:
        raise ScenarioInvalid(str(exc)) from exc

    noise = s.noise
    try:
        if "freq_sigma" in overrides or "dropout_prob" in overrides:
            em = noise.em or EmNoiseParams(seed=s.seed + 1)
            em = dataclasses.replace(
                em,
                freq_sigma=_coerce("freq_sigma", overrides.get("freq_sigma", em.freq_sigma), False),
                dropout_prob=_coerce("dropout_prob", overrides.get("dropout_prob", em.dropout_prob), False),
            )
            noise = dataclasses.replace(noise, em=em)
        if "jitter_ns" in overrides:
            noise = dataclasses.replace(noise, jitter_ns=_coerce("jitter_ns", overrides["jitter_ns"], True))
        if "interference_rate" in overrides:
            rate = _coerce("interference_rate", overrides["interference_rate"], False)
            inter = noise.interference or InterferenceParams(
                rate, (params.freq_1, params.freq_2), seed=s.seed + 2)
            noise = dataclasses.replace(noise, interference=dataclasses.replace(inter, rate_per_second=rate))
    except ValueError as exc:
        raise ScenarioInvalid(str(exc)) from exc

    scen = {k: _coerce(k, overrides[k], True) for k in SCENARIO_KEYS if k in overrides}
    out = dataclasses.replace(s, params=params, noise=noise, **scen)
    validate_scenario(out)
    return out


# -- reports -----------------------------------------------------------------

@dataclass
class AttackReport:
    scenario_id: AttackId
    seed: int
    secret_sent: bytes
    payload_recovered: bytes | None
    decode_error: str | None
    sent_bits: str
    received_bits: str
    bits_sent: int
    bit_errors: int
    bit_error_rate: float
    elapsed_ns: int
    bandwidth_bps: float
    peak_bandwidth_bps: float | None
    direct_access_blocked: bool
    params: dict
    traces: dict[str, FrequencyTrace | GateTrace] = field(repr=False, default_factory=dict)
    trace_rows: list[TraceRow] = field(repr=False, default_factory=list)

    @property
    def recovered(self) -> bool:
        return self.payload_recovered == self.secret_sent

    def trace_rows_by_clock(self) -> dict[str, list[TraceRow]]:
        out: dict[str, list[TraceRow]] = {}
        for row in self.trace_rows:
            out.setdefault(row.clock, []).append(row)
        return out

    def to_dict(self, trace_files: Mapping[str, str] | None = None) -> dict:
        if self.payload_recovered is None:
            recovered = {"error": self.decode_error}
        else:
            recovered = self.payload_recovered.hex()
        return {
            "scenario": self.scenario_id.value,
            "seed": self.seed,
            "params": self.params,
            "secret_sent": self.secret_sent.hex(),
            "payload_recovered": recovered,
            "recovered": self.recovered,
            "bits_sent": self.bits_sent,
            "bit_errors": self.bit_errors,
            "bit_error_rate": self.bit_error_rate,
            "elapsed_ns": self.elapsed_ns,
            "bandwidth_bps": self.bandwidth_bps,
            "peak_bandwidth_bps": self.peak_bandwidth_bps,
            "direct_access_blocked": self.direct_access_blocked,
            "sent_bits": self.sent_bits,
            "received_bits": self.received_bits,
            "traces": dict(trace_files or {}),
        }

    def to_json(self, trace_files: Mapping[str, str] | None = None) -> str:
        return json.dumps(self.to_dict(trace_files), indent=2) + "\n"


def scenario_params(s: AttackScenario) -> dict:
    out = dataclasses.asdict(s.params)
    out["jitter_ns"] = s.noise.jitter_ns
    if s.noise.em is not None:
        out.update(freq_sigma=s.noise.em.freq_sigma, dropout_prob=s.noise.em.dropout_prob)
    if s.noise.interference is not None:
        out["interference_rate"] = s.noise.interference.rate_per_second
    if s.id is AttackId.A1_EM_EXFIL:
        out["observe_period_ns"] = s.observe_period_ns
    out["start_ns"] = s.start_ns
    return out


# -- the run -----------------------------------------------------------------

def _direct_read_blocked(soc, receiver: MasterId | None, n: int) -> bool:
    if receiver is None:
        return True  # the external observer has no bus access at all
    try:
        soc.memory.read_block(receiver, SECURE_BASE, max(n, 1))
    except PermissionDenied:
        return True
    return False


def run_attack(s: AttackScenario) -> AttackReport:
    validate_scenario(s)
    soc = build_soc(s.secret)
    blocked = _direct_read_blocked(soc, s.receiver, len(s.secret))

    secret = soc.memory.read_block(s.intruder, SECURE_BASE, len(s.secret))
    sent = frame_encode(secret)
    p = s.params
    traces: dict[str, FrequencyTrace | GateTrace] = {}
    received = ""
    error = None

    if s.codec is CodecKind.BURST:
        gates = burst_encode(sent, p, start=s.start_ns)
        end = gates.end if len(gates) else s.start_ns
        actions = [
            WriteFreq(s.intruder, ClockId.FCLK0, p.frequency, 0),
            WriteFreq(s.intruder, ClockId.FCLK1, p.frequency, 0),
            SetGate(s.intruder, ClockId.FCLK1, True, 1),
        ]
        actions += burst_actions(gates, s.intruder, ClockId.FCLK0)
        actions.append(SetGate(s.intruder, ClockId.FCLK1, False, max(end, 2)))
        ctl = run_schedule(actions, soc.clocks)
        observed = ctl.gate_trace(ClockId.FCLK0)
        traces = {"fclk0": observed, "fclk1": ctl.frequency_trace(ClockId.FCLK1, until=end)}
        rows = ctl.export_rows(until=end, clocks=[ClockId.FCLK0, ClockId.FCLK1])
        elapsed = gates.duration
        try:
            received = burst_decode(observed, p)
        except DecodeError as exc:
            error = f"{type(exc).__name__}: {exc}"
    else:
        encode = dwell_encode if s.codec is CodecKind.DWELL else edge_encode
        trace = encode(sent, p, start=s.start_ns)
        actions = trace_to_actions(trace, s.intruder, ClockId.CPU_CLK)
        if s.noise.interference is not None:
            actions = inject_interference(actions, s.noise.interference, horizon=trace.end)
        ctl = run_schedule(actions, soc.clocks)
        observed = ctl.frequency_trace(ClockId.CPU_CLK, until=trace.end)
        traces = {"cpu_clk": observed}
        rows = ctl.export_rows(until=trace.end, clocks=[ClockId.CPU_CLK])
        elapsed = trace.duration
        try:
            if s.codec is CodecKind.DWELL:
                samples = sample_trace(observed, s.observe_period_ns, s.noise.jitter_ns, s.seed)
                if s.noise.em is not None:
                    samples = em_observe(samples, s.noise.em)
                received = dwell_decode(trace_from_samples(samples, p.freq_1, p.freq_2), p)
            else:
                times = sample_times(trace.start, trace.end, p.tempo_sampling, s.noise.jitter_ns, s.seed)
                samples = [(t, ctl.read_clock_register(s.receiver, ClockId.CPU_CLK, t)) for t in times.tolist()]
                received = edge_decode_samples(samples, p)
        except DecodeError as exc:
            error = f"{type(exc).__name__}: {exc}"

    payload = None
    if error is None:
        try:
            payload = frame_decode(received)
        except DecodeError as exc:
            error = f"{type(exc).__name__}: {exc}"

    peak = table1_peak_bandwidth(p.frequency, p.cycles_for_0) if s.codec is CodecKind.BURST else None
    return AttackReport(
        scenario_id=s.id,
        seed=s.seed,
        secret_sent=bytes(s.secret),
        payload_recovered=payload,
        decode_error=error,
        sent_bits=sent,
        received_bits=received,
        bits_sent=len(sent),
        bit_errors=bit_errors(sent, received),
        bit_error_rate=bit_error_rate(sent, received),
        elapsed_ns=elapsed,
        bandwidth_bps=measure_bandwidth(len(sent), elapsed),
        peak_bandwidth_bps=peak,
        direct_access_blocked=blocked,
        params=scenario_params(s),
        traces=traces,
        trace_rows=rows,
    )


def derive_seed(base_seed: int, *keys: int) -> int:
    """Independent 31-bit seed for a (point, repetition) pair of a sweep."""
    return int(np.random.SeedSequence([base_seed, *keys]).generate_state(1)[0] & 0x7FFFFFFF)
