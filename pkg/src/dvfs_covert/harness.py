"""Parameter sweeps over the attack scenarios, and the sweep spec/CSV formats.

A sweep spec is flat ``key = value`` text::

    # tempo sweep of the core-to-core channel
    scenario = a2
    repetitions = 3
    seed = 7
    jitter_ns = 20
    grid.tempo_1 = 100, 200, 400

``grid.<param>`` lines are swept (cartesian product, in file order); other
parameter lines are fixed overrides.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .attacks import (
    AttackId,
    AttackReport,
    apply_overrides,
    default_scenario,
    derive_seed,
    overridable,
    run_attack,
    with_seed,
)
from .errors import CovertChannelError, ScenarioInvalid
from .metrics import bit_error_rate, measure_bandwidth, table1_peak_bandwidth  # noqa: F401  (re-exported)

SWEEP_STAT_COLUMNS = ("bits_sent", "bit_errors", "ber", "bandwidth_bps")

# (frequency Hz, cycles for 1, cycles for 0, reported bandwidth bps)
TABLE1_ROWS = (
    (250_000_000, 10, 5, 50_000_000),
    (250_000_000, 3, 2, 125_000_000),
    (100_000_000, 10, 5, 20_000_000),
    (100_000_000, 3, 2, 50_000_000),
)


@dataclass(frozen=True)
class ChannelStats:
    bits_sent: int
    bit_errors: int
    elapsed_ns: int
    bandwidth_bps: float
    ber: float

    @classmethod
    def from_report(cls, r: AttackReport) -> ChannelStats:
        return cls(r.bits_sent, r.bit_errors, r.elapsed_ns, r.bandwidth_bps, r.bit_error_rate)


@dataclass(frozen=True)
class SweepSpec:
    scenario: AttackId
    grid: dict[str, list]
    repetitions: int = 1
    base_seed: int = 0
    fixed: dict[str, object] = field(default_factory=dict)
    secret: bytes | None = None

    def __post_init__(self):
        if not self.grid or any(len(v) == 0 for v in self.grid.values()):
            raise ScenarioInvalid("sweep grid must name at least one parameter with at least one value")
        if self.repetitions < 1:
            raise ScenarioInvalid("repetitions must be at least 1")

    def points(self) -> list[dict[str, object]]:
        names = list(self.grid)
        return [dict(zip(names, combo)) for combo in itertools.product(*self.grid.values())]


@dataclass(frozen=True)
class SweepPoint:
    params: dict[str, object]
    runs: tuple[ChannelStats, ...]

    @property
    def stats(self) -> ChannelStats:
        """Totals of bits and errors, mean BER and mean bandwidth over the repetitions."""
        n = len(self.runs)
        return ChannelStats(
            bits_sent=sum(r.bits_sent for r in self.runs),
            bit_errors=sum(r.bit_errors for r in self.runs),
            elapsed_ns=sum(r.elapsed_ns for r in self.runs),
            bandwidth_bps=sum(r.bandwidth_bps for r in self.runs) / n,
            ber=sum(r.ber for r in self.runs) / n,
        )


def _run_one(spec: SweepSpec, index: int, point: dict, rep: int) -> ChannelStats:
    base = default_scenario(spec.scenario)
    if spec.secret is not None:
        base = dataclasses.replace(base, secret=spec.secret)
    scenario = apply_overrides(base, {**spec.fixed, **point})
    scenario = with_seed(scenario, derive_seed(spec.base_seed, index, rep))
    return ChannelStats.from_report(run_attack(scenario))


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[SweepPoint]:
    """One attack run per grid point and repetition; rows come back in grid order."""
    points = spec.points()
    # fail fast on bad names or values before any work is scheduled
    base = default_scenario(spec.scenario)
    for point in points:
        apply_overrides(base, {**spec.fixed, **point})
    jobs = [(i, point, rep) for i, point in enumerate(points) for rep in range(spec.repetitions)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(_run_one, *zip(*[(spec, i, p, r) for i, p, r in jobs])))
    else:
        stats = [_run_one(spec, i, p, r) for i, p, r in jobs]
    out = []
    for i, point in enumerate(points):
        runs = stats[i * spec.repetitions:(i + 1) * spec.repetitions]
        out.append(SweepPoint(point, tuple(runs)))
    return out


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def sweep_csv_text(spec: SweepSpec, points: list[SweepPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(spec.grid)
    w.writerow(names + list(SWEEP_STAT_COLUMNS))
    for pt in points:
        st = pt.stats
        w.writerow([_fmt(pt.params[n]) for n in names]
                   + [st.bits_sent, st.bit_errors, _fmt(st.ber), _fmt(st.bandwidth_bps)])
    return buf.getvalue()


# -- spec files --------------------------------------------------------------

class SweepSpecError(CovertChannelError):
    def __init__(self, source: str, line: int, message: str):
        super().__init__(f"{source}:{line}: {message}")
        self.line = line


def _number(text: str):
    try:
        return int(text, 0)
    except ValueError:
        return float(text)


def parse_secret(text: str) -> bytes:
    text = text.strip()
    if text.lower().startswith("0x"):
        text = text[2:]
    if len(text) % 2:
        text = "0" + text
    return bytes.fromhex(text)


def parse_sweep_spec(text: str, source: str = "<sweep spec>") -> SweepSpec:
    scenario = None
    repetitions, seed, secret = 1, 0, None
    grid: dict[str, list] = {}
    fixed: dict[str, object] = {}
    where: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SweepSpecError(source, lineno, f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise SweepSpecError(source, lineno, "empty key or value")
        try:
            if key == "scenario":
                scenario = AttackId.parse(value)
            elif key == "repetitions":
                repetitions = int(value)
            elif key == "seed":
                seed = int(value, 0)
            elif key == "secret":
                secret = parse_secret(value)
            elif key.startswith("grid."):
                name = key[5:]
                values = [v.strip() for v in value.split(",")]
                if not name or any(not v for v in values):
                    raise ValueError("grid line needs a parameter name and comma-separated values")
                grid[name] = [_number(v) for v in values]
                where[name] = lineno
            else:
                fixed[key] = _number(value)
                where[key] = lineno
        except (ValueError, ScenarioInvalid) as exc:
            raise SweepSpecError(source, lineno, str(exc)) from None
    if scenario is None:
        raise SweepSpecError(source, 0, "missing 'scenario = a1|a2|a3|a4'")
    if not grid:
        raise SweepSpecError(source, 0, "no 'grid.<param> = v1, v2, ...' lines")
    allowed = overridable(scenario)
    for name, lineno in where.items():
        if name not in allowed:
            raise SweepSpecError(source, lineno, f"{name!r} is not a parameter of {scenario.value}")
    if repetitions < 1:
        raise SweepSpecError(source, 0, "repetitions must be at least 1")
    return SweepSpec(scenario, grid, repetitions, seed, fixed, secret)
