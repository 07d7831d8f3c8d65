"""Command-line front end.

Exit status: 0 success, 1 usage or configuration error, 2 channel failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path
from typing import Callable, Sequence

from .attacks import AttackId, AttackReport, apply_overrides, default_scenario, run_attack, with_seed
from .errors import CovertChannelError
from .harness import TABLE1_ROWS, parse_secret, parse_sweep_spec, run_sweep, sweep_csv_text
from .metrics import table1_peak_bandwidth
from .traces import trace_csv_text

EXIT_OK, EXIT_USAGE, EXIT_CHANNEL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_sets(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _load_secret(text: str | None) -> bytes | None:
    if text is None:
        return None
    if text.lower().startswith("0x"):
        try:
            return parse_secret(text)
        except ValueError as exc:
            raise UsageError(f"bad hex secret {text!r}: {exc}") from None
    path = Path(text)
    if not path.is_file():
        raise UsageError(f"secret {text!r} is neither 0x-prefixed hex nor a readable file")
    return path.read_bytes()


def _scenario(args):
    s = default_scenario(args.attack)
    secret = _load_secret(args.secret)
    if secret is not None:
        s = dataclasses.replace(s, secret=secret)
    s = apply_overrides(s, _parse_sets(args.set))
    return with_seed(s, args.seed)


def _write_traces(report: AttackReport, out: Path) -> dict[str, str]:
    files = {}
    for clock, rows in report.trace_rows_by_clock().items():
        name = f"{report.scenario_id.value}_{clock}.csv"
        (out / name).write_text(trace_csv_text(rows))
        files[clock] = name
    return files


def cmd_run(args) -> int:
    report = run_attack(_scenario(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = _write_traces(report, out)
    report_path = out / f"report_{report.scenario_id.value}.json"
    report_path.write_text(report.to_json(files))
    status = "recovered" if report.recovered else f"FAILED ({report.decode_error or 'payload mismatch'})"
    print(f"{report.scenario_id.value}: {status}; BER {report.bit_error_rate:.4g}; "
          f"{report.bandwidth_bps:.6g} bps over {report.elapsed_ns} ns; report {report_path}")
    return EXIT_OK if report.recovered else EXIT_CHANNEL


def cmd_export_trace(args) -> int:
    report = run_attack(_scenario(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in _write_traces(report, out).values():
        print(out / name)
    return EXIT_OK


def cmd_table1(formula: Callable[[int, int], float] = table1_peak_bandwidth, out=None) -> int:
    """Print the reference burst-rate table next to computed peak rates; 0 iff every row matches."""
    out = out or sys.stdout
    ok = True
    print(f"{'freq_MHz':>8} {'cycles_1':>8} {'cycles_0':>8} {'reported_Mbps':>13} {'computed_Mbps':>13}  match", file=out)
    for freq, c1, c0, reported in TABLE1_ROWS:
        got = formula(freq, c0)
        match = got == reported
        ok &= match
        print(f"{freq // 10**6:>8} {c1:>8} {c0:>8} {reported / 1e6:>13g} {got / 1e6:>13g}  {'yes' if match else 'NO'}",
              file=out)
    return EXIT_OK if ok else EXIT_CHANNEL


def cmd_sweep(args) -> int:
    path = Path(args.spec)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read sweep spec: {exc}") from None
    spec = parse_sweep_spec(text, source=str(path))
    if args.seed is not None:
        spec = dataclasses.replace(spec, base_seed=args.seed)
    points = run_sweep(spec, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / (args.csv or f"sweep_{path.stem}.csv")
    csv_path.write_text(sweep_csv_text(spec, points))
    print(csv_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="dvfs-out", help="output directory (default: %(default)s)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a scenario parameter (repeatable)")

    p = _Parser(prog="dvfs-covert", description="DVFS covert-channel simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, helptext in (("run", "run one attack and write its report"),
                           ("export-trace", "run one attack and write only its trace CSVs")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--attack", required=True, choices=[a.value for a in AttackId])
        sp.add_argument("--secret", help="0x-prefixed hex or a file of raw bytes (default: TRUSTZONE-SECRET)")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("sweep", parents=[common], help="run a parameter sweep from a spec file")
    sp.add_argument("spec")
    sp.add_argument("--seed", type=int, default=None, help="override the sweep file's base seed")
    sp.add_argument("--csv", help="CSV file name inside --out")
    sp.add_argument("--workers", type=int, default=None)

    # the table is fixed, so the global flags are accepted but change nothing
    sp = sub.add_parser("table1", parents=[common], help="check computed peak burst rates against the reference table")
    sp.add_argument("--seed", type=int, default=0)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "export-trace":
            return cmd_export_trace(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_table1()
    except (UsageError, CovertChannelError) as exc:
        print(f"dvfs-covert: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
