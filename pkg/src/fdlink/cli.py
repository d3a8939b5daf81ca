"""Command-line front end.

    fdlink simulate --config run.cfg --out results.csv --grid 0:2:30 --modes ps,psb
    fdlink channel synth --out antenna.csv --isolation -50 --ripple 3 --delay 5
    fdlink channel import antenna.csv
    fdlink report results.csv
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .canceller import CancellationMode
from .channel import (
    ChannelSource,
    MeasurementFormatError,
    load_frequency_response,
    passband_to_baseband,
    save_frequency_response,
    synth_antenna_response,
    to_impulse_response,
)
from .harness import ResultTable, SimulationConfig, sweep
from .metrics import to_db

log = logging.getLogger("fdlink")


class CliError(Exception):
    """User-facing failure; message is printed and the exit status is 2."""


def read_config_file(path) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def parse_override(text: str) -> tuple:
    if "=" not in text:
        raise CliError(f"override {text!r} is not of the form KEY=VALUE")
    key, value = (part.strip() for part in text.split("=", 1))
    return key, value


def parse_grid(text: str) -> list:
    """``START:STEP:STOP`` in dB, stop inclusive."""
    try:
        start, step, stop = (float(p) for p in text.split(":"))
    except ValueError:
        raise CliError(f"grid {text!r} is not START:STEP:STOP") from None
    if step <= 0 or stop < start:
        raise CliError(f"grid {text!r} must have a positive step and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def parse_modes(text: str) -> list:
    try:
        return [CancellationMode.parse(m) for m in text.split(",") if m.strip()]
    except ValueError as exc:
        raise CliError(str(exc)) from None


def build_config(config_path, overrides) -> SimulationConfig:
    values = read_config_file(config_path) if config_path else {}
    for item in overrides or ():
        key, value = parse_override(item)
        values[key] = value
    try:
        return SimulationConfig.from_mapping(values)
    except KeyError as exc:
        raise CliError(exc.args[0]) from None
    except ValueError as exc:
        raise CliError(f"invalid configuration: {exc}") from None


def manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest")


def write_manifest(path: Path, cfg: SimulationConfig, grid, modes, channel) -> None:
    lines = [
        f"tool = fdlink {__version__}",
        f"timestamp = {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}",
        f"config_fingerprint = {cfg.fingerprint()}",
        f"grid = {','.join(repr(g) for g in grid)}",
        f"modes = {','.join(m.value for m in modes)}",
    ]
    lines += [f"config.{k} = {v}" for k, v in cfg.to_mapping().items()]
    lines += [f"channel.{k} = {v}" for k, v in cfg.channel_provenance().items()]
    lines += [
        f"channel.taps = {len(channel)}",
        f"channel.energy = {channel.energy!r}",
        f"channel.captured_energy = {channel.captured_energy!r}",
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_simulate(args) -> int:
    cfg = build_config(args.config, args.override)
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if changes:
        try:
            cfg = cfg.replace(**changes)
        except ValueError as exc:
            raise CliError(f"invalid configuration: {exc}") from None
    grid = parse_grid(args.grid)
    modes = parse_modes(args.modes)
    out = Path(args.out)
    try:
        channel = cfg.build_si_channel()
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot build self-interference channel: {exc}") from None
    log.info("sweeping %d points x %d modes x %d trials", len(grid), len(modes), cfg.trials)
    table = sweep(cfg, grid, modes, channel_si=channel)
    try:
        table.write_csv(out)
        write_manifest(manifest_path(out), cfg, grid, modes, channel)
    except OSError as exc:
        raise CliError(f"cannot write results: {exc}") from None
    print(f"wrote {len(table.rows)} rows to {out}")
    return 0


def cmd_channel_synth(args) -> int:
    try:
        fr = synth_antenna_response(
            args.isolation,
            args.ripple,
            args.delay,
            args.points,
            args.seed,
            center_freq=args.center,
            bandwidth=args.bandwidth,
        )
        save_frequency_response(fr, args.out)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc.strerror}") from None
    print(f"wrote {len(fr)} points to {args.out}")
    return 0


def cmd_channel_import(args) -> int:
    try:
        fr = load_frequency_response(args.path)
        chan = to_impulse_response(
            passband_to_baseband(fr), args.rate, args.max_taps, args.threshold,
            ChannelSource.MEASURED,
        )
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from None
    except MeasurementFormatError as exc:
        raise CliError(f"malformed measurement file: {exc}") from None
    except ValueError as exc:
        raise CliError(str(exc)) from None
    peak = int(np.argmax(np.abs(chan.taps)))
    print(f"points          {len(fr)}")
    print(f"center_freq_hz  {fr.center_freq:.6g}")
    print(f"bandwidth_hz    {fr.bandwidth:.6g}")
    print(f"taps            {len(chan)}")
    print(f"dominant_tap    {peak}")
    print(f"energy_db       {to_db(chan.energy):.3f}")
    print(f"captured_energy {chan.captured_energy:.6f}")
    return 0


def _fmt(x: float, width: int = 9, prec: int = 3) -> str:
    return f"{x:{width}.{prec}f}" if math.isfinite(x) else f"{x!s:>{width}}"


def cmd_report(args) -> int:
    path = Path(args.results)
    if not path.is_file():
        raise CliError(f"results file not found: {path}")
    try:
        table = ResultTable.read_csv(path)
    except ValueError as exc:
        raise CliError(f"corrupt results: {exc}") from None
    ps = {r.ebn0_db: r for r in table.select(CancellationMode.PS)}
    psb = {r.ebn0_db: r for r in table.select(CancellationMode.PS_B)}
    common = sorted(set(ps) & set(psb))
    if not common:
        raise CliError("results need both PS and PS+B rows at the same Eb/N0")
    print(
        f"{'EbN0':>6} {'SINR_PS':>9} {'SINR_PSB':>9} {'Lambda':>9} "
        f"{'R_PS':>9} {'R_PSB':>9} {'BER_PS':>10} {'BER_PSB':>10}"
    )
    gains, rate_deltas = [], []
    for e in common:
        a, b = ps[e], psb[e]
        gain = to_db(b.sinr_linear / a.sinr_linear) if a.sinr_linear > 0 else math.inf
        gains.append(gain)
        rate_deltas.append(b.rate_bps_hz - a.rate_bps_hz)
        print(
            f"{e:6.1f} {_fmt(a.sinr_db)} {_fmt(b.sinr_db)} {_fmt(gain)} "
            f"{_fmt(a.rate_bps_hz)} {_fmt(b.rate_bps_hz)} {a.ber:10.3e} {b.ber:10.3e}"
        )
    i_gain = int(np.argmax(gains))
    i_rate = int(np.argmax(rate_deltas))
    print(f"max SINR gain   {gains[i_gain]:.3f} dB at {common[i_gain]:g} dB")
    print(f"max rate delta  {rate_deltas[i_rate]:.3f} bps/Hz at {common[i_rate]:g} dB")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdlink", description=__doc__.splitlines()[0] or None)
    parser.add_argument("--version", action="version", version=f"fdlink {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an Eb/N0 sweep and write results CSV")
    sim.add_argument("--config", help="flat key = value config file")
    sim.add_argument("--out", default="results.csv")
    sim.add_argument("--grid", default="0:2:30", help="START:STEP:STOP in dB")
    sim.add_argument("--modes", default="ps,psb")
    sim.add_argument("--trials", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--override", action="append", metavar="KEY=VALUE", default=[])
    sim.set_defaults(func=cmd_simulate)

    chan = sub.add_parser("channel", help="import or synthesise antenna responses")
    chan_sub = chan.add_subparsers(dest="channel_command", required=True)
    imp = chan_sub.add_parser("import", help="validate a measurement file")
    imp.add_argument("path")
    imp.add_argument("--rate", type=float, default=20e6, help="simulation rate in Hz")
    imp.add_argument("--max-taps", type=int, default=16)
    imp.add_argument("--threshold", type=float, default=0.99)
    imp.set_defaults(func=cmd_channel_import)
    syn = chan_sub.add_parser("synth", help="write a synthetic antenna response")
    syn.add_argument("--out", required=True)
    syn.add_argument("--isolation", type=float, default=-50.0, help="dB")
    syn.add_argument("--ripple", type=float, default=3.0, help="dB peak")
    syn.add_argument("--delay", type=float, default=5.0, help="group delay in ns")
    syn.add_argument("--points", type=int, default=201)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--center", type=float, default=2.438e9, help="Hz")
    syn.add_argument("--bandwidth", type=float, default=20e6, help="Hz")
    syn.set_defaults(func=cmd_channel_synth)

    rep = sub.add_parser("report", help="summarise a results CSV")
    rep.add_argument("results")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"fdlink: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
