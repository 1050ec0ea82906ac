"""Command-line entry point: ``spadsim {simulate,hist,fit,sweep,compare}``.

Exit status is 0 on success, 1 on a usage or configuration error and 2 when
the run itself fails (unreadable input, failed fit, ...).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from . import io as spio
from .config import ConfigError, load_config
from .detector import generate_pulse_train
from .harness import (RATE_MODES, SweepReport, compare_to_reference, point_params,
                      preset_config, run_sweep)
from .reference import COLUMNS, load_reference
from .resolver import resolve_bits
from .sampling import derive_seed, parse_seed
from .stats import FitError, fit_afterpulse, interarrival_histogram, serial_autocorrelation, \
    subtract_background

PRESETS = ("sim1", "sim2", "sim3")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", metavar="PATH", help="TOML run configuration")
    p.add_argument("--seed", metavar="U64", type=parse_seed, help="master seed (decimal or 0x hex)")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--threads", metavar="N", type=int, help="worker threads for sweeps")
    p.add_argument("--format", choices=("csv", "json-lines"), help="output format")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = _Parser(prog="spadsim", parents=[common],
                     description="Monte Carlo single-photon detector and beam-splitter RNG simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_options(p):
        p.add_argument("--preset", choices=PRESETS, help="dead-time preset (default sim2)")
        p.add_argument("--window", type=float, metavar="NS", help="coincidence window in ns")
        p.add_argument("--mode", choices=RATE_MODES, help="rate mode")

    p = sub.add_parser("simulate", parents=[common], help="simulate one rate point")
    run_options(p)
    p.add_argument("--frequency", type=float, required=True, metavar="HZ")
    p.add_argument("--n-pulses", type=int, default=1_000_000, help="pulses per detector")
    p.add_argument("--pulses0", metavar="PATH", help="write detector 0 pulse train")
    p.add_argument("--pulses1", metavar="PATH", help="write detector 1 pulse train")

    for name, text in (("hist", "interval histogram of a pulse train"),
                       ("fit", "afterpulse fit of a pulse train")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--train", required=True, metavar="PATH", help=".pulses file")
        p.add_argument("--bin-width", type=float, default=1.0, metavar="NS")
        p.add_argument("--t-max", type=float, default=1000.0, metavar="NS")
        p.add_argument("--rate", type=float, metavar="HZ",
                       help="photon rate for the background shape (default: train mean rate)")
        if name == "fit":
            p.add_argument("--dead", type=float, required=True, metavar="NS")
            p.add_argument("--fit-start", type=float, metavar="NS")
            p.add_argument("--fit-stop", type=float, metavar="NS")
            p.add_argument("--tau-guess", type=float, default=40.0, metavar="NS")

    p = sub.add_parser("sweep", parents=[common], help="autocorrelation over a rate grid")
    run_options(p)
    p.add_argument("--n-bits", type=int, metavar="N", help="bits per rate point")
    p.add_argument("--frequencies", type=float, nargs="+", metavar="HZ")

    p = sub.add_parser("compare", parents=[common], help="compare a sweep CSV with the reference table")
    p.add_argument("--run", required=True, metavar="PATH", help="sweep CSV")
    p.add_argument("--column", choices=COLUMNS, default="meas")
    return parser


def _run_config(args):
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        if args.preset:
            raise UsageError("give either --config or --preset, not both")
    else:
        cfg = preset_config(args.preset or "sim2")
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["master_seed"] = args.seed
    if args.window is not None:
        changes["resolver"] = replace(cfg.resolver, coincidence_window_ns=args.window)
    if args.mode:
        changes["rate_mode"] = args.mode
    if getattr(args, "n_bits", None):
        changes["n_bits_per_point"] = args.n_bits
    if getattr(args, "frequencies", None):
        changes["frequencies_hz"] = tuple(args.frequencies)
    return replace(cfg, **changes)


def _emit(args, text: str) -> None:
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _records(args, records: list[dict], csv_text: str) -> str:
    if getattr(args, "format", "csv") == "json-lines":
        return "".join(json.dumps(r) + "\n" for r in records)
    return csv_text


def _kv(args, summary: dict) -> str:
    if getattr(args, "format", "csv") == "json-lines":
        return json.dumps(summary) + "\n"
    return "key,value\n" + "".join(f"{k},{v}\n" for k, v in summary.items())


def cmd_simulate(args) -> None:
    cfg = _run_config(args)
    (p0, d0), (p1, d1) = point_params(cfg, args.frequency)
    s0, s1 = derive_seed(cfg.master_seed, 0), derive_seed(cfg.master_seed, 1)
    t0 = generate_pulse_train(p0, s0, n_pulses=args.n_pulses, dead_ns=d0)
    t1 = generate_pulse_train(p1, s1, n_pulses=args.n_pulses, dead_ns=d1)
    if args.pulses0:
        spio.write_pulses(args.pulses0, t0)
    if args.pulses1:
        spio.write_pulses(args.pulses1, t1)
    # cut both trains to their common span so neither leaves a solo tail
    end = min(t0.timestamps[-1], t1.timestamps[-1]) if len(t0) and len(t1) else 0.0
    stream = resolve_bits(t0.timestamps[t0.timestamps <= end],
                          t1.timestamps[t1.timestamps <= end], cfg.resolver)
    summary = {"frequency_hz": args.frequency, "n_bits": len(stream),
               "n_zeros": stream.n_zeros, "n_ones": stream.n_ones,
               "n_coincidences": stream.n_coincidences,
               "rate_d0_hz": 1e9 * len(t0) / t0.timestamps[-1] if len(t0) else 0.0,
               "rate_d1_hz": 1e9 * len(t1) / t1.timestamps[-1] if len(t1) else 0.0,
               "dead_d0_ns": d0, "dead_d1_ns": d1, "mode": cfg.rate_mode,
               "seed": cfg.master_seed}
    if len(stream) >= 3 and 0 < stream.n_ones < len(stream):
        ac = serial_autocorrelation(stream, 1)
        summary.update(autocorr=ac.coefficient, std_error=ac.std_error)
    out = getattr(args, "out", None)
    if out:
        spio.write_bits(out, stream)
    sys.stdout.write(_kv(args, summary))


def _histogram(args):
    ts = spio.read_pulses(args.train)
    if ts.size < 2:
        raise ValueError(f"{args.train}: need at least two pulses")
    rate = args.rate or 1e9 * (ts.size - 1) / (ts[-1] - ts[0])
    hist = interarrival_histogram(ts, args.bin_width, args.t_max)
    return subtract_background(hist, rate), rate


def cmd_hist(args) -> None:
    hist, _ = _histogram(args)
    records = [{"bin_start_ns": float(t), "count": int(c), "background": float(b),
                "residual": float(r)}
               for t, c, b, r in zip(hist.bin_starts, hist.counts, hist.background,
                                     hist.residual_clamped)]
    _emit(args, _records(args, records, hist.to_csv()))


def cmd_fit(args) -> None:
    hist, rate = _histogram(args)
    window = None
    if args.fit_start is not None or args.fit_stop is not None:
        window = (args.dead + 5.0 if args.fit_start is None else args.fit_start,
                  args.dead + 5.0 * args.tau_guess if args.fit_stop is None else args.fit_stop)
    fit = fit_afterpulse(hist, args.dead, window, tau_guess_ns=args.tau_guess)
    summary = {"photon_rate_hz": rate, "total_intervals": hist.total_intervals}
    summary.update(fit.summary())
    _emit(args, _kv(args, summary))


def cmd_sweep(args) -> None:
    cfg = _run_config(args)
    report = run_sweep(cfg, threads=max(1, getattr(args, "threads", 1)))
    records = report.to_records()
    if getattr(args, "format", "csv") == "json-lines":
        records.append({"summary": True, "label": report.label,
                        "coincidence_window_ns": report.window_ns,
                        **{f"R_{k}": v for k, v in report.rms_vs().items()}})
    _emit(args, _records(args, records, report.to_csv()))


def cmd_compare(args) -> None:
    with open(args.run) as fh:
        report = SweepReport.from_csv(fh.read())
    cmp = compare_to_reference(report, load_reference(), args.column)
    records = [vars(r) for r in cmp.rows] + [{f"R_{cmp.column}": cmp.rms}]
    _emit(args, _records(args, records, cmp.to_csv()))


COMMANDS = {"simulate": cmd_simulate, "hist": cmd_hist, "fit": cmd_fit,
            "sweep": cmd_sweep, "compare": cmd_compare}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"spadsim: {exc}", file=sys.stderr)
        return 1
    except (FitError, spio.FormatError, OSError, ValueError, ArithmeticError,
            RuntimeError) as exc:
        print(f"spadsim {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
