"""
Command-line front end.

Subcommands::

    ofdmest sweep          --config FILE --out DIR [--workers N] [--seed S] [--svg on|off]
    ofdmest probe-channel  --config FILE --out DIR
    ofdmest estimate-once  --config FILE --out DIR [--symbol N] [--snr DB]
    ofdmest list-methods

Exit codes: 0 success, 2 configuration error, 3 runtime error.  Files are
only written inside the output directory, and files created by a failing
command are removed again.
"""

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

from .config import _SCHEMA, METHOD_PARAMS, parse_config
from .errors import ConfigError, OfdmEstError
from .harness import estimate_once, probe_channel, results_csv, run_sweep, write_results
from .methods import DESCRIPTIONS
from .plotting import (plot_csv, save_estimate_svg, save_metric_svg,
                       save_probe_svg)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("ofdmest")


def _keys_help() -> str:
    lines = ["configuration keys (section.key = default):"]
    for section, keys in _SCHEMA.items():
        for key, (_, default) in keys.items():
            lines.append(f"  {section}.{key} = {default}")
    lines.append("method parameters ([methods.<name>] sections):")
    for name, params in METHOD_PARAMS.items():
        for key, (_, default, desc) in params.items():
            lines.append(f"  methods.{name}.{key} = {default}    {desc}")
    lines.append("exit codes: 0 ok, 2 config error, 3 runtime error")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="configuration file")
    common.add_argument("--out", type=Path, default=Path("out"),
                        help="output directory (default: ./out)")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="section.key=value applied after parsing (repeatable)")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--svg", choices=("on", "off"), default="on",
                        help="also write SVG figures (default: on)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="ofdmest", description="OFDM channel-estimation benchmark",
        epilog=_keys_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo BER/MSE sweep",
                       epilog=_keys_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="worker processes (default: all cores)")
    sub.add_parser("probe-channel", parents=[common],
                   help="compare fading autocorrelation with J0")
    p = sub.add_parser("estimate-once", parents=[common],
                       help="dump one channel estimate per subcarrier")
    p.add_argument("--symbol", type=int, default=0, help="OFDM symbol to dump")
    p.add_argument("--snr", type=float, help="SNR in dB (default: first grid value)")
    sub.add_parser("list-methods", help="list estimator tags and parameters")
    return parser


def _load_config(args, require_methods=True):
    if args.config is None:
        raise ConfigError("--config", "a configuration file is required")
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {args.config}: {exc.strerror}") from None
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"sweep.master_seed={args.seed}")
    if getattr(args, "snr", None) is not None:
        overrides.append(f"sweep.snr_db={args.snr!r}")
    return parse_config(text, overrides, require_methods=require_methods)


class _Outputs:
    """Tracks files written into the output directory so failures can undo them."""

    def __init__(self, root: Path):
        self.root = root
        self.created_root = not root.exists()
        self.files = []

    def path(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        p = self.root / name
        self.files.append(p)
        return p

    def write(self, name: str, text: str):
        self.path(name).write_text(text, encoding="utf-8")

    def rollback(self):
        for p in self.files:
            p.unlink(missing_ok=True)
        if self.created_root and self.root.exists() and not any(self.root.iterdir()):
            self.root.rmdir()


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else
                    (str(v) if isinstance(v, int) else format(float(v), ".17g"))
                    for v in row])
    return buf.getvalue()


def cmd_sweep(args, out: _Outputs) -> int:
    cfg = _load_config(args)
    if args.workers < 1:
        raise ConfigError("--workers", "must be >= 1")
    result = run_sweep(cfg, workers=args.workers)
    out.write("results.csv", results_csv(result))
    write_results(result, out.path("results.json"), fmt="json")
    for metric in cfg.metrics:
        out.write(f"plot_{metric}.csv", plot_csv(result.records, metric))
        if args.svg == "on":
            save_metric_svg(result.records, metric, out.path(f"plot_{metric}.svg"))
    return EXIT_OK


def cmd_probe_channel(args, out: _Outputs) -> int:
    cfg = _load_config(args, require_methods=False)
    lags, emp, ref = probe_channel(cfg)
    rows = [(int(m), e, r) for m, e, r in zip(lags, emp, ref)]
    out.write("probe.csv", _csv_text(("lag", "empirical_autocorr_real", "j0_reference"), rows))
    if args.svg == "on":
        save_probe_svg(lags, emp, ref, out.path("probe.svg"))
    return EXIT_OK


def cmd_estimate_once(args, out: _Outputs) -> int:
    cfg = _load_config(args)
    if len(cfg.methods) != 1:
        raise ConfigError("sweep.methods", "estimate-once needs exactly one method")
    if not 0 <= args.symbol < cfg.n_symbols_per_trial:
        raise ConfigError("--symbol", f"must be in [0, {cfg.n_symbols_per_trial})")
    truth, est = estimate_once(cfg)
    h_true, h_hat = truth[args.symbol], est.h_hat[args.symbol]
    rows = [(k, t.real, t.imag, e.real, e.imag, abs(e - t))
            for k, (t, e) in enumerate(zip(h_true, h_hat))]
    out.write("estimate.csv", _csv_text(
        ("k", "H_true_re", "H_true_im", "H_hat_re", "H_hat_im", "abs_err"), rows))
    if args.svg == "on":
        save_estimate_svg(h_true, h_hat, out.path("estimate.svg"))
    return EXIT_OK


def cmd_list_methods(args) -> int:
    for name, params in METHOD_PARAMS.items():
        print(f"{name:8s} {DESCRIPTIONS[name]}")
        for key, (_, default, desc) in params.items():
            print(f"    {key} = {default}    {desc}")
    return EXIT_OK


COMMANDS = {
    "sweep": cmd_sweep,
    "probe-channel": cmd_probe_channel,
    "estimate-once": cmd_estimate_once,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list-methods":
        return cmd_list_methods(args)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    out = _Outputs(args.out)
    try:
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        out.rollback()
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OfdmEstError, ArithmeticError, ValueError, OSError) as exc:
        out.rollback()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
