"""Command-line entry point.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 a
``selftest`` acceptance criterion failed.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import ConfigError, load, load_preset, preset_names
from .pipeline import StageError, run_scenario

EXIT_OK, EXIT_VALIDATION, EXIT_ACCEPTANCE = 0, 1, 2

MODE_COMMANDS = {
    "tx-spectrum": "synthesize the transmit signal and write its spectrum and band edges",
    "simulate": "write de-chirp captures as binary files",
    "track": "estimate range, speed and direction for every capture",
    "image": "form range/cross-range images",
    "sweep": "transmit spectra over a tone-frequency or bandwidth sweep",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_VALIDATION)


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="scenario INI file")
    src.add_argument("--preset", metavar="NAME", help="built-in scenario (see 'selftest --list-presets')")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory (default: ./out)")
    common.add_argument("--seed", type=_u64, help="override the scenario RNG seed")
    common.add_argument("--jobs", type=_positive_int, default=1, help="concurrent captures (default 1)")

    parser = _Parser(prog="photoradar", description="Composite LFM + single-tone photonic radar simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in MODE_COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    st = sub.add_parser("selftest", parents=[common], help="run the acceptance criteria")
    st.add_argument("--only", metavar="N", type=int, action="append", help="run criterion N (repeatable)")
    st.add_argument("--list-presets", action="store_true", help="print preset names and exit")
    return parser


def _load(args):
    if args.config:
        return load(args.config)
    if args.preset:
        return load_preset(args.preset)
    raise ConfigError("give --config PATH or --preset NAME")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        if args.list_presets:
            print("\n".join(preset_names()))
            return EXIT_OK
        from .selftest import CRITERIA, run_all

        unknown = sorted(set(args.only or ()) - {n for n, _, _ in CRITERIA})
        if unknown:
            print(f"photoradar: no acceptance criterion {', '.join(map(str, unknown))}", file=sys.stderr)
            return EXIT_VALIDATION
        results = run_all(only=args.only, jobs=args.jobs, seed=args.seed)
        for r in results:
            print(r.line())
        return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE

    try:
        cfg = _load(args)
        result = run_scenario(cfg, args.out, jobs=args.jobs, mode=args.command, seed=args.seed)
    except ConfigError as exc:
        print(f"photoradar: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        print(f"photoradar: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    sys.stdout.write((result.out_dir / "summary.txt").read_text())
    print(f"outputs written to {result.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
