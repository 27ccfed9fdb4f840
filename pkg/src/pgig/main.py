# -*- coding: utf-8 -*-
"""
Main entry point for pgig.

Parses the command line, resolves the configuration (bundled defaults,
--config file, .env, flags) and runs one command. Exit codes:
0 success, 2 configuration/usage error, 3 precondition error,
4 numeric error.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pgig import __version__
from pgig.cli.commands import COMMANDS, CommandResult, cmd_rerun, run_command
from pgig.core.attribution import METHOD_NAMES
from pgig.utils.config import Settings, load_environment
from pgig.utils.errors import PgigError
from pgig.utils.logger import setup_logging


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI configuration file")
    common.add_argument("--seed", type=int, help="run seed (unsigned 64-bit)")
    common.add_argument("--out", type=str, help="output directory (or file for render)")
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for INFO, -vv for DEBUG")
    return common


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per command."""
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="pgig",
        description="Pattern-guided integrated gradients: attribution methods, "
                    "stress test and degradation benchmark",
    )
    parser.add_argument("--version", action="version", version=f"pgig {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sub.add_parser("stress", parents=[common],
                   help="run the saturation/distractor stress test")

    sub.add_parser("train", parents=[common],
                   help="generate the synthetic image task and train a classifier")

    patterns = sub.add_parser("patterns", parents=[common],
                              help="fit patterns to a trained network")
    patterns.add_argument("--network", required=True, help="network file")
    patterns.add_argument("--data", required=True,
                          help="directory with train.csv, or a split CSV file")

    explain = sub.add_parser("explain", parents=[common], help="explain a single input",
                             epilog=f"methods: {', '.join(METHOD_NAMES)}")
    explain.add_argument("--network", required=True, help="network file")
    explain.add_argument("--method", help="attribution method (default from config)")
    source = explain.add_mutually_exclusive_group()
    source.add_argument("--input", dest="input_file", help="CSV file with one input row")
    source.add_argument("--data", help="dataset directory or split CSV file")
    explain.add_argument("--index", type=int, help="example index within --data")
    explain.add_argument("--target", type=int, help="output index (default: predicted class)")
    explain.add_argument("--reference", help="reference split CSV for expected_gradients")
    explain.add_argument("--png", action="store_true", help="also write a PNG heatmap")
    explain.add_argument("--scale", type=int, default=1, help="heatmap enlargement factor")

    degrade = sub.add_parser("degrade", parents=[common], help="run the degradation benchmark",
                             epilog=f"methods: {', '.join(METHOD_NAMES)}")
    degrade.add_argument("--network", required=True, help="network file with patterns")
    degrade.add_argument("--data", required=True, help="dataset directory or split CSV file")
    degrade.add_argument("--method", help="comma-separated methods (default from config)")
    degrade.add_argument("--reference", help="reference split CSV for expected_gradients")
    degrade.add_argument("--limit", type=int, help="only use the first N images")

    render = sub.add_parser("render", parents=[common],
                            help="render an attribution map CSV as an image")
    render.add_argument("map_file", metavar="MAP", help="attribution map CSV")
    render.add_argument("--png", action="store_true", help="also write a PNG")
    render.add_argument("--scale", type=int, default=1, help="enlargement factor")

    rerun = sub.add_parser("rerun", help="re-execute a command from its manifest.json")
    rerun.add_argument("manifest", help="manifest.json or its directory")
    rerun.add_argument("--out", type=str, help="write outputs here instead")
    rerun.add_argument("-v", "--verbose", action="count", default=0)

    return parser


def resolve_settings(args: argparse.Namespace) -> Settings:
    """Defaults, --config, environment, then flags."""
    settings = Settings.load(args.config)
    if args.seed is not None:
        settings.set("run", "seed", args.seed, origin="--seed")
    method = getattr(args, "method", None)
    if method:
        section = "degradation" if args.command == "degrade" else "attribution"
        key = "methods" if args.command == "degrade" else "method"
        settings.set(section, key, method, origin="--method")
    return settings


def _command_arguments(args: argparse.Namespace, settings: Settings) -> Dict[str, Any]:
    skip = {"command", "config", "seed", "method", "verbose"}
    arguments = {k: v for k, v in vars(args).items() if k not in skip}
    if arguments.get("out") is None:
        arguments["out"] = str(settings.out_dir / args.command)
    return arguments


def report(result: CommandResult) -> int:
    """Print a result and return its exit code."""
    if result.success:
        print(f"✓ {result.message}")
        if result.manifest:
            print(f"  manifest: {result.manifest}")
    else:
        print(f"✗ {result.message}", file=sys.stderr)
    return result.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    load_environment()
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging({0: None, 1: "INFO"}.get(args.verbose, "DEBUG"))

    if args.command == "rerun":
        return report(run_command(cmd_rerun, args.manifest, args.out))

    try:
        settings = resolve_settings(args)
    except (PgigError, FileNotFoundError) as e:
        return report(CommandResult.failure(e))

    command = COMMANDS[args.command]
    return report(run_command(command, settings, **_command_arguments(args, settings)))


if __name__ == "__main__":
    sys.exit(main())
