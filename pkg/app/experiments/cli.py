"""
Command-line entry point: runs one experiment and writes its report, tables and metrics.
"""
import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

import torch

from app.core.config import load_settings
from app.core.errors import ConfigError, LandslideError
from app.core.prometheus import increment_error_count, write_metrics
from app.experiments.runner import COMMANDS, ExperimentOutput
from app.geometry.serialization import save_surface

logger = logging.getLogger("landslide")

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0 or value >= 2**64:
        raise argparse.ArgumentTypeError(f"expected an unsigned 64-bit integer, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landslide", description="Numerical experiments for the landslide flow on hyperbolic surfaces."
    )
    parser.add_argument("--config", type=Path, default=None, help="TOML file overriding the defaults")
    parser.add_argument("--seed", type=_non_negative, default=None)
    parser.add_argument("--out", type=Path, default=Path("out"), help="directory for report.json and tables")
    parser.add_argument("--samples", type=_positive, default=None)
    parser.add_argument("--strict", action="store_true", help="gate the earthquake-limit checks")
    parser.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR"), default=None)
    parser.add_argument("command", choices=sorted(COMMANDS))
    return parser


def _write_outputs(out: Path, output: ExperimentOutput):
    output.report.write(out)
    for name, table in output.tables.items():
        table.to_csv(out / f"{name}.csv", index=False)
    for name, (surface, metric, ops) in output.surfaces.items():
        save_surface(out / f"{name}.json", surface, metric, ops)
    write_metrics(out / "metrics.prom")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE

    try:
        config = load_settings(args.config)
    except ConfigError as exc:
        print(f"landslide: {exc}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=args.log_level or config.LOG_LEVEL,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler()],
    )
    if config.thread_limit is not None:
        torch.set_num_threads(config.thread_limit)

    seed = config.SEED if args.seed is None else args.seed
    samples = config.SAMPLES if args.samples is None else args.samples
    logger.info(
        f"{config.PROJECT_NAME} {config.VERSION}: running {args.command} with seed {seed} and {samples} samples"
    )

    start = time.perf_counter()
    try:
        output = COMMANDS[args.command](config, seed, samples, args.strict)
    except LandslideError as exc:
        logger.error(f"{args.command} aborted: {exc}")
        increment_error_count(type(exc).__name__, args.command)
        return EXIT_FAIL
    output.report.wall_time = time.perf_counter() - start
    _write_outputs(args.out, output)

    for record in output.report.checks:
        status = "ok" if record.passed else ("FAIL" if record.gating else "fail (non-gating)")
        logger.info(f"{record.name}: {record.value:.3e} {record.comparison.value} {record.tolerance:.3e} {status}")
    if not output.report.passed:
        logger.error(f"{args.command}: {len(output.report.failures)} gating checks failed")
        return EXIT_FAIL
    return EXIT_PASS
