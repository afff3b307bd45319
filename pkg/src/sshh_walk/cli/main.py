#!/usr/bin/env python3
"""
Command-line interface for sshh-walk.
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Tuple

from ..config.config import OUTPUT_FORMATS, load_recipe, resolve_recipe
from ..core.exceptions import (
    BandIdentificationError,
    CapacityError,
    GapClosureError,
    NoFrontError,
    NumericError,
    RecipeError,
)
from ..core.runner import ExperimentRunner, summarize

logger = logging.getLogger(__name__)

THREADS_ENV = "SSHH_WALK_THREADS"

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_SCHEMA = 2
EXIT_CAPACITY = 3
EXIT_GAP_CLOSURE = 4
EXIT_NUMERIC = 5

# Checked in order; the first matching class decides the exit code.
ERROR_KINDS: List[Tuple[type, str, int]] = [
    (RecipeError, "schema", EXIT_SCHEMA),
    (CapacityError, "capacity", EXIT_CAPACITY),
    (GapClosureError, "gap_closure", EXIT_GAP_CLOSURE),
    (NumericError, "numeric", EXIT_NUMERIC),
    (BandIdentificationError, "band_identification", EXIT_NUMERIC),
    (NoFrontError, "no_front", EXIT_NUMERIC),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sshh-walk",
        description="Quantum walks and Berry phases of SU(N) SSH-Hubbard chains",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Run a recipe
  sshh-walk run --config recipes/berry_trion_jump.json --out results/

  # Replay the run that produced an output file
  sshh-walk run --config results/berry.csv --out replay/

  # Check dimensions, memory and gaps before a long run
  sshh-walk validate --config recipes/trion_walk.json
        """,
    )
    parser.add_argument("action", choices=["run", "validate"], help="What to do with the recipe")
    parser.add_argument(
        "--config", "-c", required=True, help="Recipe JSON file or a previous output file"
    )
    parser.add_argument("--seed", type=int, help="Override the recipe seed (unsigned 64-bit)")
    parser.add_argument(
        "--threads",
        type=int,
        help=f"Worker processes (default: ${THREADS_ENV} or 1)",
    )
    parser.add_argument("--out", "-o", help="Output directory (default: the recipe's)")
    parser.add_argument("--format", choices=OUTPUT_FORMATS, help="Table format")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")
    return parser


def resolve_threads(flag: Optional[int], environ: Optional[Dict[str, str]] = None) -> int:
    """Worker count: the flag, else the environment variable, else 1."""
    environ = os.environ if environ is None else environ
    if flag is not None:
        threads = flag
    elif environ.get(THREADS_ENV):
        try:
            threads = int(environ[THREADS_ENV])
        except ValueError:
            raise RecipeError(f"{THREADS_ENV} must be an integer, got {environ[THREADS_ENV]!r}")
    else:
        threads = 1
    if threads == 0 or threads < -1:
        raise RecipeError(f"Thread count must be positive or -1, got {threads}")
    return threads


def _load_configuration(args: argparse.Namespace) -> Dict[str, Any]:
    """Load the recipe and apply command-line overrides."""
    recipe = load_recipe(args.config)
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None or args.format is not None:
        overrides["output"] = dict(recipe["output"])
        if args.out is not None:
            overrides["output"]["dir"] = args.out
        if args.format is not None:
            overrides["output"]["format"] = args.format
    if overrides:
        recipe = resolve_recipe(dict(recipe, **overrides))
    return recipe


def error_record(error: BaseException) -> Tuple[Dict[str, Any], int]:
    """Machine-readable description of a failed run and its exit code."""
    kind, code = "unexpected", EXIT_UNEXPECTED
    for cls, name, exit_code in ERROR_KINDS:
        if isinstance(error, cls):
            kind, code = name, exit_code
            break
    record: Dict[str, Any] = {"error": kind, "message": str(error), "exit_code": code}
    if isinstance(error, CapacityError):
        record.update(dimension=error.dimension, cap=error.cap)
    if isinstance(error, GapClosureError):
        record.update(theta=error.theta, gap=error.gap)
    if kind == "unexpected":
        record["type"] = type(error).__name__
    return record, code


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the CLI."""
    args = build_parser().parse_args(argv)

    logging.basicConfig(level=logging.INFO)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        recipe = _load_configuration(args)
        threads = resolve_threads(args.threads)
        runner = ExperimentRunner(recipe, n_jobs=threads)

        if args.action == "validate":
            print(json.dumps(summarize(*runner.preflight()), indent=2))
            return EXIT_OK

        paths = runner.run()
        logger.info(f"Wrote {len(paths)} files to {os.path.abspath(recipe['output']['dir'])}")
        return EXIT_OK

    except Exception as e:
        record, code = error_record(e)
        if code == EXIT_UNEXPECTED:
            logger.exception(f"Run failed: {e}")
        else:
            logger.error(f"Run failed ({record['error']}): {e}")
        print(json.dumps(record), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
