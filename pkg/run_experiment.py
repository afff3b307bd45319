#!/usr/bin/env python3
"""
sshh-walk - run a recipe from a source checkout.

  python run_experiment.py recipes/berry_trion_jump.json results/
"""

import argparse
import os
import sys

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "src"))

from sshh_walk.cli.main import main as cli_main  # noqa: E402


def main() -> int:
    """Run ``recipe`` into ``output_dir``; use ``sshh-walk`` for every option."""
    parser = argparse.ArgumentParser(
        description="Run an sshh-walk recipe",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s recipes/berry_trion_jump.json
  %(prog)s recipes/trion_walk.json ./results --threads 4
  %(prog)s recipes/two_trion_walk.json --validate
        """,
    )
    parser.add_argument("recipe", help="Recipe JSON file or a previous output file")
    parser.add_argument(
        "output_dir", nargs="?", default=None, help="Output directory (default: the recipe's)"
    )
    parser.add_argument("--threads", type=int, help="Worker processes")
    parser.add_argument("--validate", action="store_true", help="Only print diagnostics")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")
    args = parser.parse_args()

    argv = ["validate" if args.validate else "run", "--config", args.recipe]
    if args.output_dir:
        argv += ["--out", args.output_dir]
    if args.threads is not None:
        argv += ["--threads", str(args.threads)]
    if args.verbose:
        argv.append("--verbose")
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
