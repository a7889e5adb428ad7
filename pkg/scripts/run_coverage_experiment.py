#!/usr/bin/env python3
"""Run a configured envelope-coverage experiment and print the check table.

Usage:
    python3 scripts/run_coverage_experiment.py [config.json]

Defaults to configs/default.json.  Artifacts (report.json, coverage.csv,
constants.csv, trajectory CSVs) land in the config's output_dir.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from stoplab.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config", nargs="?",
                        default=str(Path(__file__).resolve().parents[1]
                                    / "configs" / "default.json"))
    args = parser.parse_args()
    return cli_main(["run", args.config])


if __name__ == "__main__":
    sys.exit(main())
