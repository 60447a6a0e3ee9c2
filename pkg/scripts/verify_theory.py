#!/usr/bin/env python3
"""Run the full property-check battery and print one line per check.

Usage: python scripts/verify_theory.py [--out DIR]
"""

import argparse
import os
import sys
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from supremix.cli import main as cli_main

REFERENCE_CONFIG = """
[verify]
trials = 1000
grad_batches = 20
bound_trials = 200
taus = [1.0, 0.5, 0.2, 0.1, 0.05]
"""


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="out/verify")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    with tempfile.NamedTemporaryFile("w", suffix=".toml", delete=False) as fh:
        fh.write(REFERENCE_CONFIG)
        config_path = fh.name
    try:
        return cli_main(["verify", "--config", config_path, "--out", args.out])
    finally:
        os.unlink(config_path)


if __name__ == "__main__":
    sys.exit(main())
