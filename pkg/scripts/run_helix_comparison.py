#!/usr/bin/env python3
"""Reproduce the synthetic helix comparison: the full method versus the
plain supervised-contrastive baseline versus end-to-end L1 regression,
over several seeds, with label-permuted arms and smoothness gaps.

Usage: python scripts/run_helix_comparison.py [--out DIR] [--seeds N]
"""

import argparse
import os
import sys
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from supremix.cli import main as cli_main

HELIX_CONFIG_PATH = os.path.join(os.path.dirname(__file__), "..", "configs",
                                 "helix_comparison.toml")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="out/helix_comparison")
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--permuted", action="store_true", default=True)
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    argv = ["compare", "--config", HELIX_CONFIG_PATH, "--out", args.out,
            "--seeds", str(args.seeds)]
    if args.permuted:
        argv.append("--permuted")
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
