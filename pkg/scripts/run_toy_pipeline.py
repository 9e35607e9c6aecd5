#!/usr/bin/env python3
"""Build the synthetic project and run every pipeline command over it.

    python3 scripts/run_toy_pipeline.py /tmp/toy [--seed N] [--jobs N]

Prints one line per command with its exit code and run time, then the
pairing decision and the score summaries.
"""
import argparse
import sys
import time
from pathlib import Path

from versekit.cli import main as cli
from versekit.toy import write_toy_project

STEPS = ("validate", "fetch", "extract", "clean", "stats", "pairs", "split", "align", "score")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("root", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    config = write_toy_project(args.root, args.seed)
    for step in STEPS:
        t0 = time.monotonic()
        code = cli([step, "--config", str(config), "--jobs", str(args.jobs), "-q"])
        print(f"{step:9s} exit={code} {time.monotonic() - t0:6.2f}s")
        if code:
            sys.exit(code)
    out = args.root / "out"
    print((out / "pairs" / "toy.audit.tsv").read_text(encoding="utf-8"), end="")
    for summary in sorted((out / "score").rglob("summary.txt")):
        print(f"== {summary.parent.relative_to(out)}")
        print(summary.read_text(encoding="utf-8"), end="")


if __name__ == "__main__":
    main()
