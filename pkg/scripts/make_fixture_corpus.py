#!/usr/bin/env python3
"""Write the synthetic six-translation project used by the pipeline tests.

    python3 scripts/make_fixture_corpus.py /tmp/toy [--seed N]

The directory gets USFM sources, corpus.tsv, pairing.yaml and config.yaml.
"""
import argparse

from versekit.toy import write_toy_project


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("root")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(write_toy_project(args.root, args.seed))


if __name__ == "__main__":
    main()
