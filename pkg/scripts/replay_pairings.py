#!/usr/bin/env python3
"""Run pairing selection over the shipped candidate sets and print each decision.

    python3 scripts/replay_pairings.py [--audit] [--scale F] [FILE ...]

With no files, every built-in family is used.  `--scale` multiplies all scores
first; decisions should not change.  Each audit trail is also replayed on its
own and checked against the decision.
"""
import argparse
import sys

from versekit.tasks import builtin_families, load_family, replay, select_pairing


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("files", nargs="*")
    ap.add_argument("--audit", action="store_true", help="print the audit trails")
    ap.add_argument("--scale", type=float, default=1.0)
    args = ap.parse_args()
    ok = True
    for name in args.files or list(builtin_families()):
        cs = load_family(name)
        if args.scale != 1.0:
            cs = cs.scaled(args.scale)
        d = select_pairing(cs)
        same = replay(d.audit) == d.triple
        ok &= same
        print(f"{cs.family:16s} source={d.source:14s} target={d.target:14s} related={d.related:14s} "
              f"replay={'ok' if same else 'MISMATCH'}")
        if args.audit:
            print(d.audit_text())
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
