#!/usr/bin/env python3
"""Regenerate src/versekit/data/versification/*.vrs from the Paratext tables.

The upstream files ship with SIL's `sil-machine` package (MIT licence)::

    pip download sil-machine==1.9.2 --no-deps -d /tmp/silm
    python3 -m zipfile -e /tmp/silm/sil_machine-1.9.2-py3-none-any.whl /tmp/silm/x
    python3 scripts/build_versification_data.py /tmp/silm/x/machine/scripture

The upstream tables are read with Paratext semantics (mapping ranges expand in
lockstep from their start verses, a verse mapped twice keeps its last mapping,
segment letters are ignored) and rewritten in the stricter format the package
loads: one claim per scheme verse, equal-length ranges, `&` for many-to-one.
A mapping whose target has no line in the index is kept (the verse then has no
Original counterpart), except that deuterocanon verses relocated into a book
without lines of its own stay on their own line.
"""
import argparse
import re
import sys
from collections import Counter
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from versekit.versification import (  # noqa: E402
    ALL_BOOKS, DT_BOOKS, OBSOLETE_BOOKS, SCHEME_FILES, VersificationScheme, load_versification_table,
)

UPSTREAM = {
    VersificationScheme.ORIGINAL: "org.vrs.txt",
    VersificationScheme.ENGLISH: "eng.vrs.txt",
    VersificationScheme.RUSSIAN_ORTHODOX: "rso.vrs.txt",
    VersificationScheme.RUSSIAN_PROTESTANT: "rsc.vrs.txt",
    VersificationScheme.SEPTUAGINT: "lxx.vrs.txt",
    VersificationScheme.VULGATE: "vul.vrs.txt",
}

REF = re.compile(r"^([0-9A-Z]{3}) (\d+):(\d+)[a-z]?$")


def live_part(line):
    parts = line.split("#", 1)
    body = parts[0].strip()
    comment = parts[1].strip() if len(parts) == 2 else ""
    if not body and comment.startswith("!") and len(comment) > 2:
        return comment[1:].strip()
    if line.startswith("#"):
        return ""
    return body


def side(text):
    text = text.strip()
    if "-" in text:
        head, limit = text.split("-")
        limit = int(re.sub(r"[a-z]$", "", limit))
    else:
        head, limit = text, None
    m = REF.match(head)
    if not m:
        raise ValueError(text)
    return (m.group(1), int(m.group(2)), int(m.group(3))), limit


def read_upstream(text):
    extents = {}
    excluded = set()
    forward = {}
    for raw in text.splitlines():
        line = live_part(raw)
        if not line or line.startswith("*"):
            continue
        if "=" in line:
            left, right = line.lstrip("&").split("=")
            try:
                (lb, lc, lv), llim = side(left)
                (rb, rc, rv), rlim = side(right)
            except ValueError:
                print(f"  skipped unparsable mapping: {line}")
                continue
            if line.startswith("&"):
                lefts = [(lb, lc, v) for v in range(lv, (llim or lv) + 1)]
                rights = [(rb, rc, v) for v in range(rv, (rlim or rv) + 1)]
                for a in lefts:
                    for b in rights:
                        forward[a] = b
            else:
                v, w = lv, rv
                while True:
                    forward[(lb, lc, v)] = (rb, rc, w)
                    if v >= (llim or 0):
                        break
                    v += 1
                    w += 1
        elif line.startswith("-"):
            m = REF.match(line[1:].strip())
            excluded.add((m.group(1), int(m.group(2)), int(m.group(3))))
        else:
            parts = line.split()
            book = parts[0]
            chapters = dict(extents.get(book, {}))
            for tok in parts[1:]:
                if tok == "END":
                    break
                c, v = tok.split(":")
                chapters[int(c)] = int(v)
            extents[book] = chapters
    return extents, excluded, forward


def key(ref):
    return (ALL_BOOKS.index(ref[0]), ref[1], ref[2])


def fmt(ref):
    return f"{ref[0]} {ref[1]}:{ref[2]}"


def emit(scheme, extents, excluded, forward, provenance):
    out = [f"# scheme: {scheme.value}",
           f"# Generated by scripts/build_versification_data.py from {provenance}.",
           "# Grammar: docs/versification-format.md", ""]
    for book in sorted(extents, key=ALL_BOOKS.index):
        chs = extents[book]
        out.append(book + " " + " ".join(f"{c}:{chs[c]}" for c in sorted(chs)))
    if excluded:
        out.append("")
        out.extend("-" + fmt(r) for r in sorted(excluded, key=key))
    items = sorted(forward.items(), key=lambda kv: key(kv[0]))
    targets = Counter(forward.values())
    out.append("")
    i = 0
    while i < len(items):
        s, t = items[i]
        if targets[t] > 1:
            # many-to-one: gather the contiguous run of sources sharing this target
            j = i
            while (j + 1 < len(items) and items[j + 1][1] == t and items[j + 1][0][:2] == s[:2]
                   and items[j + 1][0][2] == items[j][0][2] + 1):
                j += 1
            last = items[j][0][2]
            rng = f"-{last}" if last != s[2] else ""
            out.append(f"&{fmt(s)}{rng} = {fmt(t)}")
            i = j + 1
            continue
        j = i
        while (j + 1 < len(items)):
            s2, t2 = items[j + 1]
            ps, pt = items[j]
            if (targets[t2] == 1 and s2[:2] == s[:2] and t2[:2] == t[:2]
                    and s2[2] == ps[2] + 1 and t2[2] == pt[2] + 1):
                j += 1
            else:
                break
        n = j - i
        if n:
            out.append(f"{fmt(s)}-{s[2] + n} = {fmt(t)}-{t[2] + n}")
        else:
            out.append(f"{fmt(s)} = {fmt(t)}")
        i = j + 1
    return "\n".join(out) + "\n"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("upstream", type=Path, help="directory holding the *.vrs.txt files")
    ap.add_argument("--out", type=Path,
                    default=Path(__file__).resolve().parents[1] / "src/versekit/data/versification")
    ap.add_argument("--provenance", default="sil-machine 1.9.2 (MIT licence)")
    args = ap.parse_args()

    org_extents, _, _ = read_upstream((args.upstream / UPSTREAM[VersificationScheme.ORIGINAL]).read_text("utf-8"))
    index = set()
    for book, chs in org_extents.items():
        if book in OBSOLETE_BOOKS:
            continue
        for c, top in chs.items():
            index.update((book, c, v) for v in range(1, top + 1))
    print(f"Original index: {len(index)} verses")

    counts = Counter(b for b, _, _ in index)
    rows = [f"{b}\t{counts[b]}" for b in ALL_BOOKS if counts[b]]
    (args.out.parent / "book_counts.tsv").write_text(
        "# verses per book in the Original-scheme line index\n" + "\n".join(rows) + "\n", encoding="utf-8")

    args.out.mkdir(parents=True, exist_ok=True)
    for scheme, fname in UPSTREAM.items():
        print(f"{scheme.value}:")
        extents, excluded, forward = read_upstream((args.upstream / fname).read_text("utf-8"))
        valid = set()
        for book, chs in extents.items():
            for c, top in chs.items():
                valid.update((book, c, v) for v in range(1, top + 1))
        valid -= excluded
        resolved = {}
        dropped = Counter()
        for s, t in forward.items():
            if scheme is VersificationScheme.ORIGINAL:
                dropped["original scheme maps to itself"] += 1
                continue
            if s not in valid and not (s[2] == 0 and (s[0], s[1]) in
                                       {(b, c) for b, chs in extents.items() for c in chs}):
                dropped["source outside scheme extents"] += 1
                continue
            if s in excluded:
                dropped["source excluded"] += 1
                continue
            if t not in index and s[0] in DT_BOOKS and s in index:
                # e.g. S3Y relocated into DAG, a book without lines of its own:
                # keep the text in its own book
                dropped["deuterocanon verse kept on its own line"] += 1
                continue
            if s == t:
                continue
            resolved[s] = t
        for why, n in sorted(dropped.items()):
            print(f"  {why}: {n}")
        text = emit(scheme, extents, excluded, resolved, args.provenance)
        (args.out / SCHEME_FILES[scheme]).write_text(text, encoding="utf-8")
        table = load_versification_table(text, scheme)
        print(f"  {len(table.mappings)} mapping lines, {len(table.excluded_verses)} excluded verses")


if __name__ == "__main__":
    main()
