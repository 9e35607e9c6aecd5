"""Synthetic multi-translation corpus for pipeline tests.

Every verse gets a fixed sequence of concept ids.  Each toy language renders
concepts with its own word forms; sibling languages share roots, and the
gateway source is noisier than the national one, so alignment scores rank
the pairings in a predictable way.  Output is USFM plus a corpus manifest,
a pairing candidate file and a pipeline config, all deterministic.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from pathlib import Path

import yaml

from .digest import tree_digest
from .versification import BookId, default_index

TOY_BOOKS = ("GEN", "RUT", "PSA", "HOS", "JON", "MAL", "MAT", "MRK", "LUK", "JHN", "ACT", "ROM",
             "1TH", "2TH", "1TI", "2TI", "TIT", "REV")
GEN_CHAPTERS = 12
PSA_CHAPTERS = 12
SYLLABLES = ("ka", "lo", "mi", "ne", "su", "ta", "ri", "po", "vu", "de", "ga", "hu")
N_CONCEPTS = 400


@dataclass(frozen=True)
class ToyLanguage:
    tid: str
    books: tuple[str, ...]
    vowel_shift: dict
    noise: float       # chance a concept gets an idiosyncratic word
    drop: float        # chance a concept is left out
    swap: float        # chance two neighbouring words trade places
    suffix: str
    scope: str
    license: str = "CC BY-SA"


def _nt(books):
    return tuple(b for b in books if b in ("MAT", "MRK", "LUK", "JHN", "ACT", "ROM", "1TH", "2TH", "1TI",
                                           "2TI", "TIT", "REV"))


ALL = TOY_BOOKS
LANGUAGES = (
    ToyLanguage("nat-natbib", ALL, {}, 0.02, 0.01, 0.02, "", "Bible"),
    ToyLanguage("gwy-gwybib", ALL, {"a": "e", "o": "u"}, 0.35, 0.08, 0.2, "n", "Bible", "CC BY-NC"),
    ToyLanguage("tga-tgaNT", _nt(ALL) + ("GEN", "RUT", "PSA", "HOS", "MAL"), {"a": "o", "i": "e"}, 0.08, 0.03,
                0.05, "k", "NT+"),
    ToyLanguage("tgb-tgbNT", _nt(ALL), {"a": "o", "i": "e", "u": "o"}, 0.12, 0.03, 0.05, "t", "NT",
                "CC BY-NC-ND"),
    ToyLanguage("rla-rla", _nt(ALL) + ("GEN",), {"a": "o", "i": "e", "e": "a"}, 0.15, 0.04, 0.05, "ko", "NT+"),
    ToyLanguage("rlb-rlb", _nt(ALL), {"a": "o", "e": "i"}, 0.25, 0.05, 0.08, "r", "NT", "Public Domain"),
)
SOURCES = ("nat-natbib", "gwy-gwybib")
TARGETS = ("tga-tgaNT", "tgb-tgbNT")
RELATED = ("tga-tgaNT", "tgb-tgbNT", "rla-rla", "rlb-rlb")


def _rng(*parts) -> random.Random:
    return random.Random(hashlib.sha256("|".join(map(str, parts)).encode()).hexdigest())


def _root(c: int) -> str:
    s = []
    x = c + 1
    while x:
        s.append(SYLLABLES[x % len(SYLLABLES)])
        x //= len(SYLLABLES)
    return "".join(s)


def word(lang: ToyLanguage, c: int, r: random.Random) -> str:
    root = _root(c)
    if r.random() < lang.noise:
        root = _root(N_CONCEPTS + r.randrange(N_CONCEPTS))  # idiosyncratic rendering
    w = "".join(lang.vowel_shift.get(ch, ch) for ch in root)
    return w + lang.suffix


def concepts(ref) -> list[int]:
    r = _rng("concepts", ref)
    n = r.randint(5, 12)
    # skewed draw so frequent words exist, as in real text
    return [min(int(r.paretovariate(1.1)) - 1, N_CONCEPTS - 1) if r.random() < 0.5 else r.randrange(N_CONCEPTS)
            for _ in range(n)]


def render(lang: ToyLanguage, ref) -> str:
    key = str(ref)
    r = _rng(lang.tid, "shape", key)
    words = [word(lang, c, r) for c in concepts(ref) if r.random() >= lang.drop]
    if not words:
        words = [word(lang, 0, r)]
    for i in range(len(words) - 1):
        if r.random() < lang.swap:
            words[i], words[i + 1] = words[i + 1], words[i]
    words[0] = words[0].capitalize()
    text = " ".join(words)
    if len(words) > 6 and r.random() < 0.3:
        text = " ".join(words[:4]) + ", " + " ".join(words[4:])
    return text + "."


def _book_refs(index, book: str):
    refs = [r for r in index.refs if r.book.code == book]
    if book == "GEN":
        refs = [r for r in refs if r.chapter <= GEN_CHAPTERS]
    if book == "PSA":
        refs = [r for r in refs if r.chapter <= PSA_CHAPTERS]
    return refs


def book_usfm(lang: ToyLanguage, book: str, index) -> str:
    refs = _book_refs(index, book)
    out = [f"\\id {book} toy {lang.tid}", "\\usfm 3.0", f"\\h {book.title()}", f"\\mt1 {book.title()}"]
    chapter = 0
    r = _rng(lang.tid, "layout", book)
    skip = set()
    for i, ref in enumerate(refs):
        if ref in skip:
            continue
        if ref.chapter != chapter:
            chapter = ref.chapter
            out.append(f"\\c {chapter}")
            if r.random() < 0.5:
                out.append(f"\\s1 {render(lang, f'heading {ref}')}")
            out.append("\\p")
        text = render(lang, ref)
        nxt = refs[i + 1] if i + 1 < len(refs) else None
        if (lang.tid == "tgb-tgbNT" and book == "MRK" and ref.chapter == 2 and ref.verse == 3
                and nxt is not None and nxt.chapter == ref.chapter):
            # one joined verse range
            out.append(f"\\v {ref.verse}-{nxt.verse} {text} {render(lang, nxt)}")
            skip.add(nxt)
            continue
        if r.random() < 0.05:
            text += f"\\f + \\fr {ref.chapter}:{ref.verse} \\ft {render(lang, f'note {ref}')}\\f*"
        if r.random() < 0.03:
            text += f"\\x - \\xo {ref.chapter}:{ref.verse} \\xt MAT 1:1\\x*"
        if lang.tid == "gwy-gwybib" and ref.verse == 1:
            text = text.replace("fi", "ﬁ")  # ligature for the cleaner to undo
        out.append(f"\\v {ref.verse} {text}")
    return "\n".join(out) + "\n"


def pairing_candidates() -> dict:
    trs = []
    for lang in LANGUAGES:
        roles = [r for r, ids in (("source", SOURCES), ("target", TARGETS), ("related", RELATED)) if lang.tid in ids]
        d = {"id": lang.tid, "iso": lang.tid.split("-")[0], "scope": lang.scope, "script": "Latn",
             "country": "XX", "roles": roles}
        ot = [b for b in lang.books if b in ("GEN", "RUT", "PSA", "HOS", "JON", "MAL")]
        if lang.scope == "NT+":
            d["ot_books"] = ot
        trs.append(d)
    return {"family": "Toy", "branch": "Toy > Inner", "translations": trs}


def write_toy_project(root: str | Path, seed: int = 0) -> Path:
    """Write sources, corpus manifest, pairing file and config under `root`.

    Returns the config path.
    """
    root = Path(root)
    index = default_index()
    rows = ["translation_id\tlicense\tsource\tsha256\tfamily\tcountry"]
    for lang in LANGUAGES:
        d = root / "sources" / lang.tid
        d.mkdir(parents=True, exist_ok=True)
        for book in lang.books:
            num = BookId.parse(book).number + 1
            (d / f"{num:02d}{book}{lang.tid.split('-')[1]}.SFM").write_bytes(
                book_usfm(lang, book, index).encode("utf-8"))
        rows.append(f"{lang.tid}\t{lang.license}\tsources/{lang.tid}\t{tree_digest(d)}\tToy\tXX")
    (root / "corpus.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    (root / "pairing.yaml").write_text(yaml.safe_dump(pairing_candidates(), sort_keys=False), encoding="utf-8")
    config = {
        "version": 1,
        "corpus_dir": "corpus",
        "output_dir": "out",
        "manifest_path": "corpus.tsv",
        "seed": seed,
        "pairing": {"families": ["pairing.yaml"], "max_verses": 400, "iterations": 4},
        "tasks": ["CV", "GospelTranslation", "EpistleTranslation", "NTCompletion", "EarlyOT", "LateOT",
                  "RelatedLanguage(GospelTranslation)"],
        "align": {"tasks": ["GospelTranslation", "CV"], "folds": [0], "iterations": 5},
        "metrics": {"subword_vocab": 300, "subword_lines": 300},
    }
    path = root / "config.yaml"
    path.write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    return path
