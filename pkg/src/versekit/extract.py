"""Verse-per-line extract files built from USFM documents.

An extract has one line per canonical (Original-scheme) verse.  A line is
either verse text, the ``<range>`` token (the verse's text sits on an earlier
line because the translation joined several verses), or empty.
"""
from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .usfm import NOTE_MARKERS, Element, UsfmDocument, parse_usfm
from .versification import (
    BookId, CanonicalIndex, VersificationTable, VerseRef, default_index, infer_scheme, map_ref,
)

log = logging.getLogger(__name__)

RANGE = "<range>"
EMPTY = ""

# Paragraph styles whose text is not verse text.
STRIP_PARAGRAPHS = re.compile(
    r"^(id|ide|h|rem|sts|usfm|toc\d*|toca\d*|mt\d*|mte\d*|ms\d*|mr|s\d*|sr|sd\d*|r|d|cl|cp|cd|"
    r"restore|periph|imt\d*|is\d*|ip|ipi|im|imi|ipq|imq|ipr|iq\d*|ib|ili\d*|iot|io\d*|iex|ie|lit|sp)$"
)
# Character styles dropped with their content; everything else is unwrapped.
STRIP_CHARS = {"fig", "va", "vp", "ca", "cat", "rq", "ndx"}

_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class VerseRange:
    start: VerseRef
    end_verse: int

    def __post_init__(self):
        if self.end_verse < self.start.verse:
            raise ValueError(f"bad verse range {self.start}-{self.end_verse}")

    def refs(self) -> list[VerseRef]:
        s = self.start
        return [VerseRef(s.book, s.chapter, v) for v in range(s.verse, self.end_verse + 1)]


@dataclass
class ExtractFile:
    translation_id: str
    lines: list[str]

    def __post_init__(self):
        for i, line in enumerate(self.lines):
            if "\n" in line or "\r" in line:
                raise ValueError(f"line {i + 1} contains a line break")

    def text_positions(self) -> list[int]:
        return [i for i, t in enumerate(self.lines) if is_text(t)]

    def to_text(self) -> str:
        return "".join(line + "\n" for line in self.lines)

    def write(self, path: Path) -> None:
        Path(path).write_bytes(self.to_text().encode("utf-8"))

    @classmethod
    def from_text(cls, translation_id: str, text: str, expected: int | None = None) -> "ExtractFile":
        if text and not text.endswith("\n"):
            raise ValueError("extract file does not end with a line feed")
        lines = text.split("\n")[:-1] if text else []
        if expected is not None and len(lines) != expected:
            raise ValueError(f"extract {translation_id} has {len(lines)} lines, expected {expected}")
        return cls(translation_id, lines)

    @classmethod
    def read(cls, path: Path, expected: int | None = None) -> "ExtractFile":
        data = Path(path).read_bytes()
        if data.startswith(b"\xef\xbb\xbf"):
            raise ValueError(f"{path}: extract files must not start with a BOM")
        return cls.from_text(Path(path).stem, data.decode("utf-8"), expected)


def is_text(line: str) -> bool:
    return bool(line) and line != RANGE


def empty_extract(translation_id: str, index: CanonicalIndex | None = None) -> ExtractFile:
    index = index or default_index()
    return ExtractFile(translation_id, [EMPTY] * len(index))


def check_ranges(lines: list[str]) -> None:
    """Every <range> line must continue a Text or <range> line."""
    prev = EMPTY
    for i, line in enumerate(lines):
        if line == RANGE and prev == EMPTY:
            raise ValueError(f"line {i + 1}: <range> without a preceding verse")
        prev = line


# ---------------------------------------------------------------------------
# Collecting verse text from the marker tree


@dataclass
class Contribution:
    """Verse texts of one book, keyed by Original line position."""
    book: BookId
    text: dict[int, str] = field(default_factory=dict)
    ranges: set[int] = field(default_factory=set)
    warnings: list[str] = field(default_factory=list)


def _collect(doc: UsfmDocument) -> tuple[list[tuple[int, int, int, str]], list[tuple[int, str]]]:
    """Return (chapter, first verse, last verse, text) per verse, plus titles.

    Titles (``\\d``) are (chapter, text).
    """
    verses: list[list] = []
    titles: list[tuple[int, str]] = []
    chapter = 0
    cur: list | None = None

    def inline(nodes, keep: bool) -> None:
        nonlocal cur
        for node in nodes:
            if isinstance(node, str):
                if keep and cur is not None:
                    cur[3].append(node)
                continue
            if node.marker == "v":
                first, last = _verse_bounds(node.number)
                cur = [chapter, first, last, []]
                verses.append(cur)
                continue
            base = node.base
            if base in NOTE_MARKERS or base in STRIP_CHARS:
                continue
            inline(node.content, keep)

    for el in doc.elements:
        if el.marker == "c":
            chapter = int(el.number)
            cur = None
            inline(el.content, True)
            continue
        if el.marker == "d":
            titles.append((chapter, _flatten(el)))
            continue
        if STRIP_PARAGRAPHS.match(el.base):
            # a heading does not end the verse; the text after it continues it
            _open_verses_only(el, chapter, verses)
            if verses and verses[-1][0] == chapter:
                cur = verses[-1]
            continue
        if cur is not None:
            cur[3].append(" ")  # paragraph break inside a verse
        inline(el.content, True)
    out = [(c, a, b, _WS.sub(" ", "".join(parts)).strip()) for c, a, b, parts in verses]
    return out, titles


def _open_verses_only(el: Element, chapter: int, verses: list) -> None:
    for node in el.content:
        if isinstance(node, Element) and node.marker == "v":
            first, last = _verse_bounds(node.number)
            verses.append([chapter, first, last, []])


def _verse_bounds(number: str) -> tuple[int, int]:
    nums = [int(x) for x in re.findall(r"\d+", number)]
    return nums[0], nums[-1]


def _flatten(el: Element) -> str:
    parts = []

    def walk(nodes):
        for node in nodes:
            if isinstance(node, str):
                parts.append(node)
            elif node.base not in NOTE_MARKERS and node.base not in STRIP_CHARS and node.marker != "v":
                walk(node.content)

    walk(el.content)
    return _WS.sub(" ", "".join(parts)).strip()


def extract_verses(doc: UsfmDocument, table: VersificationTable,
                   index: CanonicalIndex | None = None) -> Contribution:
    """Place one book's verse texts on their Original-scheme lines."""
    index = index or default_index()
    if not any(b == doc.book for b, _ in table.extents):
        raise ValueError(f"book {doc.book} does not exist in the {table.scheme.value} scheme")
    out = Contribution(doc.book)
    verses, titles = _collect(doc)
    head_of: dict[int, int] = {}  # range line -> line holding its text

    def put(pos: int, text: str) -> None:
        pos = head_of.get(pos, pos)
        if not text:
            return
        if pos in out.text:
            out.text[pos] = out.text[pos] + " " + text
        else:
            out.text[pos] = text

    for chapter, text in titles:
        ref = VerseRef(doc.book, chapter, 0)
        if not text or not table.is_valid(ref):
            continue
        target = map_ref(ref, table, True, index)
        if target is not None:
            put(index.position(target), text)

    for chapter, first, last, text in verses:
        positions = []
        for v in range(first, last + 1):
            ref = VerseRef(doc.book, chapter, v)
            if not table.is_valid(ref):
                out.warnings.append(f"{ref} is not a verse of the {table.scheme.value} scheme; dropped")
                continue
            target = map_ref(ref, table, True, index)
            if target is None:
                out.warnings.append(f"{ref} has no Original counterpart; dropped")
                continue
            positions.append(index.position(target))
        if not positions:
            continue
        first_pos = positions[0]
        put(first_pos, text)
        # continuation lines must directly follow the text line
        expect = first_pos + 1
        for p in sorted(set(positions[1:])):
            if p == first_pos:
                continue
            if p != expect or p in out.text or p in out.ranges:
                out.warnings.append(f"verse range {doc.book} {chapter}:{first}-{last} is not contiguous "
                                    f"in the Original scheme; line {p + 1} left as is")
                continue
            out.ranges.add(p)
            head_of[p] = head_of.get(first_pos, first_pos)
            expect = p + 1
    # a range line that never got a text head would be invalid
    for p in sorted(out.ranges):
        h = head_of[p]
        if h not in out.text:
            out.ranges.discard(p)
    return out


def build_extract(translation_id: str, documents: Iterable[UsfmDocument], table: VersificationTable,
                  index: CanonicalIndex | None = None) -> tuple[ExtractFile, list[str]]:
    """Combine per-book contributions into a full extract file."""
    index = index or default_index()
    lines = [EMPTY] * len(index)
    warnings: list[str] = []
    seen: set[BookId] = set()
    for doc in documents:
        if doc.book in seen:
            raise ValueError(f"duplicate book {doc.book} in translation {translation_id}")
        seen.add(doc.book)
        warnings.extend(f"{doc.book}: {w}" for w in doc.warnings)
        try:
            part = extract_verses(doc, table, index)
        except ValueError as err:
            warnings.append(str(err))
            continue
        warnings.extend(part.warnings)
        for p, t in part.text.items():
            lines[p] = t
        for p in part.ranges:
            if lines[p] == EMPTY:
                lines[p] = RANGE
    # drop range lines orphaned by an empty head (e.g. "\v 1-2" with no text)
    prev = EMPTY
    for i, line in enumerate(lines):
        if line == RANGE and prev == EMPTY:
            lines[i] = EMPTY
        prev = lines[i]
    if len(lines) != len(index):
        raise AssertionError("extract length differs from the canonical index")
    return ExtractFile(translation_id, lines), warnings


def verse_presence(doc: UsfmDocument) -> dict[VerseRef, bool]:
    verses, _ = _collect(doc)
    out = {}
    for chapter, first, last, text in verses:
        for v in range(first, last + 1):
            out[VerseRef(doc.book, chapter, v)] = True
    return out


def extract_translation(translation_id: str, usfm_files: Iterable[Path], tables: Iterable[VersificationTable],
                        index: CanonicalIndex | None = None, scheme=None):
    """Parse USFM files, infer the scheme (unless given) and build the extract.

    Returns (extract, scheme, mismatch table, warnings).
    """
    tables = list(tables)
    docs = []
    warnings = []
    for path in sorted(usfm_files):
        try:
            docs.append(parse_usfm(Path(path).read_bytes(), strict=False))
        except ValueError as err:
            warnings.append(f"{Path(path).name}: {err}")
    presence: dict[VerseRef, bool] = {}
    for d in docs:
        presence.update(verse_presence(d))
    if scheme is None:
        scheme, counts = infer_scheme(presence, tables)
    else:
        counts = {}
    table = next(t for t in tables if t.scheme == scheme)
    by_book = {}
    for d in docs:
        if d.book in by_book:
            warnings.append(f"{d.book}: second file for the same book ignored")
            continue
        by_book[d.book] = d
    extract, w = build_extract(translation_id, by_book.values(), table, index)
    return extract, scheme, counts, warnings + w


# ---------------------------------------------------------------------------
# Statistics


@dataclass
class CorpusStats:
    per_translation: dict[str, dict[str, int]]
    by_family: dict[str, int]
    by_country: dict[str, int]

    def rows(self) -> list[tuple[str, int, int, int, int]]:
        return [(tid, c["OT"], c["NT"], c["DT"], c["total"]) for tid, c in sorted(self.per_translation.items())]


def corpus_stats(extracts: Iterable[ExtractFile], metadata: Mapping[str, Mapping[str, str]],
                 index: CanonicalIndex | None = None) -> CorpusStats:
    index = index or default_index()
    sections = [r.book.canon_section for r in index]
    per: dict[str, dict[str, int]] = {}
    family: Counter = Counter()
    country: Counter = Counter()
    for ex in extracts:
        if ex.translation_id not in metadata:
            raise KeyError(f"no metadata for translation {ex.translation_id}")
        counts = {"OT": 0, "NT": 0, "DT": 0}
        for sec, line in zip(sections, ex.lines):
            if line:  # <range> lines count as available verses
                counts[sec] += 1
        counts["total"] = sum(1 for line in ex.lines if line)
        per[ex.translation_id] = counts
        meta = metadata[ex.translation_id]
        family[meta.get("family", "")] += 1
        country[meta.get("country", "")] += 1
    return CorpusStats(per, dict(sorted(family.items())), dict(sorted(country.items())))
