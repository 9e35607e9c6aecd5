"""Versification schemes, the canonical verse index and reference remapping.

A scheme table is read from a small line-oriented definition file (see
docs/versification-format.md).  Every scheme maps its own verse numbering onto
the Original scheme, whose verses (minus a handful of obsolete variant books)
form the fixed line index shared by all extract files.
"""
from __future__ import annotations

import enum
import functools
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping

OT_BOOKS = (
    "GEN EXO LEV NUM DEU JOS JDG RUT 1SA 2SA 1KI 2KI 1CH 2CH EZR NEH EST JOB PSA PRO "
    "ECC SNG ISA JER LAM EZK DAN HOS JOL AMO OBA JON MIC NAM HAB ZEP HAG ZEC MAL"
).split()
NT_BOOKS = (
    "MAT MRK LUK JHN ACT ROM 1CO 2CO GAL EPH PHP COL 1TH 2TH 1TI 2TI TIT PHM HEB JAS "
    "1PE 2PE 1JN 2JN 3JN JUD REV"
).split()
# Deuterocanon and other extra-canonical books, in the conventional Paratext order.
DT_BOOKS = (
    "TOB JDT ESG WIS SIR BAR LJE S3Y SUS BEL 1MA 2MA 3MA 4MA 1ES 2ES MAN PS2 ODA PSS "
    "JSA JDB TBS SST DNT BLT 3ES EZA 5EZ 6EZ DAG PS3 2BA LBA JUB ENO 1MQ 2MQ 3MQ REP 4BA LAO"
).split()
ALL_BOOKS = tuple(OT_BOOKS + NT_BOOKS + DT_BOOKS)

# Variant LXX texts that are recognised as codes but carry no lines of their own.
OBSOLETE_BOOKS = frozenset({"JSA", "JDB", "TBS", "SST", "DNT", "BLT"})
BOOK_ALIASES = {"NAH": "NAM"}

_BOOK_NUMBER = {code: i for i, code in enumerate(ALL_BOOKS)}

CANONICAL_SIZE = 41_899
NT_SIZE = 7_957


class VersificationError(ValueError):
    """Raised for malformed or inconsistent versification data."""


@functools.total_ordering
@dataclass(frozen=True)
class BookId:
    code: str

    def __post_init__(self):
        if self.code not in _BOOK_NUMBER:
            raise VersificationError(f"unknown book code {self.code!r}")

    @classmethod
    def parse(cls, text: str) -> "BookId":
        code = text.strip().upper()
        return _book(BOOK_ALIASES.get(code, code))

    @property
    def number(self) -> int:
        return _BOOK_NUMBER[self.code]

    @property
    def canon_section(self) -> str:
        n = self.number
        if n < len(OT_BOOKS):
            return "OT"
        if n < len(OT_BOOKS) + len(NT_BOOKS):
            return "NT"
        return "DT"

    def __lt__(self, other: "BookId") -> bool:
        return self.number < other.number

    def __str__(self) -> str:
        return self.code


@functools.lru_cache(maxsize=None)
def _book(code: str) -> BookId:
    return BookId(code)


_REF_RE = re.compile(r"^([0-9A-Z]{3}) (\d+):(\d+)$")


@dataclass(frozen=True, order=True)
class VerseRef:
    """A (book, chapter, verse) address.  Verse 0 denotes a psalm title."""

    book: BookId
    chapter: int
    verse: int

    @classmethod
    def of(cls, book: str, chapter: int, verse: int) -> "VerseRef":
        return cls(BookId.parse(book), chapter, verse)

    @classmethod
    def parse(cls, text: str) -> "VerseRef":
        m = _REF_RE.match(text.strip())
        if not m:
            raise VersificationError(f"malformed verse reference {text!r}")
        return cls(BookId.parse(m.group(1)), int(m.group(2)), int(m.group(3)))

    def __str__(self) -> str:
        return f"{self.book.code} {self.chapter}:{self.verse}"


class VersificationScheme(enum.Enum):
    ORIGINAL = "Original"
    ENGLISH = "English"
    RUSSIAN_ORTHODOX = "RussianOrthodox"
    RUSSIAN_PROTESTANT = "RussianProtestant"
    SEPTUAGINT = "Septuagint"
    VULGATE = "Vulgate"

    @classmethod
    def parse(cls, name: str) -> "VersificationScheme":
        key = name.replace(" ", "").lower()
        for scheme in cls:
            if scheme.value.lower() == key:
                return scheme
        raise VersificationError(f"unknown versification scheme {name!r}")


# Fixed tie-break order for scheme inference.
SCHEME_PRIORITY = (
    VersificationScheme.ENGLISH,
    VersificationScheme.ORIGINAL,
    VersificationScheme.RUSSIAN_PROTESTANT,
    VersificationScheme.RUSSIAN_ORTHODOX,
    VersificationScheme.SEPTUAGINT,
    VersificationScheme.VULGATE,
)

SCHEME_FILES = {
    VersificationScheme.ORIGINAL: "org.vrs",
    VersificationScheme.ENGLISH: "eng.vrs",
    VersificationScheme.RUSSIAN_ORTHODOX: "rso.vrs",
    VersificationScheme.RUSSIAN_PROTESTANT: "rsc.vrs",
    VersificationScheme.SEPTUAGINT: "lxx.vrs",
    VersificationScheme.VULGATE: "vul.vrs",
}


@dataclass(frozen=True)
class MappingLine:
    line_no: int
    many_to_one: bool
    source: tuple[VerseRef, int]  # start, last verse
    target: tuple[VerseRef, int]


@dataclass(frozen=True)
class VersificationTable:
    scheme: VersificationScheme
    extents: Mapping[tuple[BookId, int], int]
    excluded_verses: frozenset[VerseRef]
    mappings: tuple[MappingLine, ...] = ()
    _forward: Mapping[VerseRef, VerseRef] = field(default_factory=dict, repr=False, compare=False)

    def books(self) -> list[BookId]:
        return sorted({b for b, _ in self.extents})

    def chapters(self, book: BookId) -> list[int]:
        return sorted(c for b, c in self.extents if b == book)

    def is_valid(self, ref: VerseRef) -> bool:
        """True if `ref` names a verse of this scheme (titles count when mapped)."""
        top = self.extents.get((ref.book, ref.chapter))
        if top is None or ref in self.excluded_verses:
            return False
        if ref.verse == 0:
            return ref in self._forward
        return 1 <= ref.verse <= top

    def verses(self) -> Iterable[VerseRef]:
        for (book, chapter) in sorted(self.extents):
            title = VerseRef(book, chapter, 0)
            if title in self._forward and title not in self.excluded_verses:
                yield title
            for v in range(1, self.extents[(book, chapter)] + 1):
                ref = VerseRef(book, chapter, v)
                if ref not in self.excluded_verses:
                    yield ref

    def to_original(self, ref: VerseRef) -> VerseRef:
        return self._forward.get(ref, ref)

    @functools.cached_property
    def _full_reverse(self) -> dict[VerseRef, tuple[VerseRef, ...]]:
        rev: dict[VerseRef, list[VerseRef]] = {}
        for v in self.verses():
            rev.setdefault(self.to_original(v), []).append(v)
        return {k: tuple(sorted(v)) for k, v in rev.items()}

    def from_original(self, ref: VerseRef) -> VerseRef | None:
        """First scheme verse (canon order) whose text lands on `ref`."""
        sources = self._full_reverse.get(ref)
        return sources[0] if sources else None

    def sources_of(self, ref: VerseRef) -> tuple[VerseRef, ...]:
        return self._full_reverse.get(ref, ())


# ---------------------------------------------------------------------------
# Definition file parsing


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


_SIDE_RE = re.compile(r"^([0-9A-Z]{3}) (\d+):(\d+)(?:-(\d+))?$")


def _parse_side(text: str, line_no: int) -> tuple[VerseRef, int]:
    m = _SIDE_RE.match(" ".join(text.split()))
    if not m:
        raise VersificationError(f"line {line_no}: malformed reference {text.strip()!r}")
    try:
        book = BookId.parse(m.group(1))
    except VersificationError as err:
        raise VersificationError(f"line {line_no}: {err}") from None
    start = VerseRef(book, int(m.group(2)), int(m.group(3)))
    last = int(m.group(4)) if m.group(4) else start.verse
    if last < start.verse:
        raise VersificationError(f"line {line_no}: descending range {text.strip()!r}")
    return start, last


def _expand(side: tuple[VerseRef, int]) -> list[VerseRef]:
    start, last = side
    return [VerseRef(start.book, start.chapter, v) for v in range(start.verse, last + 1)]


def load_versification_table(definition_text: str, scheme: VersificationScheme | str | None = None) -> VersificationTable:
    """Parse and validate a scheme definition.

    The scheme name is taken from the argument or a ``# scheme: Name`` header.
    """
    if isinstance(scheme, str):
        scheme = VersificationScheme.parse(scheme)
    extents: dict[tuple[BookId, int], int] = {}
    seen_books: set[BookId] = set()
    excluded: set[VerseRef] = set()
    lines: list[MappingLine] = []

    for line_no, raw in enumerate(definition_text.splitlines(), start=1):
        header = re.match(r"^#\s*scheme:\s*(\S+)\s*$", raw)
        if header and scheme is None:
            scheme = VersificationScheme.parse(header.group(1))
            continue
        line = _strip_comment(raw)
        if not line:
            continue
        if "=" in line:
            many = line.startswith("&")
            left, _, right = line.lstrip("&").partition("=")
            src = _parse_side(left, line_no)
            tgt = _parse_side(right, line_no)
            n_src = src[1] - src[0].verse + 1
            n_tgt = tgt[1] - tgt[0].verse + 1
            if many and n_tgt != 1:
                raise VersificationError(f"line {line_no}: many-to-one mapping needs a single target verse")
            if not many and n_src != n_tgt:
                raise VersificationError(f"line {line_no}: range lengths differ ({n_src} vs {n_tgt})")
            lines.append(MappingLine(line_no, many, src, tgt))
        elif line.startswith("-"):
            m = _REF_RE.match(line[1:].strip())
            if not m:
                raise VersificationError(f"line {line_no}: malformed excluded verse {line!r}")
            try:
                ref = VerseRef(BookId.parse(m.group(1)), int(m.group(2)), int(m.group(3)))
            except VersificationError as err:
                raise VersificationError(f"line {line_no}: {err}") from None
            if ref in excluded:
                raise VersificationError(f"line {line_no}: duplicate excluded verse {ref}")
            excluded.add(ref)
        else:
            parts = line.split()
            try:
                book = BookId.parse(parts[0])
            except VersificationError as err:
                raise VersificationError(f"line {line_no}: {err}") from None
            if book in seen_books:
                raise VersificationError(f"line {line_no}: extents for {book} given twice")
            seen_books.add(book)
            chapter = 0
            for tok in parts[1:]:
                m = re.match(r"^(?:(\d+):)?(\d+)$", tok)
                if not m:
                    raise VersificationError(f"line {line_no}: malformed extent {tok!r}")
                c = int(m.group(1)) if m.group(1) else chapter + 1
                if c <= chapter:
                    raise VersificationError(f"line {line_no}: chapters out of order at {tok!r}")
                # chapters skipped by an explicit c:v token have one verse
                for skipped in range(chapter + 1, c):
                    extents[(book, skipped)] = 1
                extents[(book, c)] = int(m.group(2))
                chapter = c

    if scheme is None:
        raise VersificationError("scheme name not given and no '# scheme:' header found")

    forward: dict[VerseRef, VerseRef] = {}
    claimed_by: dict[VerseRef, int] = {}
    standard_targets: dict[VerseRef, int] = {}
    for ml in lines:
        sources = _expand(ml.source)
        targets = _expand(ml.target)
        if ml.many_to_one:
            targets = targets * len(sources)
        for s, t in zip(sources, targets):
            if s in claimed_by:
                raise VersificationError(
                    f"line {ml.line_no}: verse {s} already mapped on line {claimed_by[s]}")
            if s in excluded:
                raise VersificationError(f"line {ml.line_no}: excluded verse {s} is mapped")
            top = extents.get((s.book, s.chapter))
            if top is None or s.verse > top:
                raise VersificationError(f"line {ml.line_no}: {s} lies outside the scheme extents")
            if not ml.many_to_one:
                if t in standard_targets:
                    raise VersificationError(
                        f"line {ml.line_no}: target {t} overlaps the range on line {standard_targets[t]}")
                standard_targets[t] = ml.line_no
            claimed_by[s] = ml.line_no
            forward[s] = t

    return VersificationTable(
        scheme=scheme,
        extents=extents,
        excluded_verses=frozenset(excluded),
        mappings=tuple(lines),
        _forward=forward,
    )


# ---------------------------------------------------------------------------
# Canonical index


@dataclass(frozen=True)
class CanonicalIndex:
    refs: tuple[VerseRef, ...]
    _pos: Mapping[VerseRef, int] = field(default_factory=dict, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.refs)

    def __iter__(self):
        return iter(self.refs)

    def __getitem__(self, i: int) -> VerseRef:
        return self.refs[i]

    def __contains__(self, ref: object) -> bool:
        return ref in self._pos

    def position(self, ref: VerseRef) -> int:
        try:
            return self._pos[ref]
        except KeyError:
            raise KeyError(f"{ref} is not in the canonical index") from None

    def section_slice(self, section: str) -> list[int]:
        return [i for i, r in enumerate(self.refs) if r.book.canon_section == section]

    def vref_text(self) -> str:
        return "".join(f"{r}\n" for r in self.refs)


def _enumerate_index(original: VersificationTable) -> list[VerseRef]:
    refs = [r for r in original.verses() if r.book.code not in OBSOLETE_BOOKS and r.verse > 0]
    refs.sort()
    return refs


def canonical_index(original_table: VersificationTable, expected: int | None = CANONICAL_SIZE) -> CanonicalIndex:
    """Enumerate the Original scheme in canon order.

    A count different from the expected total means the shipped tables are
    wrong; the error lists which books are off and by how much.
    """
    if original_table.scheme is not VersificationScheme.ORIGINAL:
        raise VersificationError("canonical_index needs the Original scheme table")
    refs = _enumerate_index(original_table)
    if expected is not None and len(refs) != expected:
        raise VersificationError(
            f"canonical index has {len(refs)} entries, expected {expected}; "
            + book_count_deltas(original_table))
    return CanonicalIndex(tuple(refs), {r: i for i, r in enumerate(refs)})


# Per-book verse counts of the reference Original tables.  Only used to explain
# a failed count check.
def _reference_counts() -> dict[str, int]:
    text = resources.files("versekit.data").joinpath("book_counts.tsv").read_text(encoding="utf-8")
    out = {}
    for line in text.splitlines():
        if line and not line.startswith("#"):
            code, n = line.split("\t")
            out[code] = int(n)
    return out


def book_count_deltas(original_table: VersificationTable) -> str:
    counts = Counter(r.book.code for r in _enumerate_index(original_table))
    ref = _reference_counts()
    deltas = []
    for code in ALL_BOOKS:
        d = counts.get(code, 0) - ref.get(code, 0)
        if d:
            deltas.append(f"{code} {d:+d}")
    return "per-book deltas: " + (", ".join(deltas) if deltas else "none")


def map_ref(ref: VerseRef, table: VersificationTable, to_original: bool = True,
            index: CanonicalIndex | None = None) -> VerseRef | None:
    """Map a reference between `table`'s scheme and the Original scheme.

    With ``to_original`` the reference is read in `table`'s scheme; otherwise
    it is an Original reference and the scheme counterpart is returned.  None
    stands for a verse without counterpart.
    """
    if to_original:
        if not table.is_valid(ref):
            if ref in table.excluded_verses:
                return None
            raise VersificationError(f"{ref} is not valid under {table.scheme.value}")
        out = table.to_original(ref)
        idx = index if index is not None else default_index()
        return out if out in idx else None
    idx = index if index is not None else default_index()
    if ref not in idx:
        raise VersificationError(f"{ref} is not an Original-scheme verse")
    return table.from_original(ref)


def infer_scheme(verse_presence: Mapping[VerseRef, bool],
                 candidates: Iterable[VersificationTable]) -> tuple[VersificationScheme, dict[VersificationScheme, int]]:
    """Pick the scheme whose chapter extents and exclusions best match a document.

    The mismatch count is the number of observed (book, chapter) pairs whose
    highest verse differs from the scheme's extent, plus observed verses the
    scheme excludes.  Ties go to the earlier scheme in SCHEME_PRIORITY.
    """
    candidates = list(candidates)
    if not candidates:
        raise VersificationError("no candidate schemes")
    observed_max: dict[tuple[BookId, int], int] = {}
    present = [r for r, ok in verse_presence.items() if ok and r.verse > 0]
    for r in present:
        key = (r.book, r.chapter)
        observed_max[key] = max(observed_max.get(key, 0), r.verse)
    counts: dict[VersificationScheme, int] = {}
    for table in candidates:
        n = 0
        for key, top in observed_max.items():
            if table.extents.get(key) != top:
                n += 1
        n += sum(1 for r in present if r in table.excluded_verses)
        counts[table.scheme] = n
    rank = {s: i for i, s in enumerate(SCHEME_PRIORITY)}
    best = min(counts, key=lambda s: (counts[s], rank[s]))
    return best, dict(sorted(counts.items(), key=lambda kv: rank[kv[0]]))


# ---------------------------------------------------------------------------
# Shipped data


def scheme_text(scheme: VersificationScheme) -> str:
    pkg = resources.files("versekit.data").joinpath("versification", SCHEME_FILES[scheme])
    return pkg.read_text(encoding="utf-8")


@functools.lru_cache(maxsize=None)
def load_scheme(scheme: VersificationScheme) -> VersificationTable:
    return load_versification_table(scheme_text(scheme), scheme)


@functools.lru_cache(maxsize=None)
def default_index() -> CanonicalIndex:
    return canonical_index(load_scheme(VersificationScheme.ORIGINAL))


def all_schemes() -> list[VersificationTable]:
    return [load_scheme(s) for s in SCHEME_PRIORITY]


def load_tables_from_dir(path) -> dict[VersificationScheme, VersificationTable]:
    """Load the six scheme files from a directory (config override)."""
    from pathlib import Path

    out = {}
    for scheme, name in SCHEME_FILES.items():
        text = (Path(path) / name).read_text(encoding="utf-8")
        out[scheme] = load_versification_table(text, scheme)
    return out
