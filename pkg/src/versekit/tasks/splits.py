"""Benchmark task definitions and their train / validation / test verse sets."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..extract import ExtractFile, is_text
from ..versification import NT_BOOKS, OT_BOOKS, BookId, CanonicalIndex, VerseRef, default_index

GENERATOR_ID = "pcg64-fisher-yates-v1"
MIN_CV_VERSES = 2_500
CV_DEFAULTS = {"test_size": 250, "val_size": 250, "folds": 5}

MINOR_PROPHETS = ("HOS", "JOL", "AMO", "OBA", "JON", "MIC", "NAM", "HAB", "ZEP", "HAG", "ZEC", "MAL")
LATE_OT_TEST = tuple(b for b in MINOR_PROPHETS if b != "JON")


class SplitError(ValueError):
    """Raised when a split cannot be built from the given extracts."""


@dataclass(frozen=True)
class TaskSpec:
    name: str
    train_books: tuple[str, ...] = ()
    test_books: tuple[str, ...] = ()
    base: "TaskSpec | None" = None  # RelatedLanguage only
    cv_params: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        for b in self.train_books + self.test_books:
            if BookId.parse(b).canon_section == "DT":
                raise SplitError(f"{self.name}: deuterocanonical book {b} in a task")
        if set(self.train_books) & set(self.test_books):
            raise SplitError(f"{self.name}: train and test books overlap")
        if self.name == "RelatedLanguage" and self.base is None:
            raise SplitError("RelatedLanguage needs a base task")

    @property
    def core(self) -> "TaskSpec":
        """The task that defines the verse sets (the base for RelatedLanguage)."""
        return self.base if self.base is not None else self

    @property
    def is_cv(self) -> bool:
        return self.core.name == "CV"

    @property
    def label(self) -> str:
        return f"RelatedLanguage({self.base.label})" if self.base is not None else self.name

    @property
    def cv(self) -> dict[str, int]:
        return dict(self.core.cv_params)


def _books(codes) -> tuple[str, ...]:
    return tuple(BookId.parse(c).code for c in codes)


TASKS = {
    "CV": TaskSpec("CV", cv_params=tuple(CV_DEFAULTS.items())),
    "GospelTranslation": TaskSpec("GospelTranslation", _books(["MRK"]), _books(["MAT"])),
    "EpistleTranslation": TaskSpec("EpistleTranslation", _books(["MAT", "MRK", "LUK", "JHN", "ACT"]),
                                   _books(["1TH", "2TH", "1TI", "2TI", "TIT"])),
    "NTCompletion": TaskSpec("NTCompletion", _books(b for b in NT_BOOKS if b not in ("ROM", "REV")),
                             _books(["ROM", "REV"])),
    "EarlyOT": TaskSpec("EarlyOT", _books(NT_BOOKS),
                        _books(["GEN", "EXO", "LEV", "NUM", "DEU", "RUT", "PSA", "JON"])),
    "LateOT": TaskSpec("LateOT", _books(b for b in OT_BOOKS + NT_BOOKS if b not in MINOR_PROPHETS),
                       _books(LATE_OT_TEST)),
}


def task_spec(name: str, base: str | None = None) -> TaskSpec:
    """Look up a task by name; `RelatedLanguage` wraps the `base` task."""
    if name == "RelatedLanguage" or name.startswith("RelatedLanguage("):
        if name.startswith("RelatedLanguage("):
            base = name[len("RelatedLanguage("):-1]
        if base is None:
            raise SplitError("RelatedLanguage needs a base task")
        return TaskSpec("RelatedLanguage", base=task_spec(base))
    if name not in TASKS:
        raise SplitError(f"unknown task {name!r}; known: {', '.join(TASKS)}")
    return TASKS[name]


@dataclass(frozen=True)
class SplitManifest:
    task: TaskSpec
    pair: tuple[str, str, str | None]
    train: tuple[VerseRef, ...]
    validation: tuple[VerseRef, ...]
    test: tuple[VerseRef, ...]
    related_train: tuple[VerseRef, ...] | None = None
    seed: int | None = None
    generator: str | None = None
    fold: int | None = None
    missing_test_books: tuple[str, ...] = ()
    extra: tuple[tuple[str, str], ...] = field(default=())  # free-form header fields, e.g. a config fingerprint

    def __post_init__(self):
        check_disjoint(self.train, self.validation, self.test)

    @property
    def sections(self) -> dict[str, tuple[VerseRef, ...]]:
        out = {"train": self.train, "validation": self.validation, "test": self.test}
        if self.related_train is not None:
            out["related_train"] = self.related_train
        return out


def check_disjoint(train, validation, test) -> None:
    for a, b, na, nb in ((train, test, "train", "test"), (train, validation, "train", "validation"),
                         (test, validation, "test", "validation")):
        both = set(a) & set(b)
        if both:
            raise SplitError(f"{na} and {nb} share {len(both)} verses, e.g. {min(both)}")
    for name, refs in (("train", train), ("validation", validation), ("test", test)):
        if len(set(refs)) != len(refs):
            raise SplitError(f"{name} lists a verse twice")


def fisher_yates(n: int, seed: int) -> list[int]:
    """Permutation of range(n): Fisher-Yates driven by numpy's PCG64.

    For i = n-1 down to 1, swap i with j drawn uniformly from [0, i] by
    Generator.integers(0, i + 1).  The generator identity is GENERATOR_ID.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def shared_positions(extracts: Sequence[ExtractFile], index: CanonicalIndex) -> list[int]:
    """Index positions with verse text in every extract; deuterocanon excluded."""
    for e in extracts:
        if len(e.lines) != len(index):
            raise SplitError(f"extract {e.translation_id} has {len(e.lines)} lines, index has {len(index)}")
    return [i for i, r in enumerate(index.refs)
            if r.book.canon_section != "DT" and all(is_text(e.lines[i]) for e in extracts)]


def _related_train(train, test, source, related, index) -> tuple[VerseRef, ...]:
    # every train and test verse that the related translation also covers
    wanted = set(train) | set(test)
    pos = shared_positions([source, related], index)
    return tuple(index.refs[i] for i in pos if index.refs[i] in wanted)


def build_cv_splits(source: ExtractFile, target: ExtractFile, seed: int, related: ExtractFile | None = None,
                    index: CanonicalIndex | None = None, spec: TaskSpec | None = None) -> list[SplitManifest]:
    """Five folds over the shuffled shared verses.

    Fold k tests on slice [t*k, t*(k+1)) of the permutation, validates on the
    next v verses (wrapping around) and trains on the rest.
    """
    index = index or default_index()
    spec = spec or (task_spec("RelatedLanguage", "CV") if related is not None else TASKS["CV"])
    params = spec.cv
    t, v, folds = params["test_size"], params["val_size"], params["folds"]
    universe = shared_positions([source, target], index)
    need = max(MIN_CV_VERSES, t * folds + v)
    if len(universe) < need:
        raise SplitError(f"{source.translation_id}/{target.translation_id}: {len(universe)} shared verses, "
                         f"cross-validation needs at least {need}")
    perm = [universe[k] for k in fisher_yates(len(universe), seed)]
    n = len(perm)
    out = []
    for k in range(folds):
        test_pos = set(perm[t * k:t * (k + 1)])
        val_pos = {perm[(t * (k + 1) + i) % n] for i in range(v)}
        train_pos = [p for p in universe if p not in test_pos and p not in val_pos]
        refs = lambda ps: tuple(index.refs[p] for p in sorted(ps))  # noqa: E731
        train, val, test = refs(train_pos), refs(val_pos), refs(test_pos)
        rel = _related_train(train, test, source, related, index) if related is not None else None
        out.append(SplitManifest(spec, (source.translation_id, target.translation_id,
                                        related.translation_id if related is not None else None),
                                 train, val, test, rel, seed, GENERATOR_ID, k))
    return out


def build_book_split(spec: TaskSpec, source: ExtractFile, target: ExtractFile, related: ExtractFile | None = None,
                     index: CanonicalIndex | None = None) -> SplitManifest:
    """Train on the shared verses of the train books, test on those of the test books."""
    if spec.is_cv:
        raise SplitError("use build_cv_splits for the CV task")
    if spec.name == "RelatedLanguage" and related is None:
        raise SplitError("RelatedLanguage needs a related extract")
    if spec.name != "RelatedLanguage":
        related = None
    index = index or default_index()
    core = spec.core
    shared = shared_positions([source, target], index)
    train_books, test_books = set(core.train_books), set(core.test_books)
    train = tuple(index.refs[i] for i in shared if index.refs[i].book.code in train_books)
    test = tuple(index.refs[i] for i in shared if index.refs[i].book.code in test_books)
    present = {index.refs[i].book.code for i in shared}
    missing = tuple(b for b in core.test_books if b not in present)
    if not test:
        raise SplitError(f"{spec.label}: no shared verses in any test book for "
                         f"{source.translation_id}/{target.translation_id}; missing: {', '.join(missing)}")
    if not train:
        raise SplitError(f"{spec.label}: no shared verses in the train books")
    rel = _related_train(train, test, source, related, index) if related is not None else None
    return SplitManifest(spec, (source.translation_id, target.translation_id,
                                related.translation_id if related is not None else None),
                         train, (), test, rel, missing_test_books=missing)


def build_task(spec: TaskSpec, source: ExtractFile, target: ExtractFile, related: ExtractFile | None = None,
               seed: int = 0, index: CanonicalIndex | None = None) -> list[SplitManifest]:
    if spec.is_cv:
        return build_cv_splits(source, target, seed, related if spec.name == "RelatedLanguage" else None,
                               index, spec)
    return [build_book_split(spec, source, target, related, index)]
