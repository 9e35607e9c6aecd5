"""Plain-text split manifests.

Layout (UTF-8, LF line ends)::

    # versekit split manifest 1
    task: RelatedLanguage(GospelTranslation)
    source: hin-hin2017
    ...
    checksum: <sha256 of everything after this line>
    [train]
    MRK 1:1
    ...
    [validation]
    [test]
    [related_train]      (RelatedLanguage only)

Header values that do not apply are written as "-".
"""
from __future__ import annotations

import hashlib
from pathlib import Path

from .. import __version__
from ..versification import VerseRef, VersificationError
from .splits import SplitError, SplitManifest, TaskSpec, check_disjoint, task_spec

MAGIC = "# versekit split manifest 1"
HEADER_KEYS = ("task", "source", "target", "related", "seed", "generator", "fold", "cv",
               "train_books", "test_books", "missing_test_books", "tool_version")
SECTIONS = ("train", "validation", "test", "related_train")


class ManifestError(ValueError):
    """Raised for malformed, tampered or inconsistent manifest files."""


def _opt(x) -> str:
    return "-" if x is None else str(x)


def _body(m: SplitManifest) -> str:
    out = []
    for name, refs in m.sections.items():
        out.append(f"[{name}]\n")
        out.extend(f"{r}\n" for r in refs)
    return "".join(out)


def dumps(m: SplitManifest) -> str:
    spec = m.task
    header = {
        "task": spec.label,
        "source": m.pair[0],
        "target": m.pair[1],
        "related": _opt(m.pair[2]),
        "seed": _opt(m.seed),
        "generator": _opt(m.generator),
        "fold": _opt(m.fold),
        "cv": " ".join(f"{k}={v}" for k, v in spec.core.cv_params) or "-",
        "train_books": " ".join(spec.core.train_books) or "-",
        "test_books": " ".join(spec.core.test_books) or "-",
        "missing_test_books": " ".join(m.missing_test_books) or "-",
        "tool_version": __version__,
    }
    lines = [MAGIC] + [f"{k}: {header[k]}" for k in HEADER_KEYS]
    lines += [f"x-{k}: {v}" for k, v in m.extra]
    body = _body(m)
    lines.append(f"checksum: {hashlib.sha256(body.encode('utf-8')).hexdigest()}")
    return "\n".join(lines) + "\n" + body


def _int(v: str) -> int | None:
    return None if v == "-" else int(v)


def loads(text: str) -> SplitManifest:
    lines = text.split("\n")
    if not text.endswith("\n") or lines[0] != MAGIC:
        raise ManifestError("not a versekit split manifest")
    lines.pop()  # trailing empty string after the final LF
    header: dict[str, str] = {}
    extra = []
    k = 1
    while k < len(lines) and not lines[k].startswith("["):
        key, sep, value = lines[k].partition(": ")
        if not sep:
            raise ManifestError(f"line {k + 1}: malformed header line {lines[k]!r}")
        if key.startswith("x-"):
            extra.append((key[2:], value))
        else:
            header[key] = value
        k += 1
    missing = [h for h in HEADER_KEYS + ("checksum",) if h not in header]
    if missing:
        raise ManifestError(f"header lacks {', '.join(missing)}")
    body = "".join(line + "\n" for line in lines[k:])
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != header["checksum"]:
        raise ManifestError("checksum mismatch: the verse lists were edited")
    sections: dict[str, list[VerseRef]] = {}
    current = None
    for n, line in enumerate(lines[k:], start=k + 1):
        if line.startswith("["):
            current = line.strip("[]")
            if current not in SECTIONS or current in sections:
                raise ManifestError(f"line {n}: unexpected section {line!r}")
            sections[current] = []
            continue
        try:
            sections[current].append(VerseRef.parse(line))
        except VersificationError as e:
            raise ManifestError(f"line {n}: {e}") from None
    for s in SECTIONS[:3]:
        if s not in sections:
            raise ManifestError(f"missing [{s}] section")
    try:
        spec = task_spec(header["task"])
        check_disjoint(sections["train"], sections["validation"], sections["test"])
    except SplitError as e:
        raise ManifestError(str(e)) from None
    _check_spec(spec, header)
    rel = header["related"]
    return SplitManifest(
        spec, (header["source"], header["target"], None if rel == "-" else rel),
        tuple(sections["train"]), tuple(sections["validation"]), tuple(sections["test"]),
        tuple(sections["related_train"]) if "related_train" in sections else None,
        _int(header["seed"]), None if header["generator"] == "-" else header["generator"],
        _int(header["fold"]),
        tuple(header["missing_test_books"].split()) if header["missing_test_books"] != "-" else (),
        tuple(extra))


def _check_spec(spec: TaskSpec, header: dict[str, str]) -> None:
    # book lists in the header must agree with the named task
    for key, books in (("train_books", spec.core.train_books), ("test_books", spec.core.test_books)):
        if header[key] != (" ".join(books) or "-"):
            raise ManifestError(f"{key} do not match task {spec.label}")


def write_manifest(m: SplitManifest, path: str | Path) -> None:
    Path(path).write_bytes(dumps(m).encode("utf-8"))


def read_manifest(path: str | Path) -> SplitManifest:
    return loads(Path(path).read_bytes().decode("utf-8"))
