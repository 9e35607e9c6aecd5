import hashlib

import pytest

from versekit.extract import RANGE, ExtractFile, build_extract, check_ranges, corpus_stats, extract_translation
from versekit.usfm import UsfmError, parse_usfm, to_usfm
from versekit.versification import CANONICAL_SIZE, VersificationScheme, all_schemes, default_index, load_scheme, VerseRef

GOLDEN_SHA256 = "5fd19752590227b73577ae32632af3c7c0114116cd99aaed6a12d3afd423d0ee"


def golden_extract(fixtures_dir):
    files = sorted((fixtures_dir / "usfm").glob("*.SFM"))
    return extract_translation("tst", files, all_schemes())


def line_of(extract: ExtractFile, ref: str) -> str:
    return extract.lines[default_index().position(VerseRef.parse(ref))]


def test_golden_file_is_intact(fixtures_dir):
    data = (fixtures_dir / "golden" / "tst-golden.txt").read_bytes()
    assert hashlib.sha256(data).hexdigest() == GOLDEN_SHA256


def test_extract_matches_golden_bytes(fixtures_dir):
    extract, scheme, _, _ = golden_extract(fixtures_dir)
    assert scheme is VersificationScheme.ENGLISH
    golden = (fixtures_dir / "golden" / "tst-golden.txt").read_bytes()
    assert extract.to_text().encode("utf-8") == golden


def test_extract_hand_checked_lines(fixtures_dir):
    extract, _, _, _ = golden_extract(fixtures_dir)
    assert len(extract.lines) == CANONICAL_SIZE
    # footnote, added words and word attributes
    assert line_of(extract, "RUT 1:1") == "In the days when the judges ruled, there was a famine."
    assert line_of(extract, "RUT 1:2") == "The man's name was Elimelech, and his wife's name Naomi."
    assert line_of(extract, "RUT 1:3") == "Then Elimelech died, and she was left with her two sons."
    # verse range and cross reference
    assert line_of(extract, "JON 1:1") == "The word of the Lord came to Jonah: Go to Nineveh."
    assert line_of(extract, "JON 1:2") == RANGE
    assert line_of(extract, "JON 1:3") == "But Jonah ran away."
    # English JON 1:17 is Original JON 2:1
    assert line_of(extract, "JON 2:1") == "A great fish swallowed Jonah."
    assert line_of(extract, "JON 2:2") == "Then Jonah prayed."
    # words of Jesus, headings dropped, missing verse left empty
    assert line_of(extract, "3JN 1:1") == "The elder, To my dear friend Gaius."
    assert line_of(extract, "3JN 1:3") == ""
    assert line_of(extract, "3JN 1:4") == "I have no greater joy."
    assert sum(1 for line in extract.lines if line == RANGE) == 1
    assert sum(1 for line in extract.lines if line) == 11


def test_range_without_head_is_rejected():
    with pytest.raises(ValueError):
        check_ranges(["", RANGE])
    check_ranges(["text", RANGE, RANGE, ""])


def test_extract_file_round_trip(tmp_path):
    ex = ExtractFile("abc", ["one", "", RANGE, "two"])
    path = tmp_path / "abc.txt"
    ex.write(path)
    assert ExtractFile.read(path, expected=4).lines == ex.lines
    with pytest.raises(ValueError):
        ExtractFile.read(path, expected=5)
    with pytest.raises(ValueError):
        ExtractFile("abc", ["a\nb"])


def test_bom_is_rejected(tmp_path):
    path = tmp_path / "x.txt"
    path.write_bytes(b"\xef\xbb\xbfa\n")
    with pytest.raises(ValueError):
        ExtractFile.read(path)


def test_usfm_round_trip(fixtures_dir):
    for path in sorted((fixtures_dir / "usfm").glob("*.SFM")):
        doc = parse_usfm(path.read_bytes())
        again = parse_usfm(to_usfm(doc))
        assert to_usfm(again) == to_usfm(doc)


def test_strict_parse_rejects_missing_id():
    with pytest.raises(UsfmError):
        parse_usfm("\\c 1\n\\v 1 text\n")


def test_duplicate_book_is_rejected():
    doc = parse_usfm("\\id RUT\n\\c 1\n\\p\n\\v 1 text\n")
    with pytest.raises(ValueError):
        build_extract("dup", [doc, doc], load_scheme(VersificationScheme.ENGLISH))


def test_corpus_stats_counts_sections(fixtures_dir):
    extract, _, _, _ = golden_extract(fixtures_dir)
    stats = corpus_stats([extract], {"tst": {"family": "Test", "country": "XX"}})
    counts = stats.per_translation["tst"]
    assert (counts["OT"], counts["NT"], counts["DT"]) == (8, 3, 0)
    assert stats.by_family == {"Test": 1}
