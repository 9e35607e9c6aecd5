import difflib
import random
import unicodedata

import pytest
from hypothesis import given
from hypothesis import strategies as st

from versekit.extract import RANGE, ExtractFile
from versekit.textclean import (
    RuleError,
    analyze_text,
    clean_extract,
    clean_text,
    load_rules,
    normalize_order,
    parse_rules,
)

RULES = load_rules()

# Cyrillic words built from code points, so that no Latin lookalike slips in
AMIN = "\u043c\u0438\u043d\u044c"   # "min'" without its first letter
BRAT = "\u0431\u0440\u0430\u0442"
MIR = "\u043c\u0438\u0440"
SLOVO = "\u0441\u043b\u043e\u0432\u043e"
DELO = "\u0434\u0435\u043b\u043e"
I = "\u0438"
VODA = "\u043e\u0434\u0430"           # "oda"
FUZZ_ALPHABET = ("abcdeАВСЕаесорхABCEHKMOPTXaceopxy ,,,  .;:!?ﬁﬂﬀﬃﬄﬅﬆↃↄ�"
                 "कखगड़ज़़ि्।|l" "éèé̀" "0123456789")


def clean(line, script=None, enabled=()):
    return clean_text(line, script, RULES, enabled)[0]


def fuzz_lines(n: int = 10_000, seed: int = 99):
    r = random.Random(seed)
    return ["".join(r.choice(FUZZ_ALPHABET) for _ in range(r.randint(0, 40))) for _ in range(n)]


def idempotence_failures(lines, script=None, enabled=()):
    bad = []
    for line in lines:
        once = clean(line, script, enabled)
        if clean(once, script, enabled) != once:
            bad.append(line)
    return bad


# ---------------------------------------------------------------------------
# Targeted transformations


def test_ligature_fi():
    assert clean("ﬁnd the ﬂock") == "find the flock"
    assert clean("eﬃcient") == "efficient"


def test_latin_a_inside_cyrillic_word():
    out = clean(f"A{AMIN} {I} B{VODA}", "Cyrl")
    assert out == f"\u0410{AMIN} {I} \u0412{VODA}"
    assert all(unicodedata.name(ch).startswith("CYRILLIC") for ch in out if ch.isalpha())


def test_lookalikes_stay_outside_their_script_context():
    assert clean(f"A{AMIN}", "Latn") == f"A{AMIN}"
    assert clean(f"A{AMIN}", None) == f"A{AMIN}"
    # a Latin word in a Cyrillic text keeps its letters
    assert clean("Amen", "Cyrl") == "Amen"


def test_comma_spacing():
    assert clean("a ,b,, c") == "a, b, c"
    assert clean("one ,two") == "one, two"
    assert clean("1,000") == "1,000"


def test_open_o():
    assert clean("Ↄ ↄ") == "Ɔ ɔ"


def test_nukta_order():
    # consonant + vowel sign + nukta becomes consonant + nukta + vowel sign
    assert normalize_order("कि़") == "क़ि"
    out = clean("कि़")
    assert out == unicodedata.normalize("NFC", "क़ि")


def test_danda_repair_only_after_devanagari():
    assert clean("राम |", "Deva") == "राम ।"
    assert clean("राम ||", "Deva") == "राम ॥"
    assert clean("ram |", "Deva") == "ram |"
    assert clean("राम |", "Latn") == "राम |"


def test_replacement_char_is_off_by_default():
    assert clean("�hello�") == "�hello�"
    assert clean("�hello�", enabled=("replacement-char",)) == "“hello”"


def test_range_and_empty_lines_are_untouched():
    assert clean(RANGE) == RANGE
    assert clean("") == ""


def test_rule_ids_are_reported():
    out, applied = clean_text("a ,b ﬁ", None, RULES)
    assert out == "a, b fi"
    assert "comma-space-before" in applied and "lig-fi" in applied


# ---------------------------------------------------------------------------
# Idempotence


def test_idempotence_on_fuzz_corpus():
    lines = fuzz_lines()
    for script in (None, "Cyrl", "Latn", "Deva"):
        assert idempotence_failures(lines, script) == []
    assert idempotence_failures(lines, None, ("replacement-char",)) == []


@given(st.text(alphabet=st.sampled_from(FUZZ_ALPHABET), max_size=30),
       st.sampled_from([None, "Cyrl", "Latn", "Deva"]))
def test_idempotence_property(line, script):
    once = clean(line, script)
    assert clean(once, script) == once


# ---------------------------------------------------------------------------
# Extract-level cleaning and reports


def test_clean_extract_report():
    ex = ExtractFile("t", [f"A{AMIN} ,{BRAT}", RANGE, "", f"{MIR}\ue000", f"{SLOVO} {I} {DELO}"])
    cleaned, report = clean_extract(ex)
    assert report.dominant_script == "Cyrl"
    assert cleaned.lines[0] == f"\u0410{AMIN}, {BRAT}"
    assert cleaned.lines[1:3] == [RANGE, ""]
    assert cleaned.lines[3] == f"{MIR}\ue000"  # private-use characters are left alone
    assert report.changes == {"comma-space-after": 1, "comma-space-before": 1, "cyrl-A": 1}
    assert report.total_changes == 3
    assert report.lines_changed == 1
    assert [(f.line, f.kind) for f in report.flags] == [(1, "wrong-script"), (4, "private-use")]


def test_three_latin_lookalikes_give_three_flags():
    # P, c and o are Latin
    report = analyze_text(ExtractFile("t", [f"{MIR} P{I}{MIR}", f"c\u043bo\u0432\u043e {DELO} {SLOVO}"]))
    assert report.flag_count("wrong-script") == 3
    assert {f.char for f in report.flags} == {"P", "c", "o"}


def test_private_use_flags_survive_cleaning():
    ex = ExtractFile("t", ["abc\ue000 ﬁ"])
    cleaned, _ = clean_extract(ex)
    assert analyze_text(cleaned).flag_count("private-use") == 1


def test_no_dominant_script_means_no_context_rules():
    ex = ExtractFile("t", [f"A{AMIN}", "Amen"])
    cleaned, report = clean_extract(ex)
    assert report.dominant_script is None
    assert cleaned.lines == ex.lines


def test_analyze_counts_scripts():
    report = analyze_text(ExtractFile("t", ["abc", "\u0434\u0435"]))
    assert report.script_counts == {"Cyrl": 2, "Latn": 3}


@pytest.mark.parametrize("text", [
    "x\tligature\tﬁ\tfi\n",
    "x\tnope\tﬁ\tfi\t*\n",
    "x\tligature\t(\tfi\t*\n",
    "x\tligature\t@unknown\t\t*\n",
    "x\tligature\ta\tb\tcyrl\n",
    "x\tligature\ta\tb\t*\nx\tligature\tc\td\t*\n",
])
def test_rule_file_errors(text):
    with pytest.raises(RuleError):
        parse_rules(text)


def test_rules_run_in_category_order():
    rules = parse_rules("late\tligature\tﬁ\tfi\t*\nearly\tpunctuation-spacing\t ,\t,\t*\n")
    assert [r.id for r in rules] == ["early", "late"]


def test_range_lines_are_not_counted_as_text():
    report = analyze_text(ExtractFile("t", [MIR, RANGE, RANGE]))
    assert report.script_counts == {"Cyrl": 3}


def test_change_counts_match_a_diff_recount():
    # isolated one-character substitutions, so each is one diff opcode
    r = random.Random(7)
    pieces = ["ﬁ", "ﬂ", "ﬀ", "Ↄ", "ↄ", "word", "and", "x"]
    lines = [" ".join(r.choice(pieces) for _ in range(r.randint(0, 12))) for _ in range(300)]
    cleaned, report = clean_extract(ExtractFile("t", lines))
    recount = 0
    differing = 0
    for before, after in zip(lines, cleaned.lines):
        ops = difflib.SequenceMatcher(None, before, after, autojunk=False).get_opcodes()
        recount += sum(1 for op in ops if op[0] != "equal")
        differing += before != after
    assert report.total_changes == recount == sum(report.changes.values())
    assert report.lines_changed == differing
