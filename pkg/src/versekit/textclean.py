"""Character-level cleaning of extract files.

Rules come from a tab-separated rule file (``data/clean_rules.tsv`` by
default).  A translation is first analysed to find its dominant script, which
gates the script-specific rules; cleaning then applies the rules line by line
in a fixed category order, repeated until the line is stable, and counts
what each rule changed.
"""
from __future__ import annotations

import functools
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from fontTools.unicodedata import script as _script

from .extract import RANGE, ExtractFile

CATEGORIES = (
    "sequence-order", "composition", "lookalike", "char-normalization",
    "punctuation-spacing", "ligature", "replacement-char",
)
OFF_BY_DEFAULT = frozenset({"replacement-char"})
DOMINANCE = 0.80
MAX_PASSES = 8  # rule-list passes per line before giving up on a fixed point

# Nukta signs of the Indic scripts (canonical combining class 7).
NUKTAS = frozenset(chr(c) for c in range(0x0900, 0x0E00) if unicodedata.combining(chr(c)) == 7)


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class CleanRule:
    id: str
    category: str
    pattern: str
    replacement: str
    context: str = "*"

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise RuleError(f"rule {self.id}: unknown category {self.category!r}")
        if self.pattern.startswith("@"):
            if self.pattern not in BUILTINS:
                raise RuleError(f"rule {self.id}: unknown built-in {self.pattern}")
        else:
            try:
                re.compile(self.pattern)
            except re.error as err:
                raise RuleError(f"rule {self.id}: bad pattern: {err}") from None

    @functools.cached_property
    def script(self) -> str | None:
        return None if self.context == "*" else self.context.split(":")[0]

    @functools.cached_property
    def token_gated(self) -> bool:
        return self.context.endswith(":token")

    @functools.cached_property
    def regex(self) -> re.Pattern:
        return _compiled(self.pattern)


_cache: dict[str, re.Pattern] = {}


def _compiled(pattern: str) -> re.Pattern:
    rx = _cache.get(pattern)
    if rx is None:
        rx = _cache[pattern] = re.compile(pattern)
    return rx


def _unescape(text: str) -> str:
    return re.sub(r"\\u([0-9A-Fa-f]{4})", lambda m: chr(int(m.group(1), 16)), text)


def parse_rules(text: str) -> list[CleanRule]:
    rules = []
    seen = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        cols = raw.split("\t")
        if len(cols) != 5:
            raise RuleError(f"line {line_no}: expected 5 tab-separated columns, got {len(cols)}")
        rid, cat, pat, rep, ctx = cols
        if rid in seen:
            raise RuleError(f"line {line_no}: duplicate rule id {rid}")
        seen.add(rid)
        if not re.fullmatch(r"\*|[A-Z][a-z]{3}(:token)?", ctx):
            raise RuleError(f"line {line_no}: bad context {ctx!r}")
        try:
            rules.append(CleanRule(rid, cat, _unescape(pat), _unescape(rep), ctx))
        except RuleError as err:
            raise RuleError(f"line {line_no}: {err}") from None
    order = {c: i for i, c in enumerate(CATEGORIES)}
    # stable sort: file order within a category
    return sorted(rules, key=lambda r: order[r.category])


def default_rules_text() -> str:
    return resources.files("versekit.data").joinpath("clean_rules.tsv").read_text(encoding="utf-8")


def load_rules(path: str | Path | None = None) -> list[CleanRule]:
    text = default_rules_text() if path is None else Path(path).read_text(encoding="utf-8")
    return parse_rules(text)


# ---------------------------------------------------------------------------
# Built-in transformations


def _clusters(text: str) -> list[str]:
    """Split into a base character plus its following combining marks."""
    out: list[str] = []
    for ch in text:
        if out and unicodedata.category(ch).startswith("M"):
            out[-1] += ch
        else:
            out.append(ch)
    return out


def normalize_order(cluster: str) -> str:
    """Composed form, with a nukta placed directly after its base consonant.

    Canonical composition leaves base + vowel sign + nukta alone because the
    vowel sign is a starter; the conventional order is base + nukta + vowel
    sign.
    """
    s = unicodedata.normalize("NFC", cluster)
    if len(s) > 2 and any(c in NUKTAS for c in s[2:]):
        base, marks = s[0], list(s[1:])
        nuktas = [c for c in marks if c in NUKTAS]
        rest = [c for c in marks if c not in NUKTAS]
        s = unicodedata.normalize("NFC", base + "".join(nuktas) + "".join(rest))
    return s


def _builtin_nukta(text: str) -> tuple[str, int]:
    n = 0
    parts = []
    for cl in _clusters(text):
        if len(cl) > 2 and any(c in NUKTAS for c in cl[2:]):
            new = normalize_order(cl)
            if new != cl:
                n += 1
            cl = new
        parts.append(cl)
    return "".join(parts), n


def _builtin_nfc(text: str) -> tuple[str, int]:
    if unicodedata.is_normalized("NFC", text):
        return text, 0
    n = 0
    parts = []
    for cl in _clusters(text):
        new = unicodedata.normalize("NFC", cl)
        if new != cl:
            n += 1
        parts.append(new)
    return "".join(parts), n


BUILTINS = {"@nfc": _builtin_nfc, "@nukta-order": _builtin_nukta}


# ---------------------------------------------------------------------------
# Script analysis


@functools.lru_cache(maxsize=4096)
def char_script(ch: str) -> str:
    return _script(ch)


def is_letter(ch: str) -> bool:
    return unicodedata.category(ch).startswith("L")


def script_census(lines: Iterable[str]) -> Counter:
    counts: Counter = Counter()
    for line in lines:
        if line == RANGE:
            continue
        for ch in line:
            if is_letter(ch):
                counts[char_script(ch)] += 1
    return counts


def dominant_script(counts: Counter, threshold: float = DOMINANCE) -> str | None:
    """The script of at least `threshold` of all letters, if any."""
    total = sum(counts.values())
    if not total:
        return None
    top, n = max(counts.items(), key=lambda kv: (kv[1], kv[0]))
    return top if n / total >= threshold else None


def majority_script(counts: Counter) -> str | None:
    if not counts:
        return None
    return max(counts.items(), key=lambda kv: (kv[1], kv[0]))[0]


# ---------------------------------------------------------------------------
# Cleaning

_WORD = re.compile(r"[^\W\d_]+(?:[̀-ͯ]*)", re.UNICODE)


def _apply_token_gated(rule: CleanRule, text: str) -> tuple[str, int]:
    rx = rule.regex
    if not rx.search(text):
        return text, 0
    script = rule.script
    count = 0

    def fix(m: re.Match) -> str:
        nonlocal count
        word = m.group(0)
        if not rx.search(word):
            return word
        letters = [c for c in word if is_letter(c)]
        if len(letters) > 1 and not any(char_script(c) == script for c in letters):
            return word
        new, k = rx.subn(rule.replacement, word)
        count += k
        return new

    out = _WORD.sub(fix, text)
    return out, count


def apply_rule(rule: CleanRule, text: str, script_context: str | None) -> tuple[str, int]:
    """Apply one rule; returns (text, number of replacements)."""
    if rule.script is not None and rule.script != script_context:
        return text, 0
    if rule.pattern.startswith("@"):
        return BUILTINS[rule.pattern](text)
    if rule.token_gated:
        return _apply_token_gated(rule, text)
    if not rule.regex.search(text):
        return text, 0
    count = 0

    def sub(m: re.Match) -> str:
        nonlocal count
        new = m.expand(rule.replacement)
        if new != m.group(0):
            count += 1
        return new

    return rule.regex.sub(sub, text), count


def clean_text(line: str, script_context: str | None, rules: Sequence[CleanRule],
               enabled: Iterable[str] = ()) -> tuple[str, list[str]]:
    """Clean one line.  Returns the new line and the ids of rules that fired
    (one entry per replacement)."""
    out, counts = _clean_counts(line, script_context, rules, frozenset(enabled))
    applied = [rid for rid, n in counts.items() for _ in range(n)]
    return out, applied


def _active(rule: CleanRule, enabled: frozenset) -> bool:
    if rule.category in OFF_BY_DEFAULT:
        return rule.id in enabled or rule.category in enabled
    return True


def _clean_counts(line: str, script_context, rules, enabled: frozenset) -> tuple[str, Counter]:
    counts: Counter = Counter()
    if line == RANGE or not line:
        return line, counts
    # A later rule can produce input for an earlier one (a ligature expanded
    # next to a combining mark needs composing again), so the ordered list is
    # rerun until a pass changes nothing.
    for _ in range(MAX_PASSES):
        before = line
        for rule in rules:
            if not _active(rule, enabled):
                continue
            line, n = apply_rule(rule, line, script_context)
            if n:
                counts[rule.id] += n
        if line == before:
            break
    if line == RANGE:  # never manufacture the range token
        raise AssertionError("cleaning produced the <range> token")
    return line, counts


@dataclass
class Flag:
    line: int  # 1-based line number in the extract file
    kind: str  # "private-use" or "wrong-script"
    char: str
    script: str = ""


@dataclass
class CleanReport:
    translation_id: str
    dominant_script: str | None
    script_counts: dict[str, int]
    changes: dict[str, int] = field(default_factory=dict)
    lines_changed: int = 0
    flags: list[Flag] = field(default_factory=list)

    @property
    def total_changes(self) -> int:
        return sum(self.changes.values())

    def flag_count(self, kind: str) -> int:
        return sum(1 for f in self.flags if f.kind == kind)

    def rows(self) -> list[tuple[str, str, int]]:
        return [(self.translation_id, rid, n) for rid, n in sorted(self.changes.items())]


def analyze_text(extract: ExtractFile) -> CleanReport:
    """Pre-clean census: dominant script, off-script letters, private-use characters."""
    counts = script_census(extract.lines)
    dom = dominant_script(counts)
    ref_script = dom or majority_script(counts)
    flags = []
    for i, line in enumerate(extract.lines, start=1):
        if line == RANGE:
            continue
        for ch in line:
            cat = unicodedata.category(ch)
            if cat == "Co":
                flags.append(Flag(i, "private-use", ch))
            elif cat.startswith("L") and ref_script is not None:
                sc = char_script(ch)
                if sc not in (ref_script, "Zyyy", "Zinh", "Zzzz"):
                    flags.append(Flag(i, "wrong-script", ch, sc))
    return CleanReport(extract.translation_id, dom, dict(sorted(counts.items())), flags=flags)


def clean_extract(extract: ExtractFile, rules: Sequence[CleanRule] | None = None,
                  enabled: Iterable[str] = ()) -> tuple[ExtractFile, CleanReport]:
    rules = load_rules() if rules is None else list(rules)
    report = analyze_text(extract)
    enabled = frozenset(enabled)
    total: Counter = Counter()
    new_lines = []
    changed = 0
    for line in extract.lines:
        new, counts = _clean_counts(line, report.dominant_script, rules, enabled)
        total.update(counts)
        if new != line:
            changed += 1
        new_lines.append(new)
    report.changes = dict(sorted(total.items()))
    report.lines_changed = changed
    return ExtractFile(extract.translation_id, new_lines), report
