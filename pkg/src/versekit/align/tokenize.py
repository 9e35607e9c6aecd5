"""Rule tokenizer shared by the aligners and the metrics."""
import regex

TOKENIZER_ID = "versekit-rule-v1"

# Runs of letters, marks and digits form words; every other visible
# character (punctuation, symbols, dandas) is a token of its own.
_TOKEN = regex.compile(r"[\p{L}\p{M}\p{N}]+|[^\s\p{L}\p{M}\p{N}]")


def tokenize(line: str) -> list[str]:
    """Lowercase (where the script has case) and split off punctuation."""
    return _TOKEN.findall(line.lower())
