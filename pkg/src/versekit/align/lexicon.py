"""Lexical translation tables and the word-greedy SMT baseline."""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from .corpus import NULL, TokenizedCorpus
from .models import train_fast_align
from .tokenize import tokenize

LexicalTable = dict[str, list[tuple[str, float]]]


def lexical_table(model, invert: bool = False) -> LexicalTable:
    """Ranked translation candidates per word.

    Without `invert` the rows are the model's conditioning words, NULL
    included: row e lists t(f | e).  With `invert` the rows are the model's
    generated words f and list p(e | f), proportional to t(f | e) p(e) with
    p(e) taken from the expected counts of the last E-step; NULL is then a
    candidate.  Rows are sorted by probability, descending, ties by token.
    """
    t = model.t
    rows: dict[int, list] = defaultdict(list)
    if not invert:
        for r, c, p in zip(t.rows, t.cols, t.prob):
            if p > 0:
                rows[int(r)].append((t.target_tokens[c], float(p)))
        names = t.source_tokens
    else:
        mass = t.mass
        total = mass.sum()
        prior = mass / total if total > 0 else np.full(len(mass), 1.0 / len(mass))
        joint = t.prob * prior[t.rows]
        norm = np.bincount(t.cols, weights=joint, minlength=len(t.target_tokens))
        for r, c, p in zip(t.rows, t.cols, joint):
            if p > 0:
                rows[int(c)].append((t.source_tokens[r], float(p / norm[c])))
        names = t.target_tokens
    return {names[k]: sorted(v, key=lambda x: (-x[1], x[0])) for k, v in sorted(rows.items())}


def smt_decode(source_line: str, table: LexicalTable, mode: str = "word-greedy") -> str:
    """Translate word by word with the top candidate of each row.

    A word whose best candidate is NULL is dropped; words without a row are
    copied through.
    """
    if mode != "word-greedy":
        raise ValueError(f"unsupported decoding mode {mode!r}")
    out = []
    for tok in tokenize(source_line):
        row = table.get(tok)
        if not row:
            out.append(tok)
        elif row[0][0] != NULL:
            out.append(row[0][0])
    return " ".join(out)


def train_smt(corpus: TokenizedCorpus, iterations: int = 5, jobs: int = 1) -> LexicalTable:
    """Baseline table from a source->target corpus.

    The diagonal model is trained in the target->source direction so that
    the inverted table ranks target words and NULL for each source word.
    """
    model = train_fast_align(corpus.swapped(), iterations, jobs)
    return lexical_table(model, invert=True)
