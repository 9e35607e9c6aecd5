"""Scoring a hypothesis file against a reference extract."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

from ..align.tokenize import TOKENIZER_ID, tokenize
from ..extract import RANGE, ExtractFile
from ..versification import CanonicalIndex, VerseRef
from .bleu import MetricError, bleu, sentence_bleu, BleuScore
from .chrf import BETA, N_MAX, chrf3
from .edit import EXACT_LIMIT, MAX_SHIFT_DIST, corpus_edit_rates
from .subword import SubwordModel

CDF_STEPS = tuple(range(0, 101, 5))


def spbleu(hyps: Sequence[str], refs: Sequence[str], model: SubwordModel) -> BleuScore:
    """BLEU over subword pieces.  Lines are rule-tokenized first, so the
    whitespace-degenerate model gives exactly the word-level BLEU."""
    seg = lambda line: model.segment(" ".join(tokenize(line)))  # noqa: E731
    return bleu([seg(h) for h in hyps], [seg(r) for r in refs])


@dataclass
class VerseScore:
    ref: str
    bleu: float
    chrf3: float


@dataclass
class ScoreReport:
    corpus: dict[str, float | None]
    verses: list[VerseScore]
    cdf: list[tuple[int, float]]  # (per-verse BLEU threshold, share of verses at or below)
    fingerprint: dict[str, object] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"corpus": self.corpus, "cdf": self.cdf, "fingerprint": self.fingerprint,
                           "verses": [asdict(v) for v in self.verses]},
                          ensure_ascii=False, indent=1, sort_keys=True) + "\n"

    def verses_tsv(self) -> str:
        rows = ["ref\tbleu\tchrf3"]
        rows += [f"{v.ref}\t{v.bleu:.4f}\t{v.chrf3:.4f}" for v in self.verses]
        return "\n".join(rows) + "\n"

    def summary(self) -> str:
        lines = []
        for name, value in self.corpus.items():
            lines.append(f"{name:8s} {'n/a' if value is None else f'{value:.2f}'}")
        lines.append(f"verses   {len(self.verses)}")
        return "\n".join(lines) + "\n"


def cumulative_distribution(scores: Sequence[float]) -> list[tuple[int, float]]:
    n = len(scores)
    return [(t, sum(1 for s in scores if s <= t) / n) for t in CDF_STEPS]


def score_lines(hyps: Sequence[str], refs: Sequence[str], labels: Sequence[str] | None = None,
                subword: SubwordModel | None = None) -> ScoreReport:
    if len(hyps) != len(refs):
        raise MetricError(f"{len(hyps)} hypothesis lines for {len(refs)} references")
    if not refs:
        raise MetricError("no verses to score")
    labels = list(labels) if labels is not None else [str(i + 1) for i in range(len(refs))]
    htok = [tokenize(h) for h in hyps]
    rtok = [tokenize(r) for r in refs]
    for k, r in enumerate(rtok):
        if not r:
            raise MetricError(f"reference for {labels[k]} has no tokens")
    w, t = corpus_edit_rates(htok, rtok)
    corpus = {
        "bleu": bleu(htok, rtok).score,
        "spbleu": spbleu(hyps, refs, subword).score if subword is not None else None,
        "chrf3": chrf3(hyps, refs).score,
        "wer": w,
        "ter": t,
    }
    verses = [VerseScore(lab, sentence_bleu(h, r), chrf3([hs], [rs]).score)
              for lab, h, r, hs, rs in zip(labels, htok, rtok, hyps, refs)]
    fp = {
        "tokenizer": TOKENIZER_ID,
        "bleu": "max-order=4 corpus=pooled verse=add-one(n>=2)",
        "chrf": f"n=1..{N_MAX} beta={BETA:g} whitespace=removed",
        "ter": f"greedy shifts, distance<={MAX_SHIFT_DIST}, exact for <={EXACT_LIMIT} words",
        "subword_model": subword.hash if subword is not None else None,
    }
    return ScoreReport(corpus, verses, cumulative_distribution([v.bleu for v in verses]), fp)


def score_hypotheses(hyp_lines: Sequence[str], ref_extract: ExtractFile, verse_set: Sequence[VerseRef],
                     index: CanonicalIndex, subword: SubwordModel | None = None) -> ScoreReport:
    """Score one hypothesis line per verse of `verse_set` against the extract."""
    if not verse_set:
        raise MetricError("empty verse set")
    if len(hyp_lines) != len(verse_set):
        raise MetricError(f"hypothesis file has {len(hyp_lines)} lines for {len(verse_set)} verses")
    refs = []
    for ref in verse_set:
        line = ref_extract.lines[index.position(ref)]
        if not line or line == RANGE:
            raise MetricError(f"{ref} has no reference text in {ref_extract.translation_id}")
        refs.append(line)
    return score_lines(hyp_lines, refs, [str(r) for r in verse_set], subword)
