"""BLEU with pooled clipped n-gram counts."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

MAX_ORDER = 4


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class BleuScore:
    score: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    matches: tuple[int, ...] = ()
    totals: tuple[int, ...] = ()


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(hyp: Sequence[str], ref: Sequence[str]) -> tuple[list[int], list[int]]:
    """Clipped matches and hypothesis n-gram totals for orders 1..4."""
    matches, totals = [], []
    for n in range(1, MAX_ORDER + 1):
        h = ngrams(hyp, n)
        r = ngrams(ref, n)
        matches.append(sum(min(c, r[g]) for g, c in h.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    return matches, totals


def _check(hyps, refs) -> None:
    if len(hyps) != len(refs):
        raise MetricError(f"{len(hyps)} hypotheses for {len(refs)} references")
    if not hyps:
        raise MetricError("no segments to score")
    for k, ref in enumerate(refs):
        if len(ref) == 0:
            raise MetricError(f"reference {k} is empty")


def _combine(matches, totals, hyp_len: int, ref_len: int, smooth: bool) -> BleuScore:
    precisions = []
    for n, (m, t) in enumerate(zip(matches, totals), start=1):
        if smooth and n > 1:
            precisions.append((m + 1) / (t + 1))
        else:
            precisions.append(m / t if t else 0.0)
    if hyp_len == 0:
        bp = 0.0
    elif hyp_len > ref_len:
        bp = 1.0
    else:
        bp = math.exp(1.0 - ref_len / hyp_len)
    if min(precisions) <= 0 or bp == 0:
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions) / MAX_ORDER) * 100.0
    return BleuScore(min(score, 100.0), tuple(precisions), bp, hyp_len, ref_len,
                     tuple(matches), tuple(totals))


def bleu(hyps: Sequence[Sequence[str]], refs: Sequence[Sequence[str]], mode: str = "corpus") -> BleuScore:
    """Corpus BLEU, or with mode="per-verse-smoothed" add-one smoothing of the
    2- to 4-gram precisions (meant for single verses)."""
    if mode not in ("corpus", "per-verse-smoothed"):
        raise MetricError(f"unknown BLEU mode {mode!r}")
    _check(hyps, refs)
    matches = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    hyp_len = ref_len = 0
    for h, r in zip(hyps, refs):
        m, t = bleu_stats(h, r)
        matches = [a + b for a, b in zip(matches, m)]
        totals = [a + b for a, b in zip(totals, t)]
        hyp_len += len(h)
        ref_len += len(r)
    return _combine(matches, totals, hyp_len, ref_len, smooth=mode != "corpus")


def sentence_bleu(hyp: Sequence[str], ref: Sequence[str]) -> float:
    return bleu([hyp], [ref], mode="per-verse-smoothed").score
