"""Character n-gram F-score (chrF with beta = 3)."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .bleu import MetricError

N_MAX = 6
BETA = 3.0


@dataclass(frozen=True)
class ChrfScore:
    score: float
    n_max: int = N_MAX
    beta: float = BETA
    order_f: tuple[float, ...] = ()


def char_ngrams(text: str, n: int) -> Counter:
    s = "".join(text.split())
    return Counter(s[i:i + n] for i in range(len(s) - n + 1))


def chrf_stats(hyp: str, ref: str, n_max: int = N_MAX) -> list[tuple[int, int, int]]:
    """(matches, hypothesis n-grams, reference n-grams) per order."""
    out = []
    for n in range(1, n_max + 1):
        h = char_ngrams(hyp, n)
        r = char_ngrams(ref, n)
        out.append((sum(min(c, r[g]) for g, c in h.items()), sum(h.values()), sum(r.values())))
    return out


def f_from_stats(stats, beta: float = BETA) -> tuple[float, tuple[float, ...]]:
    b2 = beta * beta
    fs = []
    for m, h, r in stats:
        if h == 0 or r == 0:
            continue  # order not present on both sides
        p, rec = m / h, m / r
        fs.append((1 + b2) * p * rec / (b2 * p + rec) if p + rec > 0 else 0.0)
    if not fs:
        return 0.0, ()
    return 100.0 * sum(fs) / len(fs), tuple(fs)


def chrf3(hyps: Sequence[str], refs: Sequence[str], n_max: int = N_MAX, beta: float = BETA) -> ChrfScore:
    """Corpus chrF: counts pooled over segments, F per order, averaged over
    the orders that occur.  Whitespace is removed before counting."""
    if len(hyps) != len(refs):
        raise MetricError(f"{len(hyps)} hypotheses for {len(refs)} references")
    if not hyps:
        raise MetricError("no segments to score")
    pooled = [[0, 0, 0] for _ in range(n_max)]
    for k, (h, r) in enumerate(zip(hyps, refs)):
        if not r.strip():
            raise MetricError(f"reference {k} is empty")
        for acc, st in zip(pooled, chrf_stats(h, r, n_max)):
            for i in range(3):
                acc[i] += st[i]
    score, fs = f_from_stats(pooled, beta)
    return ChrfScore(score, n_max, beta, fs)
