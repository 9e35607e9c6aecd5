"""Link posteriors, Viterbi links and the symmetric corpus alignment score."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import TokenizedCorpus
from .models import AlignmentError, train_fast_align, train_hmm, train_ibm1


@dataclass(frozen=True)
class AlignmentMatrix:
    """Posterior link probabilities for one sentence pair.

    ``post[0, j]`` is the probability that target word j aligns to NULL and
    ``post[i + 1, j]`` that it aligns to source word i.
    """

    source: tuple[str, ...]
    target: tuple[str, ...]
    post: np.ndarray

    def max_links(self) -> np.ndarray:
        """Best non-NULL link probability for every target position."""
        return self.post[1:].max(axis=0)


@dataclass(frozen=True)
class SymmetricScore:
    score: float
    direction_scores: tuple[float, float]  # (source->target, target->source)
    verses: int


def _check_pair(src: Sequence[str], tgt: Sequence[str]) -> None:
    if not src or not tgt:
        raise AlignmentError("both sides of a sentence pair must be non-empty")


def posteriors(model, src: Sequence[str], tgt: Sequence[str]) -> AlignmentMatrix:
    """Posterior link matrix; unknown words get probability EPSILON."""
    _check_pair(src, tgt)
    T = model.t.matrix(src, tgt)
    return AlignmentMatrix(tuple(src), tuple(tgt), model.posterior_matrix(T))


def viterbi(model, src: Sequence[str], tgt: Sequence[str]) -> list[tuple[int, int]]:
    """Best alignment as (source index, target index) links, NULL links omitted."""
    _check_pair(src, tgt)
    return model.viterbi_links(model.t.matrix(src, tgt))


def pharaoh(links: Iterable[tuple[int, int]]) -> str:
    return " ".join(f"{i}-{j}" for i, j in sorted(links))


def _geometric_mean(values: np.ndarray) -> float:
    with np.errstate(divide="ignore"):
        logs = np.log(values)
    if np.isneginf(logs).any():
        return 0.0
    return float(np.exp(logs.mean()))


def direction_score(model, corpus: TokenizedCorpus) -> float:
    """Mean over verses of the geometric mean, over target words, of the best
    non-NULL link posterior."""
    if len(corpus) == 0:
        raise AlignmentError("empty corpus")
    src_map = model.t.source_ids(corpus.source_vocab.tokens)
    tgt_map = model.t.target_ids(corpus.target_vocab.tokens)
    scores = []
    for s, t in corpus.pairs:
        T = model.t.values(np.concatenate(([0], src_map[s])), tgt_map[t])
        post = model.posterior_matrix(T)
        scores.append(_geometric_mean(post[1:].max(axis=0)))
    return min(1.0, math.fsum(scores) / len(scores))


def corpus_alignment_score(model_fwd, model_rev, corpus: TokenizedCorpus) -> SymmetricScore:
    """model_fwd generates target words from source words, model_rev the reverse."""
    fwd = direction_score(model_fwd, corpus)
    rev = direction_score(model_rev, corpus.swapped())
    return SymmetricScore((fwd + rev) / 2.0, (fwd, rev), len(corpus))


def train_direction(corpus: TokenizedCorpus, kind: str = "hmm", iterations: int = 5, jobs: int = 1):
    if kind == "hmm":
        return train_hmm(corpus, iterations=iterations, jobs=jobs)
    if kind == "ibm1":
        return train_ibm1(corpus, iterations, jobs)
    if kind in ("ibm2", "fast_align"):
        return train_fast_align(corpus, iterations, jobs)
    raise AlignmentError(f"unknown model kind {kind!r}")


def symmetric_score(corpus: TokenizedCorpus, kind: str = "hmm", iterations: int = 5,
                    jobs: int = 1) -> SymmetricScore:
    """Train both directions on the corpus and score it."""
    fwd = train_direction(corpus, kind, iterations, jobs)
    rev = train_direction(corpus.swapped(), kind, iterations, jobs)
    return corpus_alignment_score(fwd, rev, corpus)
