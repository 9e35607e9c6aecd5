"""Unigram language-model subword segmentation, trained from scratch.

Training follows the usual recipe: seed the vocabulary with frequent
substrings, fit piece probabilities by EM over all segmentations of each
word, then repeatedly drop the pieces whose removal costs the least
likelihood.  Single characters are never dropped, so any seen string stays
segmentable; unseen characters fall back to single-character pieces.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .bleu import MetricError

MARK = "▁"  # word-start marker, as in SentencePiece
MAX_PIECE = 16
SHRINK = 0.75
EM_ROUNDS = 2
UNK_PENALTY = 10.0


@dataclass(frozen=True)
class SubwordModel:
    pieces: tuple[tuple[str, float], ...]  # (piece, log probability), sorted by piece
    seed: int = 0
    whitespace: bool = False  # degenerate model: one piece per word
    _logp: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def logp(self) -> dict[str, float]:
        if not self._logp:
            self._logp.update(self.pieces)
        return self._logp

    @property
    def unk_logp(self) -> float:
        return (min(self.logp.values()) if self.logp else 0.0) - UNK_PENALTY

    def segment(self, line: str) -> list[str]:
        out: list[str] = []
        for word in line.split():
            if self.whitespace:
                out.append(MARK + word)
            else:
                out.extend(viterbi_segment(MARK + word, self.logp, self.unk_logp))
        return out

    def to_json(self) -> str:
        return json.dumps({"format": "versekit-unigram-1", "seed": self.seed,
                           "whitespace": self.whitespace,
                           "pieces": [[p, float(lp).hex()] for p, lp in self.pieces]},
                          ensure_ascii=False, indent=0, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SubwordModel":
        d = json.loads(text)
        if d.get("format") != "versekit-unigram-1":
            raise MetricError("not a versekit subword model")
        return cls(tuple((p, float.fromhex(lp)) for p, lp in d["pieces"]), d["seed"], d["whitespace"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SubwordModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()[:16]


WHITESPACE_MODEL = SubwordModel((), 0, whitespace=True)


def desegment(pieces: Sequence[str]) -> str:
    return "".join(pieces).replace(MARK, " ").strip()


def viterbi_segment(s: str, logp: dict[str, float], unk_logp: float) -> list[str]:
    n = len(s)
    best = [-math.inf] * (n + 1)
    back = [0] * (n + 1)
    best[0] = 0.0
    for e in range(1, n + 1):
        for b in range(max(0, e - MAX_PIECE), e):
            if best[b] == -math.inf:
                continue
            lp = logp.get(s[b:e])
            if lp is None:
                if e - b != 1:
                    continue
                lp = unk_logp
            v = best[b] + lp
            if v > best[e]:  # strict: ties keep the earliest split point
                best[e], back[e] = v, b
    out = []
    e = n
    while e > 0:
        b = back[e]
        out.append(s[b:e])
        e = b
    out.reverse()
    return out


def _edges(s: str, vocab) -> list[tuple[int, int, str]]:
    n = len(s)
    return [(b, e, s[b:e]) for b in range(n) for e in range(b + 1, min(n, b + MAX_PIECE) + 1)
            if s[b:e] in vocab]


def _em_step(words, edges_of, prob: dict[str, float]) -> tuple[dict[str, float], float]:
    counts: dict[str, float] = dict.fromkeys(prob, 0.0)
    ll = 0.0
    for (s, c), edges in zip(words, edges_of):
        n = len(s)
        alpha = [0.0] * (n + 1)
        alpha[0] = 1.0
        for b, e, p in edges:  # sorted by start
            alpha[e] += alpha[b] * prob[p]
        Z = alpha[n]
        if Z <= 0:
            continue
        beta = [0.0] * (n + 1)
        beta[n] = 1.0
        for b, e, p in reversed(edges):
            beta[b] += prob[p] * beta[e]
        ll += c * math.log(Z)
        for b, e, p in edges:
            counts[p] += c * alpha[b] * prob[p] * beta[e] / Z
    return counts, ll


def train_subword(lines: Iterable[str], vocab_size: int = 2000, seed: int = 0,
                  seed_factor: int = 8) -> SubwordModel:
    """Train a unigram model with at most `vocab_size` pieces.

    The result depends only on the input and `seed`; the seed orders pieces
    that tie during pruning.
    """
    words = Counter()
    for line in lines:
        words.update(line.split())
    if not words:
        raise MetricError("no training text for the subword model")
    marked = sorted((MARK + w, c) for w, c in words.items())
    chars = sorted({ch for s, _ in marked for ch in s})
    if vocab_size < len(chars):
        raise MetricError(f"vocab_size {vocab_size} is below the {len(chars)} distinct characters")
    rng = random.Random(seed)
    tiebreak = {}

    # seed vocabulary: characters plus the most frequent longer substrings
    sub = Counter()
    for s, c in marked:
        for b in range(len(s)):
            for e in range(b + 2, min(len(s), b + MAX_PIECE) + 1):
                sub[s[b:e]] += c
    limit = max(vocab_size * seed_factor, vocab_size)
    ranked = sorted(((p, c) for p, c in sub.items() if c >= 2), key=lambda x: (-x[1] * len(x[0]), x[0]))
    vocab = {ch: 1.0 for ch in chars}
    for p, c in ranked[:limit]:
        vocab[p] = float(c)
    char_set = set(chars)

    def normalise(v):
        total = math.fsum(v.values())
        out = {p: x / total for p, x in v.items()}
        return {p: x for p, x in out.items() if x > 0 or p in char_set}

    prob = normalise(vocab)
    while True:
        edges_of = [_edges(s, prob) for s, _ in marked]
        for _ in range(EM_ROUNDS):
            counts, _ = _em_step(marked, edges_of, prob)
            for ch in char_set:
                counts[ch] = max(counts[ch], 1e-6)  # keep characters alive
            prob = normalise(counts)
            edges_of = [[ed for ed in edges if ed[2] in prob] for edges in edges_of]
        if len(prob) <= vocab_size:
            break
        target = max(vocab_size, int(len(prob) * SHRINK))
        logp = {p: math.log(x) for p, x in prob.items()}
        losses = []
        for p, x in prob.items():
            if p in char_set:
                continue
            own = logp.pop(p)
            alt = viterbi_segment(p, logp, -1e9)
            alt_lp = sum(logp.get(q, -1e9) for q in alt)
            logp[p] = own
            if p not in tiebreak:
                tiebreak[p] = rng.random()
            losses.append((counts.get(p, 0.0) * (own - alt_lp), tiebreak[p], p))
        losses.sort()
        drop = {p for _, _, p in losses[:len(prob) - target]}
        prob = normalise({p: x for p, x in prob.items() if p not in drop})
    pieces = tuple(sorted((p, math.log(x)) for p, x in prob.items()))
    return SubwordModel(pieces, seed)
