"""Token-id corpora of verse pairs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .tokenize import tokenize

NULL = "<NULL>"


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]]) -> "Vocab":
        seen: dict[str, None] = {}
        for sent in sentences:
            for tok in sent:
                seen.setdefault(tok, None)
        return cls(tuple(seen))

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def ids(self) -> dict[str, int]:
        d = self.__dict__.get("_ids")
        if d is None:
            d = {t: i for i, t in enumerate(self.tokens)}
            object.__setattr__(self, "_ids", d)
        return d

    def encode(self, sent: Sequence[str]) -> np.ndarray:
        ids = self.ids
        return np.array([ids[t] for t in sent], dtype=np.int64)


@dataclass(frozen=True)
class TokenizedCorpus:
    """Verse pairs as (source ids, target ids) with dense vocabularies."""

    pairs: tuple[tuple[np.ndarray, np.ndarray], ...]
    source_vocab: Vocab
    target_vocab: Vocab

    def __post_init__(self):
        for k, (s, t) in enumerate(self.pairs):
            if len(s) == 0 or len(t) == 0:
                raise ValueError(f"pair {k} has an empty side")

    @classmethod
    def from_tokens(cls, pairs: Iterable[tuple[Sequence[str], Sequence[str]]],
                    source_vocab: Vocab | None = None, target_vocab: Vocab | None = None) -> "TokenizedCorpus":
        pairs = [(list(s), list(t)) for s, t in pairs]
        sv = source_vocab or Vocab.build(s for s, _ in pairs)
        tv = target_vocab or Vocab.build(t for _, t in pairs)
        enc = tuple((sv.encode(s), tv.encode(t)) for s, t in pairs)
        return cls(enc, sv, tv)

    @classmethod
    def from_lines(cls, pairs: Iterable[tuple[str, str]]) -> "TokenizedCorpus":
        """Tokenize raw line pairs, skipping pairs with an empty side."""
        toks = []
        for s, t in pairs:
            a, b = tokenize(s), tokenize(t)
            if a and b:
                toks.append((a, b))
        return cls.from_tokens(toks)

    def __len__(self) -> int:
        return len(self.pairs)

    def tokens(self, k: int) -> tuple[list[str], list[str]]:
        s, t = self.pairs[k]
        return [self.source_vocab.tokens[i] for i in s], [self.target_vocab.tokens[i] for i in t]

    def swapped(self) -> "TokenizedCorpus":
        return TokenizedCorpus(tuple((t, s) for s, t in self.pairs), self.target_vocab, self.source_vocab)

    def relabeled(self, src_perm: np.ndarray, tgt_perm: np.ndarray) -> "TokenizedCorpus":
        """Same corpus with token ids permuted (old id i becomes perm[i])."""
        sv = [None] * len(self.source_vocab)
        tv = [None] * len(self.target_vocab)
        for i, tok in enumerate(self.source_vocab.tokens):
            sv[src_perm[i]] = tok
        for i, tok in enumerate(self.target_vocab.tokens):
            tv[tgt_perm[i]] = tok
        pairs = tuple((src_perm[s], tgt_perm[t]) for s, t in self.pairs)
        return TokenizedCorpus(pairs, Vocab(tuple(sv)), Vocab(tuple(tv)))
