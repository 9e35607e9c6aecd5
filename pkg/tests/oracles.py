"""Slow, independently written reference computations used by the tests.

None of these import the code under test except for plain data types.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

# ---------------------------------------------------------------------------
# Alignment


def hmm_posteriors_by_enumeration(T: np.ndarray, jump: np.ndarray, p_null: float, max_jump: int = 7) -> np.ndarray:
    """Link posteriors of the NULL-memory HMM by summing over every alignment.

    T is (I+1, J) with the NULL row first.  An alignment a in {0..I}^J picks
    NULL (0) or a source word per target position.  Moving to word i from
    remembered position m costs (1-p_null) s(i-m) / sum_i' s(i'-m); moving to
    NULL costs p_null and keeps m.  The walk starts at m = 0.
    """
    I, J = T.shape[0] - 1, T.shape[1]

    def s(d):
        return jump[max(-max_jump, min(max_jump, d)) + max_jump]

    norm = {m: sum(s(i - m) for i in range(1, I + 1)) for m in range(I + 1)}
    post = np.zeros((I + 1, J))
    total = 0.0
    for a in itertools.product(range(I + 1), repeat=J):
        p = 1.0
        m = 0
        for j, i in enumerate(a):
            if i == 0:
                p *= p_null * T[0, j]
            else:
                p *= (1.0 - p_null) * s(i - m) / norm[m] * T[i, j]
                m = i
        total += p
        for j, i in enumerate(a):
            post[i, j] += p
    return post / total


def ibm1_em_by_enumeration(corpus, iterations: int) -> list[dict]:
    """IBM1 EM where the E-step enumerates all alignments of each pair.

    corpus: list of (source tokens, target tokens).  Source position 0 is
    NULL.  Starts from a uniform table; returns the table after each
    iteration as {(source, target): probability}.
    """
    src_vocab = sorted({w for s, _ in corpus for w in s} | {"<NULL>"})
    tgt_vocab = sorted({w for _, t in corpus for w in t})
    t = {(e, f): 1.0 / len(tgt_vocab) for e in src_vocab for f in tgt_vocab}
    history = []
    for _ in range(iterations):
        counts = {}
        for s, f_sent in corpus:
            e_sent = ["<NULL>"] + list(s)
            alignments = list(itertools.product(range(len(e_sent)), repeat=len(f_sent)))
            weights = []
            for a in alignments:
                p = 1.0
                for j, i in enumerate(a):
                    p *= t[(e_sent[i], f_sent[j])]
                weights.append(p)
            z = sum(weights)
            for a, w in zip(alignments, weights):
                for j, i in enumerate(a):
                    key = (e_sent[i], f_sent[j])
                    counts[key] = counts.get(key, 0.0) + w / z
        totals = {}
        for (e, f), c in counts.items():
            totals[e] = totals.get(e, 0.0) + c
        t = {(e, f): counts.get((e, f), 0.0) / totals[e] if e in totals else t[(e, f)]
             for e in src_vocab for f in tgt_vocab}
        history.append(dict(t))
    return history


# ---------------------------------------------------------------------------
# Metrics


def _grams(tokens, n):
    out = {}
    for i in range(len(tokens) - n + 1):
        g = tuple(tokens[i:i + n])
        out[g] = out.get(g, 0) + 1
    return out


def bleu_reference(hyps, refs, max_order: int = 4) -> float:
    """Corpus BLEU with pooled clipped counts and no smoothing."""
    matched = [0] * max_order
    possible = [0] * max_order
    c = r = 0
    for h, ref in zip(hyps, refs):
        c += len(h)
        r += len(ref)
        for n in range(1, max_order + 1):
            hg, rg = _grams(h, n), _grams(ref, n)
            for g, k in hg.items():
                matched[n - 1] += min(k, rg.get(g, 0))
            possible[n - 1] += sum(hg.values())
    if c == 0 or any(m == 0 for m in matched):
        return 0.0
    log_p = sum(math.log(m / p) for m, p in zip(matched, possible)) / max_order
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return 100.0 * bp * math.exp(log_p)


def chrf_reference(hyps, refs, n_max: int = 6, beta: float = 3.0) -> float:
    """chrF over pooled character n-gram counts, spaces removed, F averaged
    over the orders that occur in both hypothesis and reference totals."""
    fs = []
    for n in range(1, n_max + 1):
        m = th = tr = 0
        for h, ref in zip(hyps, refs):
            hs = h.replace(" ", "").replace("\t", "")
            rs = ref.replace(" ", "").replace("\t", "")
            hg = [hs[i:i + n] for i in range(len(hs) - n + 1)]
            rg = [rs[i:i + n] for i in range(len(rs) - n + 1)]
            th += len(hg)
            tr += len(rg)
            pool = list(rg)
            for g in hg:
                if g in pool:
                    pool.remove(g)
                    m += 1
        if th == 0 or tr == 0:
            continue
        p, rc = m / th, m / tr
        fs.append(0.0 if p + rc == 0 else (1 + beta ** 2) * p * rc / (beta ** 2 * p + rc))
    return 100.0 * sum(fs) / len(fs) if fs else 0.0


def edit_distance_by_enumeration(h, ref) -> int:
    """Minimal substitutions + insertions + deletions, found by trying every
    monotone pairing of hypothesis and reference positions."""
    best = len(h) + len(ref)
    for k in range(min(len(h), len(ref)) + 1):
        for hi in itertools.combinations(range(len(h)), k):
            for ri in itertools.combinations(range(len(ref)), k):
                cost = (len(h) - k) + (len(ref) - k) + sum(h[a] != ref[b] for a, b in zip(hi, ri))
                best = min(best, cost)
    return best


def ter_by_enumeration(h, ref) -> float:
    """min over word orders reachable by block moves of (moves + edit distance) / |ref|."""
    start = tuple(h)
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for x in frontier:
            for i in range(len(x)):
                for j in range(i + 1, len(x) + 1):
                    block, rest = x[i:j], x[:i] + x[j:]
                    for p in range(len(rest) + 1):
                        y = rest[:p] + block + rest[p:]
                        if y not in dist:
                            dist[y] = dist[x] + 1
                            nxt.append(y)
        frontier = nxt
    return min(d + edit_distance_by_enumeration(list(y), ref) for y, d in dist.items()) / len(ref)
