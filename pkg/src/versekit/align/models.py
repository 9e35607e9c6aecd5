"""IBM Model 1, the HMM alignment model and a diagonal-prior IBM Model 2.

All three share a sparse translation table t(f | e) over the (source word,
target word) pairs that co-occur in training, with source row 0 reserved for
the NULL word.  Training is plain EM.  The E-step runs over fixed-size chunks
of sentence pairs and the chunk counts are added up in chunk order, so the
result does not depend on the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import NULL, TokenizedCorpus

EPSILON = 1e-12  # probability of unseen (source, target) pairs at inference
CHUNK = 256
MAX_JUMP = 7
N_BUCKETS = 2 * MAX_JUMP + 1
LAMBDA_MAX = 100.0


class AlignmentError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Sparse translation table


@dataclass
class TTable:
    source_tokens: tuple[str, ...]  # index 0 is NULL
    target_tokens: tuple[str, ...]
    rows: np.ndarray  # (K,) source index of each parameter
    cols: np.ndarray  # (K,) target index
    prob: np.ndarray  # (K,)
    mass: np.ndarray  # (n_source,) expected counts per source word in the last E-step
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def _maps(self):
        if not self._index:
            n_tgt = len(self.target_tokens)
            codes = self.rows * n_tgt + self.cols
            order = np.argsort(codes, kind="stable")
            self._index.update(
                src={w: i for i, w in enumerate(self.source_tokens)},
                tgt={w: i for i, w in enumerate(self.target_tokens)},
                codes=codes[order],
                order=order,
            )
        return self._index

    def source_ids(self, tokens: Sequence[str]) -> np.ndarray:
        """Table row of each token (NULL is row 0), -1 for unknown words."""
        src = self._maps()["src"]
        return np.array([src.get(w, -1) for w in tokens], dtype=np.int64)

    def target_ids(self, tokens: Sequence[str]) -> np.ndarray:
        tgt = self._maps()["tgt"]
        return np.array([tgt.get(w, -1) for w in tokens], dtype=np.int64)

    def values(self, src_ids: np.ndarray, tgt_ids: np.ndarray) -> np.ndarray:
        """t(f | e) on the grid src_ids x tgt_ids, EPSILON where unknown or zero."""
        m = self._maps()
        n_tgt = len(self.target_tokens)
        codes = src_ids[:, None] * n_tgt + tgt_ids[None, :]
        pos = np.searchsorted(m["codes"], codes)
        pos = np.minimum(pos, len(m["codes"]) - 1)
        hit = (m["codes"][pos] == codes) & (src_ids[:, None] >= 0) & (tgt_ids[None, :] >= 0)
        out = np.full(codes.shape, EPSILON)
        vals = self.prob[m["order"][pos[hit]]]
        out[hit] = np.where(vals > 0, vals, EPSILON)
        return out

    def matrix(self, src: Sequence[str], tgt: Sequence[str]) -> np.ndarray:
        """(len(src)+1, len(tgt)) table values with the NULL word in row 0."""
        sid = np.concatenate(([0], self.source_ids(src))).astype(np.int64)
        return self.values(sid, self.target_ids(tgt))

    def get(self, e: str, f: str) -> float:
        return float(self.values(self.source_ids([e]), self.target_ids([f]))[0, 0])

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.prob, minlength=len(self.source_tokens))


@dataclass
class _Prepared:
    table: TTable
    keys: list[np.ndarray]  # per sentence: (I+1, J) parameter indices


def _prepare(corpus: TokenizedCorpus) -> _Prepared:
    if len(corpus) == 0:
        raise AlignmentError("empty corpus: no shared verses")
    n_tgt = len(corpus.target_vocab)
    codes = []
    shapes = []
    for s, t in corpus.pairs:
        e = np.concatenate(([0], s + 1))
        codes.append((e[:, None] * n_tgt + t[None, :]).ravel())
        shapes.append((len(e), len(t)))
    flat = np.concatenate(codes)
    uniq, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    # number parameters by first occurrence so nothing depends on token ids
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    k_of = rank[inverse.ravel()]
    keys = []
    pos = 0
    for shape in shapes:
        n = shape[0] * shape[1]
        keys.append(k_of[pos:pos + n].reshape(shape))
        pos += n
    ordered = uniq[order]
    rows = (ordered // n_tgt).astype(np.int64)
    cols = (ordered % n_tgt).astype(np.int64)
    n_src = len(corpus.source_vocab) + 1
    prob = np.full(len(ordered), 1.0 / n_tgt)
    table = TTable((NULL, *corpus.source_vocab.tokens), corpus.target_vocab.tokens, rows, cols,
                   prob, np.zeros(n_src))
    return _Prepared(table, keys)


def _normalize(table: TTable, counts: np.ndarray) -> None:
    totals = np.bincount(table.rows, weights=counts, minlength=len(table.source_tokens))
    table.mass = totals
    denom = totals[table.rows]
    safe = np.where(denom > 0, denom, 1.0)
    table.prob = np.where(denom > 0, counts / safe, table.prob)


def _map_chunks(fn: Callable[[range], tuple], n: int, jobs: int = 1) -> list[tuple]:
    chunks = [range(a, min(a + CHUNK, n)) for a in range(0, n, CHUNK)]
    if jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, chunks))
    return [fn(c) for c in chunks]


def _ordered_sum(values: list):
    total = values[0]
    for v in values[1:]:
        total = total + v
    return total


def _check_vocab(corpus: TokenizedCorpus, init) -> None:
    if (init.t.source_tokens[1:] != corpus.source_vocab.tokens
            or init.t.target_tokens != corpus.target_vocab.tokens):
        raise AlignmentError("initial model was trained on a different vocabulary")


def _initial_table(prep: _Prepared, init) -> None:
    table = prep.table
    src = init.t
    if np.array_equal(src.rows, table.rows) and np.array_equal(src.cols, table.cols):
        table.prob = src.prob.copy()
        table.mass = src.mass.copy()
    else:
        vals = np.array([src.values(np.array([r]), np.array([c]))[0, 0]
                         for r, c in zip(table.rows, table.cols)])
        _normalize(table, vals)


# ---------------------------------------------------------------------------
# IBM Model 1


@dataclass
class Ibm1Model:
    t: TTable
    log_likelihood: list[float] = field(default_factory=list)

    kind = "ibm1"

    def posterior_matrix(self, T: np.ndarray) -> np.ndarray:
        return T / T.sum(axis=0)

    def viterbi_links(self, T: np.ndarray) -> list[tuple[int, int]]:
        best = T.argmax(axis=0)
        return [(int(i) - 1, j) for j, i in enumerate(best) if i > 0]

    def sentence_log_likelihood(self, T: np.ndarray) -> float:
        return float(np.sum(np.log(T.sum(axis=0) / T.shape[0])))


def _ibm1_estep(prep: _Prepared, chunk: range):
    t = prep.table.prob
    idx, w = [], []
    ll = []
    for k in chunk:
        K = prep.keys[k]
        P = t[K]
        Z = P.sum(axis=0)
        ll.append(float(np.sum(np.log(Z / K.shape[0]))))
        idx.append(K.ravel())
        w.append((P / Z).ravel())
    counts = np.bincount(np.concatenate(idx), weights=np.concatenate(w), minlength=len(t))
    return counts, math.fsum(ll)


def _ibm1_iterations(prep: _Prepared, iterations: int, jobs: int) -> list[float]:
    history = []
    for _ in range(iterations):
        parts = _map_chunks(lambda c: _ibm1_estep(prep, c), len(prep.keys), jobs)
        history.append(math.fsum(p[1] for p in parts))
        _normalize(prep.table, _ordered_sum([p[0] for p in parts]))
    return history


def train_ibm1(corpus: TokenizedCorpus, iterations: int = 5, jobs: int = 1) -> Ibm1Model:
    """EM from a uniform table.

    ``log_likelihood[k]`` is the corpus log-likelihood under the parameters
    that enter iteration k, i.e. before the k-th update.
    """
    if iterations < 1:
        raise AlignmentError("iterations must be >= 1")
    prep = _prepare(corpus)
    history = _ibm1_iterations(prep, iterations, jobs)
    return Ibm1Model(prep.table, history)


# ---------------------------------------------------------------------------
# HMM alignment model


def jump_bucket(d):
    return np.clip(d, -MAX_JUMP, MAX_JUMP) + MAX_JUMP


def hmm_transitions(jump: np.ndarray, p_null: float, n_src: int) -> tuple[np.ndarray, np.ndarray]:
    """Transition matrix and start vector over 2I+1 states.

    States 0..I-1 are the source words; state I+m is NULL remembering source
    position m (0 = before the sentence).
    """
    I = n_src
    S = 2 * I + 1
    mem = np.concatenate((np.arange(1, I + 1), np.arange(0, I + 1)))
    words = np.arange(1, I + 1)
    W = jump[jump_bucket(words[None, :] - np.arange(0, I + 1)[:, None])]  # (I+1, I) by memory
    W = W / W.sum(axis=1, keepdims=True)
    A = np.zeros((S, S))
    A[:, :I] = (1.0 - p_null) * W[mem]
    A[np.arange(S), I + mem] = p_null
    pi = np.zeros(S)
    pi[:I] = (1.0 - p_null) * W[0]
    pi[I] = p_null
    return A, pi


def _bucket_counts(I: int) -> np.ndarray:
    """(I+1, 15): how many source positions fall in each jump bucket from memory m."""
    d = np.arange(1, I + 1)[None, :] - np.arange(0, I + 1)[:, None]
    b = jump_bucket(d)
    out = np.zeros((I + 1, N_BUCKETS))
    for m in range(I + 1):
        out[m] = np.bincount(b[m], minlength=N_BUCKETS)
    return out


def update_jump(jump: np.ndarray, counts: np.ndarray, departures: dict[int, np.ndarray],
                steps: int = 50) -> np.ndarray:
    """M-step for the jump weights.

    Maximises sum_b counts[b] log s_b - sum_(I,m) N[I,m] log sum_i s_b(i-m),
    where N[I,m] is the expected number of moves to a word out of memory m in
    sentences of length I.  Each fixed-point step is a minorize-maximize
    update and cannot decrease the objective.
    """
    if counts.sum() <= 0:
        return jump
    C = np.concatenate([_bucket_counts(I) for I in sorted(departures)])
    N = np.concatenate([departures[I] for I in sorted(departures)])
    keep = N > 0
    C, N = C[keep], N[keep]
    s = jump.copy()
    for _ in range(steps):
        denom = (N / (C @ s)) @ C
        new = np.where(counts > 0, counts / np.where(denom > 0, denom, 1.0), 0.0)
        new /= new.sum()
        if np.allclose(new, s, rtol=0, atol=1e-15):
            s = new
            break
        s = new
    return s


def _emissions(T: np.ndarray) -> np.ndarray:
    """(S, J) emission matrix from a (I+1, J) table with NULL in row 0."""
    I = T.shape[0] - 1
    return np.concatenate((T[1:], np.repeat(T[:1], I + 1, axis=0)), axis=0)


def forward_backward(A: np.ndarray, pi: np.ndarray, B: np.ndarray):
    """Scaled forward-backward.

    Returns gamma (J, S), the transition posteriors summed over positions
    (S, S) and the log-likelihood.
    """
    S, J = B.shape
    alpha = np.empty((J, S))
    c = np.empty(J)
    a = pi * B[:, 0]
    c[0] = a.sum()
    alpha[0] = a / c[0]
    for j in range(1, J):
        a = (alpha[j - 1] @ A) * B[:, j]
        c[j] = a.sum()
        alpha[j] = a / c[j]
    beta = np.empty((J, S))
    beta[-1] = 1.0
    for j in range(J - 2, -1, -1):
        beta[j] = A @ (B[:, j + 1] * beta[j + 1]) / c[j + 1]
    gamma = alpha * beta
    if J > 1:
        R = B[:, 1:].T * beta[1:] / c[1:, None]
        xi = (alpha[:-1].T @ R) * A
    else:
        xi = np.zeros((S, S))
    return gamma, xi, float(np.sum(np.log(c)))


@dataclass
class HmmAlignModel:
    """HMM alignment model with NULL states.

    A target word is generated by a source word or by NULL.  A NULL state
    remembers the last source position and the next jump is measured from
    there.  Going to source position i from remembered position m has
    probability (1 - p_null) * s(i - m) / sum_i' s(i' - m), going to NULL
    p_null.  The first target word jumps from position 0.  Jumps beyond
    +/-7 share the tail buckets.
    """

    t: TTable
    jump: np.ndarray  # (15,) probabilities of offsets -7..+7
    p_null: float
    log_likelihood: list[float] = field(default_factory=list)

    kind = "hmm"

    def transitions(self, n_src: int):
        return hmm_transitions(self.jump, self.p_null, n_src)

    def posterior_matrix(self, T: np.ndarray) -> np.ndarray:
        I = T.shape[0] - 1
        A, pi = self.transitions(I)
        gamma, _, _ = forward_backward(A, pi, _emissions(T))
        return np.concatenate((gamma[:, I:].sum(axis=1)[None, :], gamma[:, :I].T), axis=0)

    def sentence_log_likelihood(self, T: np.ndarray) -> float:
        A, pi = self.transitions(T.shape[0] - 1)
        return forward_backward(A, pi, _emissions(T))[2]

    def viterbi_links(self, T: np.ndarray) -> list[tuple[int, int]]:
        I, J = T.shape[0] - 1, T.shape[1]
        A, pi = self.transitions(I)
        with np.errstate(divide="ignore"):
            logA, logB, d = np.log(A), np.log(_emissions(T)), np.log(pi)
        d = d + logB[:, 0]
        S = len(d)
        back = np.zeros((J, S), dtype=np.int64)
        for j in range(1, J):
            M = d[:, None] + logA
            back[j] = M.argmax(axis=0)
            d = M[back[j], np.arange(S)] + logB[:, j]
        state = int(d.argmax())
        path = [state]
        for j in range(J - 1, 0, -1):
            state = int(back[j, state])
            path.append(state)
        path.reverse()
        return [(s, j) for j, s in enumerate(path) if s < I]


def _hmm_estep(prep: _Prepared, jump: np.ndarray, p_null: float, chunk: range):
    t = prep.table.prob
    idx, w = [], []
    jump_counts = np.zeros(N_BUCKETS)
    null_count = []
    word_count = []
    ll = []
    cache: dict[int, tuple] = {}
    departures: dict[int, np.ndarray] = {}
    for k in chunk:
        K = prep.keys[k]
        I = K.shape[0] - 1
        if I not in cache:
            A, pi = hmm_transitions(jump, p_null, I)
            mem = np.concatenate((np.arange(1, I + 1), np.arange(0, I + 1)))
            D = jump_bucket(np.arange(1, I + 1)[None, :] - mem[:, None])
            cache[I] = (A, pi, D.ravel(), jump_bucket(np.arange(1, I + 1)), mem)
        A, pi, D, D0, mem = cache[I]
        gamma, xi, lk = forward_backward(A, pi, _emissions(t[K]))
        ll.append(lk)
        post = np.concatenate((gamma[:, I:].sum(axis=1)[None, :], gamma[:, :I].T), axis=0)
        idx.append(K.ravel())
        w.append(post.ravel())
        # every transition into a word state, the start transition included
        word_xi = xi[:, :I]
        jump_counts += np.bincount(D, weights=word_xi.ravel(), minlength=N_BUCKETS)
        jump_counts += np.bincount(D0, weights=gamma[0, :I], minlength=N_BUCKETS)
        word_count.append(word_xi.sum() + gamma[0, :I].sum())
        null_count.append(xi[:, I:].sum() + gamma[0, I])
        dep = np.bincount(mem, weights=word_xi.sum(axis=1), minlength=I + 1)
        dep[0] += gamma[0, :I].sum()
        departures[I] = dep if I not in departures else departures[I] + dep
    counts = np.bincount(np.concatenate(idx), weights=np.concatenate(w), minlength=len(t))
    return (counts, jump_counts, math.fsum(null_count), math.fsum(word_count), math.fsum(ll),
            departures)


def train_hmm(corpus: TokenizedCorpus, init: Ibm1Model | None = None, iterations: int = 5,
              jobs: int = 1, p_null: float = 0.2) -> HmmAlignModel:
    """Baum-Welch training.

    Starts from the table of `init` (5 IBM1 iterations when None), a uniform
    jump distribution and the given NULL probability.
    """
    if iterations < 1:
        raise AlignmentError("iterations must be >= 1")
    if init is not None:
        _check_vocab(corpus, init)
    prep = _prepare(corpus)
    if init is None:
        _ibm1_iterations(prep, 5, jobs)
    else:
        _initial_table(prep, init)
    jump = np.full(N_BUCKETS, 1.0 / N_BUCKETS)
    history = []
    for _ in range(iterations):
        parts = _map_chunks(lambda c: _hmm_estep(prep, jump, p_null, c), len(corpus), jobs)
        history.append(math.fsum(p[4] for p in parts))
        _normalize(prep.table, _ordered_sum([p[0] for p in parts]))
        jc = _ordered_sum([p[1] for p in parts])
        nulls = math.fsum(p[2] for p in parts)
        words = math.fsum(p[3] for p in parts)
        departures: dict = {}
        for p in parts:
            for I, dep in p[5].items():
                departures[I] = dep if I not in departures else departures[I] + dep
        jump = update_jump(jump, jc, departures)
        p_null = nulls / (nulls + words)
    return HmmAlignModel(prep.table, jump, float(p_null), history)


# ---------------------------------------------------------------------------
# Diagonal-prior IBM Model 2


def _diag_distance(I: int, J: int) -> np.ndarray:
    i = np.arange(1, I + 1)[:, None] / I
    j = np.arange(1, J + 1)[None, :] / J
    return np.abs(i - j)


def diagonal_prior(I: int, J: int, lam: float, p0: float | None) -> np.ndarray:
    """(I+1, J) link prior with NULL in row 0.

    p0=None gives NULL the uniform share 1/(I+1) instead of a fixed value.
    """
    null = 1.0 / (I + 1) if p0 is None else p0
    w = np.exp(-lam * _diag_distance(I, J))
    prior = np.empty((I + 1, J))
    prior[0] = null
    prior[1:] = (1.0 - null) * w / w.sum(axis=0)
    return prior


@dataclass
class Ibm2DiagModel:
    """IBM Model 2 with the prior exp(-lambda |i/I - j/J|), normalised per
    target position, and NULL probability p0."""

    t: TTable
    lam: float
    p0: float | None
    log_likelihood: list[float] = field(default_factory=list)
    lambda_history: list[float] = field(default_factory=list)

    kind = "ibm2"

    def _joint(self, T: np.ndarray) -> np.ndarray:
        return diagonal_prior(T.shape[0] - 1, T.shape[1], self.lam, self.p0) * T

    def posterior_matrix(self, T: np.ndarray) -> np.ndarray:
        P = self._joint(T)
        return P / P.sum(axis=0)

    def sentence_log_likelihood(self, T: np.ndarray) -> float:
        return float(np.sum(np.log(self._joint(T).sum(axis=0))))

    def viterbi_links(self, T: np.ndarray) -> list[tuple[int, int]]:
        best = self._joint(T).argmax(axis=0)
        return [(int(i) - 1, j) for j, i in enumerate(best) if i > 0]


def _ibm2_estep(prep: _Prepared, lam: float, p0, chunk: range):
    t = prep.table.prob
    idx, w = [], []
    ll = []
    stats: dict[tuple[int, int], np.ndarray] = {}  # (I, J) -> word-link mass per target position
    h_parts = []
    priors: dict[tuple[int, int], np.ndarray] = {}
    for k in chunk:
        K = prep.keys[k]
        shape = (K.shape[0] - 1, K.shape[1])
        prior = priors.get(shape)
        if prior is None:
            prior = priors[shape] = diagonal_prior(*shape, lam, p0)
        P = prior * t[K]
        Z = P.sum(axis=0)
        ll.append(float(np.sum(np.log(Z))))
        post = P / Z
        idx.append(K.ravel())
        w.append(post.ravel())
        words = post[1:]
        acc = stats.get(shape)
        stats[shape] = words.sum(axis=0) if acc is None else acc + words.sum(axis=0)
        h_parts.append(float(np.sum(words * _diag_distance(*shape))))
    counts = np.bincount(np.concatenate(idx), weights=np.concatenate(w), minlength=len(t))
    return counts, stats, math.fsum(h_parts), math.fsum(ll)


class _LambdaObjective:
    """Q(lam) = -lam H - sum over shapes and target positions of W_j log Z_j(lam).

    This is the part of the expected complete-data log-likelihood that
    depends on lambda.  It is concave, so the maximiser is the root of the
    decreasing derivative.
    """

    def __init__(self, stats: dict, h_total: float):
        self.h_total = h_total
        self.items = [(_diag_distance(I, J), W) for (I, J), W in sorted(stats.items())]

    def value(self, lam: float) -> float:
        total = -lam * self.h_total
        for h, W in self.items:
            total -= float(W @ np.log(np.exp(-lam * h).sum(axis=0)))
        return total

    def slope(self, lam: float) -> float:
        g = -self.h_total
        for h, W in self.items:
            e = np.exp(-lam * h)
            g += float(W @ ((h * e).sum(axis=0) / e.sum(axis=0)))
        return g

    def argmax(self, lo: float = 0.0, hi: float = LAMBDA_MAX) -> float:
        if self.slope(lo) <= 0:
            return lo
        if self.slope(hi) >= 0:
            return hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if self.slope(mid) > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def train_fast_align(corpus: TokenizedCorpus, iterations: int = 5, jobs: int = 1,
                     lam: float = 4.0, p0: float | None = 0.08,
                     optimize_lambda: bool = True) -> Ibm2DiagModel:
    """EM for the diagonal-prior model from a uniform table.

    After each E-step lambda moves to the maximiser of its part of the
    expected complete-data log-likelihood, found by bisection on the
    derivative, so each iteration is a full EM step.
    """
    if iterations < 1:
        raise AlignmentError("iterations must be >= 1")
    if p0 is not None and not 0.0 <= p0 < 1.0:
        raise AlignmentError("p0 must be in [0, 1)")
    if lam < 0:
        raise AlignmentError("lambda must be >= 0")
    prep = _prepare(corpus)
    history = []
    lambdas = []
    for _ in range(iterations):
        parts = _map_chunks(lambda c: _ibm2_estep(prep, lam, p0, c), len(corpus), jobs)
        history.append(math.fsum(p[3] for p in parts))
        _normalize(prep.table, _ordered_sum([p[0] for p in parts]))
        if optimize_lambda:
            stats: dict = {}
            for p in parts:
                for shape, W in p[1].items():
                    stats[shape] = W if shape not in stats else stats[shape] + W
            objective = _LambdaObjective(stats, math.fsum(p[2] for p in parts))
            new = objective.argmax()
            if objective.value(new) >= objective.value(lam):
                lam = new
        lambdas.append(lam)
    return Ibm2DiagModel(prep.table, float(lam), p0, history, lambdas)


def corpus_log_likelihood(model, corpus: TokenizedCorpus) -> float:
    """Log-likelihood of a corpus under the model's current parameters."""
    total = []
    for k in range(len(corpus)):
        src, tgt = corpus.tokens(k)
        total.append(model.sentence_log_likelihood(model.t.matrix(src, tgt)))
    return math.fsum(total)
