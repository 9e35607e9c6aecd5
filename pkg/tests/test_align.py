import math
import random

import numpy as np
import pytest

from oracles import hmm_posteriors_by_enumeration, ibm1_em_by_enumeration
from versekit.align import (
    NULL,
    AlignmentError,
    HmmAlignModel,
    TokenizedCorpus,
    corpus_log_likelihood,
    dumps,
    loads,
    models_equal,
    pharaoh,
    posteriors,
    smt_decode,
    symmetric_score,
    train_fast_align,
    train_hmm,
    train_ibm1,
    train_smt,
)
from versekit.metrics import bleu

TOY = [("das Haus".split(), "the house".split()), ("das Buch".split(), "the book".split())]


def random_hmm_case(rng: np.random.Generator):
    I = int(rng.integers(1, 6))
    J = int(rng.integers(1, 6))
    T = rng.uniform(0.01, 1.0, size=(I + 1, J))
    jump = rng.uniform(0.05, 1.0, size=15)
    jump /= jump.sum()
    p_null = float(rng.uniform(0.01, 0.5))
    return T, jump, p_null


def max_hmm_posterior_error(n_cases: int = 200, seed: int = 1234) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        T, jump, p_null = random_hmm_case(rng)
        got = HmmAlignModel(None, jump, p_null).posterior_matrix(T)
        want = hmm_posteriors_by_enumeration(T, jump, p_null)
        worst = max(worst, float(np.abs(got - want).max()))
    return worst


def ibm1_max_error(iterations: int = 5) -> float:
    model_by_iter = [train_ibm1(TokenizedCorpus.from_tokens(TOY), iterations=k) for k in range(1, iterations + 1)]
    oracle = ibm1_em_by_enumeration(TOY, iterations)
    worst = 0.0
    for model, table in zip(model_by_iter, oracle):
        for (e, f), p in table.items():
            worst = max(worst, abs(model.t.get(e, f) - p) if p > 0 else 0.0)
    return worst


def synthetic_corpus(n: int, seed: int = 5, vocab: int = 60, max_len: int = 8):
    r = random.Random(seed)
    out = []
    for _ in range(n):
        k = r.randint(2, max_len)
        src = [f"s{r.randrange(vocab)}" for _ in range(k)]
        tgt = [w.replace("s", "t") for w in src]
        if r.random() < 0.5:
            tgt = tgt[1:] + tgt[:1]
        out.append((src, tgt))
    return out


def bijective_lines(n: int = 500, vocab: int = 120, seed: int = 11):
    r = random.Random(seed)
    lines = []
    for _ in range(n):
        k = r.randint(3, 12)
        ids = [r.randrange(vocab) for _ in range(k)]
        lines.append((" ".join(f"src{i}" for i in ids), " ".join(f"tgt{i}" for i in ids)))
    return lines


def is_monotone(history, tol: float = 1e-9) -> bool:
    return all(b >= a - tol for a, b in zip(history, history[1:]))


# ---------------------------------------------------------------------------


def test_hmm_posteriors_match_enumeration():
    assert max_hmm_posterior_error(200) <= 1e-9


def test_hmm_posterior_columns_sum_to_one():
    rng = np.random.default_rng(3)
    for _ in range(20):
        T, jump, p_null = random_hmm_case(rng)
        P = HmmAlignModel(None, jump, p_null).posterior_matrix(T)
        assert np.allclose(P.sum(axis=0), 1.0, atol=1e-12)


def test_ibm1_matches_brute_force_em():
    assert ibm1_max_error(5) <= 1e-6


def test_ibm1_toy_corpus_learns_das_the():
    model = train_ibm1(TokenizedCorpus.from_tokens(TOY), iterations=10)
    assert model.t.get("das", "the") > 0.8
    assert model.t.get("Haus", "house") > model.t.get("Haus", "the")


@pytest.mark.parametrize("trainer", ["ibm1", "hmm", "ibm2"])
def test_em_log_likelihood_is_monotone(trainer):
    corpus = TokenizedCorpus.from_tokens(synthetic_corpus(150))
    if trainer == "ibm1":
        model = train_ibm1(corpus, iterations=10)
    elif trainer == "hmm":
        model = train_hmm(corpus, iterations=10)
    else:
        model = train_fast_align(corpus, iterations=10)
    assert len(model.log_likelihood) == 10
    assert is_monotone(model.log_likelihood)


def test_history_matches_recomputed_likelihood():
    corpus = TokenizedCorpus.from_tokens(synthetic_corpus(40))
    one = train_fast_align(corpus, iterations=1, optimize_lambda=False)
    two = train_fast_align(corpus, iterations=2, optimize_lambda=False)
    assert math.isclose(two.log_likelihood[1], corpus_log_likelihood(one, corpus), rel_tol=1e-9)


def test_relabeling_vocabulary_does_not_change_likelihood():
    corpus = TokenizedCorpus.from_tokens(synthetic_corpus(60))
    rng = np.random.default_rng(0)
    sp = rng.permutation(len(corpus.source_vocab))
    tp = rng.permutation(len(corpus.target_vocab))
    relabeled = corpus.relabeled(sp, tp)
    a = train_hmm(corpus, iterations=3)
    b = train_hmm(relabeled, iterations=3)
    assert np.allclose(a.log_likelihood, b.log_likelihood, rtol=1e-9)


def test_serialization_round_trip(tmp_path):
    corpus = TokenizedCorpus.from_tokens(synthetic_corpus(30))
    for model in (train_ibm1(corpus, 2), train_hmm(corpus, iterations=2), train_fast_align(corpus, 2)):
        back = loads(dumps(model))
        assert models_equal(model, back)
        assert dumps(back) == dumps(model)


def test_parallel_training_is_identical():
    corpus = TokenizedCorpus.from_tokens(synthetic_corpus(80))
    a = train_hmm(corpus, iterations=2, jobs=1)
    b = train_hmm(corpus, iterations=2, jobs=3)
    assert dumps(a) == dumps(b)


def test_posteriors_and_pharaoh():
    model = train_hmm(TokenizedCorpus.from_tokens(TOY * 3), iterations=3)
    m = posteriors(model, ["das", "Haus"], ["the", "house"])
    assert m.post.shape == (3, 2)
    assert np.allclose(m.post.sum(axis=0), 1.0)
    assert pharaoh([(0, 0), (1, 1)]) == "0-0 1-1"


def test_symmetric_score_prefers_parallel_text():
    good = TokenizedCorpus.from_tokens(synthetic_corpus(120))
    r = random.Random(9)
    shuffled_targets = [t for _, t in synthetic_corpus(120)]
    r.shuffle(shuffled_targets)
    bad = TokenizedCorpus.from_tokens([(s, t) for (s, _), t in zip(synthetic_corpus(120), shuffled_targets)])
    assert symmetric_score(good, iterations=3).score > symmetric_score(bad, iterations=3).score


def test_training_rejects_zero_iterations():
    corpus = TokenizedCorpus.from_tokens(TOY)
    with pytest.raises(AlignmentError):
        train_ibm1(corpus, iterations=0)
    with pytest.raises(AlignmentError):
        train_fast_align(corpus, iterations=1, p0=1.5)


def test_empty_side_is_rejected():
    with pytest.raises(ValueError):
        TokenizedCorpus.from_tokens([(["a"], [])])


def test_smt_baseline_reproduces_bijective_training_set():
    lines = bijective_lines()
    table = train_smt(TokenizedCorpus.from_lines(lines), iterations=5)
    hyps = [smt_decode(s, table).split() for s, _ in lines]
    refs = [t.split() for _, t in lines]
    assert bleu(hyps, refs).score == 100.0


def test_smt_decode_copies_unknown_and_drops_null():
    table = {"a": [("x", 0.9)], "b": [(NULL, 0.6), ("y", 0.4)]}
    assert smt_decode("a b c", table) == "x c"
