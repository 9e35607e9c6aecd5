"""Word alignment: IBM1, HMM and diagonal IBM2 models, alignment scores and
the word-greedy SMT baseline."""
from .corpus import NULL, TokenizedCorpus, Vocab
from .io import dumps, load_model, loads, models_equal, save_model
from .lexicon import lexical_table, smt_decode, train_smt
from .models import (
    EPSILON,
    AlignmentError,
    HmmAlignModel,
    Ibm1Model,
    Ibm2DiagModel,
    TTable,
    corpus_log_likelihood,
    diagonal_prior,
    hmm_transitions,
    train_fast_align,
    train_hmm,
    train_ibm1,
)
from .score import (
    AlignmentMatrix,
    SymmetricScore,
    corpus_alignment_score,
    direction_score,
    pharaoh,
    posteriors,
    symmetric_score,
    train_direction,
    viterbi,
)
from .tokenize import TOKENIZER_ID, tokenize

__all__ = [
    "NULL", "TokenizedCorpus", "Vocab", "dumps", "load_model", "loads", "models_equal",
    "save_model", "lexical_table", "smt_decode", "train_smt", "EPSILON", "AlignmentError",
    "HmmAlignModel", "Ibm1Model", "Ibm2DiagModel", "TTable", "corpus_log_likelihood",
    "diagonal_prior", "hmm_transitions", "train_fast_align", "train_hmm", "train_ibm1",
    "AlignmentMatrix", "SymmetricScore", "corpus_alignment_score", "direction_score",
    "pharaoh", "posteriors", "symmetric_score", "train_direction", "viterbi",
    "TOKENIZER_ID", "tokenize",
]
