"""Machine translation metrics: BLEU, spBLEU, chrF3, WER and TER."""
from .bleu import BleuScore, MetricError, bleu, bleu_stats, sentence_bleu
from .chrf import ChrfScore, chrf3
from .edit import EditStats, corpus_edit_rates, levenshtein, ter, wer
from .report import ScoreReport, VerseScore, score_hypotheses, score_lines, spbleu
from .subword import WHITESPACE_MODEL, SubwordModel, desegment, train_subword

__all__ = [
    "BleuScore", "MetricError", "bleu", "bleu_stats", "sentence_bleu", "ChrfScore", "chrf3",
    "EditStats", "corpus_edit_rates", "levenshtein", "ter", "wer", "ScoreReport", "VerseScore",
    "score_hypotheses", "score_lines", "spbleu", "WHITESPACE_MODEL", "SubwordModel", "desegment",
    "train_subword",
]
