"""Word error rate and translation edit rate."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .bleu import MetricError

MAX_SHIFT_DIST = 10
MAX_BLOCK = 10
EXACT_LIMIT = 4  # hypotheses up to this length get the exact shift search


@dataclass(frozen=True)
class EditStats:
    wer: float
    ter: float
    substitutions: int
    insertions: int
    deletions: int
    shifts: int
    ref_len: int

    @property
    def edits(self) -> int:
        return self.substitutions + self.insertions + self.deletions


def levenshtein(hyp: Sequence[str], ref: Sequence[str]) -> int:
    prev = list(range(len(ref) + 1))
    for i, h in enumerate(hyp, start=1):
        cur = [i]
        for j, r in enumerate(ref, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (h != r)))
        prev = cur
    return prev[-1]


def edit_ops(hyp: Sequence[str], ref: Sequence[str]) -> tuple[int, int, int]:
    """(substitutions, insertions, deletions) of one minimal edit script.

    Insertions are hypothesis words missing from the reference, deletions
    reference words missing from the hypothesis.
    """
    n, m = len(hyp), len(ref)
    D = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        D[i][0] = i
    for j in range(m + 1):
        D[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            D[i][j] = min(D[i - 1][j] + 1, D[i][j - 1] + 1, D[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]))
    sub = ins = dele = 0
    i, j = n, m
    while i or j:
        if i and j and D[i][j] == D[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]):
            sub += hyp[i - 1] != ref[j - 1]
            i, j = i - 1, j - 1
        elif i and D[i][j] == D[i - 1][j] + 1:
            ins += 1
            i -= 1
        else:
            dele += 1
            j -= 1
    return sub, ins, dele


def _check_ref(ref: Sequence[str]) -> None:
    if len(ref) == 0:
        raise MetricError("reference is empty")


def wer(hyp: Sequence[str], ref: Sequence[str]) -> EditStats:
    _check_ref(ref)
    sub, ins, dele = edit_ops(hyp, ref)
    rate = (sub + ins + dele) / len(ref)
    return EditStats(rate, rate, sub, ins, dele, 0, len(ref))


def _phrase_starts(ref: Sequence[str]) -> dict[tuple, list[int]]:
    starts: dict[tuple, list[int]] = {}
    for r in range(len(ref)):
        for L in range(1, min(MAX_BLOCK, len(ref) - r) + 1):
            starts.setdefault(tuple(ref[r:r + L]), []).append(r)
    return starts


def shift_search(hyp: Sequence[str], ref: Sequence[str]) -> tuple[list[str], int, int]:
    """Greedy block shifts.

    Each round tries every hypothesis block (up to 10 words) that also occurs
    in the reference, moved next to a reference occurrence and at most 10
    positions away, and applies the one that lowers the edit distance most.
    Ties keep the first candidate found.  Stops when no shift helps.
    Returns (shifted hypothesis, edit distance, number of shifts).
    """
    h = list(hyp)
    dist = levenshtein(h, ref)
    starts = _phrase_starts(ref)
    shifts = 0
    while dist > 0:
        best = None
        best_dist = dist
        for i in range(len(h)):
            for L in range(1, min(MAX_BLOCK, len(h) - i) + 1):
                block = tuple(h[i:i + L])
                where = starts.get(block)
                if where is None:
                    break  # longer blocks cannot occur in the reference either
                rest = h[:i] + h[i + L:]
                tried = set()
                for r in where:
                    for p in (r - 1, r, r + 1):
                        if p < 0 or p > len(rest) or p == i or p in tried or abs(p - i) > MAX_SHIFT_DIST:
                            continue
                        tried.add(p)
                        cand = rest[:p] + list(block) + rest[p:]
                        d = levenshtein(cand, ref)
                        if d < best_dist:
                            best, best_dist = cand, d
        if best is None:
            break
        h, dist = best, best_dist
        shifts += 1
    return h, dist, shifts


def exact_shift_search(hyp: Sequence[str], ref: Sequence[str]) -> tuple[list[str], int, int]:
    """Cheapest shifts + edits over all shift sequences (breadth first).

    Exponential; used for very short hypotheses only.
    """
    start = tuple(hyp)
    best = (levenshtein(start, ref), 0, start)
    seen = {start}
    frontier = [start]
    depth = 0
    while frontier and depth + 1 < best[0] + best[1]:
        depth += 1
        nxt = []
        for x in frontier:
            for i in range(len(x)):
                for L in range(1, len(x) - i + 1):
                    block, rest = x[i:i + L], x[:i] + x[i + L:]
                    for p in range(len(rest) + 1):
                        cand = rest[:p] + block + rest[p:]
                        if cand in seen:
                            continue
                        seen.add(cand)
                        nxt.append(cand)
                        d = levenshtein(cand, ref)
                        if d + depth < best[0] + best[1]:
                            best = (d, depth, cand)
        frontier = nxt
    return list(best[2]), best[0], best[1]


def _shifts(hyp, ref):
    if len(hyp) <= EXACT_LIMIT:
        return exact_shift_search(hyp, ref)
    return shift_search(hyp, ref)


def ter(hyp: Sequence[str], ref: Sequence[str]) -> EditStats:
    """(shifts + word edits after shifting) / reference length.

    Shifts are found exactly for hypotheses of up to four words and by the
    greedy search otherwise.
    """
    _check_ref(ref)
    shifted, dist, shifts = _shifts(hyp, ref)
    sub, ins, dele = edit_ops(shifted, ref)
    w = wer(hyp, ref)
    return EditStats(w.wer, (dist + shifts) / len(ref), sub, ins, dele, shifts, len(ref))


def corpus_edit_rates(hyps: Sequence[Sequence[str]], refs: Sequence[Sequence[str]]) -> tuple[float, float]:
    """Corpus WER and TER: total edits over total reference words."""
    if len(hyps) != len(refs):
        raise MetricError(f"{len(hyps)} hypotheses for {len(refs)} references")
    if not hyps:
        raise MetricError("no segments to score")
    w_edits = t_edits = ref_len = 0
    for h, r in zip(hyps, refs):
        _check_ref(r)
        w_edits += levenshtein(h, r)
        _, dist, shifts = _shifts(h, r)
        t_edits += dist + shifts
        ref_len += len(r)
    return w_edits / ref_len, t_edits / ref_len
