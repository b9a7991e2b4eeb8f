"""N-gram overlap (ROUGE-1/2) and longest-common-subsequence (ROUGE-L) scores.

All functions take token lists (see :func:`sectsum.corpus.tokenize`) and
return precision/recall/F1. Counts are clipped per n-gram type, matching the
standard recall-oriented overlap definition. No stemming or stopword removal
happens unless the caller opts in via :func:`prepare_tokens`.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

__all__ = ["RougeScore", "rouge_n", "rouge_l", "lcs_length", "prepare_tokens"]


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


def _f1(precision, recall):
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _score(overlap, n_system, n_reference):
    precision = overlap / n_system if n_system else 0.0
    recall = overlap / n_reference if n_reference else 0.0
    return RougeScore(precision, recall, _f1(precision, recall))


def prepare_tokens(tokens, stopwords=None, stemmer=None):
    """Optional preprocessing hook: drop stopwords, apply a stemmer callable.

    Both default to off; scoring is fully deterministic either way.
    """
    out = list(tokens)
    if stopwords is not None:
        drop = frozenset(stopwords)
        out = [t for t in out if t not in drop]
    if stemmer is not None:
        out = [stemmer(t) for t in out]
    return out


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(system_tokens, reference_tokens, n):
    """Clipped n-gram overlap score.

    Parameters
    ----------
    system_tokens, reference_tokens : sequence of str
    n : int
        N-gram order (1 for unigrams, 2 for bigrams, ...).

    Returns
    -------
    RougeScore
        Precision = clipped overlap / system n-grams, recall = clipped
        overlap / reference n-grams, F1 their harmonic mean. All zero when
        either side has no n-grams of order ``n``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    sys_counts = _ngrams(system_tokens, n)
    ref_counts = _ngrams(reference_tokens, n)
    overlap = sum((sys_counts & ref_counts).values())
    return _score(overlap, sum(sys_counts.values()), sum(ref_counts.values()))


def lcs_length(a, b):
    """Length of the longest common subsequence of two token sequences.

    Iterative two-row dynamic program, O(len(a) * len(b)) time, O(len(b))
    memory.
    """
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(system_tokens, reference_tokens):
    """Longest-common-subsequence score over the flat token sequences.

    Precision = LCS / system length, recall = LCS / reference length, F1 the
    harmonic mean. Zero when either side is empty.
    """
    lcs = lcs_length(list(system_tokens), list(reference_tokens))
    return _score(lcs, len(system_tokens), len(reference_tokens))
