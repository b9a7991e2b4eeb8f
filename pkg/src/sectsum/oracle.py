"""Heuristic extractive labels: greedy overlap-maximizing summary labels and
section boundary labels.

The greedy labeler builds the extractive target for a document by repeatedly
adding the sentence that most improves the average of unigram and bigram
overlap F1 against the abstractive reference, stopping at the first step with
no strict improvement. Boundary labels mark either the first or the last
sentence of every section.
"""

from __future__ import annotations

from enum import Enum

from .corpus import LabelSet, tokenize
from .rouge import rouge_n

__all__ = [
    "SegLabelConvention",
    "greedy_summary_labels",
    "boundary_labels",
    "build_labels",
    "candidate_score",
]


class SegLabelConvention(str, Enum):
    """Which sentence of a section carries the boundary label."""

    FIRST = "first"
    LAST = "last"


def candidate_score(selected_indices, doc, reference_tokens):
    """Average of ROUGE-1 F and ROUGE-2 F for the candidate selection.

    Candidate sentences are concatenated in document order regardless of the
    order they were picked in.
    """
    tokens = []
    for i in sorted(selected_indices):
        tokens.extend(doc.sentences[i].tokens)
    r1 = rouge_n(tokens, reference_tokens, 1).f1
    r2 = rouge_n(tokens, reference_tokens, 2).f1
    return 0.5 * (r1 + r2)


def greedy_summary_labels(doc, max_sentences=None):
    """Greedy extractive target for one document.

    Parameters
    ----------
    doc : Document
        Must carry a non-empty ``reference_summary``.
    max_sentences : int or None
        Optional cap on the number of selected sentences.

    Returns
    -------
    (summary_labels, selection_order) : (tuple of 0/1, tuple of int)
        ``selection_order`` records picks in greedy order. Ties on the score
        break toward the lowest sentence index; the loop stops as soon as no
        candidate strictly improves the score, so partial scores along
        ``selection_order`` are strictly increasing.
    """
    if not doc.reference_summary:
        raise ValueError(f"document {doc.id!r} has no reference summary to label against")
    reference_tokens = tokenize(doc.reference_summary)
    n = len(doc.sentences)
    limit = n if max_sentences is None else min(max_sentences, n)

    selected = []
    best_score = 0.0
    while len(selected) < limit:
        best_idx = None
        best_candidate = best_score
        for i in range(n):
            if i in selected:
                continue
            score = candidate_score(selected + [i], doc, reference_tokens)
            if score > best_candidate:
                best_candidate = score
                best_idx = i
        if best_idx is None:
            break
        selected.append(best_idx)
        best_score = best_candidate

    labels = [0] * n
    for i in selected:
        labels[i] = 1
    return tuple(labels), tuple(selected)


def boundary_labels(doc, convention=SegLabelConvention.FIRST):
    """0/1 boundary labels for one document under the given convention.

    FIRST marks every sentence listed in ``section_starts``. LAST marks the
    sentence before every non-initial section start plus the final sentence.
    Both conventions mark exactly one sentence per section.
    """
    convention = SegLabelConvention(convention)
    n = len(doc.sentences)
    labels = [0] * n
    if convention is SegLabelConvention.FIRST:
        for b in doc.section_starts:
            labels[b] = 1
    else:
        for b in doc.section_starts:
            if b != 0:
                labels[b - 1] = 1
        labels[n - 1] = 1
    return tuple(labels)


def build_labels(doc, convention=SegLabelConvention.FIRST, max_sentences=None):
    """Full :class:`LabelSet` for a document: greedy summary labels plus
    boundary labels."""
    summary, order = greedy_summary_labels(doc, max_sentences=max_sentences)
    return LabelSet(
        summary_labels=summary,
        boundary_labels=boundary_labels(doc, convention),
        selection_order=order,
    )
