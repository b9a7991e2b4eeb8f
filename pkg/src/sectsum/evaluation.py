"""Corpus-level evaluation: macro-averaged overlap scores, exact boundary
F1, WindowDiff, boundary-proximity histograms, and a paired approximate
randomization significance test.

Boundary evaluation always excludes index 0 (every document trivially starts
a section there).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import CorpusError, tokenize
from .inference import render_summary
from .rouge import RougeScore, rouge_l, rouge_n

__all__ = [
    "F1Score",
    "EvalReport",
    "seg_f1",
    "windowdiff",
    "boundary_proximity_histogram",
    "approx_randomization_test",
    "evaluate_rouge",
    "evaluate_full",
    "rouge_per_document",
]


@dataclass(frozen=True)
class F1Score:
    precision: float
    recall: float
    f1: float


def _harmonic(precision, recall):
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def seg_f1(predicted, reference, n=None):
    """Exact-match boundary F1 over section-start indices.

    Index 0 is dropped from both sides before matching. When both sets are
    empty (beyond index 0) the score is defined as perfect; a one-sided empty
    set scores zero.
    """
    pred = {int(b) for b in predicted if int(b) != 0}
    ref = {int(b) for b in reference if int(b) != 0}
    if n is not None:
        for b in pred | ref:
            if not (0 < b < n):
                raise ValueError(f"boundary {b} out of range for n = {n}")
    if not pred and not ref:
        return F1Score(1.0, 1.0, 1.0)
    tp = len(pred & ref)
    precision = tp / len(pred) if pred else 0.0
    recall = tp / len(ref) if ref else 0.0
    return F1Score(precision, recall, _harmonic(precision, recall))


def windowdiff(predicted, reference, n):
    """WindowDiff over sentence positions.

    The window size is half the mean reference segment length, rounded
    half-up and floored at 1: k = max(1, round(n / (2 * segments))). A sliding
    window of size k counts boundaries in (i, i + k] for both sides; the
    score is the fraction of the n - k windows whose counts disagree. Raises
    ``ValueError`` when n <= k (undefined).
    """
    pred = {int(b) for b in predicted if 0 < int(b) < n}
    ref = {int(b) for b in reference if 0 < int(b) < n}
    n_segments = len(ref) + 1
    k = max(1, math.floor(n / (2.0 * n_segments) + 0.5))
    if n <= k:
        raise ValueError(f"document too short for WindowDiff (n = {n}, k = {k})")
    disagreements = 0
    for i in range(n - k):
        ref_count = sum(1 for b in ref if i < b <= i + k)
        pred_count = sum(1 for b in pred if i < b <= i + k)
        if ref_count != pred_count:
            disagreements += 1
    return disagreements / (n - k)


def boundary_proximity_histogram(summary_indices, section_starts, n):
    """Histogram of summary-sentence offsets from their section boundaries.

    Offsets are 1-based: +1 means the first sentence of a section, -1 the
    last. Each sentence reports whichever offset has the smaller magnitude;
    ties go to the positive side. Returns {offset: count} sorted by offset.
    """
    starts = sorted({int(b) for b in section_starts})
    if not starts or starts[0] != 0 or starts[-1] >= n:
        raise ValueError("section_starts must begin at 0 and stay below n")
    counts = {}
    for idx in summary_indices:
        idx = int(idx)
        if not (0 <= idx < n):
            raise ValueError(f"summary index {idx} out of range")
        section = max(i for i, b in enumerate(starts) if b <= idx)
        start = starts[section]
        end = starts[section + 1] - 1 if section + 1 < len(starts) else n - 1
        positive = idx - start + 1
        negative = idx - end - 1
        offset = positive if abs(positive) <= abs(negative) else negative
        counts[offset] = counts.get(offset, 0) + 1
    return dict(sorted(counts.items()))


def approx_randomization_test(scores_a, scores_b, iterations=1000, rng_seed=0):
    """Two-sided paired approximate randomization test.

    Each iteration randomly swaps members of each pair (sign-flips the
    per-pair difference) and compares the absolute mean difference against
    the observed one. Returns the add-one-smoothed p-value
    (count + 1) / (iterations + 1); identical inputs give exactly 1.0.
    """
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("score lists must be 1-d and the same length")
    if a.size == 0:
        raise ValueError("empty score lists")
    if iterations < 1:
        raise ValueError("iterations must be positive")
    diffs = a - b
    observed = abs(diffs.mean())
    rng = np.random.default_rng(rng_seed)
    signs = rng.integers(0, 2, size=(iterations, diffs.size)) * 2 - 1
    pseudo = np.abs((signs * diffs).mean(axis=1))
    count = int((pseudo >= observed).sum())
    return (count + 1) / (iterations + 1)


@dataclass
class EvalReport:
    """Aggregated corpus metrics; unevaluated fields stay None."""

    rouge1: RougeScore | None = None
    rouge2: RougeScore | None = None
    rougeL: RougeScore | None = None
    seg_precision: float | None = None
    seg_recall: float | None = None
    seg_f1: float | None = None
    windowdiff: float | None = None
    avg_summary_words: float | None = None
    n_documents: int = 0

    def to_dict(self):
        def unpack(score):
            if score is None:
                return None
            return {"precision": score.precision, "recall": score.recall,
                    "f1": score.f1}

        return {
            "rouge1": unpack(self.rouge1),
            "rouge2": unpack(self.rouge2),
            "rougeL": unpack(self.rougeL),
            "seg_precision": self.seg_precision,
            "seg_recall": self.seg_recall,
            "seg_f1": self.seg_f1,
            "windowdiff": self.windowdiff,
            "avg_summary_words": self.avg_summary_words,
            "n_documents": self.n_documents,
        }


def _paired_docs(predictions, documents):
    by_id = {doc.id: doc for doc in documents}
    pairs = []
    for pred in predictions:
        doc = by_id.get(pred.doc_id)
        if doc is None:
            raise CorpusError(f"prediction for unknown document {pred.doc_id!r}")
        pairs.append((pred, doc))
    return pairs


def rouge_per_document(predictions, documents):
    """Per-document overlap scores, aligned with ``predictions`` order.

    Every referenced document must carry a reference summary.
    """
    rows = []
    for pred, doc in _paired_docs(predictions, documents):
        if not doc.reference_summary:
            raise CorpusError(f"document {doc.id!r} has no reference summary")
        system = tokenize(render_summary(doc, pred.selected))
        reference = tokenize(doc.reference_summary)
        rows.append({
            "id": doc.id,
            "rouge1": rouge_n(system, reference, 1),
            "rouge2": rouge_n(system, reference, 2),
            "rougeL": rouge_l(system, reference),
            "n_words": len(system),
        })
    return rows


def _mean_rouge(rows, key):
    return RougeScore(
        precision=float(np.mean([r[key].precision for r in rows])),
        recall=float(np.mean([r[key].recall for r in rows])),
        f1=float(np.mean([r[key].f1 for r in rows])),
    )


def evaluate_rouge(predictions, documents):
    """Macro-averaged overlap scores over the corpus."""
    if not predictions:
        raise ValueError("no predictions to evaluate")
    rows = rouge_per_document(predictions, documents)
    return EvalReport(
        rouge1=_mean_rouge(rows, "rouge1"),
        rouge2=_mean_rouge(rows, "rouge2"),
        rougeL=_mean_rouge(rows, "rougeL"),
        avg_summary_words=float(np.mean([r["n_words"] for r in rows])),
        n_documents=len(rows),
    )


def evaluate_full(predictions, documents, with_rouge=True):
    """Summary and segmentation metrics in one report.

    Boundary metrics compare predicted section starts against each document's
    ``section_starts`` (index 0 excluded). WindowDiff averages over the
    documents where it is defined (n > k); it is None if no document
    qualifies.
    """
    if not predictions:
        raise ValueError("no predictions to evaluate")
    report = evaluate_rouge(predictions, documents) if with_rouge else EvalReport()
    precisions, recalls, f1s, wds = [], [], [], []
    for pred, doc in _paired_docs(predictions, documents):
        n = len(doc.sentences)
        hyp = set(pred.boundaries)
        ref = set(doc.section_starts)
        prf = seg_f1(hyp, ref, n=n)
        precisions.append(prf.precision)
        recalls.append(prf.recall)
        f1s.append(prf.f1)
        try:
            wds.append(windowdiff(hyp, ref, n))
        except ValueError:
            pass
    report.seg_precision = float(np.mean(precisions))
    report.seg_recall = float(np.mean(recalls))
    report.seg_f1 = float(np.mean(f1s))
    report.windowdiff = float(np.mean(wds)) if wds else None
    report.n_documents = len(predictions)
    return report
