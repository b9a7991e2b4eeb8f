"""Turning head scores into summaries and section boundaries, plus the
prediction JSONL format.

Prediction records look like:

    {"id": "...", "selected": [int, ...], "boundaries": [0, ...],
     "scores_sum": [float, ...], "scores_seg": [float, ...],
     "summary_text": "..."}

``boundaries`` are predicted section-start indices and always include 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import CorpusError
from .encoder import forward_document
from .oracle import SegLabelConvention

__all__ = [
    "Prediction",
    "RECOMMENDED_TOP_K",
    "select_top_k",
    "predict_boundaries",
    "render_summary",
    "predict_document",
    "predict_corpus",
    "write_predictions",
    "read_predictions",
]

# Summary sizes that work well per domain: long biomedical articles, physics
# preprints, and lecture transcripts respectively.
RECOMMENDED_TOP_K = {"pubmed": 7, "arxiv": 5, "lectures": 3}

DEFAULT_BOUNDARY_THRESHOLD = 0.5


@dataclass(frozen=True)
class Prediction:
    """Scores and decisions for one document."""

    doc_id: str
    selected: tuple
    boundaries: tuple
    scores_sum: tuple
    scores_seg: tuple


def select_top_k(scores, k):
    """Indices of the ``k`` largest scores, ties broken toward the lower
    index, returned in ascending index order. ``k`` beyond the score count
    selects everything."""
    if k < 0:
        raise ValueError("k must be non-negative")
    scores = np.asarray(scores, dtype=float)
    n = scores.shape[0]
    if k >= n:
        return tuple(range(n))
    # lexsort's last key dominates: sort by descending score, then index.
    order = np.lexsort((np.arange(n), -scores))
    return tuple(sorted(int(i) for i in order[:k]))


def predict_boundaries(scores, threshold=DEFAULT_BOUNDARY_THRESHOLD,
                       convention=SegLabelConvention.FIRST):
    """Predicted section-start indices from boundary scores.

    Sentences scoring at or above the threshold are boundary-labeled. Under
    the FIRST convention those sentences are themselves section starts; under
    the LAST convention a labeled sentence closes a section, so the start is
    the following index (a label on the final sentence opens nothing).
    Index 0 is always a section start.
    """
    convention = SegLabelConvention(convention)
    scores = np.asarray(scores, dtype=float)
    n = scores.shape[0]
    hits = np.flatnonzero(scores >= threshold)
    if convention is SegLabelConvention.FIRST:
        starts = {int(i) for i in hits}
    else:
        starts = {int(i) + 1 for i in hits if i + 1 < n}
    starts.add(0)
    return tuple(sorted(starts))


def render_summary(doc, selected):
    """Join the selected sentences' text in document order."""
    return " ".join(doc.sentences[i].text for i in sorted(selected))


def predict_document(doc, params, config, k,
                     threshold=DEFAULT_BOUNDARY_THRESHOLD,
                     convention=SegLabelConvention.FIRST):
    """Score one document and apply both decision rules."""
    enc = forward_document(doc, params, config)
    selected = select_top_k(enc.summary_probs, k)
    boundaries = predict_boundaries(enc.boundary_probs, threshold=threshold,
                                    convention=convention)
    return Prediction(
        doc_id=doc.id,
        selected=selected,
        boundaries=boundaries,
        scores_sum=tuple(float(v) for v in enc.summary_probs),
        scores_seg=tuple(float(v) for v in enc.boundary_probs),
    )


def predict_corpus(documents, params, config, k,
                   threshold=DEFAULT_BOUNDARY_THRESHOLD,
                   convention=SegLabelConvention.FIRST):
    """Predictions for every document, in corpus order."""
    return [
        predict_document(doc, params, config, k, threshold=threshold,
                         convention=convention)
        for doc in documents
    ]


def write_predictions(predictions, documents, path):
    """Write prediction JSONL; ``documents`` supplies the sentence text for
    the rendered ``summary_text`` field."""
    by_id = {doc.id: doc for doc in documents}
    with open(path, "w", encoding="utf-8") as fh:
        for pred in predictions:
            doc = by_id.get(pred.doc_id)
            if doc is None:
                raise CorpusError(f"prediction for unknown document {pred.doc_id!r}")
            record = {
                "id": pred.doc_id,
                "selected": list(pred.selected),
                "boundaries": list(pred.boundaries),
                "scores_sum": list(pred.scores_sum),
                "scores_seg": list(pred.scores_seg),
                "summary_text": render_summary(doc, pred.selected),
            }
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")


def read_predictions(path):
    """Read prediction JSONL back into :class:`Prediction` objects."""
    predictions = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                predictions.append(Prediction(
                    doc_id=record["id"],
                    selected=tuple(record["selected"]),
                    boundaries=tuple(record["boundaries"]),
                    scores_sum=tuple(record["scores_sum"]),
                    scores_seg=tuple(record["scores_seg"]),
                ))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"line {line_no}: bad prediction record: {exc}") from exc
    return predictions
