"""Document model, JSONL corpus IO, deterministic splits, and synthetic corpora.

A corpus is a JSON Lines file with one document per line:

    {"id": "...", "sentences": ["...", ...], "section_starts": [0, ...],
     "reference_summary": "..." | null,
     "labels": {"sum": [0|1, ...], "seg": [0|1, ...]} | null}

``section_starts`` always contains 0 and is strictly increasing. Labels, when
present, have one entry per sentence.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "CorpusError",
    "Sentence",
    "LabelSet",
    "Document",
    "SynthConfig",
    "tokenize",
    "parse_corpus",
    "write_corpus",
    "split_corpus",
    "generate_synthetic",
    "CUE_PHRASES",
]

# Cue phrases that tend to open a new section. The featurizer's default cue
# lexicon and the synthetic generator share this list.
CUE_PHRASES = (
    "so next we need",
    "turning now to",
    "let us now consider",
    "in this section",
    "moving on to",
)


class CorpusError(Exception):
    """Raised for malformed corpus files or schema-invalid documents."""


def tokenize(text):
    """Lowercase, split on whitespace, strip surrounding punctuation.

    Tokens that are pure punctuation are dropped.
    """
    tokens = []
    for raw in text.lower().split():
        tok = raw.strip(string.punctuation)
        if tok:
            tokens.append(tok)
    return tokens


@dataclass(frozen=True)
class Sentence:
    """One sentence: position in the document, raw text, and its tokens."""

    index: int
    text: str
    tokens: tuple

    @classmethod
    def from_text(cls, index, text):
        return cls(index=index, text=text, tokens=tuple(tokenize(text)))


@dataclass(frozen=True)
class LabelSet:
    """Per-sentence supervision for one document.

    summary_labels
        0/1 per sentence; 1 marks sentences belonging to the extractive target.
    boundary_labels
        0/1 per sentence under a segment labeling convention (first or last
        sentence of each section).
    selection_order
        Order in which the labeler picked summary sentences, when known.
        ``None`` for labels loaded from disk (the wire format does not keep it).
    """

    summary_labels: tuple
    boundary_labels: tuple
    selection_order: tuple | None = None


@dataclass(frozen=True)
class Document:
    """An immutable document: sentences, section structure, optional labels."""

    id: str
    sentences: tuple
    section_starts: tuple
    reference_summary: str | None = None
    labels: LabelSet | None = None

    def __len__(self):
        return len(self.sentences)

    @classmethod
    def build(cls, doc_id, sentence_texts, section_starts=(0,),
              reference_summary=None, labels=None):
        """Construct from raw sentence strings and validate."""
        sentences = tuple(
            Sentence.from_text(i, text) for i, text in enumerate(sentence_texts)
        )
        doc = cls(
            id=doc_id,
            sentences=sentences,
            section_starts=tuple(int(b) for b in section_starts),
            reference_summary=reference_summary,
            labels=labels,
        )
        doc.validate()
        return doc

    def validate(self):
        """Raise :class:`CorpusError` if any schema invariant is violated."""
        n = len(self.sentences)
        if not self.id or not isinstance(self.id, str):
            raise CorpusError("document id must be a non-empty string")
        if n < 1:
            raise CorpusError(f"document {self.id!r}: needs at least one sentence")
        for i, sent in enumerate(self.sentences):
            if sent.index != i:
                raise CorpusError(
                    f"document {self.id!r}: sentence index {sent.index} at position {i}"
                )
        starts = self.section_starts
        if not starts or starts[0] != 0:
            raise CorpusError(f"document {self.id!r}: section_starts must begin with 0")
        if list(starts) != sorted(set(starts)):
            raise CorpusError(
                f"document {self.id!r}: section_starts must be strictly increasing"
            )
        if starts[-1] >= n:
            raise CorpusError(
                f"document {self.id!r}: boundary out of range ({starts[-1]} >= {n})"
            )
        if self.reference_summary is not None and not isinstance(self.reference_summary, str):
            raise CorpusError(f"document {self.id!r}: reference_summary must be a string")
        if self.labels is not None:
            self._validate_labels(n)

    def _validate_labels(self, n):
        lab = self.labels
        for name, values in (("sum", lab.summary_labels), ("seg", lab.boundary_labels)):
            if len(values) != n:
                raise CorpusError(
                    f"document {self.id!r}: {name} labels length {len(values)} != {n}"
                )
            if any(v not in (0, 1) for v in values):
                raise CorpusError(f"document {self.id!r}: {name} labels must be 0/1")
        if lab.selection_order is not None:
            picked = {i for i, v in enumerate(lab.summary_labels) if v == 1}
            if sorted(lab.selection_order) != sorted(picked) or \
                    len(set(lab.selection_order)) != len(lab.selection_order):
                raise CorpusError(
                    f"document {self.id!r}: selection_order inconsistent with summary labels"
                )

    def section_of(self, index):
        """Return (start, end) sentence indices (inclusive) of the section
        containing ``index``."""
        starts = list(self.section_starts)
        n = len(self.sentences)
        for k, start in enumerate(starts):
            end = (starts[k + 1] - 1) if k + 1 < len(starts) else n - 1
            if start <= index <= end:
                return start, end
        raise IndexError(f"sentence index {index} out of range for {self.id!r}")


def _doc_to_record(doc):
    record = {
        "id": doc.id,
        "sentences": [s.text for s in doc.sentences],
        "section_starts": list(doc.section_starts),
        "reference_summary": doc.reference_summary,
    }
    if doc.labels is not None:
        record["labels"] = {
            "sum": list(doc.labels.summary_labels),
            "seg": list(doc.labels.boundary_labels),
        }
        if doc.labels.selection_order is not None:
            record["labels"]["order"] = list(doc.labels.selection_order)
    else:
        record["labels"] = None
    return record


def _record_to_doc(record):
    if not isinstance(record, dict):
        raise CorpusError("record must be a JSON object")
    for key in ("id", "sentences", "section_starts"):
        if key not in record:
            raise CorpusError(f"record missing required key {key!r}")
    sentences = record["sentences"]
    if not isinstance(sentences, list) or not all(isinstance(s, str) for s in sentences):
        raise CorpusError("sentences must be a list of strings")
    starts = record["section_starts"]
    if not isinstance(starts, list) or not all(isinstance(b, int) for b in starts):
        raise CorpusError("section_starts must be a list of integers")
    labels = None
    raw_labels = record.get("labels")
    if raw_labels is not None:
        if not isinstance(raw_labels, dict) or "sum" not in raw_labels or "seg" not in raw_labels:
            raise CorpusError("labels must be an object with 'sum' and 'seg'")
        order = raw_labels.get("order")
        labels = LabelSet(
            summary_labels=tuple(raw_labels["sum"]),
            boundary_labels=tuple(raw_labels["seg"]),
            selection_order=None if order is None else tuple(order),
        )
    return Document.build(
        record["id"],
        sentences,
        section_starts=starts,
        reference_summary=record.get("reference_summary"),
        labels=labels,
    )


def parse_corpus(path, strict=True):
    """Read a JSONL corpus.

    Parameters
    ----------
    path : str or Path
        JSON Lines file, one document per line. Blank lines are ignored.
    strict : bool
        If True, any malformed line raises :class:`CorpusError` naming the
        line number. If False, malformed lines are skipped and counted.

    Returns
    -------
    (documents, skipped) : (list of Document, int)
    """
    documents = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                documents.append(_record_to_doc(record))
            except (json.JSONDecodeError, CorpusError, TypeError, ValueError) as exc:
                if strict:
                    raise CorpusError(f"line {line_no}: {exc}") from exc
                skipped += 1
    return documents, skipped


def write_corpus(documents, path):
    """Write documents (labels included when present) as JSONL."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in documents:
            fh.write(json.dumps(_doc_to_record(doc), ensure_ascii=False))
            fh.write("\n")


def split_corpus(documents, fractions=(0.8, 0.1, 0.1), rng_seed=0):
    """Deterministically shuffle and partition into (train, val, test).

    Validation and test sizes are floored; the remainder goes to train, so
    every document lands in exactly one split.
    """
    if len(documents) < 3:
        raise CorpusError("need at least 3 documents to split")
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError("fractions must be three non-negative numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    n = len(documents)
    n_val = math.floor(fractions[1] * n)
    n_test = math.floor(fractions[2] * n)
    n_train = n - n_val - n_test
    order = np.random.default_rng(rng_seed).permutation(n)
    shuffled = [documents[i] for i in order]
    train = shuffled[:n_train]
    val = shuffled[n_train:n_train + n_val]
    test = shuffled[n_train + n_val:]
    return train, val, test


# ---------------------------------------------------------------------------
# Synthetic corpus generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the planted-salience synthetic corpus.

    ``salience_boundary_bias`` is the probability that a planted salient
    sentence is pinned to the first or last slot of its section; otherwise its
    slot is uniform over the section.
    """

    n_documents: int = 100
    sentences_per_section: tuple = (3, 6)
    sections_per_document: tuple = (3, 5)
    vocabulary_size: int = 120
    salience_boundary_bias: float = 0.5
    weak_salient_rate: float = 0.35
    duplicate_rate: float = 0.45
    impostor_rate: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_documents < 1:
            raise ValueError("n_documents must be positive")
        for name in ("sentences_per_section", "sections_per_document"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise ValueError(f"{name} must be a (lo, hi) range with 1 <= lo <= hi")
        for name in ("salience_boundary_bias", "weak_salient_rate",
                     "duplicate_rate", "impostor_rate"):
            if not (0.0 <= getattr(self, name) <= 1.0):
                raise ValueError(f"{name} must be in [0, 1]")
        if self.vocabulary_size < 30:
            raise ValueError("vocabulary_size must be at least 30")


# Internal generator constants. Salient sentences mix globally shared marker
# words (learnable across documents) with per-document topic words (so each
# reference summary is document specific). A fraction of salient sentences are
# "weak" (single marker), and some salient sentences get a near-duplicate
# distractor inserted later in the document that is *not* part of the
# reference summary.
_TOPIC_WORDS_PER_DOC = 6
_STRONG_MARKERS = 3
_WEAK_MARKERS = 1
_IMPOSTOR_MARKERS = 2


class _Sent:
    __slots__ = ("tokens", "salient", "kind")

    def __init__(self, tokens, salient, kind="filler"):
        self.tokens = list(tokens)
        self.salient = salient
        self.kind = kind


def _filler_sentence(rng, filler, topic):
    length = int(rng.integers(4, 9))
    tokens = []
    for _ in range(length):
        if rng.random() < 0.25:
            tokens.append(topic[int(rng.integers(len(topic)))])
        else:
            tokens.append(filler[int(rng.integers(len(filler)))])
    return tokens


def _salient_sentence(rng, markers, filler, topic, weak):
    n_markers = _WEAK_MARKERS if weak else _STRONG_MARKERS
    n_filler = 2 if weak else 1
    tokens = list(rng.choice(markers, size=n_markers, replace=False))
    tokens += list(rng.choice(topic, size=3, replace=False))
    tokens += [filler[int(rng.integers(len(filler)))] for _ in range(n_filler)]
    rng.shuffle(tokens)
    return tokens


def generate_synthetic(config):
    """Generate a labeled corpus with planted salient sentences.

    Every section contains exactly one planted salient sentence; the
    reference summary is the concatenation of planted sentences in document
    order. Section-first sentences are prefixed with a cue phrase. Placement
    of each salient sentence follows ``salience_boundary_bias``. Byte-identical
    output for identical configs.

    Returns a list of :class:`Document` with planted labels attached
    (boundary labels use the section-first convention).
    """
    rng = np.random.default_rng(config.rng_seed)
    words = [f"w{j:03d}" for j in range(config.vocabulary_size)]
    n_markers = max(6, config.vocabulary_size // 20)
    markers = words[:n_markers]
    filler = words[n_markers:]
    sec_lo, sec_hi = config.sections_per_document
    sent_lo, sent_hi = config.sentences_per_section

    documents = []
    for doc_i in range(config.n_documents):
        topic = list(rng.choice(filler, size=_TOPIC_WORDS_PER_DOC, replace=False))
        n_sections = int(rng.integers(sec_lo, sec_hi + 1))
        sections = []
        for _ in range(n_sections):
            n_sents = int(rng.integers(sent_lo, sent_hi + 1))
            weak = rng.random() < config.weak_salient_rate
            salient = _Sent(
                _salient_sentence(rng, markers, filler, topic, weak), True,
                kind="salient",
            )
            body = [
                _Sent(_filler_sentence(rng, filler, topic), False)
                for _ in range(n_sents - 1)
            ]
            if rng.random() < config.salience_boundary_bias:
                slot = 0 if rng.random() < 0.5 else n_sents - 1
            else:
                slot = int(rng.integers(0, n_sents))
            body.insert(slot, salient)
            sections.append(body)

        # Near-duplicate distractors: copy a salient sentence into a strictly
        # later section with one token swapped. Insertion slots are interior
        # (never index 0, never appended past the end) so boundary-placed
        # salient sentences keep their first/last status.
        salient_positions = [
            (si, pi) for si, sec in enumerate(sections)
            for pi, s in enumerate(sec) if s.salient
        ]
        for si, pi in salient_positions:
            if rng.random() >= config.duplicate_rate:
                continue
            candidates = [
                t for t in range(si + 1, n_sections) if len(sections[t]) >= 2
            ]
            if not candidates:
                continue
            target = candidates[int(rng.integers(len(candidates)))]
            dup_tokens = list(sections[si][pi].tokens)
            swap_at = int(rng.integers(len(dup_tokens)))
            dup_tokens[swap_at] = filler[int(rng.integers(len(filler)))]
            insert_at = int(rng.integers(1, len(sections[target])))
            sections[target].insert(insert_at,
                                    _Sent(dup_tokens, False, kind="dup"))

        # Lexical impostors: strictly interior filler sentences that pick up
        # marker words. They look salient to a content-only ranker but sit
        # where salient sentences rarely do when the boundary bias is high.
        if config.impostor_rate > 0.0:
            for sec in sections:
                for pi in range(1, len(sec) - 1):
                    s = sec[pi]
                    if s.kind != "filler":
                        continue
                    if rng.random() >= config.impostor_rate:
                        continue
                    chosen = rng.choice(len(markers), size=_IMPOSTOR_MARKERS,
                                        replace=False)
                    for t, m in enumerate(chosen):
                        if t < len(s.tokens):
                            s.tokens[t] = markers[int(m)]
                    s.kind = "impostor"

        for sec in sections:
            cue = CUE_PHRASES[int(rng.integers(len(CUE_PHRASES)))]
            sec[0].tokens = cue.split() + sec[0].tokens

        flat = [s for sec in sections for s in sec]
        starts = []
        offset = 0
        for sec in sections:
            starts.append(offset)
            offset += len(sec)
        texts = [" ".join(s.tokens) for s in flat]
        summary_flags = [1 if s.salient else 0 for s in flat]
        selection_order = tuple(i for i, f in enumerate(summary_flags) if f)
        reference = " ".join(texts[i] for i in selection_order)
        boundary = [0] * len(flat)
        for b in starts:
            boundary[b] = 1
        labels = LabelSet(
            summary_labels=tuple(summary_flags),
            boundary_labels=tuple(boundary),
            selection_order=selection_order,
        )
        documents.append(
            Document.build(
                f"synth-{config.rng_seed}-{doc_i:04d}",
                texts,
                section_starts=starts,
                reference_summary=reference,
                labels=labels,
            )
        )
    return documents


def relabel_boundaries(doc, boundary_labels):
    """Return a copy of ``doc`` with boundary labels replaced."""
    if doc.labels is None:
        raise CorpusError(f"document {doc.id!r} carries no labels to update")
    labels = replace(doc.labels, boundary_labels=tuple(boundary_labels))
    return replace(doc, labels=labels)
