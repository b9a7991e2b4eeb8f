import json

import numpy as np
import pytest

from sectsum import (
    CUE_PHRASES,
    CorpusError,
    Document,
    LabelSet,
    Sentence,
    SynthConfig,
    generate_synthetic,
    parse_corpus,
    relabel_boundaries,
    split_corpus,
    tokenize,
    write_corpus,
)

from conftest import make_doc


def test_tokenize_lowercases_and_strips_punctuation():
    assert tokenize("The cat, sat!") == ["the", "cat", "sat"]
    assert tokenize("...") == []
    assert tokenize("") == []
    assert tokenize("A  b\tc\nd") == ["a", "b", "c", "d"]


def test_sentence_from_text():
    s = Sentence.from_text(3, "Hello, World")
    assert s.index == 3
    assert s.text == "Hello, World"
    assert s.tokens == ("hello", "world")


def test_document_build_and_len():
    doc = make_doc()
    assert len(doc) == 3
    assert doc.sentences[2].tokens == ("alpha", "beta", "gamma")
    assert doc.section_starts == (0, 2)


def test_document_validate_rejects_bad_starts():
    with pytest.raises(CorpusError, match="boundary out of range"):
        make_doc(section_starts=(0, 7)).validate()
    with pytest.raises(CorpusError):
        make_doc(section_starts=(1, 2)).validate()  # must start at 0
    with pytest.raises(CorpusError):
        make_doc(section_starts=(0, 2, 2)).validate()  # duplicates
    with pytest.raises(CorpusError):
        make_doc(section_starts=(0, 2, 1)).validate()  # unsorted


def test_document_validate_rejects_bad_labels():
    doc = make_doc()
    bad = Document(
        id=doc.id, sentences=doc.sentences, section_starts=doc.section_starts,
        reference_summary=doc.reference_summary,
        labels=LabelSet(summary_labels=(1, 0), boundary_labels=(1, 0, 0)),
    )
    with pytest.raises(CorpusError, match="label"):
        bad.validate()
    bad = Document(
        id=doc.id, sentences=doc.sentences, section_starts=doc.section_starts,
        reference_summary=doc.reference_summary,
        labels=LabelSet(summary_labels=(1, 0, 2), boundary_labels=(1, 0, 0)),
    )
    with pytest.raises(CorpusError):
        bad.validate()


def test_section_of_returns_inclusive_span():
    doc = make_doc(texts=["a"] * 6, section_starts=(0, 3))
    assert [doc.section_of(i) for i in range(3)] == [(0, 2)] * 3
    assert [doc.section_of(i) for i in range(3, 6)] == [(3, 5)] * 3
    with pytest.raises(IndexError):
        doc.section_of(6)


def test_corpus_round_trip(tmp_path, tiny_corpus):
    path = tmp_path / "corpus.jsonl"
    write_corpus(tiny_corpus, path)
    parsed, skipped = parse_corpus(path)
    assert skipped == 0
    assert parsed == list(tiny_corpus)


def test_parse_corpus_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = json.dumps({
        "id": "a", "sentences": ["x y", "z w"], "section_starts": [0],
    })
    path.write_text(good + "\nnot json\n")
    with pytest.raises(CorpusError, match="line 2"):
        parse_corpus(path)
    docs, skipped = parse_corpus(path, strict=False)
    assert len(docs) == 1 and skipped == 1


def test_parse_corpus_rejects_missing_fields(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({"id": "a"}) + "\n")
    with pytest.raises(CorpusError, match="line 1"):
        parse_corpus(path)


def test_split_corpus_sizes_and_disjointness(tiny_corpus):
    docs = list(tiny_corpus) * 3  # 24 documents, ids not relevant here
    train, val, test = split_corpus(docs, (0.8, 0.1, 0.1), rng_seed=4)
    assert len(val) == 2 and len(test) == 2 and len(train) == 20
    again = split_corpus(docs, (0.8, 0.1, 0.1), rng_seed=4)
    assert (train, val, test) == again
    merged = sorted(id(d) for d in train + val + test)
    assert merged == sorted(id(d) for d in docs)


def test_split_corpus_rejects_tiny_input(tiny_corpus):
    with pytest.raises(CorpusError):
        split_corpus(list(tiny_corpus)[:2])


def test_synth_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(vocabulary_size=20)
    with pytest.raises(ValueError):
        SynthConfig(salience_boundary_bias=1.5)
    with pytest.raises(ValueError):
        SynthConfig(n_documents=0)


def test_generate_synthetic_structure():
    config = SynthConfig(n_documents=20, rng_seed=3)
    docs = generate_synthetic(config)
    assert len(docs) == 20
    for doc in docs:
        doc.validate()
        assert doc.labels is not None
        n_sections = len(doc.section_starts)
        # one planted salient sentence per section
        assert sum(doc.labels.summary_labels) == n_sections
        # reference is the sentences with positive labels, in document order
        picked = [doc.sentences[i].text
                  for i, v in enumerate(doc.labels.summary_labels) if v]
        assert doc.reference_summary == " ".join(picked)
        # boundary labels follow the section-first convention
        starts = set(doc.section_starts)
        for i, v in enumerate(doc.labels.boundary_labels):
            assert v == (1 if i in starts else 0)


def test_generate_synthetic_cue_phrases():
    docs = generate_synthetic(SynthConfig(n_documents=10, rng_seed=9))
    for doc in docs:
        starts = set(doc.section_starts)
        for i, sent in enumerate(doc.sentences):
            has_cue = any(sent.text.startswith(c) for c in CUE_PHRASES)
            assert has_cue == (i in starts)


def test_generate_synthetic_bias_one_puts_salients_on_boundaries():
    # a boundary slot is the first or the last sentence of its section
    config = SynthConfig(n_documents=30, salience_boundary_bias=1.0, rng_seed=7)
    for doc in generate_synthetic(config):
        for i, v in enumerate(doc.labels.summary_labels):
            if v:
                start, end = doc.section_of(i)
                assert i in (start, end)


def test_generate_synthetic_bias_zero_rarely_hits_section_starts():
    config = SynthConfig(n_documents=60, salience_boundary_bias=0.0, rng_seed=7)
    on_start = total = 0
    for doc in generate_synthetic(config):
        starts = set(doc.section_starts)
        for i, v in enumerate(doc.labels.summary_labels):
            if v:
                total += 1
                on_start += i in starts
    # uniform placement over sections of length >= 3 puts well under half
    # of the salient sentences on the opening slot
    assert on_start / total < 0.45


def test_generate_synthetic_deterministic():
    config = SynthConfig(n_documents=6, rng_seed=42)
    assert generate_synthetic(config) == generate_synthetic(config)
    other = SynthConfig(n_documents=6, rng_seed=43)
    assert generate_synthetic(config) != generate_synthetic(other)


def test_relabel_boundaries_replaces_only_seg_labels(tiny_corpus):
    doc = tiny_corpus[0]
    flipped = tuple(1 - v for v in doc.labels.boundary_labels)
    redone = relabel_boundaries(doc, flipped)
    assert redone.labels.boundary_labels == flipped
    assert redone.labels.summary_labels == doc.labels.summary_labels
    assert doc.labels.boundary_labels != flipped  # original untouched


def test_write_corpus_is_deterministic(tmp_path, tiny_corpus):
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_corpus(tiny_corpus, p1)
    write_corpus(tiny_corpus, p2)
    assert p1.read_bytes() == p2.read_bytes()
