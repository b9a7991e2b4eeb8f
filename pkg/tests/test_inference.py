import numpy as np
import pytest

from sectsum import (
    CorpusError,
    RECOMMENDED_TOP_K,
    SegLabelConvention,
    predict_boundaries,
    predict_corpus,
    predict_document,
    read_predictions,
    render_summary,
    select_top_k,
    write_predictions,
)

from conftest import make_doc


def test_select_top_k_basic_and_sorted():
    scores = np.array([0.1, 0.9, 0.3, 0.7])
    assert select_top_k(scores, 2) == (1, 3)
    assert select_top_k(scores, 10) == (0, 1, 2, 3)
    assert select_top_k(scores, 0) == ()


def test_select_top_k_tie_breaks_to_lower_index():
    scores = np.array([0.5, 0.9, 0.9, 0.9])
    assert select_top_k(scores, 2) == (1, 2)
    assert select_top_k(np.array([0.9, 0.1, 0.9]), 1) == (0,)


def test_select_top_k_rejects_negative_k():
    with pytest.raises(ValueError):
        select_top_k(np.array([0.5]), -1)


def test_predict_boundaries_first_convention():
    scores = np.array([0.9, 0.2, 0.8])
    assert predict_boundaries(scores, 0.5, SegLabelConvention.FIRST) == (0, 2)
    # index zero is always a section start even when its score is low
    assert predict_boundaries(np.array([0.1, 0.9, 0.1]), 0.5,
                              SegLabelConvention.FIRST) == (0, 1)


def test_predict_boundaries_last_convention():
    # a positive at index i closes a section, so i + 1 starts the next one;
    # a positive on the final sentence adds no new start
    scores = np.array([0.1, 0.8, 0.1, 0.9])
    assert predict_boundaries(scores, 0.5, SegLabelConvention.LAST) == (0, 2)
    assert predict_boundaries(np.array([0.9, 0.1]), 0.5,
                              SegLabelConvention.LAST) == (0, 1)


def test_render_summary_sorted_join():
    doc = make_doc()
    assert render_summary(doc, (2, 0)) == "alpha beta alpha beta gamma"
    assert render_summary(doc, ()) == ""


def test_predict_document_fields(small_model, tiny_corpus):
    config, params = small_model
    doc = tiny_corpus[0]
    pred = predict_document(doc, params, config, k=3)
    assert pred.doc_id == doc.id
    assert len(pred.selected) == 3
    assert pred.selected == tuple(sorted(pred.selected))
    assert len(pred.scores_sum) == len(doc)
    assert len(pred.scores_seg) == len(doc)
    assert 0 in pred.boundaries
    top = select_top_k(np.asarray(pred.scores_sum), 3)
    assert pred.selected == top


def test_predict_corpus_order(small_model, tiny_corpus):
    config, params = small_model
    preds = predict_corpus(tiny_corpus, params, config, k=2)
    assert [p.doc_id for p in preds] == [d.id for d in tiny_corpus]


def test_predictions_round_trip(tmp_path, small_model, tiny_corpus):
    config, params = small_model
    preds = predict_corpus(tiny_corpus, params, config, k=2)
    path = tmp_path / "predictions.jsonl"
    write_predictions(preds, tiny_corpus, path)
    loaded = read_predictions(path)
    assert [p.doc_id for p in loaded] == [p.doc_id for p in preds]
    for a, b in zip(loaded, preds):
        assert a.selected == b.selected
        assert a.boundaries == b.boundaries
        np.testing.assert_allclose(a.scores_sum, b.scores_sum)


def test_write_predictions_unknown_document(tmp_path, small_model, tiny_corpus):
    config, params = small_model
    pred = predict_document(tiny_corpus[0], params, config, k=1)
    ghost = pred.__class__(doc_id="missing", selected=(0,), boundaries=(0,),
                           scores_sum=(0.5,), scores_seg=(0.5,))
    with pytest.raises(CorpusError, match="missing"):
        write_predictions([ghost], tiny_corpus, tmp_path / "p.jsonl")


def test_read_predictions_reports_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = ('{"id": "a", "selected": [0], "boundaries": [0], '
            '"scores_sum": [0.5], "scores_seg": [0.5]}')
    path.write_text(good + "\nnonsense\n")
    with pytest.raises(CorpusError, match="line 2"):
        read_predictions(path)
    path.write_text('{"selected": [0]}\n')
    with pytest.raises(CorpusError, match="line 1"):
        read_predictions(path)


def test_recommended_top_k_table():
    assert RECOMMENDED_TOP_K == {"pubmed": 7, "arxiv": 5, "lectures": 3}
