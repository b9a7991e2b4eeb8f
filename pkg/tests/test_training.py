import math

import numpy as np
import pytest

from sectsum import (
    FeatureConfig,
    NumericsError,
    TrainConfig,
    Variant,
    bce_loss,
    fit,
    grad_check,
    init_params,
    learning_rate_at,
    total_loss,
)


def test_bce_frozen_values():
    """Hand-computed binary cross entropies.

    probs (0.9, 0.8), labels (1, 1): -(ln 0.9 + ln 0.8)/2 = 0.16425203...
    probs (0.6, 0.3), labels (1, 0): -(ln 0.6 + ln 0.7)/2 = 0.43375028...
    """
    assert bce_loss(np.array([0.9, 0.8]), np.array([1, 1])) == \
        pytest.approx(0.1642520335, rel=1e-8)
    assert bce_loss(np.array([0.6, 0.3]), np.array([1, 0])) == \
        pytest.approx(0.4337502838, rel=1e-9)


def test_bce_clamps_saturated_probabilities():
    # a confident wrong answer is clamped, not infinite
    value = bce_loss(np.array([1.0]), np.array([0]))
    assert value == pytest.approx(-math.log(1e-7), rel=1e-6)
    assert math.isfinite(bce_loss(np.array([0.0]), np.array([1])))


def test_train_config_variant_handling():
    config = TrainConfig(variant="full", beta=0.2)
    assert config.variant is Variant.FULL and config.beta == 0.2
    config = TrainConfig(variant="base", beta=0.3)
    assert config.beta == 0.0  # repulsion weight forced off
    config = TrainConfig(variant=Variant.JOINT, beta=0.4)
    assert config.beta == 0.0
    with pytest.raises(ValueError):
        TrainConfig(variant="fancy")
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(beta=-0.5)
    with pytest.raises(ValueError):
        TrainConfig(warmup_fraction=1.5)


@pytest.fixture(scope="module")
def setup(tiny_corpus):
    config = FeatureConfig(dim=8, hash_buckets=16)
    params = init_params(config, n_layers=1, n_heads=2, rng_seed=1)
    return tiny_corpus, config, params


def test_total_loss_terms_compose(setup):
    docs, fconfig, params = setup
    base = total_loss(docs, params, TrainConfig(variant="base"), fconfig,
                      with_grads=False)
    joint = total_loss(docs, params, TrainConfig(variant="joint"), fconfig,
                       with_grads=False)
    full = total_loss(docs, params, TrainConfig(variant="full", beta=0.1),
                      fconfig, with_grads=False)
    # base optimizes the summary term only
    assert base.value == pytest.approx(base.parts["sum"])
    assert base.parts["seg"] == 0.0 and base.parts["dpp"] == 0.0
    # the joint objective adds the boundary term
    assert joint.value == pytest.approx(joint.parts["sum"] + joint.parts["seg"])
    assert joint.parts["sum"] == pytest.approx(base.parts["sum"])
    # the full objective scales the unweighted repulsion part by beta
    assert full.value == pytest.approx(
        full.parts["sum"] + full.parts["seg"] + 0.1 * full.parts["dpp"])
    assert full.parts["dpp"] > 0.0 or full.dpp_skipped == len(docs)


def test_full_with_zero_beta_equals_joint(setup):
    docs, fconfig, params = setup
    joint = total_loss(docs, params, TrainConfig(variant="joint"), fconfig,
                       with_grads=True)
    full0 = total_loss(docs, params, TrainConfig(variant="full", beta=0.0),
                       fconfig, with_grads=True)
    assert full0.value == pytest.approx(joint.value, rel=1e-12)
    np.testing.assert_allclose(full0.grads.to_vector(), joint.grads.to_vector(),
                               rtol=1e-12, atol=0)


def test_total_loss_gradient_shapes(setup):
    docs, fconfig, params = setup
    out = total_loss(docs[:2], params, TrainConfig(variant="full", beta=0.1),
                     fconfig, with_grads=True)
    assert out.grads.to_vector().shape == params.to_vector().shape
    assert np.all(np.isfinite(out.grads.to_vector()))


def test_learning_rate_warmup_schedule():
    # 20 steps, 10% warmup: two warmup steps then the base rate
    assert learning_rate_at(1, 20, 0.5, 0.1) == pytest.approx(0.25)
    assert learning_rate_at(2, 20, 0.5, 0.1) == pytest.approx(0.5)
    assert learning_rate_at(3, 20, 0.5, 0.1) == pytest.approx(0.5)
    assert learning_rate_at(20, 20, 0.5, 0.1) == pytest.approx(0.5)
    # no warmup: full rate from the first step
    assert learning_rate_at(1, 20, 0.5, 0.0) == pytest.approx(0.5)


def test_fit_zero_learning_rate_is_identity(setup):
    docs, fconfig, _ = setup
    config = TrainConfig(variant="joint", learning_rate=0.0, epochs=2,
                         batch_size=4, rng_seed=0)
    start = init_params(fconfig, n_layers=1, n_heads=2, rng_seed=9)
    before = start.to_vector().copy()
    result = fit(list(docs), config, feature_config=fconfig, params=start,
                 n_layers=1, n_heads=2)
    np.testing.assert_array_equal(result.params.to_vector(), before)


def test_fit_is_deterministic(setup):
    docs, fconfig, _ = setup
    config = TrainConfig(variant="full", beta=0.1, epochs=2, batch_size=4,
                         learning_rate=5e-3, rng_seed=3)
    r1 = fit(list(docs), config, feature_config=fconfig, n_layers=1, n_heads=2)
    r2 = fit(list(docs), config, feature_config=fconfig, n_layers=1, n_heads=2)
    np.testing.assert_array_equal(r1.params.to_vector(), r2.params.to_vector())
    assert r1.history == r2.history
    other = TrainConfig(variant="full", beta=0.1, epochs=2, batch_size=4,
                        learning_rate=5e-3, rng_seed=4)
    r3 = fit(list(docs), config=other, feature_config=fconfig, n_layers=1,
             n_heads=2)
    assert not np.array_equal(r1.params.to_vector(), r3.params.to_vector())


def test_fit_reduces_training_loss(setup):
    docs, fconfig, _ = setup
    config = TrainConfig(variant="joint", epochs=8, batch_size=4,
                         learning_rate=5e-3, rng_seed=0)
    result = fit(list(docs), config, feature_config=fconfig, n_layers=1,
                 n_heads=2)
    losses = [h["train_loss"] for h in result.history]
    assert losses[-1] < losses[0]


def test_gradient_accumulation_matches_larger_batch(setup):
    """Averaging two half batches before each update equals one full batch."""
    docs, fconfig, _ = setup
    small = TrainConfig(variant="joint", epochs=2, batch_size=2,
                        grad_accumulation=2, learning_rate=5e-3, rng_seed=1)
    large = TrainConfig(variant="joint", epochs=2, batch_size=4,
                        grad_accumulation=1, learning_rate=5e-3, rng_seed=1)
    r_small = fit(list(docs), small, feature_config=fconfig, n_layers=1,
                  n_heads=2)
    r_large = fit(list(docs), large, feature_config=fconfig, n_layers=1,
                  n_heads=2)
    np.testing.assert_allclose(r_small.params.to_vector(),
                               r_large.params.to_vector(), rtol=1e-10)


def test_fit_history_and_best_params(setup):
    docs, fconfig, _ = setup
    train, val = list(docs[:6]), list(docs[6:])
    config = TrainConfig(variant="joint", epochs=4, batch_size=3,
                         learning_rate=5e-3, rng_seed=2)
    result = fit(train, config, feature_config=fconfig, val_docs=val,
                 n_layers=1, n_heads=2)
    assert len(result.history) == config.epochs
    for i, record in enumerate(result.history):
        assert record["epoch"] == i + 1
        assert set(record) >= {"epoch", "train_loss", "val_loss",
                               "val_rouge1_f", "val_seg_f1"}
    # the retained parameters reproduce the lowest recorded validation loss
    best_seen = min(h["val_loss"] for h in result.history)
    recomputed = total_loss(val, result.best_params, config, fconfig,
                            with_grads=False)
    assert recomputed.value == pytest.approx(best_seen, rel=1e-9)


def test_fit_without_val_reports_none(setup):
    docs, fconfig, _ = setup
    config = TrainConfig(variant="base", epochs=1, batch_size=4,
                         learning_rate=1e-3, rng_seed=0)
    result = fit(list(docs), config, feature_config=fconfig, n_layers=1,
                 n_heads=2)
    assert result.history[0]["val_loss"] is None
    assert result.history[0]["val_rouge1_f"] is None


def test_grad_check_passes_per_variant(setup):
    docs, fconfig, params = setup
    doc = docs[0]
    for variant, beta in (("base", 0.0), ("joint", 0.0), ("full", 0.1)):
        config = TrainConfig(variant=variant, beta=beta)
        report = grad_check(params, doc, config, fconfig)
        assert report.passed, f"{variant}: {report.max_error}"
        assert report.max_error < report.tolerance
        norms = report.term_grad_norms
        assert norms["sum"] > 0.0
        if variant == "base":
            assert norms["seg"] == 0.0 and norms["dpp"] == 0.0
        elif variant == "joint":
            assert norms["seg"] > 0.0 and norms["dpp"] == 0.0
        else:
            assert norms["seg"] > 0.0 and norms["dpp"] > 0.0


def test_grad_check_flags_injected_fault(setup):
    docs, fconfig, params = setup
    doc = docs[0]
    config = TrainConfig(variant="joint")
    honest = total_loss([doc], params, config, fconfig, with_grads=True)
    broken = honest.grads.copy()
    broken.w_sum *= 1.5  # a deliberately wrong analytic block
    report = grad_check(params, doc, config, fconfig, analytic=broken)
    assert not report.passed
    assert report.block_errors["head.sum.weight"] > report.tolerance
    lines = "\n".join(report.summary_lines())
    assert "FAIL" in lines


def test_grad_check_report_lines(setup):
    docs, fconfig, params = setup
    report = grad_check(params, docs[0], TrainConfig(variant="base"), fconfig)
    lines = report.summary_lines()
    assert any("PASS" in line for line in lines)
    assert any("proj.weight" in line for line in lines)


def test_nan_parameters_raise_numerics_error(setup):
    docs, fconfig, params = setup
    poisoned = params.copy()
    poisoned.layers[0].w_q[0, 0] = np.nan
    with pytest.raises(NumericsError):
        total_loss(docs[:1], poisoned, TrainConfig(variant="base"), fconfig)
