"""Loss composition, Adam training loop, and finite-difference certification.

Three variants share one architecture and differ only in the loss:

- ``base``: mean binary cross-entropy on the summary head.
- ``joint``: adds mean binary cross-entropy on the boundary head.
- ``full``: adds ``beta`` times the determinantal repulsion loss whose
  ground-truth subset is the labeled summary sentences.

Batch losses and gradients are plain means over the documents in the batch.
Training is deterministic for a fixed seed when run single-threaded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import evaluation, inference
from .corpus import tokenize
from .dpp import dpp_loss_and_grad
from .encoder import (
    FeatureConfig,
    base_features,
    encode_forward,
    heads_forward,
    backward_document,
    init_params,
)
from .rouge import rouge_n

__all__ = [
    "Variant",
    "TrainConfig",
    "TrainingError",
    "BatchLoss",
    "FitResult",
    "GradCheckReport",
    "bce_loss",
    "total_loss",
    "learning_rate_at",
    "fit",
    "grad_check",
]

# Clamp applied to probabilities inside the BCE value; gradients are zero in
# the clamped region so value and gradient describe the same function.
_BCE_CLAMP = 1e-7

DEFAULT_DPP_RIDGE = 1e-8

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


class TrainingError(Exception):
    """Raised when training hits a non-finite loss or unusable inputs."""


class Variant(str, Enum):
    BASE = "base"
    JOINT = "joint"
    FULL = "full"


@dataclass
class TrainConfig:
    """Optimization settings. ``beta`` is forced to zero for the base and
    joint variants; only ``full`` uses the repulsion term."""

    variant: Variant = Variant.FULL
    beta: float = 0.1
    learning_rate: float = 1e-3
    warmup_fraction: float = 0.1
    epochs: int = 20
    batch_size: int = 8
    grad_accumulation: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if not (0.0 <= self.warmup_fraction <= 1.0):
            raise ValueError("warmup_fraction must be in [0, 1]")
        for name in ("epochs", "batch_size", "grad_accumulation"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.variant is not Variant.FULL:
            self.beta = 0.0


def bce_loss(probs, labels):
    """Mean binary cross-entropy; probabilities clamped to [1e-7, 1 - 1e-7]."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if probs.shape != labels.shape:
        raise ValueError(f"shape mismatch: {probs.shape} vs {labels.shape}")
    p = np.clip(probs, _BCE_CLAMP, 1.0 - _BCE_CLAMP)
    return float(-(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)).mean())


def _bce_grad(probs, labels):
    """Gradient of :func:`bce_loss` with respect to the probabilities."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    p = np.clip(probs, _BCE_CLAMP, 1.0 - _BCE_CLAMP)
    grad = (-(labels / p) + (1.0 - labels) / (1.0 - p)) / probs.size
    clamped = (probs < _BCE_CLAMP) | (probs > 1.0 - _BCE_CLAMP)
    return np.where(clamped, 0.0, grad)


@dataclass
class BatchLoss:
    """Batch-mean loss value, per-term means (``dpp`` unscaled by beta),
    mean parameter gradients, and how many documents skipped the repulsion
    term for lack of positive summary labels."""

    value: float
    parts: dict
    grads: object | None
    dpp_skipped: int


def _doc_arrays(doc):
    if doc.labels is None:
        raise TrainingError(f"document {doc.id!r} has no labels")
    y_sum = np.asarray(doc.labels.summary_labels, dtype=float)
    y_seg = np.asarray(doc.labels.boundary_labels, dtype=float)
    return y_sum, y_seg


def _forward_cached(doc, params, feature_config, features):
    raw = None
    if features is not None:
        raw = features.get(doc.id)
    if raw is None:
        raw = base_features(doc, feature_config)
    enc = encode_forward(raw @ params.w_proj, params)
    enc.base_features = raw
    heads_forward(enc, params)
    return enc


def total_loss(documents, params, config, feature_config, features=None,
               with_grads=True, dpp_ridge=DEFAULT_DPP_RIDGE):
    """Variant-dependent loss over a batch of labeled documents.

    Parameters
    ----------
    documents : list of Document
        Every document must carry labels.
    params : ModelParams
    config : TrainConfig
    feature_config : FeatureConfig
    features : dict or None
        Optional cache mapping document id to its raw feature matrix.
    with_grads : bool
        Skip the backward pass when False (evaluation only).
    dpp_ridge : float
        Ridge for the repulsion term's subset minor.

    Returns
    -------
    BatchLoss
    """
    if not documents:
        raise ValueError("empty batch")
    n_docs = len(documents)
    grads_total = params.zeros_like() if with_grads else None
    value = 0.0
    parts = {"sum": 0.0, "seg": 0.0, "dpp": 0.0}
    skipped = 0

    for doc in documents:
        y_sum, y_seg = _doc_arrays(doc)
        enc = _forward_cached(doc, params, feature_config, features)
        p_sum, p_seg = enc.summary_probs, enc.boundary_probs

        doc_value = bce_loss(p_sum, y_sum)
        parts["sum"] += doc_value
        d_sum = _bce_grad(p_sum, y_sum) if with_grads else None
        d_seg = None
        d_hidden = None

        if config.variant is not Variant.BASE:
            seg_value = bce_loss(p_seg, y_seg)
            parts["seg"] += seg_value
            doc_value += seg_value
            if with_grads:
                d_seg = _bce_grad(p_seg, y_seg)

        if config.variant is Variant.FULL and config.beta > 0.0:
            subset = np.flatnonzero(y_sum == 1.0)
            if subset.size == 0:
                skipped += 1
            else:
                rep = dpp_loss_and_grad(enc.hidden, p_sum, subset, ridge=dpp_ridge)
                parts["dpp"] += rep.value
                doc_value += config.beta * rep.value
                if with_grads:
                    d_hidden = config.beta * rep.d_hidden
                    d_sum = d_sum + config.beta * rep.d_quality

        if not np.isfinite(doc_value):
            raise TrainingError(f"non-finite loss on document {doc.id!r}")
        value += doc_value

        if with_grads:
            doc_grads = backward_document(
                enc, params, d_hidden=d_hidden, d_summary=d_sum, d_boundary=d_seg
            )
            for (_, acc), (_, g) in zip(grads_total.blocks(), doc_grads.blocks()):
                acc += g

    if with_grads:
        for _, acc in grads_total.blocks():
            acc /= n_docs
    return BatchLoss(
        value=value / n_docs,
        parts={k: v / n_docs for k, v in parts.items()},
        grads=grads_total,
        dpp_skipped=skipped,
    )


def learning_rate_at(step, total_steps, base_rate, warmup_fraction):
    """Linear warmup: rate = base * step / ceil(warmup_fraction * total),
    then flat. ``step`` is 1-based; the schedule is continuous at the
    boundary."""
    if total_steps < 1:
        raise ValueError("total_steps must be at least 1")
    if step < 1:
        raise ValueError("step is 1-based")
    warmup_steps = math.ceil(warmup_fraction * total_steps)
    if warmup_steps > 0 and step <= warmup_steps:
        return base_rate * step / warmup_steps
    return base_rate


@dataclass
class FitResult:
    params: object
    best_params: object
    history: list = field(default_factory=list)


def _validation_metrics(val_docs, params, config, feature_config, features,
                        eval_top_k, boundary_threshold, dpp_ridge):
    loss = total_loss(val_docs, params, config, feature_config,
                      features=features, with_grads=False,
                      dpp_ridge=dpp_ridge).value
    rouge_scores = []
    seg_scores = []
    for doc in val_docs:
        enc = _forward_cached(doc, params, feature_config, features)
        if doc.reference_summary:
            picked = inference.select_top_k(enc.summary_probs, eval_top_k)
            summary = " ".join(doc.sentences[i].text for i in picked)
            rouge_scores.append(
                rouge_n(tokenize(summary), tokenize(doc.reference_summary), 1).f1
            )
        hyp = {int(i) for i in np.flatnonzero(enc.boundary_probs >= boundary_threshold)}
        ref = {i for i, v in enumerate(doc.labels.boundary_labels) if v == 1}
        seg_scores.append(evaluation.seg_f1(hyp, ref).f1)
    return {
        "val_loss": loss,
        "val_rouge1_f": float(np.mean(rouge_scores)) if rouge_scores else None,
        "val_seg_f1": float(np.mean(seg_scores)) if seg_scores else None,
    }


def fit(train_docs, config, feature_config=None, val_docs=(), params=None,
        n_layers=2, n_heads=4, ffn_hidden=None, eval_top_k=3,
        boundary_threshold=0.5, dpp_ridge=DEFAULT_DPP_RIDGE):
    """Train a model with Adam and linear warmup.

    Parameters
    ----------
    train_docs : list of Document
        Labeled training documents.
    config : TrainConfig
    feature_config : FeatureConfig or None
        Defaults to ``FeatureConfig()``.
    val_docs : list of Document
        Optional labeled validation documents; per-epoch metrics are logged
        against them and the best-validation-loss parameters are retained.
    params : ModelParams or None
        Warm start; by default parameters are initialized from the config
        seed.
    n_layers, n_heads, ffn_hidden
        Architecture knobs used only when ``params`` is None.
    eval_top_k, boundary_threshold
        Settings for the per-epoch validation metrics.

    Returns
    -------
    FitResult
        Final parameters, best-validation parameters (final ones when no
        validation set was given), and a per-epoch history of
        ``{epoch, train_loss, val_loss, val_rouge1_f, val_seg_f1}``.
    """
    if not train_docs:
        raise TrainingError("no training documents")
    feature_config = feature_config or FeatureConfig()
    if params is None:
        params = init_params(feature_config, n_layers=n_layers, n_heads=n_heads,
                             ffn_hidden=ffn_hidden, rng_seed=config.rng_seed)
    features = {
        doc.id: base_features(doc, feature_config)
        for doc in list(train_docs) + list(val_docs)
    }
    rng = np.random.default_rng(config.rng_seed)
    n = len(train_docs)
    batches_per_epoch = math.ceil(n / config.batch_size)
    updates_per_epoch = math.ceil(batches_per_epoch / config.grad_accumulation)
    total_updates = config.epochs * updates_per_epoch

    template = params
    theta = params.to_vector()
    adam_m = np.zeros_like(theta)
    adam_v = np.zeros_like(theta)
    update = 0
    history = []
    best_key = math.inf
    best_theta = theta.copy()

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        epoch_losses = []
        pending = np.zeros_like(theta)
        pending_count = 0
        for start in range(0, n, config.batch_size):
            batch = [train_docs[i] for i in order[start:start + config.batch_size]]
            current = template.from_vector(theta)
            result = total_loss(batch, current, config, feature_config,
                                features=features, dpp_ridge=dpp_ridge)
            epoch_losses.append(result.value)
            pending += result.grads.to_vector()
            pending_count += 1
            is_last = start + config.batch_size >= n
            if pending_count == config.grad_accumulation or is_last:
                update += 1
                grad = pending / pending_count
                rate = learning_rate_at(update, total_updates,
                                        config.learning_rate,
                                        config.warmup_fraction)
                adam_m = _ADAM_BETA1 * adam_m + (1.0 - _ADAM_BETA1) * grad
                adam_v = _ADAM_BETA2 * adam_v + (1.0 - _ADAM_BETA2) * grad * grad
                m_hat = adam_m / (1.0 - _ADAM_BETA1 ** update)
                v_hat = adam_v / (1.0 - _ADAM_BETA2 ** update)
                theta = theta - rate * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
                pending[...] = 0.0
                pending_count = 0

        current = template.from_vector(theta)
        record = {"epoch": epoch, "train_loss": float(np.mean(epoch_losses)),
                  "val_loss": None, "val_rouge1_f": None, "val_seg_f1": None}
        if val_docs:
            record.update(_validation_metrics(
                val_docs, current, config, feature_config, features,
                eval_top_k, boundary_threshold, dpp_ridge))
        history.append(record)
        key = record["val_loss"] if val_docs else record["train_loss"]
        if key < best_key:
            best_key = key
            best_theta = theta.copy()

    return FitResult(
        params=template.from_vector(theta),
        best_params=template.from_vector(best_theta),
        history=history,
    )


# ---------------------------------------------------------------------------
# Gradient certification
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    """Per-block maximum relative error between analytic and central
    finite-difference gradients, plus per-term gradient norms."""

    block_errors: dict
    term_grad_norms: dict
    max_error: float
    tolerance: float
    step: float

    @property
    def passed(self):
        return self.max_error <= self.tolerance

    def summary_lines(self):
        lines = []
        for name, err in self.block_errors.items():
            flag = "ok" if err <= self.tolerance else "FAIL"
            lines.append(f"{name:<24s} max rel err {err:.3e}  {flag}")
        for term, norm in self.term_grad_norms.items():
            lines.append(f"term {term:<19s} grad norm   {norm:.3e}")
        lines.append(
            f"overall max rel err {self.max_error:.3e} "
            f"(tolerance {self.tolerance:g}): "
            f"{'PASS' if self.passed else 'FAIL'}"
        )
        return lines


def _term_grad_norm(doc, params, config, feature_config, term, dpp_ridge):
    """Norm of one loss term's parameter gradient (0.0 for inactive terms)."""
    if term == "seg" and config.variant is Variant.BASE:
        return 0.0
    if term == "dpp" and (config.variant is not Variant.FULL or config.beta == 0.0):
        return 0.0
    y_sum, y_seg = _doc_arrays(doc)
    enc = _forward_cached(doc, params, feature_config, None)
    d_sum = d_seg = d_hidden = None
    if term == "sum":
        d_sum = _bce_grad(enc.summary_probs, y_sum)
    elif term == "seg":
        d_seg = _bce_grad(enc.boundary_probs, y_seg)
    else:
        subset = np.flatnonzero(y_sum == 1.0)
        if subset.size == 0:
            return 0.0
        rep = dpp_loss_and_grad(enc.hidden, enc.summary_probs, subset,
                                ridge=dpp_ridge)
        d_hidden = config.beta * rep.d_hidden
        d_sum = config.beta * rep.d_quality
    grads = backward_document(enc, params, d_hidden=d_hidden,
                              d_summary=d_sum, d_boundary=d_seg)
    return float(np.linalg.norm(grads.to_vector()))


def grad_check(params, doc, config, feature_config, step=1e-5, tolerance=1e-4,
               analytic=None, dpp_ridge=DEFAULT_DPP_RIDGE):
    """Certify analytic gradients against central finite differences.

    Every parameter entry is perturbed by ``step`` in both directions. The
    relative error uses |a - f| / max(|a|, |f|, 1e-5); the floor keeps
    round-off noise on near-zero gradients from flagging spuriously.

    ``analytic`` lets callers supply (possibly tampered) gradients; by
    default they are computed from :func:`total_loss` on the document.
    """
    if analytic is None:
        analytic = total_loss([doc], params, config, feature_config,
                              dpp_ridge=dpp_ridge).grads

    def loss_at(vector):
        candidate = params.from_vector(vector)
        return total_loss([doc], candidate, config, feature_config,
                          with_grads=False, dpp_ridge=dpp_ridge).value

    theta = params.to_vector()
    block_errors = {}
    offset = 0
    for (name, arr), (_, grad_arr) in zip(params.blocks(), analytic.blocks()):
        flat_grad = grad_arr.ravel()
        worst = 0.0
        for j in range(arr.size):
            idx = offset + j
            saved = theta[idx]
            theta[idx] = saved + step
            up = loss_at(theta)
            theta[idx] = saved - step
            down = loss_at(theta)
            theta[idx] = saved
            fd = (up - down) / (2.0 * step)
            a = flat_grad[j]
            rel = abs(a - fd) / max(abs(a), abs(fd), 1e-5)
            worst = max(worst, rel)
        block_errors[name] = worst
        offset += arr.size

    term_norms = {
        term: _term_grad_norm(doc, params, config, feature_config, term, dpp_ridge)
        for term in ("sum", "seg", "dpp")
    }
    return GradCheckReport(
        block_errors=block_errors,
        term_grad_norms=term_norms,
        max_error=max(block_errors.values()),
        tolerance=tolerance,
        step=step,
    )
