"""Sentence featurization, an inter-sentence attention encoder, and the two
scoring heads (summary membership and section boundary).

Everything runs in float64 numpy. The encoder is a residual pre-norm stack:
each layer applies layer-norm -> multi-head self-attention over sentence
positions -> residual add, then layer-norm -> GELU feed-forward -> residual
add. Sinusoidal position encodings are added to the projected features before
the first layer. Forward passes retain the activations needed for an exact
reverse-mode backward pass; gradients are certified against central finite
differences in the test suite.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .corpus import CUE_PHRASES

__all__ = [
    "FeatureConfig",
    "LayerParams",
    "ModelParams",
    "EncodedDocument",
    "NumericsError",
    "CheckpointError",
    "N_SCALAR_FEATURES",
    "base_features",
    "featurize",
    "init_params",
    "position_encoding",
    "stable_sigmoid",
    "encode_forward",
    "heads_forward",
    "encode_backward",
    "forward_document",
    "backward_document",
    "save_checkpoint",
    "load_checkpoint",
]

# Scalar features appended after the hashed bag-of-words block:
# normalized position, log sentence length, centroid similarity, cue flag.
N_SCALAR_FEATURES = 4

_LN_EPS = 1e-6
_PROB_FLOOR = 1e-12

CHECKPOINT_FORMAT = "sectsum-checkpoint"
CHECKPOINT_VERSION = 1


class NumericsError(Exception):
    """Raised when a forward pass produces non-finite values."""


class CheckpointError(Exception):
    """Raised for unreadable or mismatched checkpoint files."""


@dataclass(frozen=True)
class FeatureConfig:
    """Featurizer and model-width configuration.

    ``dim`` is the hidden width of the encoder; it must be even (position
    encodings pair sin/cos channels) and at least 4. ``hash_buckets`` sizes
    the hashed bag-of-words block and must be at least ``dim``.
    """

    dim: int = 32
    hash_buckets: int = 64
    cue_lexicon: tuple = CUE_PHRASES
    use_position_feature: bool = True
    use_centroid_similarity: bool = True

    def __post_init__(self):
        if self.dim < 4 or self.dim % 2 != 0:
            raise ValueError(f"dim must be an even integer >= 4, got {self.dim}")
        if self.hash_buckets < self.dim:
            raise ValueError(
                f"hash_buckets ({self.hash_buckets}) must be >= dim ({self.dim})"
            )

    @property
    def n_features(self):
        return self.hash_buckets + N_SCALAR_FEATURES


# ---------------------------------------------------------------------------
# Featurization
# ---------------------------------------------------------------------------

def _bucket(token, n_buckets):
    return zlib.crc32(token.encode("utf-8")) % n_buckets


def base_features(doc, config):
    """Raw per-sentence features, shape (n_sentences, hash_buckets + 4).

    Columns: L2-normalized hashed bag-of-words counts, then normalized
    position i/n, log(1 + token count), cosine similarity of the sentence
    TF-IDF vector to the document centroid, and a cue-lexicon indicator.
    Deterministic: the token hash is crc32, independent of process state.
    """
    n = len(doc.sentences)
    buckets = config.hash_buckets
    out = np.zeros((n, buckets + N_SCALAR_FEATURES))

    for i, sent in enumerate(doc.sentences):
        for tok in sent.tokens:
            out[i, _bucket(tok, buckets)] += 1.0
        norm = np.linalg.norm(out[i, :buckets])
        if norm > 0:
            out[i, :buckets] /= norm

    if config.use_position_feature:
        out[:, buckets] = np.arange(n) / n
    out[:, buckets + 1] = [math.log1p(len(s.tokens)) for s in doc.sentences]
    if config.use_centroid_similarity:
        out[:, buckets + 2] = _centroid_similarity(doc)
    lexicon = [phrase.lower() for phrase in config.cue_lexicon]
    for i, sent in enumerate(doc.sentences):
        text = sent.text.lower()
        if any(phrase in text for phrase in lexicon):
            out[i, buckets + 3] = 1.0
    return out


def _centroid_similarity(doc):
    """Cosine of each sentence's TF-IDF vector against the document centroid."""
    n = len(doc.sentences)
    vocab = sorted({t for s in doc.sentences for t in s.tokens})
    if not vocab:
        return np.zeros(n)
    col = {t: j for j, t in enumerate(vocab)}
    tf = np.zeros((n, len(vocab)))
    for i, sent in enumerate(doc.sentences):
        for tok in sent.tokens:
            tf[i, col[tok]] += 1.0
    df = (tf > 0).sum(axis=0)
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    vec = tf * idf
    centroid = vec.mean(axis=0)
    c_norm = np.linalg.norm(centroid)
    sims = np.zeros(n)
    if c_norm == 0:
        return sims
    for i in range(n):
        v_norm = np.linalg.norm(vec[i])
        if v_norm > 0:
            sims[i] = float(vec[i] @ centroid) / (v_norm * c_norm)
    return sims


def featurize(doc, config, params):
    """Projected sentence features, shape (n_sentences, dim).

    The projection weights are trainable and live in ``params``; the raw
    feature construction is :func:`base_features`.
    """
    return base_features(doc, config) @ params.w_proj


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass
class LayerParams:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray
    ln1_gain: np.ndarray
    ln1_bias: np.ndarray
    ln2_gain: np.ndarray
    ln2_bias: np.ndarray
    w_ff1: np.ndarray
    b_ff1: np.ndarray
    w_ff2: np.ndarray
    b_ff2: np.ndarray

    _FIELDS = (
        "w_q", "w_k", "w_v", "w_o",
        "ln1_gain", "ln1_bias", "ln2_gain", "ln2_bias",
        "w_ff1", "b_ff1", "w_ff2", "b_ff2",
    )


@dataclass
class ModelParams:
    """All trainable weights, plus the head-count needed to shape attention.

    Gradient containers reuse this class (same structure, zero-initialized).
    """

    w_proj: np.ndarray
    layers: list
    w_sum: np.ndarray
    b_sum: np.ndarray
    w_seg: np.ndarray
    b_seg: np.ndarray
    n_heads: int

    @property
    def dim(self):
        return self.w_sum.shape[0]

    @property
    def n_layers(self):
        return len(self.layers)

    @property
    def ffn_hidden(self):
        return self.layers[0].b_ff1.shape[0] if self.layers else 0

    @property
    def n_features(self):
        return self.w_proj.shape[0]

    def blocks(self):
        """Yield (name, array) pairs in a fixed order; arrays are live views."""
        yield "proj.weight", self.w_proj
        for i, lp in enumerate(self.layers):
            for name in LayerParams._FIELDS:
                yield f"layer{i}.{name}", getattr(lp, name)
        yield "head.sum.weight", self.w_sum
        yield "head.sum.bias", self.b_sum
        yield "head.seg.weight", self.w_seg
        yield "head.seg.bias", self.b_seg

    @property
    def n_parameters(self):
        return sum(arr.size for _, arr in self.blocks())

    def copy(self):
        return ModelParams(
            w_proj=self.w_proj.copy(),
            layers=[
                LayerParams(**{f: getattr(lp, f).copy() for f in LayerParams._FIELDS})
                for lp in self.layers
            ],
            w_sum=self.w_sum.copy(),
            b_sum=self.b_sum.copy(),
            w_seg=self.w_seg.copy(),
            b_seg=self.b_seg.copy(),
            n_heads=self.n_heads,
        )

    def zeros_like(self):
        out = self.copy()
        for _, arr in out.blocks():
            arr[...] = 0.0
        return out

    def to_vector(self):
        return np.concatenate([arr.ravel() for _, arr in self.blocks()])

    def from_vector(self, vector):
        """New ModelParams with this structure, values taken from ``vector``."""
        out = self.copy()
        offset = 0
        for _, arr in out.blocks():
            size = arr.size
            arr[...] = np.asarray(vector[offset:offset + size]).reshape(arr.shape)
            offset += size
        if offset != len(vector):
            raise ValueError(f"vector length {len(vector)} != parameter count {offset}")
        return out


def init_params(config, n_layers=2, n_heads=4, ffn_hidden=None, rng_seed=0):
    """Glorot-style random initialization; layer-norm gains start at one."""
    d = config.dim
    if d % n_heads != 0:
        raise ValueError(f"dim {d} not divisible by n_heads {n_heads}")
    if ffn_hidden is None:
        ffn_hidden = 2 * d
    rng = np.random.default_rng(rng_seed)

    def glorot(n_in, n_out):
        return rng.normal(0.0, math.sqrt(2.0 / (n_in + n_out)), size=(n_in, n_out))

    layers = []
    for _ in range(n_layers):
        layers.append(LayerParams(
            w_q=glorot(d, d), w_k=glorot(d, d), w_v=glorot(d, d), w_o=glorot(d, d),
            ln1_gain=np.ones(d), ln1_bias=np.zeros(d),
            ln2_gain=np.ones(d), ln2_bias=np.zeros(d),
            w_ff1=glorot(d, ffn_hidden), b_ff1=np.zeros(ffn_hidden),
            w_ff2=glorot(ffn_hidden, d), b_ff2=np.zeros(d),
        ))
    return ModelParams(
        w_proj=glorot(config.n_features, d),
        layers=layers,
        w_sum=rng.normal(0.0, 1.0 / math.sqrt(d), size=d),
        b_sum=np.zeros(1),
        w_seg=rng.normal(0.0, 1.0 / math.sqrt(d), size=d),
        b_seg=np.zeros(1),
        n_heads=n_heads,
    )


# ---------------------------------------------------------------------------
# Forward / backward primitives
# ---------------------------------------------------------------------------

def position_encoding(n, d):
    """Sinusoidal position encodings, shape (n, d); d must be even."""
    if d % 2 != 0:
        raise ValueError(f"position encoding needs an even dim, got {d}")
    pos = np.arange(n, dtype=float)[:, None]
    channel = np.arange(0, d, 2, dtype=float)[None, :]
    angles = pos / np.power(10000.0, channel / d)
    pe = np.empty((n, d))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


def stable_sigmoid(z):
    """Overflow-free logistic, clipped to stay strictly inside (0, 1)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    exp_z = np.exp(z[~pos])
    out[~pos] = exp_z / (1.0 + exp_z)
    return np.clip(out, _PROB_FLOOR, 1.0 - _PROB_FLOOR)


def _gelu(z):
    return 0.5 * z * (1.0 + erf(z / math.sqrt(2.0)))


def _gelu_grad(z):
    cdf = 0.5 * (1.0 + erf(z / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return cdf + z * pdf


def _softmax(scores):
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x, n_heads):
    n, d = x.shape
    return x.reshape(n, n_heads, d // n_heads).transpose(1, 0, 2)


def _merge_heads(x):
    h, n, dk = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dk)


def _layernorm_forward(x, gain, bias):
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    var = (centered ** 2).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + _LN_EPS)
    x_hat = centered * inv_std
    return x_hat * gain + bias, (x_hat, inv_std)


def _layernorm_backward(d_out, cache, gain):
    x_hat, inv_std = cache
    d_gain = (d_out * x_hat).sum(axis=0)
    d_bias = d_out.sum(axis=0)
    d_xhat = d_out * gain
    m1 = d_xhat.mean(axis=1, keepdims=True)
    m2 = (d_xhat * x_hat).mean(axis=1, keepdims=True)
    d_x = inv_std * (d_xhat - m1 - x_hat * m2)
    return d_x, d_gain, d_bias


def _layer_forward(x, lp, n_heads):
    d = x.shape[1]
    dk = d // n_heads
    normed1, ln1_cache = _layernorm_forward(x, lp.ln1_gain, lp.ln1_bias)
    qh = _split_heads(normed1 @ lp.w_q, n_heads)
    kh = _split_heads(normed1 @ lp.w_k, n_heads)
    vh = _split_heads(normed1 @ lp.w_v, n_heads)
    attn = _softmax(qh @ kh.transpose(0, 2, 1) / math.sqrt(dk))
    merged = _merge_heads(attn @ vh)
    mid = x + merged @ lp.w_o
    normed2, ln2_cache = _layernorm_forward(mid, lp.ln2_gain, lp.ln2_bias)
    z = normed2 @ lp.w_ff1 + lp.b_ff1
    act = _gelu(z)
    out = mid + act @ lp.w_ff2 + lp.b_ff2
    cache = {
        "ln1": ln1_cache, "ln2": ln2_cache,
        "normed1": normed1, "normed2": normed2,
        "qh": qh, "kh": kh, "vh": vh, "attn": attn, "merged": merged,
        "z": z, "act": act,
    }
    return out, cache


def _layer_backward(d_out, cache, lp, n_heads, grad_lp):
    d = d_out.shape[1]
    dk = d // n_heads

    # Feed-forward branch (out = mid + gelu(ln2(mid) @ w_ff1 + b) @ w_ff2 + b).
    grad_lp.b_ff2 += d_out.sum(axis=0)
    grad_lp.w_ff2 += cache["act"].T @ d_out
    d_act = d_out @ lp.w_ff2.T
    d_z = d_act * _gelu_grad(cache["z"])
    grad_lp.b_ff1 += d_z.sum(axis=0)
    grad_lp.w_ff1 += cache["normed2"].T @ d_z
    d_normed2 = d_z @ lp.w_ff1.T
    d_mid_ln, d_g2, d_b2 = _layernorm_backward(d_normed2, cache["ln2"], lp.ln2_gain)
    grad_lp.ln2_gain += d_g2
    grad_lp.ln2_bias += d_b2
    d_mid = d_out + d_mid_ln

    # Attention branch (mid = x + merge(attn @ v) @ w_o).
    grad_lp.w_o += cache["merged"].T @ d_mid
    d_ctx = _split_heads(d_mid @ lp.w_o.T, n_heads)
    attn = cache["attn"]
    d_attn = d_ctx @ cache["vh"].transpose(0, 2, 1)
    d_vh = attn.transpose(0, 2, 1) @ d_ctx
    d_scores = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True))
    d_scores /= math.sqrt(dk)
    d_qh = d_scores @ cache["kh"]
    d_kh = d_scores.transpose(0, 2, 1) @ cache["qh"]
    d_q = _merge_heads(d_qh)
    d_k = _merge_heads(d_kh)
    d_v = _merge_heads(d_vh)
    normed1 = cache["normed1"]
    grad_lp.w_q += normed1.T @ d_q
    grad_lp.w_k += normed1.T @ d_k
    grad_lp.w_v += normed1.T @ d_v
    d_normed1 = d_q @ lp.w_q.T + d_k @ lp.w_k.T + d_v @ lp.w_v.T
    d_x_ln, d_g1, d_b1 = _layernorm_backward(d_normed1, cache["ln1"], lp.ln1_gain)
    grad_lp.ln1_gain += d_g1
    grad_lp.ln1_bias += d_b1
    return d_mid + d_x_ln


# ---------------------------------------------------------------------------
# Public forward / backward
# ---------------------------------------------------------------------------

@dataclass
class EncodedDocument:
    """Activation record for one document's forward pass."""

    hidden: np.ndarray
    features: np.ndarray
    layer_caches: list = field(repr=False)
    base_features: np.ndarray | None = None
    summary_probs: np.ndarray | None = None
    boundary_probs: np.ndarray | None = None


def encode_forward(features, params):
    """Run the attention stack over projected features (n, dim).

    Adds position encodings, applies every layer, and retains activations for
    :func:`encode_backward`. Raises :class:`NumericsError` if any layer output
    is non-finite.
    """
    features = np.asarray(features, dtype=float)
    n, d = features.shape
    if d != params.dim:
        raise ValueError(f"feature width {d} != model dim {params.dim}")
    x = features + position_encoding(n, d)
    caches = []
    for i, lp in enumerate(params.layers):
        x, cache = _layer_forward(x, lp, params.n_heads)
        if not np.isfinite(x).all():
            raise NumericsError(
                f"non-finite values in layer {i} output "
                f"(max |input| = {np.abs(features).max():.3e})"
            )
        caches.append(cache)
    return EncodedDocument(hidden=x, features=features, layer_caches=caches)


def heads_forward(enc, params):
    """Summary and boundary probabilities from the encoded sentences.

    Stores the probabilities on ``enc`` so the backward pass can reuse them.
    Outputs are strictly inside (0, 1).
    """
    z_sum = enc.hidden @ params.w_sum + params.b_sum[0]
    z_seg = enc.hidden @ params.w_seg + params.b_seg[0]
    enc.summary_probs = stable_sigmoid(z_sum)
    enc.boundary_probs = stable_sigmoid(z_seg)
    return enc.summary_probs, enc.boundary_probs


def encode_backward(enc, params, d_hidden=None, d_summary=None, d_boundary=None):
    """Exact reverse-mode gradients through heads and attention stack.

    Parameters
    ----------
    enc : EncodedDocument
        Activation record from :func:`encode_forward` (plus
        :func:`heads_forward` if head gradients are supplied).
    d_hidden : (n, dim) array or None
        Upstream gradient on the encoded sentence matrix.
    d_summary, d_boundary : (n,) arrays or None
        Upstream gradients on the head output *probabilities*.

    Returns
    -------
    (grads, d_features)
        ``grads`` is a zero-initialized :class:`ModelParams` filled with
        gradients for every stack and head parameter (the feature projection
        entry stays zero here; see :func:`backward_document`).
        ``d_features`` is the gradient on the projected input features.
    """
    grads = params.zeros_like()
    n, d = enc.hidden.shape
    d_x = np.zeros((n, d)) if d_hidden is None else np.array(d_hidden, dtype=float)

    for which, upstream in (("sum", d_summary), ("seg", d_boundary)):
        if upstream is None:
            continue
        probs = enc.summary_probs if which == "sum" else enc.boundary_probs
        if probs is None:
            raise RuntimeError("encode_backward needs heads_forward to run first")
        weight = params.w_sum if which == "sum" else params.w_seg
        d_logit = np.asarray(upstream, dtype=float) * probs * (1.0 - probs)
        if which == "sum":
            grads.w_sum += enc.hidden.T @ d_logit
            grads.b_sum += d_logit.sum(keepdims=True)
        else:
            grads.w_seg += enc.hidden.T @ d_logit
            grads.b_seg += d_logit.sum(keepdims=True)
        d_x += np.outer(d_logit, weight)

    for lp, cache, grad_lp in zip(
        reversed(params.layers), reversed(enc.layer_caches), reversed(grads.layers)
    ):
        d_x = _layer_backward(d_x, cache, lp, params.n_heads, grad_lp)
    return grads, d_x


def forward_document(doc, params, config):
    """Featurize + encode + score one document; returns the full activation
    record (raw features cached for the projection gradient)."""
    raw = base_features(doc, config)
    enc = encode_forward(raw @ params.w_proj, params)
    enc.base_features = raw
    heads_forward(enc, params)
    return enc


def backward_document(enc, params, d_hidden=None, d_summary=None, d_boundary=None):
    """Like :func:`encode_backward` but also fills the feature projection
    gradient (requires ``enc`` from :func:`forward_document`)."""
    if enc.base_features is None:
        raise RuntimeError("backward_document needs an EncodedDocument from forward_document")
    grads, d_features = encode_backward(
        enc, params, d_hidden=d_hidden, d_summary=d_summary, d_boundary=d_boundary
    )
    grads.w_proj += enc.base_features.T @ d_features
    return grads


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, params, config):
    """Write a deterministic checkpoint: one JSON header line describing the
    configuration and block layout, then raw row-major little-endian float64
    data for each block in order. Identical inputs give identical bytes."""
    blocks = list(params.blocks())
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "feature_config": {
            "dim": config.dim,
            "hash_buckets": config.hash_buckets,
            "cue_lexicon": list(config.cue_lexicon),
            "use_position_feature": config.use_position_feature,
            "use_centroid_similarity": config.use_centroid_similarity,
        },
        "n_heads": params.n_heads,
        "n_layers": params.n_layers,
        "ffn_hidden": params.ffn_hidden,
        "blocks": [{"name": name, "shape": list(arr.shape)} for name, arr in blocks],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for _, arr in blocks:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint written by :func:`save_checkpoint`.

    Returns
    -------
    (params, config) : (ModelParams, FeatureConfig)
    """
    with open(path, "rb") as fh:
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
        if header.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"not a {CHECKPOINT_FORMAT} file")
        if header.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {header.get('version')}")
        fc = header["feature_config"]
        config = FeatureConfig(
            dim=fc["dim"],
            hash_buckets=fc["hash_buckets"],
            cue_lexicon=tuple(fc["cue_lexicon"]),
            use_position_feature=fc["use_position_feature"],
            use_centroid_similarity=fc["use_centroid_similarity"],
        )
        params = init_params(
            config,
            n_layers=header["n_layers"],
            n_heads=header["n_heads"],
            ffn_hidden=header["ffn_hidden"],
            rng_seed=0,
        )
        for header_block, (name, arr) in zip(header["blocks"], params.blocks()):
            if header_block["name"] != name or list(arr.shape) != header_block["shape"]:
                raise CheckpointError(
                    f"checkpoint block {header_block['name']!r} does not match "
                    f"model structure (expected {name!r} {arr.shape})"
                )
            data = fh.read(arr.size * 8)
            if len(data) != arr.size * 8:
                raise CheckpointError(f"truncated checkpoint at block {name!r}")
            arr[...] = np.frombuffer(data, dtype="<f8").reshape(arr.shape)
    return params, config
