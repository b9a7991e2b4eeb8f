"""Determinantal repulsion over encoded sentences.

The kernel uses a quality/diversity decomposition: L = diag(q) S diag(q),
where q is the per-sentence summary probability and S is the cosine
similarity Gram matrix of the encoded sentences. Subset log-probability is
log det(L_Y) - log det(L + I); the normalizer identity
sum_Y det(L_Y) = det(L + I) is exercised by brute force in the tests.

Determinants go through Cholesky factorizations. A ridge on the subset minor
keeps training stable near duplicate sentences (escalating tenfold up to 1e-4
on factorization failure); a zero ridge is exact and is what test oracles use.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "DppKernel",
    "DppLoss",
    "SingularMinorError",
    "build_kernel",
    "dpp_log_prob",
    "dpp_loss_and_grad",
    "brute_force_subset_sum",
]

_MAX_RIDGE = 1e-4
_BRUTE_FORCE_LIMIT = 16


class SingularMinorError(Exception):
    """Raised when a subset minor cannot be factorized (even after ridge
    escalation when a positive ridge was requested)."""


@dataclass(frozen=True)
class DppKernel:
    """Quality vector, similarity matrix, and their product kernel."""

    quality: np.ndarray
    similarity: np.ndarray
    kernel: np.ndarray
    ridge: float


def build_kernel(hidden, quality, ridge=0.0):
    """Assemble L = diag(q) S diag(q) from encoded sentences and qualities.

    Parameters
    ----------
    hidden : (n, d) array
        Encoded sentence representations. Rows must have non-zero norm.
    quality : (n,) array
        Per-sentence quality scores in (0, 1].
    ridge : float
        Stored on the kernel; applied to subset minors during factorization.
    """
    hidden = np.asarray(hidden, dtype=float)
    quality = np.asarray(quality, dtype=float)
    if hidden.ndim != 2 or quality.shape != (hidden.shape[0],):
        raise ValueError("hidden must be (n, d) and quality (n,)")
    norms = np.linalg.norm(hidden, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero-norm sentence representation; cosine undefined")
    if np.any(quality <= 0):
        raise ValueError("quality scores must be positive")
    unit = hidden / norms[:, None]
    similarity = unit @ unit.T
    similarity = 0.5 * (similarity + similarity.T)
    kernel = quality[:, None] * similarity * quality[None, :]
    return DppKernel(quality=quality, similarity=similarity, kernel=kernel,
                     ridge=float(ridge))


def _chol_logdet(matrix):
    """log det via Cholesky; raises np.linalg.LinAlgError if not PD."""
    factor = np.linalg.cholesky(matrix)
    diag = np.diag(factor)
    if np.any(diag <= 0) or not np.isfinite(diag).all():
        raise np.linalg.LinAlgError("non-positive pivot")
    return 2.0 * np.log(diag).sum()


def _minor_logdet(kernel_matrix, subset, ridge):
    """log det of the subset minor plus ridge, escalating the ridge tenfold
    (up to 1e-4) on factorization failure. A zero ridge never escalates."""
    minor = kernel_matrix[np.ix_(subset, subset)]
    eye = np.eye(len(subset))
    eps = ridge
    while True:
        try:
            return _chol_logdet(minor + eps * eye), eps
        except np.linalg.LinAlgError:
            if eps == 0.0 or eps >= _MAX_RIDGE:
                raise SingularMinorError(
                    f"singular subset minor (|Y| = {len(subset)}, ridge = {eps:g})"
                ) from None
            eps = min(eps * 10.0, _MAX_RIDGE)


def dpp_log_prob(kernel, subset):
    """log P(Y) = log det(L_Y + ridge I) - log det(L + I).

    The empty subset is valid (numerator term 0). Duplicate rows with a zero
    ridge raise :class:`SingularMinorError`.
    """
    subset = sorted(set(int(i) for i in subset))
    n = kernel.kernel.shape[0]
    if subset and (subset[0] < 0 or subset[-1] >= n):
        raise IndexError(f"subset indices out of range for n = {n}")
    log_norm = _chol_logdet(kernel.kernel + np.eye(n))
    if not subset:
        return -log_norm
    log_minor, _ = _minor_logdet(kernel.kernel, subset, kernel.ridge)
    return log_minor - log_norm


@dataclass(frozen=True)
class DppLoss:
    """Negative subset log-probability plus gradients with respect to the
    encoded sentences and the quality scores."""

    value: float
    d_hidden: np.ndarray
    d_quality: np.ndarray
    ridge_used: float


def dpp_loss_and_grad(hidden, quality, subset, ridge=1e-8):
    """Repulsion loss -log P(Y | L) and its exact gradients.

    Parameters
    ----------
    hidden : (n, d) array
        Encoded sentences; the similarity matrix is their cosine Gram.
    quality : (n,) array
        Summary probabilities, strictly inside (0, 1).
    subset : iterable of int
        Ground-truth summary indices Y (must be non-empty).
    ridge : float
        Diagonal ridge on the subset minor, applied consistently in the value
        and the gradients.

    Returns
    -------
    DppLoss
    """
    subset = sorted(set(int(i) for i in subset))
    if not subset:
        raise ValueError("subset must be non-empty; skip the loss term instead")
    hidden = np.asarray(hidden, dtype=float)
    quality = np.asarray(quality, dtype=float)
    kern = build_kernel(hidden, quality, ridge=ridge)
    n = hidden.shape[0]

    # Value: log det(L + I) - log det(L_Y + eps I).
    full = kern.kernel + np.eye(n)
    log_norm = _chol_logdet(full)
    log_minor, eps = _minor_logdet(kern.kernel, subset, ridge)
    value = log_norm - log_minor

    # d value / d L = (L + I)^-1 - embed(A^-1), A = L_Y + eps I.
    inv_full = cho_solve(cho_factor(full, lower=True), np.eye(n))
    minor = kern.kernel[np.ix_(subset, subset)] + eps * np.eye(len(subset))
    inv_minor = cho_solve(cho_factor(minor, lower=True), np.eye(len(subset)))
    d_kernel = inv_full.copy()
    d_kernel[np.ix_(subset, subset)] -= inv_minor
    d_kernel = 0.5 * (d_kernel + d_kernel.T)

    # Chain through L = diag(q) S diag(q):
    #   d/dq_i = 2 sum_j d_kernel[i, j] q_j S[i, j]
    #   d/dS   = d_kernel * outer(q, q)
    d_quality = 2.0 * ((d_kernel * kern.similarity) @ quality)
    d_similarity = d_kernel * np.outer(quality, quality)

    # Chain through S = U U^T and the row normalization u_i = h_i / |h_i|.
    norms = np.linalg.norm(hidden, axis=1)
    unit = hidden / norms[:, None]
    d_unit = 2.0 * d_similarity @ unit
    radial = (d_unit * unit).sum(axis=1, keepdims=True)
    d_hidden = (d_unit - radial * unit) / norms[:, None]

    return DppLoss(value=float(value), d_hidden=d_hidden, d_quality=d_quality,
                   ridge_used=eps)


def brute_force_subset_sum(kernel_matrix):
    """Sum of det(L_Y) over every subset Y (empty subset contributes 1).

    Exponential-time oracle for the normalizer identity; refuses n > 16.
    """
    kernel_matrix = np.asarray(kernel_matrix, dtype=float)
    n = kernel_matrix.shape[0]
    if kernel_matrix.shape != (n, n):
        raise ValueError("kernel must be square")
    if n > _BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to n <= {_BRUTE_FORCE_LIMIT}, got {n}")
    total = 1.0
    indices = range(n)
    for size in range(1, n + 1):
        for subset in combinations(indices, size):
            total += np.linalg.det(kernel_matrix[np.ix_(subset, subset)])
    return total
