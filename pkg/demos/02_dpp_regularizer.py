"""Inspect the determinant-based diversity term on a toy example.

Builds a kernel from four hand-made sentence vectors where two are nearly
identical, shows that subsets containing the duplicate pair get a much
lower probability, checks the subset-sum normalization identity by brute
force, and demonstrates the ridge fallback on an exactly singular minor.
"""

import argparse

import numpy as np

from sectsum import (
    SingularMinorError,
    brute_force_subset_sum,
    build_kernel,
    dpp_log_prob,
    dpp_loss_and_grad,
)


def toy_vectors():
    hidden = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.99, 0.14, 0.05, 0.0],  # near copy of sentence 0
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.3],
    ])
    quality = np.array([0.9, 0.85, 0.8, 0.7])
    return hidden, quality


def show_kernel(kernel):
    print("cosine similarity matrix:")
    with np.printoptions(precision=3, suppress=True):
        print(kernel.similarity)
    print(f"quality scores: {kernel.quality}")


def show_subset_probs(kernel):
    subsets = [(0, 2), (0, 3), (2, 3), (0, 1), (0, 2, 3), (0, 1, 2)]
    print("log P(Y) for candidate subsets (higher is better):")
    for subset in subsets:
        logp = dpp_log_prob(kernel, set(subset))
        note = "  <- contains the near-duplicate pair" if {0, 1} <= set(subset) else ""
        print(f"  Y = {subset}: {logp:9.4f}{note}")


def show_normalizer(kernel):
    total = brute_force_subset_sum(kernel.kernel)
    direct = float(np.linalg.det(kernel.kernel + np.eye(4)))
    rel = abs(total - direct) / direct
    print(f"sum over all subsets of det(L_Y) = {total:.6f}")
    print(f"det(L + I)                      = {direct:.6f}")
    print(f"relative difference             = {rel:.2e}")


def show_gradients(hidden, quality):
    loss = dpp_loss_and_grad(hidden, quality, {0, 2, 3})
    print(f"loss value on Y = (0, 2, 3): {loss.value:.4f}")
    print(f"|d hidden| = {np.linalg.norm(loss.d_hidden):.4f}, "
          f"|d quality| = {np.linalg.norm(loss.d_quality):.4f}, "
          f"ridge used = {loss.ridge_used:.0e}")


def show_ridge_fallback():
    hidden = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])  # exact copy
    quality = np.array([0.9, 0.9, 0.5])
    loss = dpp_loss_and_grad(hidden, quality, {0, 1})
    print(f"exactly duplicated rows: loss {loss.value:.4f} is finite with "
          f"ridge {loss.ridge_used:.0e}")
    try:
        dpp_loss_and_grad(hidden, quality, {0, 1}, ridge=0.0)
    except SingularMinorError as exc:
        print(f"with ridge 0 the same subset raises: {exc}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.parse_args()

    hidden, quality = toy_vectors()
    kernel = build_kernel(hidden, quality)

    print("== kernel ==")
    show_kernel(kernel)

    print()
    print("== subset probabilities ==")
    show_subset_probs(kernel)

    print()
    print("== normalization identity ==")
    show_normalizer(kernel)

    print()
    print("== gradients ==")
    show_gradients(hidden, quality)

    print()
    print("== singular minors ==")
    show_ridge_fallback()


if __name__ == "__main__":
    main()
