"""Paired significance tests for model comparison.

Two tests cover the two metric types: a two-sided sign-flip permutation test
on per-sample IoU differences (continuous), and an exact two-sided McNemar
test on hit flags (binary). Both are symmetric under swapping the two models
and reproducible under a fixed seed.
"""

from __future__ import annotations

from math import comb

import numpy as np


def paired_permutation_p(
    values_a: np.ndarray,
    values_b: np.ndarray,
    n_permutations: int = 10_000,
    seed: int = 0,
) -> float:
    """Two-sided sign-flip permutation p-value for mean(values_a - values_b).

    Uses the add-one Monte-Carlo estimator, so the smallest attainable value
    is 1 / (n_permutations + 1).
    """
    a = np.asarray(values_a, dtype=np.float64)
    b = np.asarray(values_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("inputs must be equal-length non-empty 1-d arrays")
    diffs = a - b
    observed = abs(diffs.mean())

    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(n_permutations, diffs.size))
    perm_means = np.abs(signs @ diffs) / diffs.size
    count = int(np.sum(perm_means >= observed - 1e-15))
    return (1 + count) / (n_permutations + 1)


def mcnemar_exact_p(hits_a: np.ndarray, hits_b: np.ndarray) -> float:
    """Exact two-sided McNemar p-value on paired binary outcomes.

    Conditions on the discordant pairs: with n discordant and k the smaller
    discordant count, p = min(1, 2 * P[Bin(n, 1/2) <= k]). Zero discordant
    pairs give p = 1.
    """
    a = np.asarray(hits_a, dtype=bool)
    b = np.asarray(hits_b, dtype=bool)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("inputs must be equal-length non-empty 1-d arrays")
    n01 = int(np.sum(a & ~b))
    n10 = int(np.sum(~a & b))
    n = n01 + n10
    if n == 0:
        return 1.0
    k = min(n01, n10)
    tail = sum(comb(n, i) for i in range(k + 1)) / 2.0**n
    return min(1.0, 2.0 * tail)
