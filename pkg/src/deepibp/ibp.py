"""Finite Beta-Bernoulli and Indian buffet process laws for binary masks.

A mask is an (N, K) integer array with entries in {0, 1}: rows index
observed dimensions, columns index latent factors.  The finite model
places p_k ~ Beta(alpha/K, 1) on each column's inclusion probability.
Integrating the p_k out gives a column-factorised marginal; letting
K -> infinity while grouping masks by left-ordered form gives the
Indian buffet process law over equivalence classes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

__all__ = [
    "BinaryMatrix",
    "LofClass",
    "as_binary_matrix",
    "column_counts",
    "drop_zero_columns",
    "harmonic_number",
    "left_order_form",
    "logprob_mask_given_p",
    "logprob_mask_ibp",
    "logprob_mask_marginal",
    "new_dishes_per_customer",
    "sample_ibp_sequential",
    "sample_mask_finite",
]

# Alias for an (N, K) array with values in {0, 1}.
BinaryMatrix = np.ndarray


def as_binary_matrix(Z: BinaryMatrix) -> np.ndarray:
    """Validate ``Z`` and return it as a 2-D int8 array.

    Accepts any array-like whose entries are exactly 0 or 1.  An
    (N, 0) matrix is legal: it represents a model with no factors.
    """
    Z = np.asarray(Z)
    if Z.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {Z.shape}")
    if Z.size and not np.logical_or(Z == 0, Z == 1).all():
        raise ValueError("mask entries must be 0 or 1")
    return Z.astype(np.int8, copy=False)


def column_counts(Z: BinaryMatrix) -> np.ndarray:
    """Number of active rows per column, as an int64 vector."""
    return as_binary_matrix(Z).sum(axis=0, dtype=np.int64)


def harmonic_number(n: int) -> float:
    """Partial harmonic sum 1 + 1/2 + ... + 1/n, with H_0 = 0."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n == 0:
        return 0.0
    return float(np.sum(1.0 / np.arange(1, n + 1)))


def logprob_mask_given_p(Z: BinaryMatrix, p) -> float:
    """Log-probability of a mask given per-column inclusion probabilities.

    Entries are independent Bernoulli within each column:
    log P = sum_k [ m_k log p_k + (N - m_k) log(1 - p_k) ].

    Parameters
    ----------
    Z : (N, K) binary array
    p : scalar or (K,) array of probabilities in [0, 1]

    Returns
    -------
    float
        May be -inf when a column with active entries has p_k = 0
        (or an inactive entry has p_k = 1).
    """
    Z = as_binary_matrix(Z)
    N, K = Z.shape
    p = np.broadcast_to(np.asarray(p, dtype=float), (K,))
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("inclusion probabilities must lie in [0, 1]")
    m = column_counts(Z)
    # xlogy keeps the 0*log(0) = 0 convention for empty columns.
    return float(np.sum(xlogy(m, p) + xlogy(N - m, 1.0 - p)))


def logprob_mask_marginal(Z: BinaryMatrix, alpha: float) -> float:
    """Log-probability of a mask with Beta(alpha/K, 1) columns integrated out.

    Each column contributes
    (alpha/K) * B(m_k + alpha/K, N - m_k + 1), so

    log P = sum_k [ log a + lgamma(m_k + a) + lgamma(N - m_k + 1)
                    - lgamma(N + 1 + a) ],   a = alpha / K.

    An empty mask (K = 0) has probability one.
    """
    Z = as_binary_matrix(Z)
    if alpha <= 0.0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    N, K = Z.shape
    if K == 0:
        return 0.0
    a = alpha / K
    m = column_counts(Z)
    per_col = (
        np.log(a)
        + gammaln(m + a)
        + gammaln(N - m + 1.0)
        - gammaln(N + 1.0 + a)
    )
    return float(per_col.sum())


@dataclass(frozen=True, eq=False)
class LofClass:
    """Left-ordered canonical form of a mask.

    ``matrix`` holds the columns sorted by decreasing binary history
    (first row most significant); ``multiplicities`` counts how many
    identical columns fall in each distinct-history group, in the same
    order as they appear in ``matrix``.
    """

    matrix: np.ndarray
    multiplicities: tuple[int, ...]

    @property
    def key(self) -> bytes:
        """Hashable fingerprint of the class (shape plus column bits)."""
        n, k = self.matrix.shape
        return n.to_bytes(4, "little") + k.to_bytes(4, "little") + self.matrix.tobytes()

    def __eq__(self, other) -> bool:
        return isinstance(other, LofClass) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)


def left_order_form(Z: BinaryMatrix) -> LofClass:
    """Canonicalise a mask by sorting columns into left-ordered form.

    Columns are ordered by the magnitude of their binary history (row 0
    most significant), largest first, which is invariant under column
    permutation of the input.
    """
    Z = as_binary_matrix(Z)
    histories = sorted((tuple(int(v) for v in Z[:, k]) for k in range(Z.shape[1])), reverse=True)
    canon = np.array(histories, dtype=np.int8).T if histories else Z.reshape(Z.shape[0], 0)
    mult = tuple(len(list(g)) for _, g in itertools.groupby(histories))
    return LofClass(matrix=canon, multiplicities=mult)


def logprob_mask_ibp(Z: BinaryMatrix, alpha: float) -> float:
    """Log-probability of a mask's left-ordered class under the process law.

    With K+ active columns, column counts m_k, and equal-history group
    sizes K_h,

    log P = K+ log(alpha) - sum_h lgamma(K_h + 1) - alpha H_N
            + sum_k [ lgamma(N - m_k + 1) + lgamma(m_k) - lgamma(N + 1) ].

    All-zero columns have no left-ordered representative and are
    rejected.  An empty mask is legal and has log-probability -alpha H_N.
    """
    Z = as_binary_matrix(Z)
    if alpha <= 0.0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    N, K = Z.shape
    m = column_counts(Z)
    if np.any(m == 0):
        raise ValueError("mask has an all-zero column; drop it first")
    out = -alpha * harmonic_number(N)
    if K == 0:
        return float(out)
    lof = left_order_form(Z)
    out += K * np.log(alpha)
    out -= sum(gammaln(c + 1.0) for c in lof.multiplicities)
    out += float(np.sum(gammaln(N - m + 1.0) + gammaln(m) - gammaln(N + 1.0)))
    return float(out)


def sample_ibp_sequential(N: int, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """Draw a mask by the sequential culinary construction.

    Customer i (1-based) takes each already-sampled dish k
    independently with probability m_k / i, where m_k counts previous
    takers, then samples Poisson(alpha / i) new dishes.  The result has
    no all-zero columns and a random number of columns.

    Returns
    -------
    (N, K+) int8 array
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if alpha <= 0.0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    cols: list[np.ndarray] = []
    counts: list[int] = []
    for i in range(1, N + 1):
        if counts:
            take = rng.random(len(counts)) < np.asarray(counts) / i
            for k, t in enumerate(take):
                if t:
                    cols[k][i - 1] = 1
                    counts[k] += 1
        for _ in range(rng.poisson(alpha / i)):
            col = np.zeros(N, dtype=np.int8)
            col[i - 1] = 1
            cols.append(col)
            counts.append(1)
    if not cols:
        return np.zeros((N, 0), dtype=np.int8)
    return np.column_stack(cols)


def sample_mask_finite(N: int, K: int, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """Draw a mask from the finite law: p_k ~ Beta(alpha/K, 1) columns.

    Inclusion probabilities are drawn by inverse CDF (U^(K/alpha)),
    which stays exact for the tiny shape parameters large truncations
    produce.  Returns an (N, K) int8 array that may contain zero
    columns.
    """
    if N < 1 or K < 0:
        raise ValueError("need N >= 1 and K >= 0")
    if alpha <= 0.0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if K == 0:
        return np.zeros((N, 0), dtype=np.int8)
    p = rng.random(K) ** (K / alpha)
    return (rng.random((N, K)) < p).astype(np.int8)


def drop_zero_columns(Z: BinaryMatrix) -> np.ndarray:
    """Remove all-zero columns, e.g. before taking a left-ordered form."""
    Z = as_binary_matrix(Z)
    return Z[:, column_counts(Z) > 0]


def new_dishes_per_customer(Z: BinaryMatrix) -> np.ndarray:
    """Per-row counts of columns whose first active entry is that row.

    This is the culinary counting of the same mask: entry i gives how
    many dishes customer i sampled first.  The counts sum to K and are
    invariant under column permutation.
    """
    Z = as_binary_matrix(Z)
    if Z.shape[1] and np.any(column_counts(Z) == 0):
        raise ValueError("mask has an all-zero column; drop it first")
    out = np.zeros(Z.shape[0], dtype=np.int64)
    for k in range(Z.shape[1]):
        out[int(np.argmax(Z[:, k]))] += 1
    return out
