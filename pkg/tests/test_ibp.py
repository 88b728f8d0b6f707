"""Tests for the binary mask laws: finite Beta-Bernoulli and the process limit."""

import math

import numpy as np
import pytest
from scipy.special import gammaln

from deepibp import ibp
from deepibp.oracle import enumerate_masks, mc_lof_histogram


def test_as_binary_matrix_accepts_and_casts():
    Z = ibp.as_binary_matrix([[0, 1], [1, 0]])
    assert Z.dtype == np.int8
    assert Z.shape == (2, 2)


def test_as_binary_matrix_accepts_empty_width():
    Z = ibp.as_binary_matrix(np.zeros((3, 0)))
    assert Z.shape == (3, 0)


def test_as_binary_matrix_rejects_bad_entries_and_shape():
    with pytest.raises(ValueError):
        ibp.as_binary_matrix(np.array([[0, 2]]))
    with pytest.raises(ValueError):
        ibp.as_binary_matrix(np.zeros(4))


def test_harmonic_number_hand_values():
    assert ibp.harmonic_number(0) == 0.0
    assert ibp.harmonic_number(1) == 1.0
    assert abs(ibp.harmonic_number(3) - 11.0 / 6.0) < 1e-15
    direct = sum(1.0 / j for j in range(1, 101))
    assert abs(ibp.harmonic_number(100) - direct) < 1e-14
    with pytest.raises(ValueError):
        ibp.harmonic_number(-1)


def test_logprob_mask_given_p_hand_values():
    # Two misses at p = 0.5 in a 2x1 mask.
    assert abs(ibp.logprob_mask_given_p(np.zeros((2, 1)), [0.5]) - math.log(0.25)) < 1e-12
    # Certain inclusion actually included costs nothing.
    assert ibp.logprob_mask_given_p(np.ones((3, 2)), [1.0, 1.0]) == 0.0


def test_logprob_mask_given_p_matches_entrywise_product():
    rng = np.random.default_rng(0)
    for _ in range(20):
        N, K = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        Z = (rng.random((N, K)) < 0.5).astype(np.int8)
        p = rng.uniform(0.05, 0.95, K)
        naive = sum(
            math.log(p[k]) if Z[n, k] else math.log(1.0 - p[k])
            for n in range(N)
            for k in range(K)
        )
        assert abs(ibp.logprob_mask_given_p(Z, p) - naive) < 1e-12


def test_logprob_mask_given_p_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        ibp.logprob_mask_given_p(np.zeros((2, 1)), [1.5])


def test_mask_marginal_two_by_one_hand_table():
    # N=2, K=1, alpha=1: the four masks carry 1/3, 1/6, 1/6, 1/3.
    Z_by_count = {
        0: np.array([[0], [0]]),
        1: np.array([[1], [0]]),
        2: np.array([[1], [1]]),
    }
    assert abs(math.exp(ibp.logprob_mask_marginal(Z_by_count[0], 1.0)) - 1.0 / 3.0) < 1e-12
    assert abs(math.exp(ibp.logprob_mask_marginal(Z_by_count[1], 1.0)) - 1.0 / 6.0) < 1e-12
    assert abs(math.exp(ibp.logprob_mask_marginal(Z_by_count[2], 1.0)) - 1.0 / 3.0) < 1e-12


def test_mask_marginal_empty_mask_has_probability_one():
    assert ibp.logprob_mask_marginal(np.zeros((4, 0), dtype=np.int8), 2.0) == 0.0


def test_mask_marginal_normalizes_for_all_small_shapes():
    for N in (1, 2, 3):
        for K in (1, 2):
            for alpha in (0.5, 1.0, 3.0):
                total = sum(
                    math.exp(ibp.logprob_mask_marginal(Z, alpha))
                    for Z in enumerate_masks(N, K)
                )
                assert abs(total - 1.0) < 1e-10, (N, K, alpha)


def test_mask_marginal_rejects_nonpositive_alpha():
    with pytest.raises(ValueError):
        ibp.logprob_mask_marginal(np.zeros((2, 1)), 0.0)


def test_left_order_form_idempotent():
    rng = np.random.default_rng(1)
    Z = (rng.random((3, 4)) < 0.5).astype(np.int8)
    once = ibp.left_order_form(Z)
    twice = ibp.left_order_form(once.matrix)
    assert once == twice
    np.testing.assert_array_equal(once.matrix, twice.matrix)


def test_left_order_form_column_permutation_invariant():
    rng = np.random.default_rng(2)
    Z = (rng.random((3, 5)) < 0.5).astype(np.int8)
    base = ibp.left_order_form(Z)
    for _ in range(10):
        perm = rng.permutation(5)
        assert ibp.left_order_form(Z[:, perm]) == base


def test_left_order_form_multiplicities_count_equal_columns():
    Z = np.array([[1, 1, 0], [0, 0, 1]], dtype=np.int8)
    lof = ibp.left_order_form(Z)
    # Histories (1,0) twice and (0,1) once, sorted descending.
    assert lof.multiplicities == (2, 1)
    np.testing.assert_array_equal(lof.matrix, [[1, 1, 0], [0, 0, 1]])


def test_ibp_logprob_empty_mask_is_minus_alpha_harmonic():
    Z = np.zeros((3, 0), dtype=np.int8)
    assert abs(ibp.logprob_mask_ibp(Z, 2.0) - (-2.0 * 11.0 / 6.0)) < 1e-12


def test_ibp_logprob_single_customer_single_dish():
    Z = np.array([[1]], dtype=np.int8)
    assert abs(ibp.logprob_mask_ibp(Z, 1.0) - (-1.0)) < 1e-12


def test_ibp_logprob_column_permutation_invariant():
    rng = np.random.default_rng(3)
    Z = ibp.sample_ibp_sequential(3, 2.0, rng)
    if Z.shape[1] < 2:
        Z = np.array([[1, 0], [1, 1], [0, 1]], dtype=np.int8)
    base = ibp.logprob_mask_ibp(Z, 1.5)
    perm = rng.permutation(Z.shape[1])
    assert abs(ibp.logprob_mask_ibp(Z[:, perm], 1.5) - base) < 1e-12


def test_ibp_logprob_rejects_zero_columns():
    Z = np.array([[1, 0], [1, 0]], dtype=np.int8)
    with pytest.raises(ValueError):
        ibp.logprob_mask_ibp(Z, 1.0)


def test_sequential_sampler_never_emits_zero_columns():
    rng = np.random.default_rng(4)
    for _ in range(500):
        Z = ibp.sample_ibp_sequential(4, 1.5, rng)
        if Z.shape[1]:
            assert (Z.sum(axis=0) > 0).all()


def test_sequential_sampler_first_customer_poisson_mean():
    rng = np.random.default_rng(5)
    alpha = 1.7
    draws = 20_000
    first = np.array([
        int(ibp.sample_ibp_sequential(1, alpha, rng).shape[1]) for _ in range(draws)
    ])
    se = first.std(ddof=1) / math.sqrt(draws)
    assert abs(first.mean() - alpha) < 3.0 * se


def test_sequential_sampler_tiny_alpha_rarely_creates_columns():
    rng = np.random.default_rng(6)
    cols = [ibp.sample_ibp_sequential(3, 1e-4, rng).shape[1] for _ in range(2000)]
    assert np.mean(np.asarray(cols) == 0) > 0.99


def test_finite_sampler_inclusion_frequency():
    # With alpha equal to K the per-entry inclusion probability is 1/2.
    rng = np.random.default_rng(7)
    K = 8
    draws = 100_000 // (4 * K)
    hits = sum(int(ibp.sample_mask_finite(4, K, float(K), rng).sum()) for _ in range(draws))
    n = draws * 4 * K
    se = math.sqrt(0.25 / n)
    assert abs(hits / n - 0.5) < 3.0 * se


def test_finite_sampler_edge_shapes():
    rng = np.random.default_rng(8)
    assert ibp.sample_mask_finite(3, 0, 1.0, rng).shape == (3, 0)
    with pytest.raises(ValueError):
        ibp.sample_mask_finite(0, 2, 1.0, rng)


def test_finite_law_approaches_process_law_in_left_ordered_form():
    # Large finite truncation vs the sequential process sampler, compared
    # on left-ordered class histograms.
    rng = np.random.default_rng(9)
    draws = 100_000
    N, alpha, K = 2, 1.0, 64

    def finite_sampler(N_, alpha_, rng_):
        Z = ibp.sample_mask_finite(N_, K, alpha_, rng_)
        return ibp.drop_zero_columns(Z)

    finite = mc_lof_histogram(finite_sampler, N, alpha, draws, rng)
    process = mc_lof_histogram(ibp.sample_ibp_sequential, N, alpha, draws, rng)
    classes = set(finite) | set(process)
    tv = 0.5 * sum(abs(finite.get(c, 0.0) - process.get(c, 0.0)) for c in classes)
    assert tv < 0.02


def test_drop_zero_columns():
    Z = np.array([[1, 0, 0], [0, 0, 1]], dtype=np.int8)
    np.testing.assert_array_equal(ibp.drop_zero_columns(Z), [[1, 0], [0, 1]])


def test_new_dishes_per_customer_counts():
    Z = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 0]], dtype=np.int8)
    counts = ibp.new_dishes_per_customer(Z)
    np.testing.assert_array_equal(counts, [2, 1, 0])
    assert counts.sum() == Z.shape[1]


def test_column_counts_matches_sum():
    rng = np.random.default_rng(10)
    Z = (rng.random((5, 3)) < 0.4).astype(np.int8)
    np.testing.assert_array_equal(ibp.column_counts(Z), Z.sum(axis=0))


def test_mask_marginal_matches_beta_function_identity():
    # One column: the marginal is a * B(m + a, N - m + 1) for each count.
    N, alpha = 4, 2.5
    for m in range(N + 1):
        Z = np.zeros((N, 1), dtype=np.int8)
        Z[:m, 0] = 1
        expect = (
            math.log(alpha)
            + gammaln(m + alpha)
            + gammaln(N - m + 1.0)
            - gammaln(N + 1.0 + alpha)
        )
        assert abs(ibp.logprob_mask_marginal(Z, alpha) - expect) < 1e-12
