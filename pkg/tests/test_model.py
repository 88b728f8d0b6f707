"""Tests for the generative core: densities, variance routing, data generation."""

import math

import numpy as np
import pytest
from scipy import stats

from deepibp import model
from deepibp.model import (
    GenerativeModel,
    HyperParams,
    LayerHyper,
    ParentContext,
    WeightLayer,
    generate_dataset,
    log_joint,
    log_joint_terms,
    propagate_sigma,
    sample_weight_layer,
    spike_slab_logpdf,
)
from deepibp.oracle import Grid1D, grid_integrate


# -- spike-and-slab density ----------------------------------------------

def test_spike_slab_point_mass_values():
    assert spike_slab_logpdf(0.0, 1.0, 1.0) == ("point_mass", 0.0)
    kind, value = spike_slab_logpdf(0.0, 0.3, 2.0)
    assert kind == "point_mass"
    assert abs(value - 0.7) < 1e-15


def test_spike_slab_continuous_value():
    kind, value = spike_slab_logpdf(1.0, 0.5, 1.0)
    assert kind == "log_density"
    expect = math.log(0.5) - 0.5 - 0.5 * math.log(2.0 * math.pi)
    assert abs(value - expect) < 1e-12


def test_spike_slab_rejects_bad_arguments():
    with pytest.raises(ValueError):
        spike_slab_logpdf(float("nan"), 0.5, 1.0)
    with pytest.raises(ValueError):
        spike_slab_logpdf(1.0, 1.5, 1.0)
    with pytest.raises(ValueError):
        spike_slab_logpdf(1.0, 0.5, 0.0)


def test_spike_slab_continuous_part_integrates_to_p():
    for p, s2 in ((0.5, 2.0), (0.25, 0.4)):
        width = 50.0 * math.sqrt(s2)
        # Even point count keeps w = 0 off the grid, so every node is in
        # the continuous part's domain.
        grid = Grid1D(-width, width, 200_000)

        def density(w):
            return np.array([math.exp(spike_slab_logpdf(float(v), p, s2).value) for v in w])

        mass = grid_integrate(density, grid)
        assert abs(mass - p) < 1e-8
        # Discrete plus continuous parts account for the whole law.
        assert abs((1.0 - p) + mass - 1.0) < 1e-8


# -- variance routing -----------------------------------------------------

def test_propagate_sigma_hand_values():
    assert propagate_sigma([1.0, -2.0], [3.0, 1.0], 1e-6) == 1.0
    assert propagate_sigma([0.0, 0.0], [5.0, 7.0], 1e-6) == 1e-6
    assert propagate_sigma([], [], 1e-6) == 1e-6


def test_propagate_sigma_sign_flip_invariance():
    rng = np.random.default_rng(0)
    for _ in range(50):
        w = rng.standard_normal(4)
        y = rng.standard_normal(4)
        base = propagate_sigma(w, y, 1e-9)
        assert propagate_sigma(-w, y, 1e-9) == base
        assert propagate_sigma(w, -y, 1e-9) == base


def test_propagate_sigma_rejects_mismatch_and_bad_floor():
    with pytest.raises(ValueError):
        propagate_sigma([1.0], [1.0, 2.0], 1e-6)
    with pytest.raises(ValueError):
        propagate_sigma([1.0], [1.0], 0.0)


def test_propagate_sigma_matrix_matches_scalar():
    rng = np.random.default_rng(1)
    W = rng.standard_normal((3, 2))
    Y = rng.standard_normal((2, 5))
    full = model.propagate_sigma_matrix(W, Y, 1e-6)
    for n in range(3):
        for t in range(5):
            assert abs(full[n, t] - propagate_sigma(W[n], Y[:, t], 1e-6)) < 1e-14


def test_sample_factor_column_zero_weights_stay_near_floor():
    rng = np.random.default_rng(2)
    layer = WeightLayer(mask=np.zeros((4, 2), dtype=np.int8), slab=np.zeros((4, 2)))
    draws = model.sample_factor_column(layer, [1.0, -1.0], rng, sigma_floor=1e-6)
    assert np.abs(draws).max() < 1e-4


def test_sample_factor_column_scale():
    rng = np.random.default_rng(3)
    sigma = 1.7
    layer = WeightLayer(mask=np.ones((1, 1), dtype=np.int8), slab=np.array([[sigma]]))
    draws = np.array([
        model.sample_factor_column(layer, [1.0], rng)[0] for _ in range(100_000)
    ])
    se_mean = sigma / math.sqrt(len(draws))
    assert abs(draws.mean()) < 3.0 * se_mean
    # Sample std of a normal has SE sigma / sqrt(2 n).
    assert abs(draws.std(ddof=1) - sigma) < 3.0 * sigma / math.sqrt(2 * len(draws))


# -- prior sampling of a weight layer -------------------------------------

def test_sample_weight_layer_inclusion_frequency():
    # With alpha equal to K the inclusion probabilities are Beta(1, 1),
    # so the marginal entry inclusion is 1/2.  Entries within a column
    # share one p draw, so the error budget is dominated by the number
    # of columns: Var(mean) ~ (Var(p) + E[p(1-p)]/N) / K.
    rng = np.random.default_rng(4)
    N, K = 10, 10_000
    layer = sample_weight_layer(N, K, float(K), 2.0, 1.0, rng)
    se = math.sqrt((1.0 / 12.0 + (1.0 / 6.0) / N) / K)
    assert abs(layer.mask.mean() - 0.5) < 3.0 * se


def test_sample_weight_layer_variance_mean():
    rng = np.random.default_rng(5)
    layer = sample_weight_layer(1, 400_000, 1.0, 2.0, 1.0, rng)
    # InverseGamma(2, 1) has mean 1; heavy tails, so the bound is loose
    # but the seed is fixed.
    assert abs(layer.sigma2_col.mean() - 1.0) < 0.1


def test_sample_weight_layer_records_columns_and_masks_slab():
    rng = np.random.default_rng(6)
    layer = sample_weight_layer(5, 3, 2.0, 2.0, 1.0, rng)
    assert layer.p_col.shape == (3,)
    assert layer.sigma2_col.shape == (3,)
    assert (layer.sigma2_col > 0).all()
    np.testing.assert_array_equal(layer.weights, layer.mask * layer.slab)


def test_sample_weight_layer_zero_columns():
    rng = np.random.default_rng(7)
    layer = sample_weight_layer(4, 0, 1.0, 2.0, 1.0, rng)
    assert layer.shape == (4, 0)


def test_weight_layer_validates_shapes():
    with pytest.raises(ValueError):
        WeightLayer(mask=np.zeros((2, 2), dtype=np.int8), slab=np.zeros((2, 3)))
    with pytest.raises(ValueError):
        WeightLayer(
            mask=np.zeros((2, 2), dtype=np.int8),
            slab=np.zeros((2, 2)),
            p_col=np.array([0.5]),
        )


# -- hyperparameters -------------------------------------------------------

def test_hyper_params_broadcast_and_layer_views():
    hp = HyperParams(
        alpha_ibp_per_layer=3.0,
        ig_shape_per_layer=(2.0, 4.0),
        ig_scale_per_layer=1.0,
        layer_widths=(3, 2),
    )
    assert hp.num_layers == 2
    assert hp.alpha_ibp_per_layer == (3.0, 3.0)
    assert hp.layer(1).ig_shape == 4.0
    with pytest.raises(IndexError):
        hp.layer(2)


def test_hyper_params_validation():
    with pytest.raises(ValueError):
        HyperParams(layer_widths=())
    with pytest.raises(ValueError):
        HyperParams(alpha_ibp_per_layer=(1.0, 2.0), layer_widths=(3,))
    with pytest.raises(ValueError):
        HyperParams(sigma_top=0.5, sigma_floor=0.6)
    with pytest.raises(ValueError):
        HyperParams(alpha_ibp_per_layer=-1.0)


def test_generative_model_shape_chaining():
    hp = HyperParams(layer_widths=(3, 2))
    rng = np.random.default_rng(8)
    gm = GenerativeModel.from_prior(hp, 6, rng)
    assert gm.n_dims == 6
    # Top layer connects 3 child factors to 2 parent factors.
    assert gm.layers[0].shape == (3, 2)
    assert gm.layers[1].shape == (6, 3)
    with pytest.raises(ValueError):
        GenerativeModel(hyper=hp, layers=[gm.layers[1], gm.layers[0]])


# -- forward generation ----------------------------------------------------

def test_generate_dataset_shapes_and_determinism():
    hp = HyperParams(layer_widths=(3,))
    gm = GenerativeModel.from_prior(hp, 16, np.random.default_rng(9))
    a = generate_dataset(gm, 200, np.random.default_rng(42))
    b = generate_dataset(gm, 200, np.random.default_rng(42))
    assert a[-1].shape == (16, 200)
    assert a[0].shape == (3, 200)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_generate_dataset_no_factors_floors_everything():
    hp = HyperParams(layer_widths=(0,))
    gm = GenerativeModel.from_prior(hp, 5, np.random.default_rng(10))
    X = generate_dataset(gm, 50, np.random.default_rng(11))[-1]
    assert np.abs(X).max() < 1e-4


def test_generate_dataset_empty_instances():
    hp = HyperParams(layer_widths=(2,))
    gm = GenerativeModel.from_prior(hp, 4, np.random.default_rng(12))
    mats = generate_dataset(gm, 0, np.random.default_rng(13))
    assert all(m.shape[1] == 0 for m in mats)
    with pytest.raises(ValueError):
        generate_dataset(gm, -1, np.random.default_rng(13))


def test_generated_second_moment_matches_routed_variance():
    # Given fixed weights and factors, each entry is centred Gaussian with
    # the routed sigma, so the pooled standardised square has mean 1.
    rng = np.random.default_rng(14)
    hp = HyperParams(layer_widths=(3,))
    gm = GenerativeModel.from_prior(hp, 6, rng)
    Y = hp.sigma_top * rng.standard_normal((3, 40))
    sigma = model.propagate_sigma_matrix(gm.layers[0].weights, Y, hp.sigma_floor)
    reps = 400
    zsq = np.empty((reps,) + sigma.shape)
    for r in range(reps):
        X = sigma * rng.standard_normal(sigma.shape)
        zsq[r] = (X / sigma) ** 2
    pooled = zsq.mean()
    n = zsq.size
    se = math.sqrt(2.0 / n)
    assert abs(pooled - 1.0) < 3.0 * se


# -- log-joint -------------------------------------------------------------

def _random_state_like(rng, N=5, K=3, T=8):
    from deepibp.inference import ChainState

    hyper = LayerHyper(alpha_ibp=2.0, ig_shape=2.0, ig_scale=1.0, sigma_top=1.0, sigma_floor=1e-6)
    mask = (rng.random((N, K)) < 0.6).astype(np.int8)
    slab = rng.standard_normal((N, K)) * mask
    Y = rng.standard_normal((K, T))
    X = rng.standard_normal((N, T))
    return ChainState(X=X, Y=Y, mask=mask, slab=slab, layer_hyper=hyper), hyper


def test_log_joint_terms_sum_to_total():
    rng = np.random.default_rng(15)
    state, hyper = _random_state_like(rng)
    terms = log_joint_terms(state.X, state, hyper)
    parts = (
        terms.log_lik
        + terms.log_y_prior
        + terms.log_mask_prior
        + terms.log_slab_prior
        + terms.log_k_prior
    )
    assert abs(terms.total - parts) < 1e-12
    assert abs(log_joint(state.X, state, hyper) - terms.total) < 1e-12
    assert abs(terms.log_weight_prior - (terms.log_mask_prior + terms.log_slab_prior)) < 1e-15


def test_log_joint_no_factor_state_uses_floor_likelihood():
    from deepibp.inference import ChainState

    hyper = LayerHyper(alpha_ibp=1.0, ig_shape=2.0, ig_scale=1.0, sigma_top=1.0, sigma_floor=1e-6)
    rng = np.random.default_rng(16)
    X = 1e-6 * rng.standard_normal((3, 4))
    state = ChainState(
        X=X,
        Y=np.zeros((0, 4)),
        mask=np.zeros((3, 0), dtype=np.int8),
        slab=np.zeros((3, 0)),
        layer_hyper=hyper,
    )
    terms = log_joint_terms(X, state, hyper)
    expect = float(stats.norm.logpdf(X, scale=1e-6).sum())
    assert abs(terms.log_lik - expect) < 1e-8
    assert terms.log_y_prior == 0.0
    assert terms.log_mask_prior == 0.0
    assert terms.log_slab_prior == 0.0


def test_log_joint_likelihood_scales_with_instances():
    rng = np.random.default_rng(17)
    hp = HyperParams(layer_widths=(3,))
    gm = GenerativeModel.from_prior(hp, 6, rng)
    short = generate_dataset(gm, 2000, np.random.default_rng(18))
    long = generate_dataset(gm, 4000, np.random.default_rng(19))

    from deepibp.inference import ChainState

    lh = hp.layer(0)

    def lik(mats):
        st = ChainState(
            X=mats[-1], Y=mats[0], mask=gm.layers[0].mask, slab=gm.layers[0].slab,
            layer_hyper=lh,
        )
        return log_joint_terms(mats[-1], st, lh).log_lik

    ratio = lik(long) / lik(short)
    assert abs(ratio - 2.0) < 0.1


def test_log_joint_column_exchangeability():
    rng = np.random.default_rng(20)
    state, hyper = _random_state_like(rng)
    base = log_joint(state.X, state, hyper)
    perm = rng.permutation(state.K)

    from deepibp.inference import ChainState

    permuted = ChainState(
        X=state.X,
        Y=state.Y[perm],
        mask=state.mask[:, perm],
        slab=state.slab[:, perm],
        layer_hyper=state.layer_hyper,
    )
    assert abs(log_joint(state.X, permuted, hyper) - base) < 1e-9


def test_slab_column_logmarginal_zero_count():
    assert model.slab_column_logmarginal(0.0, 0, 2.0, 1.0) == 0.0


def test_slab_column_logmarginal_single_value_is_student_t():
    # One value with the variance integrated out is the predictive t.
    w = 0.8
    a, b = 2.5, 1.3
    df, scale = model.slab_predictive_params(0, 0.0, a, b)
    expect = model.student_t_logpdf(w, df, scale)
    got = model.slab_column_logmarginal(w * w, 1, a, b)
    assert abs(got - expect) < 1e-12


def test_spike_slab_predictive_hand_values():
    spike, slab = model.spike_slab_predictive(0, 2, 1.0)
    assert abs(spike - 2.0 / 3.0) < 1e-15
    assert abs(slab - 1.0 / 3.0) < 1e-15
    assert abs(spike + slab - 1.0) < 1e-15
    with pytest.raises(ValueError):
        model.spike_slab_predictive(2, 2, 1.0)
    with pytest.raises(ValueError):
        model.spike_slab_predictive(0, 2, 0.0)


def test_slab_predictive_params_no_observations():
    df, scale = model.slab_predictive_params(0, 0.0, 3.0, 2.0)
    assert df == 6.0
    assert abs(scale - math.sqrt(2.0 / 3.0)) < 1e-15


def test_student_t_logpdf_matches_scipy():
    for w, df, scale in ((0.3, 4.0, 1.2), (-2.0, 7.0, 0.5), (0.0, 2.0, 3.0)):
        expect = stats.t.logpdf(w, df, scale=scale)
        assert abs(model.student_t_logpdf(w, df, scale) - expect) < 1e-12


def test_sample_student_t_moments():
    rng = np.random.default_rng(21)
    df, scale = 8.0, 1.5
    draws = model.sample_student_t(df, scale, rng, size=200_000)
    var = scale * scale * df / (df - 2.0)
    assert abs(draws.mean()) < 3.0 * math.sqrt(var / draws.size)
    assert abs(draws.var(ddof=1) - var) < 0.05


def test_log_poisson_k_matches_scipy():
    for k, rate in ((0, 2.0), (3, 5.5), (10, 1.0)):
        assert abs(model.log_poisson_k(k, rate) - stats.poisson.logpmf(k, rate)) < 1e-12
    with pytest.raises(ValueError):
        model.log_poisson_k(-1, 2.0)


def test_gaussian_loglik_matches_scipy():
    rng = np.random.default_rng(22)
    X = rng.standard_normal((3, 4))
    sigma = np.abs(rng.standard_normal((3, 4))) + 0.5
    expect = float(stats.norm.logpdf(X, scale=sigma).sum())
    assert abs(model.gaussian_loglik(X, sigma) - expect) < 1e-10


def test_parent_context_row_coverage():
    rng = np.random.default_rng(23)
    W = rng.standard_normal((2, 3))
    Y = rng.standard_normal((3, 6))
    ctx = ParentContext(weights=W, factors=Y)
    rows = ctx.sigma_rows(4, sigma_top=1.5, sigma_floor=1e-6)
    assert rows.shape == (4, 6)
    np.testing.assert_allclose(rows[:2], model.propagate_sigma_matrix(W, Y, 1e-6))
    # Rows beyond the frozen width fall back to the top-layer scale.
    assert (rows[2:] == 1.5).all()


def test_parent_context_validates_chaining():
    with pytest.raises(ValueError):
        ParentContext(weights=np.zeros((2, 3)), factors=np.zeros((4, 6)))


def test_as_factor_matrix_rejects_non_finite():
    with pytest.raises(ValueError):
        model.as_factor_matrix(np.array([[1.0, float("inf")]]))
    with pytest.raises(ValueError):
        model.as_factor_matrix(np.zeros(3))
