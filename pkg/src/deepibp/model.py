"""Generative core: spike-and-slab weights, variance routing, synthetic data.

The model stacks weight layers between factor matrices.  Effective
weights are ``mask * slab`` where the mask is binary with Beta-Bernoulli
columns and the slab is Gaussian with a per-column inverse-gamma
variance.  A factor value routes variance downward: the child entry at
dimension n, instance t is N(0, sigma^2) with
sigma = max(|sum_k W[n, k] Y[k, t]|, sigma_floor).  The top layer's
factors are N(0, sigma_top^2).

The log-joint for one layer decomposes as data likelihood + factor
prior + weight prior (mask marginal times slab marginal) + a Poisson
prior on the number of factors; each term is exposed separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .ibp import as_binary_matrix, column_counts, harmonic_number, logprob_mask_marginal

__all__ = [
    "FactorMatrix",
    "GenerativeModel",
    "HyperParams",
    "JointTerms",
    "LayerHyper",
    "ParentContext",
    "SpikeSlabTerm",
    "WeightLayer",
    "as_factor_matrix",
    "gaussian_loglik",
    "generate_dataset",
    "log_joint",
    "log_joint_terms",
    "log_poisson_k",
    "propagate_sigma",
    "propagate_sigma_matrix",
    "sample_factor_column",
    "sample_weight_layer",
    "slab_column_logmarginal",
    "spike_slab_logpdf",
]

LOG_2PI = math.log(2.0 * math.pi)

# Alias for a real (K, T) factor matrix (or the (N, T) observation matrix).
FactorMatrix = np.ndarray


def as_factor_matrix(X: FactorMatrix) -> np.ndarray:
    """Validate a factor/data matrix: 2-D, float, finite entries only."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"factor matrix must be 2-D, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("factor matrix contains NaN or Inf")
    return X


def _as_layer_tuple(value, num_layers: int, name: str) -> tuple[float, ...]:
    if np.isscalar(value):
        out = (float(value),) * num_layers
    else:
        out = tuple(float(v) for v in value)
    if len(out) != num_layers:
        raise ValueError(f"{name} must have one entry per layer ({num_layers}), got {len(out)}")
    if any(v <= 0.0 for v in out):
        raise ValueError(f"{name} entries must be strictly positive")
    return out


@dataclass(frozen=True)
class LayerHyper:
    """Flattened hyperparameters for a single layer's inference or sampling."""

    alpha_ibp: float
    ig_shape: float
    ig_scale: float
    sigma_top: float
    sigma_floor: float


@dataclass(frozen=True)
class HyperParams:
    """Model hyperparameters, one entry per layer, counted bottom-up.

    Layer 1 (index 0) is the layer whose weights connect hidden factors
    to the observed data.  ``layer_widths`` gives the finite truncation
    K^1..K^L used for forward generation; inference treats widths as
    unknown.

    Parameters
    ----------
    alpha_ibp_per_layer : float or sequence
        Beta/IBP concentration alpha' per layer; scalars broadcast.
    ig_shape_per_layer, ig_scale_per_layer : float or sequence
        Inverse-gamma shape/scale on the slab variance per layer.
    sigma_top : float
        Standard deviation of the topmost layer's factors.
    sigma_floor : float
        Lower clamp applied to every propagated standard deviation.
    layer_widths : sequence of int
        Generative truncation widths, bottom layer first.
    """

    alpha_ibp_per_layer: float | tuple[float, ...] = 3.0
    ig_shape_per_layer: float | tuple[float, ...] = 2.0
    ig_scale_per_layer: float | tuple[float, ...] = 1.0
    sigma_top: float = 1.0
    sigma_floor: float = 1e-6
    layer_widths: tuple[int, ...] = (3,)

    def __post_init__(self) -> None:
        widths = tuple(int(k) for k in np.atleast_1d(self.layer_widths))
        if not widths:
            raise ValueError("layer_widths must name at least one layer")
        if any(k < 0 for k in widths):
            raise ValueError("layer widths must be >= 0")
        object.__setattr__(self, "layer_widths", widths)
        L = len(widths)
        for name in ("alpha_ibp_per_layer", "ig_shape_per_layer", "ig_scale_per_layer"):
            object.__setattr__(self, name, _as_layer_tuple(getattr(self, name), L, name))
        if not (self.sigma_top > 0.0 and self.sigma_floor > 0.0):
            raise ValueError("sigma_top and sigma_floor must be strictly positive")
        if self.sigma_floor > self.sigma_top:
            raise ValueError("sigma_floor must not exceed sigma_top")

    @property
    def num_layers(self) -> int:
        return len(self.layer_widths)

    def layer(self, index: int) -> LayerHyper:
        """Per-layer view; index 0 is the layer adjacent to the data."""
        if not 0 <= index < self.num_layers:
            raise IndexError(f"layer index {index} out of range for {self.num_layers} layers")
        return LayerHyper(
            alpha_ibp=self.alpha_ibp_per_layer[index],
            ig_shape=self.ig_shape_per_layer[index],
            ig_scale=self.ig_scale_per_layer[index],
            sigma_top=self.sigma_top,
            sigma_floor=self.sigma_floor,
        )


@dataclass
class WeightLayer:
    """One layer's connection mask and real-valued slab weights.

    ``mask`` is binary with rows indexing the child layer (the layer
    below) and columns indexing this layer's factors.  ``slab`` holds
    the Gaussian weight values; the effective weight matrix is their
    elementwise product.  ``p_col`` and ``sigma2_col`` record the
    per-column inclusion probability and slab variance when the layer
    was drawn from the finite prior; both are None when marginalized.
    """

    mask: np.ndarray
    slab: np.ndarray
    p_col: np.ndarray | None = None
    sigma2_col: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.mask = as_binary_matrix(self.mask)
        self.slab = np.asarray(self.slab, dtype=float)
        if self.slab.shape != self.mask.shape:
            raise ValueError(
                f"slab shape {self.slab.shape} != mask shape {self.mask.shape}"
            )
        for name in ("p_col", "sigma2_col"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != (self.mask.shape[1],):
                    raise ValueError(f"{name} must have one entry per column")
                setattr(self, name, v)

    @property
    def weights(self) -> np.ndarray:
        """Effective weights: mask * slab."""
        return self.mask * self.slab

    @property
    def column_counts(self) -> np.ndarray:
        return column_counts(self.mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape


@dataclass
class GenerativeModel:
    """A finite truncation of the layered model: hyperparameters plus
    weight layers ordered top to bottom (the last layer touches the data).
    """

    hyper: HyperParams
    layers: list[WeightLayer]

    def __post_init__(self) -> None:
        if len(self.layers) != self.hyper.num_layers:
            raise ValueError(
                f"{len(self.layers)} layers given for {self.hyper.num_layers}-layer hyperparameters"
            )
        for upper, lower in zip(self.layers, self.layers[1:]):
            if upper.mask.shape[0] != lower.mask.shape[1]:
                raise ValueError(
                    f"layer shapes do not chain: {upper.mask.shape} above {lower.mask.shape}"
                )
        widths = tuple(layer.mask.shape[1] for layer in reversed(self.layers))
        if widths != self.hyper.layer_widths:
            raise ValueError(
                f"layer widths {widths} (bottom-up) do not match hyper.layer_widths {self.hyper.layer_widths}"
            )

    @property
    def n_dims(self) -> int:
        return self.layers[-1].mask.shape[0]

    @classmethod
    def from_prior(cls, hyper: HyperParams, n_dims: int, rng: np.random.Generator) -> "GenerativeModel":
        """Draw every weight layer from its finite prior, bottom layer first."""
        layers_bottom_up = []
        child = n_dims
        for i in range(hyper.num_layers):
            lh = hyper.layer(i)
            width = hyper.layer_widths[i]
            layers_bottom_up.append(
                sample_weight_layer(child, width, lh.alpha_ibp, lh.ig_shape, lh.ig_scale, rng)
            )
            child = width
        return cls(hyper=hyper, layers=list(reversed(layers_bottom_up)))


class SpikeSlabTerm(NamedTuple):
    """Tagged value so point masses are never mistaken for log-densities.

    ``kind`` is "point_mass" (value in [0, 1], natural units) when the
    weight sits exactly at zero, else "log_density".
    """

    kind: str
    value: float


def spike_slab_logpdf(w: float, p: float, sigma2: float) -> SpikeSlabTerm:
    """Evaluate the mixed spike-and-slab law at a single weight value.

    The law places probability 1 - p on exactly zero and p times a
    N(0, sigma2) density elsewhere.

    Returns
    -------
    SpikeSlabTerm
        ("point_mass", 1 - p) for w == 0, otherwise
        ("log_density", log p - 0.5 log(2 pi sigma2) - w^2 / (2 sigma2)).
    """
    if not math.isfinite(w):
        raise ValueError(f"weight must be finite, got {w}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"inclusion probability must be in [0, 1], got {p}")
    if not sigma2 > 0.0:
        raise ValueError(f"slab variance must be > 0, got {sigma2}")
    if w == 0.0:
        return SpikeSlabTerm("point_mass", 1.0 - p)
    log_density = math.log(p) - 0.5 * (LOG_2PI + math.log(sigma2)) - w * w / (2.0 * sigma2) if p > 0.0 else -math.inf
    return SpikeSlabTerm("log_density", log_density)


def propagate_sigma(weight_row, parent_factors, sigma_floor: float) -> float:
    """Standard deviation routed to one child entry for one instance.

    Computes max(|weight_row . parent_factors|, sigma_floor); empty
    vectors contribute a zero sum so the floor engages.
    """
    w = np.asarray(weight_row, dtype=float).ravel()
    y = np.asarray(parent_factors, dtype=float).ravel()
    if w.shape != y.shape:
        raise ValueError(f"length mismatch: weights {w.shape[0]} vs factors {y.shape[0]}")
    if not sigma_floor > 0.0:
        raise ValueError("sigma_floor must be > 0")
    return max(abs(float(w @ y)) if w.size else 0.0, sigma_floor)


def propagate_sigma_matrix(weights: np.ndarray, factors: np.ndarray, sigma_floor: float) -> np.ndarray:
    """Vectorised variance routing: max(|W @ Y|, sigma_floor), shape (N, T)."""
    return np.maximum(np.abs(weights @ factors), sigma_floor)


def sample_factor_column(
    parent_weights: WeightLayer,
    parent_factors,
    rng: np.random.Generator,
    sigma_floor: float = 1e-6,
) -> np.ndarray:
    """Draw one instance's child factors given the layer above.

    Child entry j is N(0, sigma_j^2) with sigma_j routed through row j
    of the parent's effective weights.
    """
    y = np.asarray(parent_factors, dtype=float).ravel()
    W = parent_weights.weights
    if W.shape[1] != y.shape[0]:
        raise ValueError(f"parent weights have {W.shape[1]} columns but {y.shape[0]} factors given")
    sigma = np.maximum(np.abs(W @ y), sigma_floor) if W.shape[1] else np.full(W.shape[0], sigma_floor)
    return sigma * rng.standard_normal(W.shape[0])


def sample_weight_layer(
    n_rows: int,
    n_cols: int,
    alpha_ibp: float,
    ig_shape: float,
    ig_scale: float,
    rng: np.random.Generator,
) -> WeightLayer:
    """Draw a weight layer from the finite prior.

    Per column: p ~ Beta(alpha_ibp / n_cols, 1) via inverse CDF,
    sigma^2 ~ InverseGamma(ig_shape, ig_scale), mask entries
    Bernoulli(p), slab entries N(0, sigma^2).  The slab is drawn for
    every entry, masked or not; the effective weight is mask * slab.
    """
    if min(alpha_ibp, ig_shape, ig_scale) <= 0.0:
        raise ValueError("alpha_ibp, ig_shape and ig_scale must be strictly positive")
    if n_rows < 0 or n_cols < 0:
        raise ValueError("matrix dimensions must be >= 0")
    if n_cols == 0:
        empty = np.zeros((n_rows, 0))
        return WeightLayer(mask=empty.astype(np.int8), slab=empty,
                           p_col=np.zeros(0), sigma2_col=np.zeros(0))
    a = alpha_ibp / n_cols
    p_col = rng.random(n_cols) ** (1.0 / a)
    sigma2_col = 1.0 / rng.gamma(shape=ig_shape, scale=1.0 / ig_scale, size=n_cols)
    mask = (rng.random((n_rows, n_cols)) < p_col).astype(np.int8)
    slab = rng.standard_normal((n_rows, n_cols)) * np.sqrt(sigma2_col)
    return WeightLayer(mask=mask, slab=slab, p_col=p_col, sigma2_col=sigma2_col)


def generate_dataset(model: GenerativeModel, T: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Generate factor matrices for every layer plus the observations.

    The top layer's factors are i.i.d. N(0, sigma_top^2); each layer
    below draws instance columns independently with variance routed
    through the layer above.  Weights stay fixed across instances.

    Returns
    -------
    list of arrays, top layer first; the last entry is the observed
    (N, T) data matrix.
    """
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    hp = model.hyper
    k_top = model.layers[0].mask.shape[1]
    out = [hp.sigma_top * rng.standard_normal((k_top, T))]
    for layer in model.layers:
        sigma = propagate_sigma_matrix(layer.weights, out[-1], hp.sigma_floor)
        out.append(sigma * rng.standard_normal(sigma.shape))
    return out


@dataclass(frozen=True)
class ParentContext:
    """Fixed upper-layer weights and factors during one layer's inference.

    Defines the prior std of the current layer's factor rows: row j
    below the context's width gets max(|row j of weights @ factors|,
    sigma_floor); rows at or beyond the width (factors added after the
    context was frozen) fall back to sigma_top.
    """

    weights: np.ndarray
    factors: np.ndarray

    def __post_init__(self) -> None:
        W = np.asarray(self.weights, dtype=float)
        Y = as_factor_matrix(self.factors)
        if W.ndim != 2 or W.shape[1] != Y.shape[0]:
            raise ValueError(
                f"context weights {W.shape} do not chain with factors {Y.shape}"
            )
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "factors", Y)

    def sigma_rows(self, n_rows: int, sigma_top: float, sigma_floor: float) -> np.ndarray:
        """Prior stds for ``n_rows`` factor rows, shape (n_rows, T)."""
        T = self.factors.shape[1]
        covered = min(n_rows, self.weights.shape[0])
        out = np.full((n_rows, T), float(sigma_top))
        if covered:
            out[:covered] = propagate_sigma_matrix(self.weights[:covered], self.factors, sigma_floor)
        return out


def gaussian_loglik(X: np.ndarray, sigma) -> float:
    """Sum of centred normal log-densities with per-entry stds."""
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), X.shape)
    z = X / sigma
    return float(-0.5 * X.size * LOG_2PI - np.log(sigma).sum() - 0.5 * np.sum(z * z))


def slab_column_logmarginal(sq_sum: float, count: int, ig_shape: float, ig_scale: float) -> float:
    """Log-marginal of ``count`` slab values with squared sum ``sq_sum``.

    The Gaussian slab's variance is integrated against its
    InverseGamma(ig_shape, ig_scale) prior, leaving a multivariate
    Student-t mass:

    log m = a log b - lgamma(a) - (count/2) log(2 pi)
            + lgamma(a + count/2) - (a + count/2) log(b + sq_sum/2).

    Zero count gives exactly 0.
    """
    a, b = ig_shape, ig_scale
    return float(
        a * math.log(b)
        - gammaln(a)
        - 0.5 * count * LOG_2PI
        + gammaln(a + 0.5 * count)
        - (a + 0.5 * count) * math.log(b + 0.5 * sq_sum)
    )


def log_poisson_k(k: int, rate: float) -> float:
    """Poisson log-pmf used as the prior over the number of factors."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return float(k * math.log(rate) - rate - gammaln(k + 1.0))


def spike_slab_predictive(m_minus: int, N: int, alpha_over_K: float) -> tuple[float, float]:
    """Prior-predictive split for one mask entry given the column's others.

    With m_minus active entries among the other N - 1 rows and
    a = alpha_over_K, integrating the column's Beta(a, 1) inclusion
    probability against those entries gives

    P(spike) = (N - m_minus) / (N + a),
    P(slab)  = (m_minus + a) / (N + a).

    Returns (P(spike), P(slab)); the two sum to 1.
    """
    if not 0 <= m_minus <= N - 1:
        raise ValueError(f"m_minus must be in [0, {N - 1}], got {m_minus}")
    if alpha_over_K <= 0.0:
        raise ValueError("alpha_over_K must be > 0")
    a = alpha_over_K
    return (N - m_minus) / (N + a), (m_minus + a) / (N + a)


def slab_predictive_params(
    m_minus: int, sq_sum_minus: float, ig_shape: float, ig_scale: float
) -> tuple[float, float]:
    """Student-t parameters for a slab value given the column's other slabs.

    Integrating the shared column variance sigma^2 ~ InverseGamma
    against m_minus observed slab values with squared sum sq_sum_minus
    leaves w ~ t_df(0, scale) with

    df = 2 (ig_shape + m_minus / 2),
    scale = sqrt((ig_scale + sq_sum_minus / 2) / (ig_shape + m_minus / 2)).

    Returns (df, scale).
    """
    a = ig_shape + 0.5 * m_minus
    b = ig_scale + 0.5 * sq_sum_minus
    return 2.0 * a, math.sqrt(b / a)


def student_t_logpdf(w: float, df: float, scale: float) -> float:
    """Log-density of a centred Student-t with the given df and scale."""
    z = w / scale
    return float(
        gammaln(0.5 * (df + 1.0))
        - gammaln(0.5 * df)
        - 0.5 * math.log(df * math.pi)
        - math.log(scale)
        - 0.5 * (df + 1.0) * math.log1p(z * z / df)
    )


def sample_student_t(df: float, scale: float, rng: np.random.Generator, size=None):
    """Draw from the centred Student-t with the given df and scale."""
    return scale * rng.standard_t(df, size=size)


@dataclass(frozen=True)
class JointTerms:
    """Additive decomposition of one layer's log-joint."""

    log_lik: float
    log_y_prior: float
    log_mask_prior: float
    log_slab_prior: float
    log_k_prior: float

    @property
    def log_weight_prior(self) -> float:
        return self.log_mask_prior + self.log_slab_prior

    @property
    def total(self) -> float:
        return (
            self.log_lik
            + self.log_y_prior
            + self.log_mask_prior
            + self.log_slab_prior
            + self.log_k_prior
        )


def log_joint_terms(X: FactorMatrix, state, hyper) -> JointTerms:
    """Evaluate the four components of the single-layer log-joint.

    ``state`` needs attributes ``weights`` (a WeightLayer), ``Y`` and
    optionally ``parent_context``; a ChainState qualifies.  ``hyper``
    may be a HyperParams (its bottom layer is used) or a LayerHyper.

    The weight prior marginalizes both the per-column inclusion
    probabilities (Beta-Bernoulli mask marginal) and the per-column
    slab variances (Student-t mass over the active slab values); the
    factor count follows Poisson(alpha' H_N).
    """
    lh = hyper.layer(0) if isinstance(hyper, HyperParams) else hyper
    X = as_factor_matrix(X)
    layer = state.weights
    Y = as_factor_matrix(state.Y) if layer.mask.shape[1] else np.zeros((0, X.shape[1]))
    N, K = layer.mask.shape
    if N != X.shape[0] or Y.shape != (K, X.shape[1]):
        raise ValueError("state shapes do not match the data matrix")

    sigma_x = propagate_sigma_matrix(layer.weights, Y, lh.sigma_floor)
    log_lik = gaussian_loglik(X, sigma_x)

    parent = getattr(state, "parent_context", None)
    if parent is None:
        sigma_y = np.full((K, X.shape[1]), lh.sigma_top)
    else:
        sigma_y = parent.sigma_rows(K, lh.sigma_top, lh.sigma_floor)
    log_y_prior = gaussian_loglik(Y, sigma_y) if K else 0.0

    log_mask_prior = logprob_mask_marginal(layer.mask, lh.alpha_ibp)
    active = layer.mask.astype(bool)
    m = layer.column_counts
    sq = np.where(active, layer.slab, 0.0) ** 2
    log_slab_prior = sum(
        slab_column_logmarginal(float(sq[:, k].sum()), int(m[k]), lh.ig_shape, lh.ig_scale)
        for k in range(K)
    )
    rate = lh.alpha_ibp * harmonic_number(N)
    return JointTerms(
        log_lik=log_lik,
        log_y_prior=float(log_y_prior),
        log_mask_prior=log_mask_prior,
        log_slab_prior=float(log_slab_prior),
        log_k_prior=log_poisson_k(K, rate),
    )


def log_joint(X: FactorMatrix, state, hyper) -> float:
    """Total single-layer log-joint; see ``log_joint_terms``."""
    return log_joint_terms(X, state, hyper).total
