"""Trans-dimensional MH/Gibbs engine for one layer, plus the layerwise driver.

Each iteration makes one pass of dimension moves (propose adding an
empty factor or deleting an unlinked one), then sweeps every weight
entry and every factor entry with MH-within-Gibbs kernels.  All
acceptance arithmetic happens in log space; the interior ratios of the
dimension moves are exact differences of the marginalized prior terms,
so the add and delete ratios for a matched pair of states are exact
reciprocals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import model
from .ibp import harmonic_number
from .model import LayerHyper, ParentContext, WeightLayer

__all__ = [
    "ChainState",
    "ChainTrace",
    "InferenceConfig",
    "MoveStats",
    "accept_prob_add",
    "accept_prob_delete",
    "gibbs_sweep",
    "gibbs_update_factor",
    "gibbs_update_weight",
    "log_ratio_add",
    "log_ratio_delete",
    "prune_empty_factors",
    "resample_data",
    "run_mh_layer",
    "run_layerwise",
]


@dataclass
class MoveStats:
    """Proposal/acceptance counters per move kind."""

    add_proposed: int = 0
    add_accepted: int = 0
    delete_proposed: int = 0
    delete_accepted: int = 0
    weight_proposed: int = 0
    weight_accepted: int = 0
    factor_proposed: int = 0
    factor_accepted: int = 0

    def check(self) -> None:
        for kind in ("add", "delete", "weight", "factor"):
            if getattr(self, f"{kind}_accepted") > getattr(self, f"{kind}_proposed"):
                raise AssertionError(f"{kind}: accepted exceeds proposed")


@dataclass(frozen=True)
class InferenceConfig:
    """Knobs for one chain.

    ``init_k`` is either a fixed integer or an inclusive (lo, hi) pair
    drawn uniformly at chain start.  ``gibbs_step_scale`` multiplies
    the natural scale of each random-walk proposal.  ``k0_bootstrap``
    replaces the reverse-proposal factor K+/K when no factor is linked,
    letting the chain leave the empty state.
    """

    iterations: int = 200
    init_k: int | tuple[int, int] = 2
    seed: int | None = 0
    gibbs_step_scale: float = 0.5
    layerwise_outer_loops: int = 5
    convergence_tol: float = 1.0
    k0_bootstrap: float = 1.0

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.gibbs_step_scale <= 0.0:
            raise ValueError("gibbs_step_scale must be > 0")
        if self.layerwise_outer_loops < 1:
            raise ValueError("layerwise_outer_loops must be >= 1")
        if self.k0_bootstrap <= 0.0:
            raise ValueError("k0_bootstrap must be > 0")
        if isinstance(self.init_k, int):
            if self.init_k < 0:
                raise ValueError("init_k must be >= 0")
        else:
            lo, hi = self.init_k
            if not 0 <= lo <= hi:
                raise ValueError(f"bad init_k range ({lo}, {hi})")

    def draw_init_k(self, rng: np.random.Generator) -> int:
        if isinstance(self.init_k, int):
            return self.init_k
        lo, hi = self.init_k
        return int(rng.integers(lo, hi + 1))


@dataclass
class ChainTrace:
    """Per-iteration chain record."""

    k: np.ndarray
    log_joint: np.ndarray
    accepted_adds: np.ndarray
    accepted_deletes: np.ndarray

    def __len__(self) -> int:
        return len(self.k)

    @staticmethod
    def concatenate(traces: list["ChainTrace"]) -> "ChainTrace":
        return ChainTrace(
            k=np.concatenate([t.k for t in traces]) if traces else np.zeros(0, dtype=np.int64),
            log_joint=np.concatenate([t.log_joint for t in traces]) if traces else np.zeros(0),
            accepted_adds=np.concatenate([t.accepted_adds for t in traces]) if traces else np.zeros(0, dtype=np.int64),
            accepted_deletes=np.concatenate([t.accepted_deletes for t in traces]) if traces else np.zeros(0, dtype=np.int64),
        )


@dataclass
class ChainState:
    """Sampler state for one layer: data, factors, mask/slab, caches.

    The slab is kept exactly zero wherever the mask is zero, so the
    effective weight matrix equals ``mask * slab`` equals ``slab``.
    ``S`` caches effective-weights @ Y and ``m`` the per-column link
    counts; ``log_joint_cached`` is refreshed after every full sweep.
    """

    X: np.ndarray
    Y: np.ndarray
    mask: np.ndarray
    slab: np.ndarray
    layer_hyper: LayerHyper
    parent_context: ParentContext | None = None
    stats: MoveStats = field(default_factory=MoveStats)
    k0_bootstrap: float = 1.0
    m: np.ndarray = field(init=False)
    S: np.ndarray = field(init=False)
    sigma_y: np.ndarray = field(init=False)
    log_joint_cached: float = field(init=False)

    def __post_init__(self) -> None:
        self.X = model.as_factor_matrix(self.X)
        self.Y = np.asarray(self.Y, dtype=float)
        self.mask = np.ascontiguousarray(self.mask, dtype=np.int8)
        self.slab = np.where(self.mask == 1, np.asarray(self.slab, dtype=float), 0.0)
        if self.Y.shape != (self.mask.shape[1], self.X.shape[1]):
            raise ValueError("Y shape does not chain mask columns to data instances")
        if self.mask.shape[0] != self.X.shape[0]:
            raise ValueError("mask rows must match data rows")
        self.refresh()

    # -- dimensions ----------------------------------------------------
    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def T(self) -> int:
        return self.X.shape[1]

    @property
    def K(self) -> int:
        return self.mask.shape[1]

    @property
    def K_plus(self) -> int:
        return int(np.count_nonzero(self.m))

    @property
    def weights(self) -> WeightLayer:
        return WeightLayer(mask=self.mask, slab=self.slab)

    # -- caches --------------------------------------------------------
    def _prior_sigma_rows(self, n_rows: int) -> np.ndarray:
        lh = self.layer_hyper
        if self.parent_context is None:
            return np.full((n_rows, self.T), lh.sigma_top)
        return self.parent_context.sigma_rows(n_rows, lh.sigma_top, lh.sigma_floor)

    def refresh(self) -> None:
        """Recompute every cache from the primary arrays."""
        self.m = self.mask.sum(axis=0, dtype=np.int64)
        self.S = (self.mask * self.slab) @ self.Y
        self.sigma_y = self._prior_sigma_rows(self.K)
        self.log_joint_cached = model.log_joint(self.X, self, self.layer_hyper)

    def check_consistency(self, atol: float = 1e-8) -> None:
        """Assert the caches match a fresh recomputation."""
        np.testing.assert_array_equal(self.m, self.mask.sum(axis=0, dtype=np.int64))
        np.testing.assert_allclose(self.S, (self.mask * self.slab) @ self.Y, atol=1e-10)
        if np.any((self.mask == 0) & (self.slab != 0.0)):
            raise AssertionError("slab must be zero wherever the mask is zero")
        fresh = model.log_joint(self.X, self, self.layer_hyper)
        if abs(fresh - self.log_joint_cached) > atol:
            raise AssertionError(
                f"cached log-joint {self.log_joint_cached} != fresh {fresh}"
            )
        self.stats.check()

    # -- construction ----------------------------------------------------
    @classmethod
    def from_prior(
        cls,
        X: np.ndarray,
        cfg: InferenceConfig,
        hyper: LayerHyper,
        parent_context: ParentContext | None,
        rng: np.random.Generator,
    ) -> "ChainState":
        """Initialise mask/slab from the finite prior and factors from theirs.

        Each initial column is conditioned on having at least one link
        (empty columns are redrawn), so a chain initialised at K really
        starts with K active factors; columns are independent under the
        finite prior, so this is the conditioned prior law.
        """
        X = model.as_factor_matrix(X)
        k0 = cfg.draw_init_k(rng)
        layer = model.sample_weight_layer(
            X.shape[0], k0, hyper.alpha_ibp, hyper.ig_shape, hyper.ig_scale, rng
        )
        mask, slab = layer.mask.copy(), layer.slab.copy()
        N = X.shape[0]
        if N > 0 and k0 > 0:
            a = hyper.alpha_ibp / k0
            while True:
                empty = np.flatnonzero(mask.sum(axis=0) == 0)
                if empty.size == 0:
                    break
                p = rng.random(empty.size) ** (1.0 / a)
                s2 = 1.0 / rng.gamma(hyper.ig_shape, 1.0 / hyper.ig_scale, empty.size)
                mask[:, empty] = (rng.random((N, empty.size)) < p).astype(np.int8)
                slab[:, empty] = rng.standard_normal((N, empty.size)) * np.sqrt(s2)
        state = cls(
            X=X,
            Y=np.zeros((k0, X.shape[1])),
            mask=mask,
            slab=slab * mask,
            layer_hyper=hyper,
            parent_context=parent_context,
        )
        state.Y = state.sigma_y * rng.standard_normal((k0, X.shape[1]))
        state.refresh()
        return state

    def rebind(self, X: np.ndarray, parent_context: ParentContext | None) -> None:
        """Point the chain at new data / a new upper-layer context."""
        X = model.as_factor_matrix(X)
        if X.shape[0] != self.mask.shape[0] or X.shape[1] != self.T:
            raise ValueError(f"cannot rebind: data shape {X.shape} does not fit the chain")
        self.X = X
        self.parent_context = parent_context
        self.refresh()


# -- dimension moves ----------------------------------------------------

def _mask_marginal_from_counts(m: np.ndarray, N: int, alpha: float) -> float:
    """Mask marginal evaluated from column counts alone."""
    K = len(m)
    if K == 0:
        return 0.0
    a = alpha / K
    return float(
        np.sum(np.log(a) + gammaln(m + a) + gammaln(N - m + 1.0) - gammaln(N + 1.0 + a))
    )


def _log_ratio_from_small(
    m_small: np.ndarray, k_plus_small: int, N: int, hyper: LayerHyper, bootstrap: float
) -> float:
    """Interior log-ratio of the add move evaluated on the smaller state.

    Three exact pieces: the proposal structure factor
    log[(1/(K+1)) / (K+/K)], the mask-marginal difference for appending
    an all-zero column (every column re-priced at alpha/(K+1)), and the
    Poisson factor-count ratio log[rate/(K+1)].  The new factor's value
    terms cancel between proposal and target and never appear.  When no
    factor is linked (K+ = 0, which includes K = 0) the reverse factor
    K+/K is replaced by ``bootstrap``.
    """
    K = len(m_small)
    if k_plus_small == 0:
        structure = -math.log(K + 1.0) - math.log(bootstrap)
    else:
        structure = -math.log(K + 1.0) - math.log(k_plus_small / K)
    m_large = np.append(m_small, 0)
    delta_mask = _mask_marginal_from_counts(m_large, N, hyper.alpha_ibp) - _mask_marginal_from_counts(
        m_small, N, hyper.alpha_ibp
    )
    rate = hyper.alpha_ibp * harmonic_number(N)
    delta_k = math.log(rate) - math.log(K + 1.0)
    return structure + delta_mask + delta_k


def log_ratio_add(state: ChainState, hyper: LayerHyper) -> float:
    """Unclamped interior log-ratio for adding one empty factor."""
    return _log_ratio_from_small(
        state.m, state.K_plus, state.N, hyper, state.k0_bootstrap
    )


def log_ratio_delete(state: ChainState, k: int, hyper: LayerHyper) -> float:
    """Unclamped interior log-ratio for deleting unlinked factor ``k``.

    Exactly the negation of the add ratio evaluated on the state with
    column k removed, so matched add/delete ratios are reciprocal.
    """
    if not 0 <= k < state.K:
        raise IndexError(f"factor index {k} out of range")
    if state.m[k] != 0:
        raise ValueError(f"factor {k} has {state.m[k]} links; only unlinked factors can be deleted")
    m_small = np.delete(state.m, k)
    return -_log_ratio_from_small(
        m_small, int(np.count_nonzero(m_small)), state.N, hyper, state.k0_bootstrap
    )


def accept_prob_add(state: ChainState, hyper: LayerHyper) -> float:
    """Min-clamped acceptance probability of the add move."""
    log_r = log_ratio_add(state, hyper)
    return 1.0 if log_r >= 0.0 else math.exp(log_r)


def accept_prob_delete(state: ChainState, k: int, hyper: LayerHyper) -> float:
    """Min-clamped acceptance probability of deleting unlinked factor ``k``."""
    log_r = log_ratio_delete(state, k, hyper)
    return 1.0 if log_r >= 0.0 else math.exp(log_r)


def _apply_add(state: ChainState, rng: np.random.Generator) -> None:
    """Append an empty factor: zero mask/slab column, prior-drawn Y row."""
    sigma_new = state._prior_sigma_rows(state.K + 1)[-1]
    y_new = sigma_new * rng.standard_normal(state.T)
    state.mask = np.hstack([state.mask, np.zeros((state.N, 1), dtype=np.int8)])
    state.slab = np.hstack([state.slab, np.zeros((state.N, 1))])
    state.Y = np.vstack([state.Y, y_new])
    state.m = np.append(state.m, 0)
    state.sigma_y = np.vstack([state.sigma_y, sigma_new])
    # S unchanged: the new column's effective weights are all zero.


def _apply_delete(state: ChainState, k: int) -> None:
    """Remove unlinked factor k; the likelihood is untouched exactly."""
    state.mask = np.delete(state.mask, k, axis=1)
    state.slab = np.delete(state.slab, k, axis=1)
    state.Y = np.delete(state.Y, k, axis=0)
    state.m = np.delete(state.m, k)
    state.sigma_y = np.delete(state.sigma_y, k, axis=0)


def prune_empty_factors(state: ChainState) -> ChainState:
    """Drop every unlinked factor and refresh the caches.

    Removing an all-zero mask column leaves the data likelihood exactly
    unchanged; only the prior terms move.  Returns the same object.
    """
    for k in reversed(np.flatnonzero(state.m == 0)):
        _apply_delete(state, int(k))
    state.refresh()
    return state


def _dimension_move(
    state: ChainState,
    i: int,
    hyper: LayerHyper,
    cfg: InferenceConfig,
    rng: np.random.Generator,
    cursor: int,
) -> int:
    """One dimension move for data row ``i``; returns the column cursor.

    With no factors at all the only option is an add.  Otherwise the
    cursor cycles the columns in order: a column still linked by other
    rows prompts an add proposal, an unlinked column prompts its own
    deletion, and a column linked only by row i prompts nothing.
    """
    if state.K == 0:
        propose_delete = None
    else:
        k = cursor % state.K
        cursor += 1
        if state.m[k] - state.mask[i, k] > 0:
            propose_delete = None
        elif state.m[k] == 0:
            propose_delete = k
        else:
            return cursor

    if propose_delete is None:
        state.stats.add_proposed += 1
        if rng.random() < accept_prob_add(state, hyper):
            _apply_add(state, rng)
            state.stats.add_accepted += 1
    else:
        state.stats.delete_proposed += 1
        if rng.random() < accept_prob_delete(state, propose_delete, hyper):
            _apply_delete(state, propose_delete)
            state.stats.delete_accepted += 1
    return cursor


# -- weight kernel ------------------------------------------------------

def _row_loglik(x_row: np.ndarray, s_row: np.ndarray, floor: float) -> float:
    sigma = np.maximum(np.abs(s_row), floor)
    z = x_row / sigma
    return float(-0.5 * x_row.size * model.LOG_2PI - np.log(sigma).sum() - 0.5 * (z * z).sum())


# Slab-value proposal for the spike<->slab toggle: a mixture of the
# predictive t and a histogram built on the entry's conditional.  The
# histogram puts proposal mass where the data wants the weight; the t
# component keeps the mixture density positive on the whole line so the
# reverse move is always priced.
_TOGGLE_CELLS = 21
_TOGGLE_SPAN = 7.0
_TOGGLE_T_WEIGHT = 0.1


def _toggle_grid(
    x_row: np.ndarray,
    base_row: np.ndarray,
    y_row: np.ndarray,
    floor: float,
    df: float,
    t_scale: float,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Cell centres and log-masses of the informed proposal component.

    Discretises the slab conditional (predictive t times row likelihood)
    into _TOGGLE_CELLS uniform cells on [-span, span] predictive scales,
    weighting each cell by the conditional at its centre.  Returns
    (centres, normalised log-masses, cell width).
    """
    half = _TOGGLE_SPAN * t_scale
    h = 2.0 * half / _TOGGLE_CELLS
    centers = -half + h * (np.arange(_TOGGLE_CELLS) + 0.5)
    sigma = np.maximum(np.abs(base_row[None, :] + centers[:, None] * y_row[None, :]), floor)
    z = x_row[None, :] / sigma
    log_lik = -np.log(sigma).sum(axis=1) - 0.5 * (z * z).sum(axis=1)
    zc = centers / t_scale
    log_mass = log_lik - 0.5 * (df + 1.0) * np.log1p(zc * zc / df)
    log_mass -= log_mass.max()
    log_mass -= math.log(float(np.exp(log_mass).sum()))
    return centers, log_mass, h


def _toggle_draw(
    centers: np.ndarray,
    log_mass: np.ndarray,
    h: float,
    df: float,
    t_scale: float,
    rng: np.random.Generator,
) -> float:
    """Draw a slab value from the toggle's mixture proposal."""
    if rng.random() < _TOGGLE_T_WEIGHT:
        return float(model.sample_student_t(df, t_scale, rng))
    probs = np.exp(log_mass)
    g = int(rng.choice(len(centers), p=probs / probs.sum()))
    return float(centers[g] + (rng.random() - 0.5) * h)


def _toggle_logq(
    w: float,
    centers: np.ndarray,
    log_mass: np.ndarray,
    h: float,
    df: float,
    t_scale: float,
) -> float:
    """Log-density of the toggle's mixture proposal at w."""
    q = _TOGGLE_T_WEIGHT * math.exp(model.student_t_logpdf(w, df, t_scale))
    half = _TOGGLE_SPAN * t_scale
    if -half <= w < half:
        g = min(int((w + half) / h), len(centers) - 1)
        q += (1.0 - _TOGGLE_T_WEIGHT) * math.exp(float(log_mass[g])) / h
    return math.log(q)


def gibbs_update_weight(
    state: ChainState,
    n: int,
    k: int,
    hyper: LayerHyper,
    rng: np.random.Generator,
    step_scale: float = 0.5,
) -> float:
    """Resample weight (n, k) from its full conditional by MH-within-Gibbs.

    The conditional is the data likelihood of row n times the entry's
    prior predictive given the rest of its column: a spike/slab split
    from the integrated inclusion probability, and a Student-t slab law
    from the integrated column variance.  Two proposals are made: a
    spike<->slab toggle whose slab values come from a likelihood-informed
    mixture (see _toggle_grid) priced by the exact density ratio, and,
    if the entry is active, a random-walk move on the value.  Returns
    the entry's new effective value.
    """
    lh = hyper
    m_minus = int(state.m[k]) - int(state.mask[n, k])
    a = lh.alpha_ibp / state.K
    spike_p, slab_p = model.spike_slab_predictive(m_minus, state.N, a)
    col_active = state.mask[:, k].astype(bool)
    sq_col = float(np.sum(state.slab[col_active, k] ** 2))
    w_cur = float(state.slab[n, k])
    sq_minus = sq_col - (w_cur * w_cur if state.mask[n, k] else 0.0)
    df, t_scale = model.slab_predictive_params(m_minus, sq_minus, lh.ig_shape, lh.ig_scale)

    x_row = state.X[n]
    y_row = state.Y[k]
    s_row = state.S[n]
    base_row = s_row - w_cur * y_row
    floor = lh.sigma_floor

    def loglik(w: float) -> float:
        return _row_loglik(x_row, base_row + w * y_row, floor)

    # Toggle proposal between spike and slab.
    centers, log_mass, cell_h = _toggle_grid(x_row, base_row, y_row, floor, df, t_scale)
    state.stats.weight_proposed += 1
    if state.mask[n, k] == 0:
        w_star = _toggle_draw(centers, log_mass, cell_h, df, t_scale, rng)
        log_r = (
            math.log(slab_p)
            - math.log(spike_p)
            + model.student_t_logpdf(w_star, df, t_scale)
            - _toggle_logq(w_star, centers, log_mass, cell_h, df, t_scale)
            + loglik(w_star)
            - loglik(0.0)
        )
        if math.log(rng.random()) < log_r:
            state.mask[n, k] = 1
            state.slab[n, k] = w_star
            state.m[k] += 1
            state.S[n] = base_row + w_star * y_row
            state.stats.weight_accepted += 1
    else:
        log_r = (
            math.log(spike_p)
            - math.log(slab_p)
            + _toggle_logq(w_cur, centers, log_mass, cell_h, df, t_scale)
            - model.student_t_logpdf(w_cur, df, t_scale)
            + loglik(0.0)
            - loglik(w_cur)
        )
        if math.log(rng.random()) < log_r:
            state.mask[n, k] = 0
            state.slab[n, k] = 0.0
            state.m[k] -= 1
            state.S[n] = base_row
            state.stats.weight_accepted += 1

    # Random walk on the active value.
    if state.mask[n, k] == 1:
        w = float(state.slab[n, k])
        state.stats.weight_proposed += 1
        w_star = w + step_scale * t_scale * rng.standard_normal()
        if w_star != 0.0:
            log_r = (
                model.student_t_logpdf(w_star, df, t_scale)
                - model.student_t_logpdf(w, df, t_scale)
                + loglik(w_star)
                - loglik(w)
            )
            if math.log(rng.random()) < log_r:
                state.slab[n, k] = w_star
                state.S[n] = base_row + w_star * y_row
                state.stats.weight_accepted += 1

    return float(state.mask[n, k] * state.slab[n, k])


# -- factor kernel ------------------------------------------------------

# Random-walk sub-steps per factor-entry visit.  Each sub-step is a
# valid move on the same conditional; chaining a few lets the factors
# keep pace with the weight updates between sweeps.  Every visit also
# opens with one independence sub-step drawn from the entry's prior:
# the conditional can be multimodal (the likelihood depends on the
# factor through |s|, so sign-flipped configurations carry mass), and
# a local walk alone crosses between such modes too rarely.
_FACTOR_SUBSTEPS = 4


def _factor_row_update(
    state: ChainState,
    k: int,
    ts: np.ndarray,
    hyper: LayerHyper,
    rng: np.random.Generator,
    step_scale: float,
) -> None:
    """MH update of Y[k, ts] for the chosen instances, vectorised.

    Instances are conditionally independent given the weights and the
    other factor rows, so proposing them jointly and accepting each
    instance separately composes the same kernel as an instance-by-
    instance sweep.  Each visit chains _FACTOR_SUBSTEPS random-walk
    moves.  A factor with no linked dimensions has the prior as its
    exact conditional and is redrawn from it directly.
    """
    lh = hyper
    rows = np.flatnonzero(state.mask[:, k])
    sig_prior = state.sigma_y[k, ts]
    y_cur = state.Y[k, ts]
    if len(rows) == 0:
        state.stats.factor_proposed += len(ts)
        state.Y[k, ts] = sig_prior * rng.standard_normal(len(ts))
        state.stats.factor_accepted += len(ts)
        return

    w_col = state.slab[rows, k]
    x_sub = state.X[np.ix_(rows, ts)]
    s_sub = state.S[np.ix_(rows, ts)]
    base = s_sub - np.outer(w_col, y_cur)
    floor = lh.sigma_floor

    def col_loglik(y_vals: np.ndarray) -> np.ndarray:
        sigma = np.maximum(np.abs(base + np.outer(w_col, y_vals)), floor)
        z = x_sub / sigma
        return -(0.5 * model.LOG_2PI) * len(rows) - np.log(sigma).sum(axis=0) - 0.5 * (z * z).sum(axis=0)

    cur_ll = col_loglik(y_cur)
    state.stats.factor_proposed += (1 + _FACTOR_SUBSTEPS) * len(ts)

    # Independence sub-step from the prior: the prior density cancels
    # against the proposal, leaving the likelihood ratio.
    y_star = sig_prior * rng.standard_normal(len(ts))
    star_ll = col_loglik(y_star)
    accept = np.log(rng.random(len(ts))) < star_ll - cur_ll
    y_cur = np.where(accept, y_star, y_cur)
    cur_ll = np.where(accept, star_ll, cur_ll)
    state.stats.factor_accepted += int(accept.sum())

    for _ in range(_FACTOR_SUBSTEPS):
        y_star = y_cur + step_scale * sig_prior * rng.standard_normal(len(ts))
        star_ll = col_loglik(y_star)
        log_r = (
            star_ll
            - cur_ll
            - 0.5 * (y_star / sig_prior) ** 2
            + 0.5 * (y_cur / sig_prior) ** 2
        )
        accept = np.log(rng.random(len(ts))) < log_r
        y_cur = np.where(accept, y_star, y_cur)
        cur_ll = np.where(accept, star_ll, cur_ll)
        state.stats.factor_accepted += int(accept.sum())

    state.Y[k, ts] = y_cur
    state.S[np.ix_(rows, ts)] = base + np.outer(w_col, y_cur)


def gibbs_update_factor(
    state: ChainState,
    k: int,
    t: int,
    hyper: LayerHyper,
    rng: np.random.Generator,
    step_scale: float = 0.5,
) -> float:
    """Resample factor entry (k, t) from its full conditional.

    The target is the instance-t likelihood of the linked dimensions
    times the entry's N(0, sigma_y^2) prior; random-walk proposals at
    ``step_scale`` times the prior std are accepted by the exact ratio.
    Returns the entry's new value.
    """
    if not (0 <= k < state.K and 0 <= t < state.T):
        raise IndexError(f"factor entry ({k}, {t}) out of range")
    _factor_row_update(state, k, np.array([t]), hyper, rng, step_scale)
    return float(state.Y[k, t])


# -- sweeps and drivers --------------------------------------------------

def gibbs_sweep(
    state: ChainState,
    hyper: LayerHyper,
    rng: np.random.Generator,
    step_scale: float = 0.5,
) -> None:
    """One fixed-dimension sweep: all weights row-major, then all factors."""
    for n in range(state.N):
        for k in range(state.K):
            gibbs_update_weight(state, n, k, hyper, rng, step_scale)
    all_ts = np.arange(state.T)
    for k in range(state.K):
        _factor_row_update(state, k, all_ts, hyper, rng, step_scale)
    state.refresh()


def resample_data(state: ChainState, rng: np.random.Generator) -> None:
    """Redraw the data matrix from the current weights and factors."""
    sigma = np.maximum(np.abs(state.S), state.layer_hyper.sigma_floor)
    state.X = sigma * rng.standard_normal(state.X.shape)
    state.log_joint_cached = model.log_joint(state.X, state, state.layer_hyper)


def run_mh_layer(
    X: np.ndarray,
    cfg: InferenceConfig,
    hyper: LayerHyper,
    parent_context: ParentContext | None = None,
    rng: np.random.Generator | None = None,
    initial_state: ChainState | None = None,
) -> tuple[ChainState, ChainTrace, MoveStats]:
    """Run one layer's chain: dimension moves, weight sweep, factor sweep.

    Per iteration, each data row proposes one dimension move against
    the cycling column cursor, then every weight and factor entry is
    resampled.  The trace records K, the refreshed log-joint and the
    per-iteration accepted add/delete counts.
    """
    X = model.as_factor_matrix(X)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    state = initial_state
    if state is None:
        state = ChainState.from_prior(X, cfg, hyper, parent_context, rng)
    state.k0_bootstrap = cfg.k0_bootstrap
    cursor = 0
    ks = np.zeros(cfg.iterations, dtype=np.int64)
    ljs = np.zeros(cfg.iterations)
    adds = np.zeros(cfg.iterations, dtype=np.int64)
    dels = np.zeros(cfg.iterations, dtype=np.int64)
    for r in range(cfg.iterations):
        a0, d0 = state.stats.add_accepted, state.stats.delete_accepted
        for i in range(state.N):
            cursor = _dimension_move(state, i, hyper, cfg, rng, cursor)
        for n in range(state.N):
            for k in range(state.K):
                gibbs_update_weight(state, n, k, hyper, rng, cfg.gibbs_step_scale)
        all_ts = np.arange(state.T)
        for k in range(state.K):
            _factor_row_update(state, k, all_ts, hyper, rng, cfg.gibbs_step_scale)
        state.refresh()
        ks[r] = state.K
        ljs[r] = state.log_joint_cached
        adds[r] = state.stats.add_accepted - a0
        dels[r] = state.stats.delete_accepted - d0
    trace = ChainTrace(k=ks, log_joint=ljs, accepted_adds=adds, accepted_deletes=dels)
    return state, trace, state.stats


def _layerwise_total(states: list[ChainState], X: np.ndarray, hyper: model.HyperParams) -> float:
    """Joint log-probability of the whole stack without double counting.

    Each layer's likelihood term prices the factors below it, so the
    per-layer factor-prior terms are dropped except at the very top.
    """
    total = 0.0
    data = X
    for ell, st in enumerate(states):
        terms = model.log_joint_terms(data, st, hyper.layer(ell))
        total += terms.log_lik + terms.log_mask_prior + terms.log_slab_prior + terms.log_k_prior
        if ell == len(states) - 1:
            total += terms.log_y_prior
        data = st.Y
    return total


def run_layerwise(
    X: np.ndarray,
    depth: int,
    cfg: InferenceConfig,
    hyper: model.HyperParams,
    trace_sink=None,
) -> list[ChainState]:
    """Greedy bottom-up inference over ``depth`` stacked layers.

    Runs the single-layer chain on the data, then on the inferred
    factors, and so on; repeats the whole pass up to
    ``cfg.layerwise_outer_loops`` times, re-inferring each layer under
    the latest upper-layer context, until the stack's total log-joint
    improves by less than ``cfg.convergence_tol``.  With depth 1 this
    is exactly one run_mh_layer call.

    ``trace_sink(outer, layer, trace)``, when given, receives every
    per-chain trace.

    Returns one ChainState per layer, bottom first.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    X = model.as_factor_matrix(X)
    if depth == 1:
        state, trace, _ = run_mh_layer(X, cfg, hyper.layer(0), None, rng=np.random.default_rng(cfg.seed))
        if trace_sink is not None:
            trace_sink(0, 0, trace)
        return [state]
    if hyper.num_layers < depth:
        widths = hyper.layer_widths + (hyper.layer_widths[-1],) * (depth - hyper.num_layers)
        alphas = hyper.alpha_ibp_per_layer + (hyper.alpha_ibp_per_layer[-1],) * (depth - hyper.num_layers)
        shapes = hyper.ig_shape_per_layer + (hyper.ig_shape_per_layer[-1],) * (depth - hyper.num_layers)
        scales = hyper.ig_scale_per_layer + (hyper.ig_scale_per_layer[-1],) * (depth - hyper.num_layers)
        hyper = model.HyperParams(
            alpha_ibp_per_layer=alphas,
            ig_shape_per_layer=shapes,
            ig_scale_per_layer=scales,
            sigma_top=hyper.sigma_top,
            sigma_floor=hyper.sigma_floor,
            layer_widths=widths,
        )
    states: list[ChainState | None] = [None] * depth
    base = cfg.seed if cfg.seed is not None else 0
    prev_total = -math.inf
    for outer in range(cfg.layerwise_outer_loops):
        for ell in range(depth):
            data = X if ell == 0 else states[ell - 1].Y
            parent = None
            if ell + 1 < depth and states[ell + 1] is not None:
                up = states[ell + 1]
                parent = ParentContext(weights=up.mask * up.slab, factors=up.Y)
            rng = np.random.default_rng(np.random.SeedSequence([base, outer, ell]))
            warm = states[ell]
            if warm is not None and warm.X.shape[0] == data.shape[0]:
                warm.rebind(data, parent)
            else:
                warm = None
            state, trace, _ = run_mh_layer(
                data, cfg, hyper.layer(ell), parent, rng=rng, initial_state=warm
            )
            states[ell] = state
            if trace_sink is not None:
                trace_sink(outer, ell, trace)
        total = _layerwise_total(states, X, hyper)
        if outer > 0 and total - prev_total < cfg.convergence_tol:
            break
        prev_total = total
    # Lower layers were fit against upper-layer snapshots that the later
    # chains then moved; re-anchor each context (with factors detached
    # from the live upper state) so every returned state is self-consistent.
    for ell in range(depth - 1):
        up = states[ell + 1]
        parent = ParentContext(weights=up.mask * up.slab, factors=up.Y.copy())
        states[ell].rebind(states[ell].X, parent)
    return states
