"""Brute-force enumeration and quadrature counterparts of the closed forms.

Everything here trades speed for independence: these routines avoid the
package's conjugacy shortcuts so they can arbitrate whether those
shortcuts are right.  They back the test suite and the ``validate``
CLI subcommand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import ibp, model

__all__ = [
    "Grid1D",
    "ValidationCheck",
    "ValidationReport",
    "dish_count_mean_z",
    "enumerate_masks",
    "factor_kernel_tv",
    "freq_standard_error",
    "frozen_kernel_state",
    "geweke_moment_zs",
    "grid_integrate",
    "ibp_sampler_max_z",
    "lof_class_probabilities",
    "marginal_weight_quadrature",
    "mc_lof_histogram",
    "run_validation",
    "slab_density_quadrature",
    "slab_logmarginal_quadrature",
    "weight_kernel_tv",
]


@dataclass
class Grid1D:
    """Uniform 1-D grid with cached node values."""

    lo: float
    hi: float
    num_points: int
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.num_points < 3:
            raise ValueError(f"need at least 3 points, got {self.num_points}")
        self.values = np.linspace(self.lo, self.hi, self.num_points)


def grid_integrate(f, grid: Grid1D) -> float:
    """Trapezoid-rule integral of ``f`` over the grid.

    ``f`` may be vectorised over an array of nodes or accept scalars.
    """
    try:
        vals = np.asarray(f(grid.values), dtype=float)
        if vals.shape != grid.values.shape:
            raise ValueError
    except (TypeError, ValueError):
        vals = np.array([float(f(x)) for x in grid.values])
    if not np.isfinite(vals).all():
        raise ValueError("integrand is not finite on the grid")
    return float(np.trapezoid(vals, grid.values))


def enumerate_masks(N: int, K: int) -> np.ndarray:
    """All 2^(N K) binary masks as an (2^(N K), N, K) int8 array.

    Row-major bit order: the first axis enumerates matrices, each
    distinct, entry (n, k) of matrix i being bit n*K + k of i.
    """
    if N < 1 or K < 0:
        raise ValueError("need N >= 1 and K >= 0")
    cells = N * K
    if cells > 12:
        raise ValueError(f"enumeration capped at 12 cells, got {cells}")
    idx = np.arange(2 ** cells, dtype=np.uint32)
    bits = (idx[:, None] >> np.arange(cells, dtype=np.uint32)) & 1
    return bits.reshape(-1, N, K).astype(np.int8)


def _p_axis_integrals(m_minus: int, N: int, alpha_over_K: float, num_points: int) -> tuple[float, float]:
    """Spike/slab probabilities by integrating the inclusion prior directly.

    Integrates Beta(a, 1) against the other rows' Bernoulli factors on
    a substituted grid p = s^r.  The exponent r is chosen so the
    integrand's power at the zero endpoint is at least quadratic,
    keeping the trapezoid rule's O(h^2) accuracy even when a < 1 makes
    the raw prior density singular at p = 0; it shrinks back to 1 as
    m_minus grows so the integrand never over-concentrates near 1.
    """
    a = alpha_over_K
    m = m_minus
    r = max(1, math.ceil(3.0 / (a + m)))
    s = np.linspace(0.0, 1.0, num_points)
    p = s ** r
    # prior density a p^{a-1} times dp/ds, with p^m folded in: all powers of s.
    base = a * r * s ** (r * a - 1.0 + r * m) * (1.0 - p) ** (N - 1 - m)
    den = np.trapezoid(base, s)
    spike = np.trapezoid(base * (1.0 - p), s)
    slab = np.trapezoid(base * p, s)
    return spike / den, slab / den


def _sigma_axis_logintegral(sq_sum: float, count: int, ig_shape: float, ig_scale: float,
                            num_points: int) -> float:
    """log of int prod_i N(g_i; 0, s2) InvGamma(s2; shape, scale) d s2.

    Only the squared sum of the ``count`` values matters.  Integrates on
    a log-spaced variance grid wide enough to cover the integrand's
    inverse-gamma-shaped bulk.
    """
    a_post = ig_shape + 0.5 * count
    b_post = ig_scale + 0.5 * sq_sum
    lo = stats.invgamma.ppf(1e-10, a_post, scale=b_post) / 50.0
    hi = stats.invgamma.ppf(1.0 - 1e-10, a_post, scale=b_post) * 50.0
    u = np.linspace(math.log(lo), math.log(hi), num_points)
    s2 = np.exp(u)
    log_f = (
        ig_shape * math.log(ig_scale)
        - math.lgamma(ig_shape)
        - (ig_shape + 1.0) * u
        - ig_scale / s2
        - 0.5 * count * (model.LOG_2PI + u)
        - 0.5 * sq_sum / s2
        + u  # Jacobian of s2 = e^u
    )
    c = log_f.max()
    return float(c + np.log(np.trapezoid(np.exp(log_f - c), u)))


def slab_logmarginal_quadrature(sq_sum: float, count: int, ig_shape: float, ig_scale: float,
                                num_points: int = 20001) -> float:
    """Quadrature counterpart of the closed-form slab column marginal."""
    return _sigma_axis_logintegral(sq_sum, count, ig_shape, ig_scale, num_points)


def slab_density_quadrature(w: float, m_minus: int, other_sq_sum: float,
                            ig_shape: float, ig_scale: float,
                            num_points: int = 20001) -> float:
    """Predictive density of one slab value given its column's others.

    Computed as the ratio of two variance integrals, never via the
    Student-t closed form.
    """
    log_num = _sigma_axis_logintegral(other_sq_sum + w * w, m_minus + 1, ig_shape, ig_scale, num_points)
    log_den = _sigma_axis_logintegral(other_sq_sum, m_minus, ig_shape, ig_scale, num_points)
    return math.exp(log_num - log_den)


def marginal_weight_quadrature(
    w: float,
    m_minus: int,
    N: int,
    alpha_over_K: float,
    ig_shape: float,
    ig_scale: float,
    other_sq_sum: float = 0.0,
    num_points: int = 20001,
) -> float:
    """Prior-predictive of one weight entry by direct numeric integration.

    Integrates the column's inclusion probability (Beta(a, 1) against
    the other rows' mask entries) and, for a nonzero value, the slab
    variance (inverse-gamma against the other active slab values with
    squared sum ``other_sq_sum``).

    Returns the point mass at zero when ``w == 0``, otherwise the
    continuous density at ``w``.
    """
    if not 0 <= m_minus <= N - 1:
        raise ValueError(f"m_minus must be in [0, {N - 1}], got {m_minus}")
    if min(alpha_over_K, ig_shape, ig_scale) <= 0.0:
        raise ValueError("alpha_over_K, ig_shape and ig_scale must be positive")
    spike, slab = _p_axis_integrals(m_minus, N, alpha_over_K, num_points)
    if w == 0.0:
        return spike
    return slab * slab_density_quadrature(w, m_minus, other_sq_sum, ig_shape, ig_scale, num_points)


def mc_lof_histogram(sampler, N: int, alpha: float, num_draws: int,
                     rng: np.random.Generator) -> dict[ibp.LofClass, float]:
    """Empirical distribution over left-ordered classes from a sampler.

    ``sampler(N, alpha, rng)`` must return a binary mask with no
    all-zero columns.  Restricted to N <= 3 so the class space stays
    enumerable by the comparisons this feeds.
    """
    if N > 3:
        raise ValueError("histogram comparisons only support N <= 3")
    if num_draws < 0:
        raise ValueError("num_draws must be >= 0")
    counts: dict[ibp.LofClass, int] = {}
    for _ in range(num_draws):
        cls = ibp.left_order_form(sampler(N, alpha, rng))
        counts[cls] = counts.get(cls, 0) + 1
    return {cls: c / num_draws for cls, c in counts.items()}


def freq_standard_error(p: float, num_draws: int) -> float:
    """Binomial standard error of an empirical frequency at probability p."""
    return math.sqrt(max(p * (1.0 - p), 0.0) / num_draws)


def lof_class_probabilities(N: int, alpha: float, max_k: int) -> dict[ibp.LofClass, float]:
    """Process-law probabilities of every left-ordered class with K <= max_k.

    Classes are multisets of nonzero column histories; each is realised
    as a representative matrix and priced by the process law.
    """
    import itertools

    histories = []
    for h in range(1, 2 ** N):
        histories.append(tuple((h >> (N - 1 - n)) & 1 for n in range(N)))
    histories.sort(reverse=True)
    out: dict[ibp.LofClass, float] = {}
    for k in range(max_k + 1):
        for combo in itertools.combinations_with_replacement(histories, k):
            Z = np.array(combo, dtype=np.int8).T if combo else np.zeros((N, 0), dtype=np.int8)
            cls = ibp.left_order_form(Z)
            out[cls] = math.exp(ibp.logprob_mask_ibp(Z, alpha))
    return out


# -- frozen kernel state and total-variation checks -----------------------

def frozen_kernel_state(seed: int = 7):
    """A small fixed chain state for 1-D kernel checks (N=4, K=2, T=10).

    The mask/slab are hard-coded so both columns have several active
    entries and so the checked entry (0, 0) carries a small weight next
    to a larger one: its conditional then keeps visible mass on the
    spike, which makes the kernel checks exercise the toggle in both
    directions rather than only the value moves.  The factors and data
    are drawn once from the given seed.  Returns (state, hyper).
    """
    from .inference import ChainState
    from .model import LayerHyper

    hyper = LayerHyper(alpha_ibp=2.0, ig_shape=3.0, ig_scale=2.0, sigma_top=1.0, sigma_floor=1e-6)
    mask = np.array([[1, 1], [1, 1], [0, 1], [1, 1]], dtype=np.int8)
    slab = np.array([[0.4, -0.7], [-1.1, 0.6], [0.0, -0.8], [0.5, 1.2]])
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((2, 10))
    sigma = np.maximum(np.abs((mask * slab) @ Y), hyper.sigma_floor)
    X = sigma * rng.standard_normal(sigma.shape)
    state = ChainState(X=X, Y=Y, mask=mask, slab=slab, layer_hyper=hyper)
    return state, hyper


def weight_kernel_tv(kept: int = 100_000, thin: int = 5, n_bins: int = 24,
                     seed: int = 2024) -> float:
    """Total variation between the weight kernel's samples and its target.

    Repeatedly applies the single-entry kernel to entry (0, 0) of the
    frozen state with everything else held fixed, keeping every
    ``thin``-th value, and compares the atom-plus-histogram against the
    grid-integrated conditional law.
    """
    from .inference import gibbs_update_weight
    from . import model

    state, hyper = frozen_kernel_state()
    n0, k0 = 0, 0
    m_minus = int(state.m[k0]) - int(state.mask[n0, k0])
    a = hyper.alpha_ibp / state.K
    spike_p, slab_p = model.spike_slab_predictive(m_minus, state.N, a)
    active = state.mask[:, k0].astype(bool)
    sq_minus = float(np.sum(state.slab[active, k0] ** 2)) - float(state.slab[n0, k0]) ** 2
    df, t_scale = model.slab_predictive_params(m_minus, sq_minus, hyper.ig_shape, hyper.ig_scale)
    base_row = state.S[n0] - state.slab[n0, k0] * state.Y[k0]
    x_row = state.X[n0].copy()
    y_row = state.Y[k0].copy()

    def loglik(w):
        s = np.maximum(np.abs(base_row[None, :] + np.atleast_1d(w)[:, None] * y_row[None, :]),
                       hyper.sigma_floor)
        z = x_row[None, :] / s
        return -0.5 * x_row.size * model.LOG_2PI - np.log(s).sum(axis=1) - 0.5 * (z * z).sum(axis=1)

    lik0 = float(loglik(0.0)[0])
    L = 15.0 * t_scale
    grid = np.linspace(-L, L, 40001)
    log_d = (
        math.log(slab_p)
        + np.array([model.student_t_logpdf(w, df, t_scale) for w in grid])
        + loglik(grid)
        - lik0
    )
    log_atom = math.log(spike_p)  # lik(0) - lik0 == 0
    shift = max(float(log_d.max()), log_atom)
    dens = np.exp(log_d - shift)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    atom_unnorm = math.exp(log_atom - shift)
    Z = atom_unnorm + cum[-1]
    edges = np.linspace(-L, L, n_bins + 1)
    cdf_at = np.interp(edges, grid, cum)
    bin_mass = np.diff(cdf_at) / Z
    atom_mass = atom_unnorm / Z
    out_mass = 0.0

    rng = np.random.default_rng(seed)
    draws = np.empty(kept)
    for j in range(kept):
        for _ in range(thin):
            gibbs_update_weight(state, n0, k0, hyper, rng, step_scale=0.5)
        draws[j] = state.mask[n0, k0] * state.slab[n0, k0]

    atom_hat = float(np.mean(draws == 0.0))
    nonatom = draws[draws != 0.0]
    counts, _ = np.histogram(nonatom, bins=edges)
    freq = counts / kept
    out_hat = (len(nonatom) - counts.sum()) / kept
    tv = 0.5 * (abs(atom_hat - atom_mass) + abs(out_hat - out_mass) + np.abs(freq - bin_mass).sum())
    return float(tv)


def factor_kernel_tv(kept: int = 100_000, thin: int = 5, n_bins: int = 24,
                     seed: int = 2025) -> float:
    """Total variation between the factor kernel's samples and its target.

    Same protocol as the weight check, for factor entry (0, 0).
    """
    from .inference import gibbs_update_factor
    from . import model

    state, hyper = frozen_kernel_state()
    k0, t0 = 0, 0
    rows = np.flatnonzero(state.mask[:, k0])
    w_col = state.slab[rows, k0].copy()
    x_col = state.X[rows, t0].copy()
    base = state.S[rows, t0] - w_col * state.Y[k0, t0]
    sig_prior = float(state.sigma_y[k0, t0])

    def logtarget(y):
        y = np.atleast_1d(y)
        s = np.maximum(np.abs(base[None, :] + np.outer(y, w_col)), hyper.sigma_floor)
        z = x_col[None, :] / s
        lik = -0.5 * len(rows) * model.LOG_2PI - np.log(s).sum(axis=1) - 0.5 * (z * z).sum(axis=1)
        return lik - 0.5 * (y / sig_prior) ** 2

    L = 12.0 * sig_prior
    grid = np.linspace(-L, L, 40001)
    log_d = logtarget(grid)
    log_d -= log_d.max()
    dens = np.exp(log_d)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    Z = cum[-1]
    edges = np.linspace(-L, L, n_bins + 1)
    bin_mass = np.diff(np.interp(edges, grid, cum)) / Z

    rng = np.random.default_rng(seed)
    draws = np.empty(kept)
    for j in range(kept):
        for _ in range(thin):
            gibbs_update_factor(state, k0, t0, hyper, rng, step_scale=0.5)
        draws[j] = state.Y[k0, t0]

    counts, _ = np.histogram(draws, bins=edges)
    freq = counts / kept
    out_hat = (kept - counts.sum()) / kept
    tv = 0.5 * (out_hat + np.abs(freq - bin_mass).sum())
    return float(tv)


def ibp_sampler_max_z(num_draws: int, seed: int, min_expected: float = 10.0,
                      max_k: int = 8, N: int = 3, alpha: float = 1.0) -> float:
    """Worst per-class z-score of the sequential sampler vs the process law.

    Compares empirical class frequencies over ``num_draws`` draws with
    exp(logprob_mask_ibp).  Classes whose expected count reaches
    ``min_expected`` are tested individually (the z statistic is only
    meaningful there); everything rarer is pooled into one tail bucket
    tested the same way, so the whole law is still covered.
    """
    rng = np.random.default_rng(seed)
    freqs = mc_lof_histogram(ibp.sample_ibp_sequential, N, alpha, num_draws, rng)
    probs = lof_class_probabilities(N, alpha, max_k)
    tested = {cls: p for cls, p in probs.items() if p * num_draws >= min_expected}
    worst = 0.0
    for cls, p in tested.items():
        se = freq_standard_error(p, num_draws)
        z = abs(freqs.get(cls, 0.0) - p) / se if se > 0 else 0.0
        worst = max(worst, z)
    tail_p = 1.0 - sum(tested.values())
    tail_f = 1.0 - sum(freqs.get(cls, 0.0) for cls in tested)
    se = freq_standard_error(tail_p, num_draws)
    if se > 0:
        worst = max(worst, abs(tail_f - tail_p) / se)
    return worst


def dish_count_mean_z(num_draws: int, seed: int, N: int = 10, alpha: float = 3.0) -> float:
    """z-score of the mean sampled dish count against alpha * H_N."""
    rng = np.random.default_rng(seed)
    counts = np.array([
        ibp.sample_ibp_sequential(N, alpha, rng).shape[1] for _ in range(num_draws)
    ])
    se = counts.std(ddof=1) / math.sqrt(num_draws)
    return float(abs(counts.mean() - alpha * ibp.harmonic_number(N)) / se)


# Hyperparameters for the generate-then-sample consistency run.  The
# inverse-gamma shape is raised to 4 so the slab marginal has finite
# fourth moments; otherwise the standard errors of the second-moment
# comparison would not exist.  The noise floor is raised well above its
# production default: when the chain regenerates its own data, a row
# whose weights are all inactive emits observations at the floor scale,
# and with a tiny floor the likelihood ratio for re-activating such a
# row underflows, splitting the state space into basins the chain
# cannot cross.  A floor of 0.3 keeps every toggle reachable so the
# time averages actually converge to the joint-law moments.
_GEWEKE_HYPER = dict(alpha_ibp=2.0, ig_shape=4.0, ig_scale=3.0, sigma_top=1.0, sigma_floor=0.3)


def _geweke_stats(w_eff: np.ndarray, Y: np.ndarray) -> tuple[float, float, float, float]:
    return (
        float(w_eff.mean()),
        float((w_eff * w_eff).mean()),
        float(Y.mean()),
        float((Y * Y).mean()),
    )


def geweke_moment_zs(
    n_prior: int = 200_000,
    n_sweeps: int = 50_000,
    burn_in: int = 2_000,
    batches: int = 50,
    N: int = 4,
    K: int = 2,
    T: int = 10,
    seed: int = 404,
) -> dict[str, float]:
    """Generate-then-sample agreement on the fixed-K model, as z-scores.

    Two ways of sampling the joint law of (weights, factors, data) must
    match: direct prior draws, and a chain that alternates one Gibbs
    sweep at fixed K with redrawing the data from the likelihood.  Any
    defect in the kernels' stationary law shows up as a moment
    discrepancy.  Compares the first and second moments of the
    effective weights and the factors; the chain side's standard error
    uses batch means to absorb autocorrelation.  Returns |z| per moment.
    """
    from .inference import ChainState, gibbs_sweep, resample_data
    from .model import LayerHyper

    hyper = LayerHyper(**_GEWEKE_HYPER)
    rng = np.random.default_rng(seed)

    prior = np.empty((n_prior, 4))
    for i in range(n_prior):
        layer = model.sample_weight_layer(N, K, hyper.alpha_ibp, hyper.ig_shape, hyper.ig_scale, rng)
        Y = hyper.sigma_top * rng.standard_normal((K, T))
        prior[i] = _geweke_stats(layer.mask * layer.slab, Y)

    layer = model.sample_weight_layer(N, K, hyper.alpha_ibp, hyper.ig_shape, hyper.ig_scale, rng)
    Y = hyper.sigma_top * rng.standard_normal((K, T))
    sigma = np.maximum(np.abs((layer.mask * layer.slab) @ Y), hyper.sigma_floor)
    X = sigma * rng.standard_normal((N, T))
    state = ChainState(X=X, Y=Y, mask=layer.mask, slab=layer.slab, layer_hyper=hyper)
    chain = np.empty((n_sweeps, 4))
    for i in range(n_sweeps):
        gibbs_sweep(state, hyper, rng)
        resample_data(state, rng)
        chain[i] = _geweke_stats(state.mask * state.slab, state.Y)
    chain = chain[burn_in:]

    names = ("mean_w", "mean_w_sq", "mean_y", "mean_y_sq")
    zs = {}
    batch_means = chain[: len(chain) // batches * batches].reshape(batches, -1, 4).mean(axis=1)
    for j, name in enumerate(names):
        se_prior = prior[:, j].std(ddof=1) / math.sqrt(n_prior)
        se_chain = batch_means[:, j].std(ddof=1) / math.sqrt(batches)
        zs[name] = float(
            abs(prior[:, j].mean() - chain[:, j].mean()) / math.hypot(se_prior, se_chain)
        )
    return zs


@dataclass(frozen=True)
class ValidationCheck:
    name: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.error < self.tol

    def line(self) -> str:
        status = "ok  " if self.passed else "FAIL"
        return f"{status} {self.name}: max error {self.error:.3e} (tol {self.tol:.1e})"


@dataclass(frozen=True)
class ValidationReport:
    checks: list[ValidationCheck]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = [c.line() for c in self.checks]
        out.append("all checks passed" if self.ok else "validation FAILED")
        return out


def _check_mask_normalization() -> ValidationCheck:
    masks = enumerate_masks(3, 2)
    err = 0.0
    for alpha in (0.5, 1.0, 3.0):
        total = sum(math.exp(ibp.logprob_mask_marginal(Z, alpha)) for Z in masks)
        err = max(err, abs(total - 1.0))
    return ValidationCheck("mask marginal normalizes (N=3, K=2)", err, 1e-10)


def _check_spike_slab_integrates() -> ValidationCheck:
    err = 0.0
    for p, s2 in ((0.5, 2.0), (0.3, 0.5)):
        width = 50.0 * math.sqrt(s2)
        grid = Grid1D(-width, width, 100001)

        def cont(w, p=p, s2=s2):
            return np.exp(np.log(p) - 0.5 * (model.LOG_2PI + np.log(s2)) - w * w / (2.0 * s2))

        err = max(err, abs(grid_integrate(cont, grid) - p))
    return ValidationCheck("spike-and-slab continuous part integrates to p", err, 1e-8)


def _check_spike_mass(perturb: float) -> ValidationCheck:
    err = 0.0
    for m_minus, N, a in ((0, 2, 1.0), (1, 4, 0.5), (3, 6, 2.0)):
        closed = model.spike_slab_predictive(m_minus, N, a)[0] + perturb
        quad = marginal_weight_quadrature(0.0, m_minus, N, a, 2.0, 1.0)
        err = max(err, abs(closed - quad))
    return ValidationCheck("spike mass closed form vs quadrature", err, 1e-6)


def _check_slab_density() -> ValidationCheck:
    m_minus, sq, shape, scale = 2, 1.7, 2.0, 1.0
    df, t_scale = model.slab_predictive_params(m_minus, sq, shape, scale)
    err = 0.0
    for w in (0.3, 1.5, -2.2):
        closed = math.exp(model.student_t_logpdf(w, df, t_scale))
        quad = slab_density_quadrature(w, m_minus, sq, shape, scale)
        err = max(err, abs(closed - quad))
    return ValidationCheck("slab predictive density vs quadrature", err, 1e-6)


def _check_slab_marginal() -> ValidationCheck:
    closed = model.slab_column_logmarginal(2.4, 3, 2.0, 1.0)
    quad = slab_logmarginal_quadrature(2.4, 3, 2.0, 1.0)
    return ValidationCheck("slab column log-marginal vs quadrature", abs(closed - quad), 1e-6)


def _check_k_prior_normalizes() -> ValidationCheck:
    rate = 3.0 * ibp.harmonic_number(16)
    total = sum(math.exp(model.log_poisson_k(k, rate)) for k in range(400))
    return ValidationCheck("factor-count prior normalizes", abs(total - 1.0), 1e-10)


def _check_ibp_finite_limit() -> ValidationCheck:
    """Process law vs the finite Beta-Bernoulli law at a huge truncation.

    A left-ordered class with K+ distinct-history groups of sizes K_h
    collects K!/(K - K+)! / prod_h K_h! arrangements of a K-column
    finite mask whose remaining columns are zero; the finite marginal
    of any one arrangement times that count converges to the process
    law as K grows, at rate O(1/K).
    """
    K = 1_000_000
    alpha = 1.5
    err = 0.0
    for cols in (((1, 0),), ((1, 1),), ((1, 0), (0, 1)), ((1, 1), (1, 0), (1, 0))):
        Z = np.array(cols, dtype=np.int8).T
        N, K_plus = Z.shape
        lof = ibp.left_order_form(Z)
        a = alpha / K
        rep = np.zeros((N, K), dtype=np.int8)
        rep[:, :K_plus] = Z
        log_count = (
            math.lgamma(K + 1.0)
            - math.lgamma(K - K_plus + 1.0)
            - sum(math.lgamma(c + 1.0) for c in lof.multiplicities)
        )
        finite = log_count + ibp.logprob_mask_marginal(rep, alpha)
        process = ibp.logprob_mask_ibp(Z, alpha)
        err = max(err, abs(math.exp(finite) - math.exp(process)))
    return ValidationCheck("process law is the finite-mask limit", err, 1e-4)


def _check_ibp_sampler() -> ValidationCheck:
    z = ibp_sampler_max_z(num_draws=20_000, seed=11)
    return ValidationCheck("sequential mask sampler vs process law (z)", z, 4.0)


def _check_dish_count() -> ValidationCheck:
    z = dish_count_mean_z(num_draws=5_000, seed=12)
    return ValidationCheck("sampled dish-count mean vs alpha * H_N (z)", z, 4.0)


def _check_weight_kernel() -> ValidationCheck:
    tv = weight_kernel_tv(kept=20_000, thin=5, seed=21)
    return ValidationCheck("weight kernel vs conditional law (TV)", tv, 0.02)


def _check_factor_kernel() -> ValidationCheck:
    tv = factor_kernel_tv(kept=20_000, thin=5, seed=22)
    return ValidationCheck("factor kernel vs conditional law (TV)", tv, 0.02)


def run_validation(perturb: float = 0.0) -> ValidationReport:
    """Run every closed-form-vs-oracle agreement check.

    ``perturb`` is added to one closed-form value before comparison; it
    exists so tests can confirm the suite detects a wrong constant.
    """
    return ValidationReport(checks=[
        _check_mask_normalization(),
        _check_spike_slab_integrates(),
        _check_spike_mass(perturb),
        _check_slab_density(),
        _check_slab_marginal(),
        _check_k_prior_normalizes(),
        _check_ibp_finite_limit(),
        _check_ibp_sampler(),
        _check_dish_count(),
        _check_weight_kernel(),
        _check_factor_kernel(),
    ])
