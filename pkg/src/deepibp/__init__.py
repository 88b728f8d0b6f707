"""Infinite-latent-feature factor models with variance-routed layers.

A toolkit for a layered Gaussian latent-factor model whose weight
matrices carry spike-and-slab entries under an Indian-buffet-process
mask prior, with the number of factors per layer inferred by a
trans-dimensional Markov chain.  Modules:

- ``ibp``: binary mask laws and samplers
- ``model``: generative core, closed-form marginals, log-joint
- ``inference``: the per-layer sampler and the stacked greedy driver
- ``oracle``: quadrature/enumeration cross-checks of every closed form
- ``experiment``: the factor-count recovery study
- ``dataio``: CSV/JSON artifacts with atomic writes
- ``cli``: the ``deepibp`` command
"""

from .ibp import (
    harmonic_number,
    left_order_form,
    logprob_mask_ibp,
    logprob_mask_marginal,
    sample_ibp_sequential,
    sample_mask_finite,
)
from .model import (
    GenerativeModel,
    HyperParams,
    JointTerms,
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
from .inference import (
    ChainState,
    ChainTrace,
    InferenceConfig,
    MoveStats,
    accept_prob_add,
    accept_prob_delete,
    gibbs_sweep,
    log_ratio_add,
    log_ratio_delete,
    run_layerwise,
    run_mh_layer,
)
from .experiment import (
    ExperimentConfig,
    InitStrategy,
    SummaryStats,
    TrialResult,
    emit_report,
    run_experiment,
    summarize,
)
from .oracle import ValidationReport, run_validation

__version__ = "0.1.0"

__all__ = [
    "ChainState",
    "ChainTrace",
    "ExperimentConfig",
    "GenerativeModel",
    "HyperParams",
    "InferenceConfig",
    "InitStrategy",
    "JointTerms",
    "LayerHyper",
    "MoveStats",
    "ParentContext",
    "SummaryStats",
    "TrialResult",
    "ValidationReport",
    "WeightLayer",
    "__version__",
    "accept_prob_add",
    "accept_prob_delete",
    "emit_report",
    "generate_dataset",
    "gibbs_sweep",
    "harmonic_number",
    "left_order_form",
    "log_joint",
    "log_joint_terms",
    "log_ratio_add",
    "log_ratio_delete",
    "logprob_mask_ibp",
    "logprob_mask_marginal",
    "propagate_sigma",
    "run_experiment",
    "run_layerwise",
    "run_mh_layer",
    "run_validation",
    "sample_ibp_sequential",
    "sample_mask_finite",
    "sample_weight_layer",
    "spike_slab_logpdf",
    "summarize",
]
