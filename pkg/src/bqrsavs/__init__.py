"""Bayesian quantile regression with global-local shrinkage, decision-theoretic
posterior sparsification, and density-forecast evaluation."""

__version__ = "0.1.0"

from .data import Dataset, load_csv
from .forecast import (
    EvalReport,
    ForecastRecord,
    WindowConfig,
    combine_density,
    direct_forecast,
    run_expanding_window,
)
from .gibbs import (
    ChainConfig,
    GibbsState,
    NumericalError,
    PosteriorChain,
    PosteriorParams,
    draw_beta_direct,
    draw_beta_fast,
    draw_sigma,
    draw_z,
    run_gibbs,
)
from .priors import (
    PriorConfig,
    PriorState,
    horseshoe_update,
    init_prior_state,
    lasso_update,
    prior_variance,
    ssvs_update,
)
from .quantile import QuantileLevel, ald_log_likelihood, quantile_constants, tick_loss
from .scoring import (
    dm_test,
    pit,
    pit_from_density,
    score_crps,
    score_lpds,
    score_qs,
    score_qwcrps,
)
from .simulate import (
    DgpSpec,
    TrueQuantileCoeffs,
    coefficient_bias,
    confusion_metrics,
    generate_dgp,
    run_monte_carlo,
)
from .sparsify import (
    SparsifiedChain,
    SparsifyConfig,
    ald_correction,
    coordinate_descent_full,
    qbic,
    savs_threshold,
    select_kappa,
    sparsify_chain,
)

__all__ = [
    "ChainConfig", "Dataset", "DgpSpec", "EvalReport", "ForecastRecord",
    "GibbsState", "NumericalError", "PosteriorChain", "PosteriorParams",
    "PriorConfig", "PriorState", "QuantileLevel", "SparsifiedChain",
    "SparsifyConfig", "TrueQuantileCoeffs", "WindowConfig",
    "ald_correction", "ald_log_likelihood", "coefficient_bias",
    "combine_density", "confusion_metrics", "coordinate_descent_full",
    "direct_forecast", "dm_test", "draw_beta_direct", "draw_beta_fast",
    "draw_sigma", "draw_z", "generate_dgp", "horseshoe_update",
    "init_prior_state", "lasso_update", "load_csv", "pit", "pit_from_density",
    "prior_variance", "qbic", "quantile_constants", "run_expanding_window",
    "run_gibbs", "run_monte_carlo", "savs_threshold", "score_crps",
    "score_lpds", "score_qs", "score_qwcrps", "select_kappa", "sparsify_chain",
    "ssvs_update", "tick_loss",
]
