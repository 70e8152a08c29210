"""Retrospective intervention effect estimation with ensemble propensity scores."""

from ._kernels import backend_name
from .data import (
    Dataset,
    Intervention,
    binding_share,
    design_matrix,
    icw_index,
    intervention_from_config,
    load_csv,
    nonintervened_indicator,
)
from .diagnostics import balance_table, positivity_report, pscore_histogram
from .estimators import (
    InfluenceValues,
    RIEEstimate,
    combine_imputations,
    rie_ipw,
    rie_matching,
    rie_naive_ipw,
    rie_ols,
)
from .learners import EPS, FittedLearner, LearnerSpec, default_specs
from .simulation import SimConfig, gen_data, run_study, run_sweep, true_rie
from .superlearner import (
    EnsembleFit,
    FoldPlan,
    cv_predictions,
    cv_risk,
    ensemble_predict,
    fit_superlearner,
    make_folds,
    solve_simplex_weights,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset", "Intervention", "load_csv", "intervention_from_config",
    "nonintervened_indicator", "binding_share", "icw_index", "design_matrix",
    "LearnerSpec", "FittedLearner", "EPS", "default_specs",
    "FoldPlan", "EnsembleFit", "make_folds", "cv_predictions", "cv_risk",
    "solve_simplex_weights", "ensemble_predict", "fit_superlearner",
    "RIEEstimate", "InfluenceValues", "rie_ipw", "rie_naive_ipw", "rie_ols",
    "rie_matching", "combine_imputations",
    "balance_table", "positivity_report", "pscore_histogram",
    "SimConfig", "gen_data", "true_rie", "run_study", "run_sweep",
    "backend_name",
]
