"""Principal dynamical components: reduced predictive models for
multivariate time series.

Fits an orthogonal reduced subspace jointly with a linear (optionally
time-varying, order-r) predictor by minimizing the one-step predictive
cost.  See the README for the command-line interface.
"""

from .core import (
    AUTONOMOUS, PER_STEP, PERIODIC, ContractViolation,
    DegenerateComparisonError, FitFailureError, IllConditionedError,
    InsufficientDataError, PdcError, ReducedModel, SlotIndexer, TimeSeries,
    apply_plane_rotation, autonomous_model, evaluate_cost,
    predict_expectation, project_series, project_split, reorthonormalize,
)
from .engine import (
    FitConfig, FitReport, fit, plan_rotation_step, randomize_bases,
    regress_dynamics, rotation_derivatives,
)
from .io import ingest_csv, read_model, write_dataset, write_model
from .likelihood import (
    GeneralNoise, IsotropicNoise, coordinate_ranking, general_loglik,
    isotropic_loglik, optimal_sigma,
)
from .metrics import (
    SubspaceComparison, anomaly_index, canonical_2d, compare_models,
    dynamics_error, monthly_climatology, natural_basis, prediction_report,
    subspace_error,
)
from .pca import PcaResult, principal_components, spectrum_tail
from .synthetic import Auto2D, AutoMulti, Markov2D, Seasonal2D, generate
from .trials import TrialFunction, anneal_length, draw_trial, evaluate_weight

__version__ = "0.1.0"

__all__ = [
    "AUTONOMOUS", "PERIODIC", "PER_STEP",
    "PdcError", "ContractViolation", "InsufficientDataError",
    "IllConditionedError", "FitFailureError", "DegenerateComparisonError",
    "TimeSeries", "SlotIndexer", "ReducedModel",
    "project_split", "project_series", "predict_expectation",
    "evaluate_cost", "apply_plane_rotation", "reorthonormalize",
    "autonomous_model",
    "FitConfig", "FitReport", "fit", "plan_rotation_step",
    "regress_dynamics", "rotation_derivatives", "randomize_bases",
    "TrialFunction", "draw_trial", "anneal_length", "evaluate_weight",
    "PcaResult", "principal_components", "spectrum_tail",
    "Auto2D", "AutoMulti", "Seasonal2D", "Markov2D", "generate",
    "SubspaceComparison", "subspace_error", "dynamics_error",
    "compare_models", "natural_basis", "monthly_climatology",
    "anomaly_index", "prediction_report", "canonical_2d",
    "IsotropicNoise", "GeneralNoise", "isotropic_loglik", "optimal_sigma",
    "general_loglik", "coordinate_ranking",
    "ingest_csv", "write_dataset", "read_model", "write_model",
    "__version__",
]
