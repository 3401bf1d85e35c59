"""Network inference for discrete-time binary Hawkes processes.

The package covers model construction and simulation, the de-correlated
score test and one-step confidence intervals for individual network edges,
a cross-validated lasso solver tuned for time-ordered data, self-contained
chi-square distribution functions, and a Monte-Carlo experiment harness
with a CLI front end (``hawkesnet`` or ``python -m hawkesnet``).
"""

from .dist import chi2_cdf, chi2_quantile, noncentral_chi2_cdf
from .experiments import (
    EdgeRecord,
    ExperimentConfig,
    ExperimentResult,
    MetricsRow,
    config_from_json,
    config_to_json,
    derive_seed,
    metrics_from_csv,
    metrics_to_csv,
    run_experiment,
    run_replicate,
)
from .inference import (
    ConfidenceRegion,
    DegenerateDesign,
    NuisanceFit,
    ScoreTestResult,
    SingularUpsilon,
    SingularUpsilonTilde,
    TestDiagnostics,
    fit_nuisance,
    one_step_ci,
    oracle_fit_nuisance,
    oracle_score_test,
    score_test,
)
from .model import (
    AssumptionReport,
    DesignState,
    HawkesModel,
    KernelSpec,
    SpikeData,
    check_assumptions,
    integrated_process,
    intensity,
    residual_scale,
)
from .simulate import SimConfig, StructureSpec, make_structure, permute_trains, simulate
from .solver import (
    LassoFit,
    LassoProblem,
    SeqCVSpec,
    fit_lasso,
    kkt_violation,
    scale_design,
    sequential_cv,
    soft_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionReport",
    "ConfidenceRegion",
    "DegenerateDesign",
    "DesignState",
    "EdgeRecord",
    "ExperimentConfig",
    "ExperimentResult",
    "HawkesModel",
    "KernelSpec",
    "LassoFit",
    "LassoProblem",
    "MetricsRow",
    "NuisanceFit",
    "ScoreTestResult",
    "SeqCVSpec",
    "SimConfig",
    "SingularUpsilon",
    "SingularUpsilonTilde",
    "SpikeData",
    "StructureSpec",
    "TestDiagnostics",
    "check_assumptions",
    "chi2_cdf",
    "chi2_quantile",
    "config_from_json",
    "config_to_json",
    "derive_seed",
    "fit_lasso",
    "fit_nuisance",
    "integrated_process",
    "intensity",
    "kkt_violation",
    "make_structure",
    "metrics_from_csv",
    "metrics_to_csv",
    "noncentral_chi2_cdf",
    "one_step_ci",
    "oracle_fit_nuisance",
    "oracle_score_test",
    "permute_trains",
    "residual_scale",
    "run_experiment",
    "run_replicate",
    "scale_design",
    "score_test",
    "sequential_cv",
    "simulate",
    "soft_threshold",
    "__version__",
]
