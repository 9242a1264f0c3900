"""
Dose Finding Module
===================

Individualized dose rules from Gaussian process regression: fit a GP to
(covariates, dose, reward) records, then recommend for a new patient the dose
that maximizes the lower confidence surface mean - s * sd.

Modules:
    - kernel: ARD squared-exponential kernel and hyperparameters
    - gaussian_process: Exact GP fit, prediction and marginal likelihood
    - lcsl_policy: Lower confidence surface dose search and explanations
    - model_io: DataCSV, ModelFile and results files
    - config: config.yaml loading
    - cli: Command line (python -m dose_finding.cli)

Example usage:
    import numpy as np
    from dose_finding import Dataset, PenaltySpec, optimize_hyperparameters, recommend_dose

    data = Dataset(C=C, a=a, r=r, dose_range=(0.0, 1.0))
    model = optimize_hyperparameters(data, restarts=10, rng=np.random.default_rng(0))
    rec = recommend_dose(model, [0.3], PenaltySpec(95))
    print(rec.dose)
"""

from .errors import (
    DoseFindingError,
    InputShapeError,
    DomainError,
    DataFormatError,
    ConfigValidationError,
    ConditioningError,
    FittingError,
)

from .kernel import (
    Hyperparameters,
    kernel_eval,
    gram_matrix,
    cross_covariance,
    cross_covariance_matrix,
)

from .gaussian_process import (
    Dataset,
    RewardScaler,
    Posterior,
    FittedGP,
    fit,
    predict,
    predict_batch,
    posterior_moments,
    log_marginal_likelihood,
    optimize_hyperparameters,
)

from .lcsl_policy import (
    PenaltySpec,
    DoseRecommendation,
    inverse_normal_cdf,
    dose_coefficients,
    lcsl_objective,
    recommend_dose,
    recommend_doses,
    recommend_dose_table,
    explain,
    explain_variance,
    feature_relevances,
)

from .model_io import (
    read_data_csv,
    write_data_csv,
    save_model,
    load_model,
)

__version__ = "1.0.0"
__all__ = [
    # Errors
    "DoseFindingError",
    "InputShapeError",
    "DomainError",
    "DataFormatError",
    "ConfigValidationError",
    "ConditioningError",
    "FittingError",
    # Kernel
    "Hyperparameters",
    "kernel_eval",
    "gram_matrix",
    "cross_covariance",
    "cross_covariance_matrix",
    # GP
    "Dataset",
    "RewardScaler",
    "Posterior",
    "FittedGP",
    "fit",
    "predict",
    "predict_batch",
    "posterior_moments",
    "log_marginal_likelihood",
    "optimize_hyperparameters",
    # Dose rule
    "PenaltySpec",
    "DoseRecommendation",
    "inverse_normal_cdf",
    "dose_coefficients",
    "lcsl_objective",
    "recommend_dose",
    "recommend_doses",
    "recommend_dose_table",
    "explain",
    "explain_variance",
    "feature_relevances",
    # Files
    "read_data_csv",
    "write_data_csv",
    "save_model",
    "load_model",
]
