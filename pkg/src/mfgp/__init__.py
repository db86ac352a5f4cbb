"""Multi-fidelity Gaussian-process modelling of stochastic simulators.

A simulator with a continuous fidelity parameter ``t`` (e.g. mesh size) is
modelled as ``Z ~ N(xi(x, t), lambda(t))`` with a GP prior on ``xi`` whose
covariance splits into an ideal-response term and a numerical-error term
that vanishes as ``t -> 0``. Hyperparameters and per-level noise variances
are estimated by MAP; the fitted model predicts the fine-fidelity response
and the posterior of a threshold-exceedance probability.
"""
__version__ = "0.1.0"

from ._core import BACKEND
from .designs import (CostTable, Design, DesignKind, DesignSpec, design_cost, lhs,
                      nested_design, unit_box)
from .gp import (Dataset, FittedModel, LOOResult, NoiseModel, PredictionResult,
                 assemble_gram, build_model, conditional_simulate, fit_gls_mean,
                 loo_residuals, predict)
from .inference import (FitConfig, LambdaPrior, MAPResult, ParameterLayout,
                        lambda_log_prior, map_fit, map_objective)
from .kernels import (KernelSpec, MaternParams, TemporalCorrParams, Variant,
                      kernel_eval, kernel_matrix, matern, temporal_corr)
from .risk import (ExceedanceConfig, ExceedanceResult, exceedance_posterior,
                   kde_density)
from .synthbench import (SyntheticTruth, simulate_design, synth_eval, truth_exceedance,
                         truth_mean, truth_noise)

__all__ = [
    "BACKEND", "CostTable", "Dataset", "Design", "DesignKind", "DesignSpec",
    "ExceedanceConfig", "ExceedanceResult", "FitConfig", "FittedModel", "KernelSpec",
    "LOOResult", "LambdaPrior", "MAPResult", "MaternParams", "NoiseModel",
    "ParameterLayout", "PredictionResult", "SyntheticTruth", "TemporalCorrParams",
    "Variant", "assemble_gram", "build_model", "conditional_simulate", "design_cost",
    "exceedance_posterior", "fit_gls_mean", "kde_density", "kernel_eval",
    "kernel_matrix", "lambda_log_prior", "lhs", "loo_residuals", "map_fit",
    "map_objective", "matern", "nested_design", "predict", "simulate_design",
    "synth_eval", "temporal_corr", "truth_exceedance", "truth_mean", "truth_noise",
    "unit_box",
]
