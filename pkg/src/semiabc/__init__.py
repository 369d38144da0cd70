"""Semi-automatic ABC for model choice.

Summary statistics for choosing between models are estimated by pairwise
logistic regressions on simulated data, optionally after truncating each
model's prior to a training region found by a pilot run.
"""

from .models import MODELS, ModelSpec, get_model, get_models
from .oracle import exact_posterior
from .rejection import bayes_factor, posterior_estimates, rejection_abc, simulate_bank
from .semiauto import PipelineConfig, semiauto_pipeline

__version__ = "0.1.0"

__all__ = [
    "MODELS",
    "ModelSpec",
    "get_model",
    "get_models",
    "exact_posterior",
    "bayes_factor",
    "posterior_estimates",
    "rejection_abc",
    "simulate_bank",
    "PipelineConfig",
    "semiauto_pipeline",
]
