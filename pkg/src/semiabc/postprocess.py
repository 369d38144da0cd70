"""Regression post-processing of rejection-ABC output."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .regression import (DEFAULT_RIDGE, DegenerateFitError, RankDeficientError, fit_multinomial,
                         fit_ols, predict_multinomial)
from .rejection import AbcResult

__all__ = ["NotPossible", "TooFewAcceptancesError", "adjust_model_probs", "adjust_params"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NotPossible:
    """Returned instead of probabilities when the adjustment cannot be fitted."""

    reason: str

    def __bool__(self) -> bool:
        return False


class TooFewAcceptancesError(ValueError):
    pass


def _accepted_summaries(result: AbcResult) -> np.ndarray:
    return result.bank.summaries[result.accepted][:, result.kept]


def adjust_model_probs(result: AbcResult, obs_summary=None, prior=None,
                       ridge: float = DEFAULT_RIDGE):
    """Multinomial regression of accepted model labels on accepted summaries.

    Returns the fitted class probabilities at ``obs_summary`` (default: the
    observed summary the ABC run used), reweighted by ``prior`` for
    uniform-models banks, or :class:`NotPossible`.
    """
    obs = result.obs_summary if obs_summary is None else np.asarray(obs_summary, dtype=float)
    obs = np.atleast_1d(obs)[result.kept]
    S = _accepted_summaries(result)
    labels = result.bank.models[result.accepted]

    present = np.flatnonzero(np.bincount(labels, minlength=result.n_models))
    if present.size < 2:
        return NotPossible("all acceptances were for a single model")
    varying = np.ptp(S, axis=0) > 0
    if not varying.any():
        return NotPossible("no variation in the accepted summaries")

    remap = np.full(result.n_models, -1)
    remap[present] = np.arange(present.size)
    X = np.column_stack([np.ones(S.shape[0]), S[:, varying]])
    try:
        fit = fit_multinomial(X, remap[labels], n_classes=present.size, ridge=ridge)
    except DegenerateFitError as exc:
        return NotPossible(str(exc))
    x_obs = np.concatenate([[1.0], obs[varying]])[None, :]
    probs = np.zeros(result.n_models)
    probs[present] = predict_multinomial(fit.beta, x_obs)[0]
    if result.scheme == "uniform_models" and prior is not None:
        probs = probs * np.asarray(prior, dtype=float)
        probs /= probs.sum()
    return probs


def adjust_params(result: AbcResult, model_index: int, obs_summary=None) -> np.ndarray:
    """Linear regression adjustment of one model's accepted parameters.

    Fits ``theta = a + B s + e`` on that model's acceptances and returns
    ``a + B s_obs + e_hat`` row by row. Summary components that are constant
    among the acceptances are left out of the regression.
    """
    obs = result.obs_summary if obs_summary is None else np.asarray(obs_summary, dtype=float)
    obs = np.atleast_1d(obs)[result.kept]
    rows = result.accepted[result.bank.models[result.accepted] == model_index]
    S = result.bank.summaries[rows][:, result.kept]
    if rows.size < S.shape[1] + 2:
        raise TooFewAcceptancesError(
            f"model {model_index} has {rows.size} acceptances; need at least {S.shape[1] + 2}")
    thetas = result.bank.thetas[rows]
    thetas = thetas[:, ~np.all(np.isnan(thetas), axis=0)]

    varying = np.ptp(S, axis=0) > 0
    X = np.column_stack([np.ones(rows.size), S[:, varying]])
    x_obs = np.concatenate([[1.0], obs[varying]])
    out = np.empty_like(thetas)
    for k in range(thetas.shape[1]):
        try:
            fit = fit_ols(X, thetas[:, k])
        except RankDeficientError as exc:
            raise TooFewAcceptancesError(f"cannot fit adjustment: {exc}") from exc
        out[:, k] = x_obs @ fit.beta + fit.residuals
    return out
