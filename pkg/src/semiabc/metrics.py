"""Scores for model-choice estimates over replicated datasets."""

from __future__ import annotations

import logging
import math

import numpy as np

__all__ = ["entropic_loss", "misallocation_rate", "argmax_ties", "format_cell"]

log = logging.getLogger(__name__)


def _check(estimates, truth):
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    truth = np.asarray(truth, dtype=int).ravel()
    if est.shape[0] != truth.size:
        raise ValueError(f"{est.shape[0]} estimates but {truth.size} true labels")
    return est, truth


def entropic_loss(estimates, truth) -> float:
    """``-sum log p_hat(true model)``; infinite if any true model gets zero."""
    est, truth = _check(estimates, truth)
    p = est[np.arange(truth.size), truth]
    if np.any(p <= 0):
        return math.inf
    # 0 - sum keeps a perfect score at +0.0
    return float(0.0 - np.sum(np.log(p)))


def argmax_ties(estimates) -> np.ndarray:
    """Mask of datasets whose largest probability is shared by several models."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    return np.sum(est == est.max(axis=1, keepdims=True), axis=1) > 1


def misallocation_rate(estimates, truth) -> float:
    """Fraction of datasets whose top-weighted model is wrong. Ties count as wrong."""
    est, truth = _check(estimates, truth)
    if truth.size == 0:
        return 0.0
    ties = argmax_ties(est)
    if ties.any():
        log.warning("%d dataset(s) with tied top probability counted as misallocated",
                    int(ties.sum()))
    wrong = ties | (est.argmax(axis=1) != truth)
    return float(wrong.mean())


def format_cell(loss: float, rate: float) -> str:
    """Table cell ``"loss (rate%)"``, e.g. ``"19.8 (15%)"``."""
    loss_s = "∞" if math.isinf(loss) else f"{loss:.1f}"
    return f"{loss_s} ({100 * rate:.0f}%)"
