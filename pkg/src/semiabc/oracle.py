"""Exact references for model choice.

:func:`exact_posterior` uses each model's tractable evidence.
:func:`enumerated_abc_posterior` computes the h -> 0 rejection-ABC target
on a finite data space by exact summation, with no Monte Carlo.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .models import UnsupportedModelError

__all__ = ["ExactPosterior", "exact_posterior", "enumerated_abc_posterior",
           "normalise_log_weights"]


@dataclass
class ExactPosterior:
    log_evidences: np.ndarray
    probabilities: np.ndarray


def normalise_log_weights(log_w) -> np.ndarray:
    log_w = np.asarray(log_w, dtype=float)
    finite = np.isfinite(log_w)
    if not finite.any():
        raise ValueError("every weight is zero")
    out = np.zeros_like(log_w)
    out[finite] = np.exp(log_w[finite] - logsumexp(log_w[finite]))
    return out


def exact_posterior(models: Sequence, data, prior=None) -> ExactPosterior:
    missing = [m.id for m in models if not m.has_exact_marginal]
    if missing:
        raise UnsupportedModelError(f"no exact marginal for {missing}")
    log_ev = np.array([m.exact_log_marginal(data) for m in models])
    p = np.full(len(models), 1.0 / len(models)) if prior is None else np.asarray(prior, float)
    with np.errstate(divide="ignore"):
        log_w = log_ev + np.log(p)
    return ExactPosterior(log_evidences=log_ev, probabilities=normalise_log_weights(log_w))


def enumerated_abc_posterior(pmfs: Sequence[Mapping], x_obs, summary: Callable,
                             prior=None, h: float = 0.0,
                             distance: Optional[Callable] = None) -> np.ndarray:
    """``Pr(M | d(S(x), S(x_obs)) <= h)`` by summing exact pmfs.

    ``pmfs[i]`` maps each point of the finite data space to its probability
    under model ``i`` (parameters already integrated out). With ``h == 0``
    and the default distance this is ``Pr(M | S(x) = S(x_obs))``.
    """
    if distance is None:
        def distance(a, b):
            return float(np.max(np.abs(np.atleast_1d(a) - np.atleast_1d(b))))
    M = len(pmfs)
    p = np.full(M, 1.0 / M) if prior is None else np.asarray(prior, dtype=float)
    s_obs = np.asarray(summary(x_obs), dtype=float)
    mass = np.zeros(M)
    for i, pmf in enumerate(pmfs):
        for x, px in pmf.items():
            if px > 0 and distance(np.asarray(summary(x), dtype=float), s_obs) <= h:
                mass[i] += px
    w = p * mass
    if not w.sum() > 0:
        raise ValueError("the observed summary has zero probability under every model")
    return w / w.sum()
