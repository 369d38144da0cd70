"""Rejection-sampling ABC for model choice.

A :class:`SimBank` holds simulated ``(model, theta, data)`` records, built
either with models drawn from the model prior (``"prior_weights"``) or
with equal simulation counts per model in random order
(``"uniform_models"``, the default). :func:`rejection_abc` keeps the
``n_accept`` records closest to the observed summary under the scaled
Euclidean distance.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "SimBank",
    "AbcResult",
    "DegenerateSummaryError",
    "UndefinedBayesFactor",
    "simulate_bank",
    "scaled_distance",
    "estimate_sds",
    "rejection_abc",
    "posterior_estimates",
    "bayes_factor",
    "SD_FLOOR",
]

log = logging.getLogger(__name__)

SD_FLOOR = 1e-12
SCHEMES = ("uniform_models", "prior_weights")


class DegenerateSummaryError(ValueError):
    """Every summary component is constant over the bank."""


class UndefinedBayesFactor(ZeroDivisionError):
    """The denominator model has no acceptances."""


@dataclass
class SimBank:
    """Simulated records; row ``i`` has ``sim_index == i``.

    ``thetas`` is padded with NaN to the largest parameter dimension.
    """

    models: np.ndarray
    thetas: np.ndarray
    data: Optional[np.ndarray] = None
    summaries: Optional[np.ndarray] = None
    n_models: int = 2
    scheme: str = "uniform_models"
    seed: Optional[int] = None

    def __len__(self) -> int:
        return int(self.models.shape[0])

    @property
    def sim_index(self) -> np.ndarray:
        return np.arange(len(self))

    def with_summaries(self, summary: Callable) -> "SimBank":
        if self.data is None:
            raise ValueError("bank holds no raw data to summarise")
        s = np.asarray(summary(self.data), dtype=float)
        return replace(self, summaries=s.reshape(len(self), -1))

    def model_counts(self) -> np.ndarray:
        return np.bincount(self.models, minlength=self.n_models)


def _balanced_labels(n_sims, n_models, rng):
    base, extra = divmod(n_sims, n_models)
    counts = np.full(n_models, base)
    counts[:extra] += 1
    return rng.permutation(np.repeat(np.arange(n_models), counts))


def simulate_bank(models: Sequence, n_sims: int, n_obs: int, rng: np.random.Generator,
                  scheme: str = "uniform_models", prior=None,
                  theta_sampler: Optional[Callable] = None) -> SimBank:
    """Simulate ``n_sims`` records.

    ``theta_sampler(model_index, size, rng)`` overrides prior sampling, e.g.
    for truncated models. Models are simulated in index order with one
    vectorised call each, so the bank is a deterministic function of ``rng``.
    """
    M = len(models)
    if n_sims < 1:
        raise ValueError("n_sims must be positive")
    if scheme == "uniform_models":
        labels = _balanced_labels(n_sims, M, rng)
    elif scheme == "prior_weights":
        p = np.full(M, 1.0 / M) if prior is None else np.asarray(prior, dtype=float)
        labels = rng.choice(M, size=n_sims, p=p / p.sum())
    else:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")

    dmax = max(m.param_dim for m in models)
    thetas = np.full((n_sims, dmax), np.nan)
    data = np.empty((n_sims, n_obs))
    for i, model in enumerate(models):
        rows = np.flatnonzero(labels == i)
        if rows.size == 0:
            continue
        if theta_sampler is None:
            th = model.sample_prior(rng, rows.size)
        else:
            th = theta_sampler(i, rows.size, rng)
        thetas[rows, :model.param_dim] = th
        data[rows] = model.simulate_many(th, n_obs, rng)
    return SimBank(models=labels, thetas=thetas, data=data, n_models=M, scheme=scheme)


def scaled_distance(a, b, sd) -> np.ndarray:
    """``sqrt(sum((a - b)^2 / sd^2))``; ``a`` may be a batch of rows."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if a.shape[-1] != b.shape[-1] or a.shape[-1] != sd.shape[-1]:
        raise ValueError(f"length mismatch: {a.shape[-1]}, {b.shape[-1]}, {sd.shape[-1]}")
    if np.any(sd <= 0):
        raise ValueError("standard deviations must be positive")
    z = (a - b) / sd
    return np.sqrt(np.sum(z * z, axis=-1))


def estimate_sds(bank: SimBank):
    """Per-component sample sd (``n - 1`` denominator) over the bank.

    Returns ``(sd, kept)`` where ``kept`` indexes components whose sd is at
    least ``SD_FLOOR``; ``sd`` is restricted to those components.
    """
    s = bank.summaries
    if s is None or len(bank) == 0:
        raise ValueError("bank is empty or has no summaries")
    sd = s.std(axis=0, ddof=1) if len(bank) > 1 else np.zeros(s.shape[1])
    kept = np.flatnonzero(sd >= SD_FLOOR)
    if kept.size == 0:
        raise DegenerateSummaryError("all summary components are constant over the bank")
    if kept.size < s.shape[1]:
        dropped = sorted(set(range(s.shape[1])) - set(kept.tolist()))
        log.warning("dropping constant summary components %s", dropped)
    return sd[kept], kept


@dataclass
class AbcResult:
    bank: SimBank
    obs_summary: np.ndarray
    accepted: np.ndarray  # sim indices, nearest first
    distances: np.ndarray  # for every bank record
    h: float
    counts: np.ndarray
    sd: np.ndarray = field(repr=False, default=None)
    kept: np.ndarray = field(repr=False, default=None)

    @property
    def scheme(self) -> str:
        return self.bank.scheme

    @property
    def n_models(self) -> int:
        return self.bank.n_models

    def to_csv(self, fh=None) -> str:
        """Columns ``sim_index, model, theta_1.., distance, accepted``."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        d = self.bank.thetas.shape[1]
        w.writerow(["sim_index", "model"] + [f"theta_{k + 1}" for k in range(d)]
                   + ["distance", "accepted"])
        acc = np.zeros(len(self.bank), dtype=bool)
        acc[self.accepted] = True
        for i in range(len(self.bank)):
            th = ["" if np.isnan(t) else repr(float(t)) for t in self.bank.thetas[i]]
            w.writerow([i, int(self.bank.models[i])] + th
                       + [repr(float(self.distances[i])), int(acc[i])])
        return buf.getvalue() if fh is None else ""


def rejection_abc(bank: SimBank, obs_summary, n_accept: int, sd=None) -> AbcResult:
    """Accept the ``n_accept`` records nearest to ``obs_summary``.

    Ties are broken by ascending ``sim_index``. ``sd`` defaults to
    :func:`estimate_sds` on the bank (constant components dropped).
    """
    if bank.summaries is None or len(bank) == 0:
        raise ValueError("rejection ABC needs a non-empty bank with summaries")
    if not 1 <= n_accept <= len(bank):
        raise ValueError(f"n_accept must be in [1, {len(bank)}], got {n_accept}")
    obs = np.atleast_1d(np.asarray(obs_summary, dtype=float))
    if obs.shape[0] != bank.summaries.shape[1]:
        raise ValueError(
            f"observed summary has length {obs.shape[0]}, bank has {bank.summaries.shape[1]}")
    if sd is None:
        sd, kept = estimate_sds(bank)
    else:
        sd = np.asarray(sd, dtype=float)
        kept = np.arange(bank.summaries.shape[1])
    dist = scaled_distance(bank.summaries[:, kept], obs[kept], sd)
    order = np.argsort(dist, kind="stable")
    accepted = order[:n_accept]
    counts = np.bincount(bank.models[accepted], minlength=bank.n_models)
    return AbcResult(bank=bank, obs_summary=obs, accepted=accepted, distances=dist,
                     h=float(dist[accepted[-1]]), counts=counts, sd=sd, kept=kept)


def _counts(result_or_counts) -> np.ndarray:
    if isinstance(result_or_counts, AbcResult):
        return result_or_counts.counts
    return np.asarray(result_or_counts)


def posterior_estimates(result, prior=None, scheme: Optional[str] = None) -> np.ndarray:
    """Posterior model probabilities from acceptance counts.

    Uniform-models banks are reweighted by the model prior:
    ``n_i p_i / sum_j n_j p_j``. Prior-weighted banks give ``n_i / sum n_j``.
    """
    counts = _counts(result).astype(float)
    if scheme is None:
        scheme = result.scheme if isinstance(result, AbcResult) else "uniform_models"
    if counts.sum() <= 0:
        raise ValueError("no acceptances")
    if scheme == "prior_weights":
        w = counts
    elif prior is None or np.ptp(np.asarray(prior, dtype=float)) == 0:
        # a uniform prior cancels; skipping it keeps count ratios exact
        w = counts
    else:
        w = counts * np.asarray(prior, dtype=float)
        if w.sum() <= 0:
            raise ValueError("accepted models all have zero prior mass")
    return w / w.sum()


def bayes_factor(result, i: int, j: int) -> Fraction:
    """``n_i / n_j`` as an exact fraction.

    Raises :class:`UndefinedBayesFactor` when ``n_j == 0``.
    """
    if isinstance(result, AbcResult) and result.scheme != "uniform_models":
        raise ValueError("count ratios estimate Bayes factors only for uniform_models banks")
    counts = _counts(result)
    if counts[j] == 0:
        raise UndefinedBayesFactor(f"model {j} has no acceptances (n_{i}={counts[i]})")
    return Fraction(int(counts[i]), int(counts[j]))
