"""Semi-automatic ABC for model choice.

The pipeline, with truncation enabled:

1. pilot rejection ABC with an ad-hoc summary (default ``s10``);
2. per-model hypercube training regions spanning the accepted parameters;
3. simulation from the models truncated to those regions;
4. pairwise logistic regressions of model on ``basis_expand(x)``, whose
   linear predictors form the summary ``S(x)``;
5. main rejection ABC with ``S``, reusing the training bank;
6. correction of the truncated-model estimates by each region's prior mass.

With truncation disabled the pilot is skipped, regions are the full prior
supports and the whole simulation budget goes to training.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .regression import DEFAULT_RIDGE, DegenerateFitError, fit_logistic
from .rejection import SimBank, posterior_estimates, rejection_abc, simulate_bank
from .summaries import FittedSummary, basis_expand, s10

__all__ = [
    "TrainingRegion",
    "PipelineConfig",
    "RegionTooSmallError",
    "full_support_region",
    "region_from_samples",
    "sample_truncated_prior",
    "run_pilot",
    "simulate_truncated",
    "fit_model_choice_summaries",
    "truncation_correct",
    "PipelineOutput",
    "semiauto_pipeline",
]

log = logging.getLogger(__name__)

MIN_REGION_MASS = 1e-4


class RegionTooSmallError(ValueError):
    """Prior rejection sampling inside a region would almost never accept."""


@dataclass(frozen=True)
class TrainingRegion:
    bounds: tuple  # ((lo, hi), ...) per parameter
    prior_mass: float

    def contains(self, thetas) -> np.ndarray:
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.all((th >= lo) & (th <= hi), axis=1)

    def to_dict(self) -> dict:
        def fin(v):
            return float(v) if math.isfinite(v) else None
        return {"bounds": [[fin(lo), fin(hi)] for lo, hi in self.bounds],
                "prior_mass": float(self.prior_mass)}


def _prior_mass(model, bounds) -> float:
    mass = 1.0
    for k, (lo, hi) in enumerate(bounds):
        mass *= model.prior_cdf(k, hi) - model.prior_cdf(k, lo)
    return mass


def full_support_region(model) -> TrainingRegion:
    return TrainingRegion(bounds=tuple(tuple(b) for b in model.support), prior_mass=1.0)


def region_from_samples(model, thetas, widen: float = 1e-6) -> TrainingRegion:
    """Hypercube spanning ``thetas`` componentwise, clipped to the support.

    A degenerate interval ``[c, c]`` is widened to ``c +- widen * max(1, |c|)``.
    """
    th = np.atleast_2d(np.asarray(thetas, dtype=float))[:, :model.param_dim]
    bounds = []
    for k, (slo, shi) in enumerate(model.support):
        lo, hi = float(th[:, k].min()), float(th[:, k].max())
        if lo == hi:
            pad = widen * max(1.0, abs(lo))
            lo, hi = lo - pad, hi + pad
        bounds.append((max(lo, slo), min(hi, shi)))
    bounds = tuple(bounds)
    return TrainingRegion(bounds=bounds, prior_mass=_prior_mass(model, bounds))


def sample_truncated_prior(model, region: TrainingRegion, size: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` parameters from the prior restricted to ``region`` by rejection."""
    if region.prior_mass < MIN_REGION_MASS:
        raise RegionTooSmallError(
            f"region for {model.id} has prior mass {region.prior_mass:.3g} < {MIN_REGION_MASS}; "
            "inflate the region")
    if region.prior_mass >= 1.0:
        return model.sample_prior(rng, size)
    out = []
    need = size
    while need > 0:
        batch = min(int(math.ceil(1.2 * need / region.prior_mass)) + 16, 1_000_000)
        th = model.sample_prior(rng, batch)
        th = th[region.contains(th)][:need]
        out.append(th)
        need -= th.shape[0]
    return np.vstack(out)


@dataclass
class PipelineConfig:
    total_sims: int = 20_000
    pilot_fraction: float = 0.25
    n_accept_pilot: int = 100
    n_accept_main: int = 100
    pilot_summary: Callable = s10
    reuse_training_for_main: bool = True
    truncate: bool = True
    n_obs: int = 100
    ridge: float = DEFAULT_RIDGE
    basis: Callable = basis_expand

    @property
    def n_pilot(self) -> int:
        return int(round(self.total_sims * self.pilot_fraction))

    def validate(self) -> None:
        if self.total_sims < 1 or self.n_accept_main < 1 or self.n_accept_pilot < 1:
            raise ValueError("simulation and acceptance counts must be positive")
        if not 0.0 < self.pilot_fraction < 1.0:
            raise ValueError("pilot_fraction must lie in (0, 1)")


def _seed_seq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def run_pilot(models: Sequence, obs, cfg: PipelineConfig, rng: np.random.Generator):
    """Pilot ABC from the untruncated priors; returns ``(result, regions)``.

    A model's region falls back to its full prior support when the pilot
    accepts none of its records or when the spanned hypercube has prior mass
    below ``MIN_REGION_MASS``.
    """
    bank = simulate_bank(models, cfg.n_pilot, cfg.n_obs, rng).with_summaries(cfg.pilot_summary)
    result = rejection_abc(bank, cfg.pilot_summary(np.asarray(obs, dtype=float)),
                           cfg.n_accept_pilot)
    acc_models = bank.models[result.accepted]
    regions = []
    for i, model in enumerate(models):
        th = bank.thetas[result.accepted[acc_models == i]]
        if th.shape[0] == 0:
            log.info("pilot accepted nothing from %s; using its full prior support", model.id)
            regions.append(full_support_region(model))
            continue
        region = region_from_samples(model, th)
        if region.prior_mass < MIN_REGION_MASS:
            # too narrow to sample by rejection, typically a single acceptance
            log.info("pilot region for %s has prior mass %.3g; using its full prior support",
                     model.id, region.prior_mass)
            region = full_support_region(model)
        regions.append(region)
    return result, regions


def simulate_truncated(models: Sequence, regions: Sequence[TrainingRegion], n_sims: int,
                       rng: np.random.Generator, n_obs: int = 100) -> SimBank:
    """Equal-count bank from the models truncated to ``regions``."""
    def sampler(i, size, rng_):
        return sample_truncated_prior(models[i], regions[i], size, rng_)
    return simulate_bank(models, n_sims, n_obs, rng, theta_sampler=sampler)


def fit_model_choice_summaries(bank: SimBank, basis: Callable = basis_expand,
                               ridge: float = DEFAULT_RIDGE) -> FittedSummary:
    """One logistic regression of ``I[model == i]`` per model pair ``i < j``.

    A pair whose fit is degenerate gets zero coefficients (constant summary).
    """
    if bank.data is None:
        raise ValueError("bank holds no raw data")
    present = np.unique(bank.models)
    if present.size < 2:
        raise DegenerateFitError("bank contains fewer than two models")
    F = np.atleast_2d(basis(bank.data))
    pairs = list(itertools.combinations(range(bank.n_models), 2))
    coefs = np.zeros((len(pairs), F.shape[1]))
    fits = []
    for r, (i, j) in enumerate(pairs):
        rows = np.flatnonzero((bank.models == i) | (bank.models == j))
        y = (bank.models[rows] == i).astype(float)
        try:
            fit = fit_logistic(F[rows], y, ridge=ridge)
        except DegenerateFitError as exc:
            log.warning("pair (%d, %d): %s; summary set to zero", i, j, exc)
            fits.append({"pair": [i, j], "deviance": None, "converged": False,
                         "iterations": 0, "degenerate": True})
            continue
        if not fit.converged:
            log.debug("pair (%d, %d) stopped after %d iterations without meeting tolerance",
                      i, j, fit.iterations)
        coefs[r] = fit.beta
        fits.append({"pair": [i, j], "deviance": fit.deviance, "converged": fit.converged,
                     "iterations": fit.iterations, "degenerate": False})
    return FittedSummary(pairs=pairs, coefficients=coefs,
                         basis=basis if basis is not basis_expand else "order_stats_101",
                         fits=fits)


def truncation_correct(main, regions, prior=None) -> np.ndarray:
    """Model probabilities for the original models from a truncated-model analysis.

    Evidence of each model is estimated as the truncated evidence times the
    region's prior mass ``r_i`` (posterior mass of the region taken as 1).
    ``regions`` may be :class:`TrainingRegion` objects or the ``r_i`` values.
    """
    r = np.array([g.prior_mass if isinstance(g, TrainingRegion) else float(g) for g in regions])
    w = posterior_estimates(main, prior) * r
    total = w.sum()
    if not total > 0:
        raise ValueError("all truncation-corrected weights are zero")
    return w / total


@dataclass
class PipelineOutput:
    probabilities: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    summary: Optional[FittedSummary] = field(default=None, repr=False)
    main: object = field(default=None, repr=False)
    pilot: object = field(default=None, repr=False)

    def __iter__(self):
        # unpacks as (probabilities, diagnostics)
        return iter((self.probabilities, self.diagnostics))


def semiauto_pipeline(models: Sequence, obs, cfg: Optional[PipelineConfig] = None, seed=0,
                      prior=None, regions: Optional[Sequence[TrainingRegion]] = None
                      ) -> PipelineOutput:
    """Run semi-automatic ABC end to end.

    ``regions`` skips the pilot and uses the given training regions with the
    full simulation budget; passing full-support regions reproduces the
    untruncated run exactly. The pilot and training stages draw from
    independent child streams of ``seed``.
    """
    cfg = cfg or PipelineConfig()
    cfg.validate()
    obs = np.asarray(obs, dtype=float)
    pilot_ss, train_ss, main_ss = _seed_seq(seed).spawn(3)
    diag = {"models": [m.id for m in models], "truncate": cfg.truncate}

    pilot = None
    if regions is None and cfg.truncate:
        pilot, regions = run_pilot(models, obs, cfg, np.random.default_rng(pilot_ss))
        n_train = cfg.total_sims - cfg.n_pilot
        diag["pilot"] = {"n_sims": cfg.n_pilot, "h": pilot.h, "counts": pilot.counts.tolist()}
    else:
        if regions is None:
            regions = [full_support_region(m) for m in models]
        n_train = cfg.total_sims
        diag["pilot"] = None
    regions = list(regions)
    diag["regions"] = [dict(model=m.id, **g.to_dict()) for m, g in zip(models, regions)]

    train = simulate_truncated(models, regions, n_train, np.random.default_rng(train_ss),
                               n_obs=cfg.n_obs)
    summary = fit_model_choice_summaries(train, basis=cfg.basis, ridge=cfg.ridge)
    diag["fits"] = summary.fits

    if cfg.reuse_training_for_main:
        main_bank = train
    else:
        main_bank = simulate_truncated(models, regions, n_train, np.random.default_rng(main_ss),
                                       n_obs=cfg.n_obs)
    main_bank = main_bank.with_summaries(summary)
    main = rejection_abc(main_bank, summary(obs), cfg.n_accept_main)
    probs = truncation_correct(main, regions, prior)
    diag["main"] = {"n_sims": len(main_bank), "h": main.h, "counts": main.counts.tolist(),
                    "kept_components": main.kept.tolist()}
    diag["probabilities"] = probs.tolist()
    return PipelineOutput(probabilities=probs, diagnostics=diag, summary=summary,
                          main=main, pilot=pilot)
