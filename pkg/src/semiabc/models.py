"""Example models for ABC model choice.

Each model couples a prior with an observation distribution. Data are
``n`` i.i.d. draws given the parameter. Where the evidence
``log int p(x | theta) p(theta) dtheta`` is tractable it is exposed via
:meth:`ModelSpec.exact_log_marginal`.

Registered ids: ``A1`` Poisson/Exp(1), ``A2`` Geometric/Unif(0,1),
``A3`` Binomial(10)/Beta(1,9), ``B1`` Laplace(theta, 1/sqrt 2)/N(0, 2^2),
``B2`` Normal(theta, 1)/N(0, 2^2), ``C1`` gk(0,1,0,k)/Unif(-0.5,5) and
``C2`` gk(0,1,g,k)/Unif([0,4] x [-0.5,5]).

The geometric model counts failures before the first success, so its
support is ``{0, 1, 2, ...}`` with pmf ``theta (1 - theta)^x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, special, stats

__all__ = [
    "DomainError",
    "UnsupportedModelError",
    "ModelSpec",
    "MODELS",
    "get_model",
    "get_models",
    "gk_quantile",
    "laplace_log_marginal",
]

LAPLACE_SCALE = 1.0 / math.sqrt(2.0)
GK_C = 0.8


class DomainError(ValueError):
    """Parameter outside the model's support."""


class UnsupportedModelError(NotImplementedError):
    """The model has no tractable marginal likelihood."""


@dataclass(frozen=True)
class ModelSpec:
    """A generative model: independent per-parameter priors plus a simulator.

    ``simulator(thetas, n, rng)`` is vectorised: ``thetas`` has shape
    ``(m, param_dim)`` and the result has shape ``(m, n)``.
    """

    id: str
    param_names: tuple
    priors: tuple  # frozen scipy distributions, one per parameter
    samplers: tuple  # (rng, size) -> ndarray, one per parameter
    support: tuple  # ((lo, hi), ...) closed intervals
    simulator: Callable[[np.ndarray, int, np.random.Generator], np.ndarray]
    log_marginal: Optional[Callable[[np.ndarray], float]] = field(default=None, repr=False)
    discrete: bool = False

    @property
    def param_dim(self) -> int:
        return len(self.param_names)

    @property
    def has_exact_marginal(self) -> bool:
        return self.log_marginal is not None

    def sample_prior(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """Draw from the prior. Returns ``(param_dim,)`` or ``(size, param_dim)``."""
        m = 1 if size is None else size
        out = np.column_stack([draw(rng, m) for draw in self.samplers])
        return out[0] if size is None else out

    def prior_log_density(self, theta) -> float:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if not self.in_support(theta):
            return -math.inf
        return float(sum(p.logpdf(t) for p, t in zip(self.priors, theta)))

    def prior_cdf(self, index: int, value: float) -> float:
        return float(self.priors[index].cdf(value))

    def in_support(self, theta) -> bool:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if theta.shape[1] != self.param_dim:
            return False
        lo = np.array([s[0] for s in self.support])
        hi = np.array([s[1] for s in self.support])
        return bool(np.all((theta >= lo) & (theta <= hi)))

    def simulate(self, theta, n: int, rng: np.random.Generator) -> np.ndarray:
        """Simulate one dataset of ``n`` draws at parameter ``theta``."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return self.simulate_many(theta[None, :], n, rng)[0]

    def simulate_many(self, thetas: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float).reshape(-1, self.param_dim)
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        if not self.in_support(thetas):
            raise DomainError(f"parameter outside support of {self.id}: {self.support}")
        return self.simulator(thetas, n, rng)

    def exact_log_marginal(self, data) -> float:
        if self.log_marginal is None:
            raise UnsupportedModelError(f"model {self.id} has no tractable marginal likelihood")
        return float(self.log_marginal(np.asarray(data, dtype=float).ravel()))


def gk_quantile(u, g, k, a: float = 0.0, b: float = 1.0, c: float = GK_C):
    """g-and-k quantile function evaluated at probabilities ``u``.

    ``(1 - exp(-g z)) / (1 + exp(-g z))`` is written as ``tanh(g z / 2)``.
    """
    z = special.ndtri(u)
    return a + b * (1.0 + c * np.tanh(0.5 * g * z)) * (1.0 + z * z) ** k * z


def _open_unit(rng: np.random.Generator, shape) -> np.ndarray:
    # strictly inside (0, 1) so ndtri stays finite
    return (rng.integers(0, 2**53, size=shape) + 0.5) / 2.0**53


# -- simulators ---------------------------------------------------------------

def _sim_poisson(th, n, rng):
    return rng.poisson(th[:, :1], size=(th.shape[0], n)).astype(float)


def _sim_geometric(th, n, rng):
    return (rng.geometric(th[:, :1], size=(th.shape[0], n)) - 1).astype(float)


def _sim_binomial10(th, n, rng):
    return rng.binomial(10, th[:, :1], size=(th.shape[0], n)).astype(float)


def _sim_laplace(th, n, rng):
    return rng.laplace(th[:, :1], LAPLACE_SCALE, size=(th.shape[0], n))


def _sim_normal(th, n, rng):
    return rng.normal(th[:, :1], 1.0, size=(th.shape[0], n))


def _sim_gk_k(th, n, rng):
    u = _open_unit(rng, (th.shape[0], n))
    return gk_quantile(u, 0.0, th[:, :1])


def _sim_gk_gk(th, n, rng):
    u = _open_unit(rng, (th.shape[0], n))
    return gk_quantile(u, th[:, :1], th[:, 1:2])


# -- closed-form evidences ----------------------------------------------------

def _outside_counts(x, upper=math.inf):
    return bool(np.any((x < 0) | (x > upper) | (x != np.floor(x))))


def _lm_poisson_exp(x):
    if _outside_counts(x):
        return -math.inf
    n, s = x.size, x.sum()
    return special.gammaln(s + 1) - (s + 1) * math.log(n + 1) - special.gammaln(x + 1).sum()


def _lm_geometric_unif(x):
    if _outside_counts(x):
        return -math.inf
    return special.betaln(x.size + 1, x.sum() + 1)


def _lm_binomial_beta(x):
    if _outside_counts(x, 10):
        return -math.inf
    n, s = x.size, x.sum()
    log_choose = special.gammaln(11) - special.gammaln(x + 1) - special.gammaln(11 - x)
    return log_choose.sum() + special.betaln(1 + s, 9 + 10 * n - s) - special.betaln(1, 9)


def _lm_normal_normal(x, prior_var=4.0):
    # x ~ N(0, I + prior_var * 11^T)
    n, s = x.size, x.sum()
    denom = 1.0 + prior_var * n
    quad = (x * x).sum() - prior_var * s * s / denom
    return -0.5 * n * math.log(2 * math.pi) - 0.5 * math.log(denom) - 0.5 * quad


def laplace_log_marginal(x, prior_sd: float = 2.0, half_width: float = 40.0,
                         epsrel: float = 1e-12) -> float:
    """Evidence of Laplace(theta, 1/sqrt 2) data under a N(0, prior_sd^2) prior.

    Adaptive Gauss-Kronrod over ``theta`` in a window around the data
    midrange, with the log-integrand shifted by its maximum. Data points are
    passed as breakpoints because the log-likelihood has kinks there.
    """
    x = np.sort(np.asarray(x, dtype=float).ravel())
    n = x.size
    const = -n * math.log(2 * LAPLACE_SCALE) - math.log(prior_sd) - 0.5 * math.log(2 * math.pi)

    def log_f(t):
        return const - np.abs(x - t).sum() / LAPLACE_SCALE - 0.5 * (t / prior_sd) ** 2

    mid = 0.5 * (x[0] + x[-1])
    lo, hi = mid - half_width, mid + half_width
    opt = optimize.minimize_scalar(lambda t: -log_f(t), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    # concave integrand: the best of the optimiser and the kinks is the max
    cand = np.concatenate([[opt.x], x[(x > lo) & (x < hi)]])
    vals = np.array([log_f(t) for t in cand])
    shift = float(vals.max())
    mode = float(cand[vals.argmax()])

    breaks = np.unique(np.concatenate([[mode], x[(x > lo) & (x < hi)]]))
    val, _ = integrate.quad(lambda t: math.exp(log_f(t) - shift), lo, hi,
                            points=breaks, limit=max(200, 4 * breaks.size),
                            epsabs=0.0, epsrel=epsrel)
    return shift + math.log(val)


def _uniform_sampler(lo, hi):
    def draw(rng, m):
        return rng.uniform(lo, hi, size=m)
    return draw


MODELS = {
    "A1": ModelSpec(
        id="A1", param_names=("theta",), priors=(stats.expon(),),
        samplers=(lambda rng, m: rng.exponential(1.0, size=m),),
        support=((0.0, math.inf),), simulator=_sim_poisson,
        log_marginal=_lm_poisson_exp, discrete=True),
    "A2": ModelSpec(
        id="A2", param_names=("theta",), priors=(stats.uniform(0.0, 1.0),),
        # (0, 1]: geometric needs theta > 0
        samplers=(lambda rng, m: 1.0 - rng.random(size=m),),
        support=((np.nextafter(0.0, 1.0), 1.0),), simulator=_sim_geometric,
        log_marginal=_lm_geometric_unif, discrete=True),
    "A3": ModelSpec(
        id="A3", param_names=("theta",), priors=(stats.beta(1, 9),),
        samplers=(lambda rng, m: rng.beta(1.0, 9.0, size=m),),
        support=((0.0, 1.0),), simulator=_sim_binomial10,
        log_marginal=_lm_binomial_beta, discrete=True),
    "B1": ModelSpec(
        id="B1", param_names=("theta",), priors=(stats.norm(0.0, 2.0),),
        samplers=(lambda rng, m: rng.normal(0.0, 2.0, size=m),),
        support=((-math.inf, math.inf),), simulator=_sim_laplace,
        log_marginal=laplace_log_marginal),
    "B2": ModelSpec(
        id="B2", param_names=("theta",), priors=(stats.norm(0.0, 2.0),),
        samplers=(lambda rng, m: rng.normal(0.0, 2.0, size=m),),
        support=((-math.inf, math.inf),), simulator=_sim_normal,
        log_marginal=_lm_normal_normal),
    "C1": ModelSpec(
        id="C1", param_names=("k",), priors=(stats.uniform(-0.5, 5.5),),
        samplers=(_uniform_sampler(-0.5, 5.0),),
        support=((-0.5, 5.0),), simulator=_sim_gk_k),
    "C2": ModelSpec(
        id="C2", param_names=("g", "k"),
        priors=(stats.uniform(0.0, 4.0), stats.uniform(-0.5, 5.5)),
        samplers=(_uniform_sampler(0.0, 4.0), _uniform_sampler(-0.5, 5.0)),
        support=((0.0, 4.0), (-0.5, 5.0)), simulator=_sim_gk_gk),
}


def get_model(model_id: str) -> ModelSpec:
    try:
        return MODELS[model_id]
    except KeyError:
        raise KeyError(f"unknown model id {model_id!r}; known: {sorted(MODELS)}") from None


def get_models(ids: Sequence[str]) -> list:
    return [get_model(i) for i in ids]
