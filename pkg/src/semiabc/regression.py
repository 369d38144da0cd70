"""Regression engines: logistic and multinomial (Newton/IRLS) and least squares.

Convention: column 0 of every design matrix is the intercept. The ridge
penalty never applies to it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.special import expit, logit, logsumexp

__all__ = [
    "DegenerateFitError",
    "RankDeficientError",
    "FitResult",
    "fit_logistic",
    "fit_multinomial",
    "fit_ols",
    "predict_logistic",
    "predict_multinomial",
    "DEFAULT_RIDGE",
]

log = logging.getLogger(__name__)

DEFAULT_RIDGE = 1e-6
MAX_HALVINGS = 40
MAX_IDLE = 3  # iterations without score improvement before giving up


class DegenerateFitError(ValueError):
    """The response or design carries no information to fit."""


class RankDeficientError(np.linalg.LinAlgError):
    pass


@dataclass
class FitResult:
    beta: np.ndarray
    converged: bool
    iterations: int
    deviance: float
    history: list = field(default_factory=list)  # penalised objective per iteration
    residuals: Optional[np.ndarray] = field(default=None, repr=False)


def _check_design(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"design must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("design matrix has non-finite entries")
    return X


def _penalty(p: int, ridge: float) -> np.ndarray:
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    pen = np.full(p, float(ridge))
    pen[0] = 0.0
    return pen


def _newton_step(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    # symmetric Jacobi scaling: order-statistic columns differ in scale by orders of magnitude
    d = np.sqrt(np.abs(np.diag(H)))
    d[d == 0] = 1.0
    Hs = H / np.outer(d, d)
    gs = g / d
    try:
        z = linalg.solve(Hs, gs, assume_a="pos", check_finite=False)
    except (linalg.LinAlgError, ValueError):
        z = linalg.lstsq(Hs, gs, check_finite=False)[0]
    if not np.all(np.isfinite(z)):
        z = linalg.lstsq(Hs, gs, check_finite=False)[0]
    return z / d


def _logistic_objective(X, y, beta, pen):
    eta = X @ beta
    # per-row loss written without cancellation and summed exactly, so the
    # objective still resolves the last Newton steps on large samples
    dev = 2.0 * math.fsum(np.logaddexp(0.0, np.where(y == 1.0, -eta, eta)))
    return dev + float(np.sum(pen * beta * beta)), dev, eta


def fit_logistic(X, y, ridge: float = 0.0, tol: float = 1e-8, max_iter: int = 100) -> FitResult:
    """Penalised logistic regression by IRLS with step-halving.

    Maximises ``loglik(beta) - ridge/2 * |beta[1:]|^2``. Convergence is
    declared when the max-norm of the penalised score is at most ``tol``.
    Iteration also stops, unconverged, after ``max_iter`` or at the
    floating-point floor: step-halving finds no non-increasing step, or
    ``MAX_IDLE`` iterations pass with neither a new smallest score nor a
    resolvable drop in the objective.
    """
    X = _check_design(X)
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    if y.size != n:
        raise ValueError(f"{n} rows but {y.size} responses")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("responses must be 0/1")
    ybar = y.mean()
    if ybar in (0.0, 1.0):
        raise DegenerateFitError("only one class present in the response")
    pen = _penalty(p, ridge)

    beta = np.zeros(p)
    if np.all(X[:, 0] == 1.0):
        beta[0] = logit(ybar)
    obj, dev, eta = _logistic_objective(X, y, beta, pen)
    history = [obj]
    converged = False
    best_score, idle, moved = math.inf, 0, True
    for it in range(max_iter):
        mu = expit(eta)
        score = X.T @ (y - mu) - pen * beta
        score_norm = float(np.max(np.abs(score)))
        if score_norm <= tol:
            converged = True
            break
        # near the optimum the objective cannot resolve Newton's progress, so a
        # falling score also counts as progress
        if score_norm < best_score or moved:
            best_score, idle = min(best_score, score_norm), 0
        else:
            idle += 1
            if idle >= MAX_IDLE:
                log.debug("logistic IRLS at floating-point floor (score %.3g)", score_norm)
                break
        Xw = X * np.sqrt(mu * (1.0 - mu))[:, None]
        H = Xw.T @ Xw + np.diag(pen)
        step = _newton_step(H, score)
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = beta + t * step
            obj_c, dev_c, eta_c = _logistic_objective(X, y, cand, pen)
            if obj_c <= obj:
                break
            t *= 0.5
        else:
            log.debug("logistic IRLS stalled after %d steps (objective %.12g)", it, obj)
            break
        moved = obj - obj_c > 1e-15 * max(1.0, abs(obj))
        beta, obj, dev, eta = cand, obj_c, dev_c, eta_c
        history.append(obj)
    else:
        mu = expit(eta)
        converged = bool(np.max(np.abs(X.T @ (y - mu) - pen * beta)) <= tol)
    return FitResult(beta=beta, converged=converged, iterations=len(history) - 1,
                     deviance=dev, history=history)


def predict_logistic(beta, X) -> np.ndarray:
    return expit(_check_design(X) @ np.asarray(beta, dtype=float))


def _softmax_ref(X, B):
    """Class probabilities with the last class as reference (zero logit)."""
    eta = np.hstack([X @ B.T, np.zeros((X.shape[0], 1))])
    return np.exp(eta - logsumexp(eta, axis=1, keepdims=True)), eta


def _multinomial_objective(X, Y, B, pen):
    P, eta = _softmax_ref(X, B)
    own = np.sum(Y * eta, axis=1, keepdims=True)
    dev = 2.0 * math.fsum(logsumexp(eta - own, axis=1))
    return dev + float(np.sum(pen[None, :] * B * B)), dev, P


def fit_multinomial(X, y, n_classes: Optional[int] = None, ridge: float = 0.0,
                    tol: float = 1e-8, max_iter: int = 100) -> FitResult:
    """Multinomial logistic regression by Newton's method with step-halving.

    ``y`` holds class indices ``0 .. n_classes-1``; the last class is the
    reference. ``beta`` has shape ``(n_classes - 1, p)``.
    """
    X = _check_design(X)
    y = np.asarray(y).ravel().astype(int)
    n, p = X.shape
    if y.size != n:
        raise ValueError(f"{n} rows but {y.size} responses")
    M = int(n_classes if n_classes is not None else y.max() + 1)
    if M < 2:
        raise DegenerateFitError("need at least two classes")
    counts = np.bincount(y, minlength=M)
    if counts.size > M or np.any(counts < 2):
        raise DegenerateFitError(f"every class needs at least two rows, counts={counts.tolist()}")
    if p > 1 and np.any(np.ptp(X[:, 1:], axis=0) == 0):
        raise DegenerateFitError("a covariate is constant across rows")
    pen = _penalty(p, ridge)
    Y = np.zeros((n, M))
    Y[np.arange(n), y] = 1.0

    B = np.zeros((M - 1, p))
    if np.all(X[:, 0] == 1.0):
        B[:, 0] = np.log(counts[:-1] / counts[-1])
    obj, dev, P = _multinomial_objective(X, Y, B, pen)
    history = [obj]
    converged = False
    K = M - 1
    best_score, idle, moved = math.inf, 0, True
    for it in range(max_iter):
        G = (Y[:, :K] - P[:, :K]).T @ X - pen[None, :] * B
        score_norm = float(np.max(np.abs(G)))
        if score_norm <= tol:
            converged = True
            break
        if score_norm < best_score or moved:
            best_score, idle = min(best_score, score_norm), 0
        else:
            idle += 1
            if idle >= MAX_IDLE:
                break
        H = np.empty((K * p, K * p))
        for a in range(K):
            for b in range(a, K):
                w = P[:, a] * ((a == b) - P[:, b])
                blk = (X * w[:, None]).T @ X
                H[a * p:(a + 1) * p, b * p:(b + 1) * p] = blk
                H[b * p:(b + 1) * p, a * p:(a + 1) * p] = blk.T
        H += np.diag(np.tile(pen, K))
        step = _newton_step(H, G.ravel()).reshape(K, p)
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = B + t * step
            obj_c, dev_c, P_c = _multinomial_objective(X, Y, cand, pen)
            if obj_c <= obj:
                break
            t *= 0.5
        else:
            break
        moved = obj - obj_c > 1e-15 * max(1.0, abs(obj))
        B, obj, dev, P = cand, obj_c, dev_c, P_c
        history.append(obj)
    else:
        G = (Y[:, :K] - P[:, :K]).T @ X - pen[None, :] * B
        converged = bool(np.max(np.abs(G)) <= tol)
    return FitResult(beta=B, converged=converged, iterations=len(history) - 1,
                     deviance=dev, history=history)


def predict_multinomial(beta, X) -> np.ndarray:
    return _softmax_ref(_check_design(X), np.atleast_2d(np.asarray(beta, dtype=float)))[0]


def fit_ols(X, y, rcond: float = 1e-10) -> FitResult:
    """Ordinary least squares via SVD.

    Raises :class:`RankDeficientError` when the smallest singular value is
    below ``rcond`` times the largest.
    """
    X = _check_design(X)
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    if y.size != n:
        raise ValueError(f"{n} rows but {y.size} responses")
    if n < p:
        raise RankDeficientError(f"{n} rows cannot determine {p} coefficients")
    if not np.all(np.isfinite(y)):
        raise ValueError("response has non-finite entries")
    beta, _, rank, sv = linalg.lstsq(X, y, cond=rcond, check_finite=False)
    if rank < p or sv[-1] <= rcond * sv[0]:
        raise RankDeficientError(f"design has rank {rank} < {p}")
    resid = y - X @ beta
    return FitResult(beta=beta, converged=True, iterations=1,
                     deviance=float(resid @ resid), residuals=resid)
