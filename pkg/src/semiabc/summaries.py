"""Summary statistics of raw datasets.

All functions accept a single dataset ``(n,)`` or a batch ``(m, n)`` and
return ``(d,)`` or ``(m, d)`` accordingly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

__all__ = [
    "DimensionError",
    "s10",
    "literature_summary",
    "basis_expand",
    "FittedSummary",
    "eval_fitted",
    "BASES",
    "LOGIT_CLAMP",
]

LOGIT_CLAMP = 30.0
S10_RANKS = np.arange(5, 100, 10)  # 1-indexed ranks 5, 15, ..., 95


class DimensionError(ValueError):
    """Dataset or coefficient shapes do not agree."""


def _batch(data):
    x = np.asarray(data, dtype=float)
    if x.ndim not in (1, 2):
        raise DimensionError(f"expected 1-D or 2-D data, got shape {x.shape}")
    return np.atleast_2d(x), x.ndim == 1


def _require_n(x, n, what):
    if x.shape[1] != n:
        raise DimensionError(f"{what} needs datasets of length {n}, got {x.shape[1]}")


def s10(data) -> np.ndarray:
    """Order statistics ``x(5), x(15), ..., x(95)`` of a 100-point dataset."""
    x, single = _batch(data)
    _require_n(x, 100, "s10")
    out = np.sort(x, axis=1)[:, S10_RANKS - 1]
    return out[0] if single else out


def literature_summary(example: str, data) -> np.ndarray:
    """Hand-picked two-dimensional summaries.

    Example ``"B"``: 4th and 6th central sample moments. Example ``"C"``:
    order statistics at ranks ``ceil(0.1 n)`` and ``ceil(0.9 n)``.
    """
    x, single = _batch(data)
    n = x.shape[1]
    if n < 10:
        raise DimensionError(f"literature summaries need n >= 10, got {n}")
    if example == "B":
        dev = x - x.mean(axis=1, keepdims=True)
        d2 = dev * dev
        out = np.column_stack([(d2 * d2).mean(axis=1), (d2 * d2 * d2).mean(axis=1)])
    elif example == "C":
        xs = np.sort(x, axis=1)
        lo, hi = math.ceil(0.1 * n), math.ceil(0.9 * n)
        out = xs[:, [lo - 1, hi - 1]]
    else:
        raise ValueError(f"no literature summary for example {example!r}")
    return out[0] if single else out


def basis_expand(data) -> np.ndarray:
    """Regression covariates ``(1, x(1), ..., x(100))``."""
    x, single = _batch(data)
    _require_n(x, 100, "basis_expand")
    out = np.hstack([np.ones((x.shape[0], 1)), np.sort(x, axis=1)])
    return out[0] if single else out


BASES = {"order_stats_101": basis_expand}


@dataclass
class FittedSummary:
    """Model-choice summary built from pairwise logistic fits.

    Row ``r`` of ``coefficients`` belongs to the model pair ``pairs[r]`` and
    gives the linear predictor (log-odds of the first model of the pair)
    on the basis. Evaluation returns these logits clamped to
    ``[-clamp, clamp]``.
    """

    pairs: list
    coefficients: np.ndarray
    basis: Union[str, Callable] = "order_stats_101"
    clamp: float = LOGIT_CLAMP
    fits: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.coefficients = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        self.pairs = [tuple(int(i) for i in p) for p in self.pairs]
        if self.coefficients.shape[0] != len(self.pairs):
            raise DimensionError(
                f"{len(self.pairs)} pairs but {self.coefficients.shape[0]} coefficient rows")

    @property
    def output_dim(self) -> int:
        return len(self.pairs)

    def _basis_fn(self):
        if callable(self.basis):
            return self.basis
        try:
            return BASES[self.basis]
        except KeyError:
            raise ValueError(f"unknown basis {self.basis!r}") from None

    def __call__(self, data) -> np.ndarray:
        return self.evaluate(data)

    def evaluate(self, data) -> np.ndarray:
        x, single = _batch(data)
        f = np.atleast_2d(self._basis_fn()(x))
        if f.shape[1] != self.coefficients.shape[1]:
            raise DimensionError(
                f"basis has {f.shape[1]} columns, coefficients have {self.coefficients.shape[1]}")
        eta = np.clip(f @ self.coefficients.T, -self.clamp, self.clamp)
        return eta[0] if single else eta

    def to_json(self) -> str:
        if callable(self.basis):
            raise ValueError("only named bases can be serialised")
        return json.dumps({
            "pairs": [list(p) for p in self.pairs],
            "coefficients": self.coefficients.tolist(),
            "basis": self.basis,
        })

    @classmethod
    def from_json(cls, text: str) -> "FittedSummary":
        obj = json.loads(text)
        return cls(pairs=obj["pairs"], coefficients=np.array(obj["coefficients"], dtype=float),
                   basis=obj["basis"])


def eval_fitted(summary: FittedSummary, data) -> np.ndarray:
    return summary.evaluate(data)
