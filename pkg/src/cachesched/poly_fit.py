"""Polynomial feature expansion and least-squares fitting of step differences.

Two model families share one code path:

* ``multivariate12``: degree-4 monomials of the embedding difference ``x`` and
  the normalised step index ``t``.
* ``univariate5``: ``1, x, ..., x**4``, the single-input rescaling baseline.

The step index fed to the expansion is ``t_raw / t_normalizer``; the
normalizer (default ``T - 1``) travels with the fitted model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ValidationError
from .trace_model import COEFF_COUNT, MULTIVARIATE12, UNIVARIATE5, FitModel, TimestepTrace

FEATURE_NAMES = ("1", "x", "t", "x^2", "t^2", "xt", "x^3", "t^3", "x^2t", "xt^2", "x^4", "t^4")
BASELINE_NAMES = ("1", "x", "x^2", "x^3", "x^4")


def _finite(*values):
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"non-finite input {v!r}")


def expand_features(x: float, t: float) -> np.ndarray:
    _finite(x, t)
    return np.array([
        1.0, x, t,
        x * x, t * t, x * t,
        x ** 3, t ** 3, x * x * t, x * t * t,
        x ** 4, t ** 4,
    ])


def expand_baseline(x: float) -> np.ndarray:
    _finite(x)
    return np.array([1.0, x, x * x, x ** 3, x ** 4])


def design_matrix(x, t, kind: str) -> np.ndarray:
    """Row-wise expansion of arrays ``x`` and ``t`` (already normalised)."""
    x = np.asarray(x, dtype=float).ravel()
    t = np.asarray(t, dtype=float).ravel()
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(t))):
        raise DomainError("non-finite value in design inputs")
    if kind == MULTIVARIATE12:
        return np.column_stack([
            np.ones_like(x), x, t,
            x ** 2, t ** 2, x * t,
            x ** 3, t ** 3, x ** 2 * t, x * t ** 2,
            x ** 4, t ** 4,
        ])
    if kind == UNIVARIATE5:
        return np.column_stack([np.ones_like(x), x, x ** 2, x ** 3, x ** 4])
    raise ValidationError(f"unknown model kind {kind!r}")


@dataclass(frozen=True)
class FitDataset:
    x: np.ndarray
    t_raw: np.ndarray
    y: np.ndarray
    t_normalizer: float
    num_steps: int | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        t = np.asarray(self.t_raw, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if not (x.size == t.size == y.size):
            raise ValidationError("x, t_raw and y must have equal lengths")
        if x.size < 1:
            raise ValidationError("dataset is empty")
        for name, arr in (("x", x), ("t_raw", t), ("y", y)):
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"non-finite value in {name}")
            if np.any(arr < 0):
                raise ValidationError(f"negative value in {name}")
        if np.any(t != np.round(t)):
            raise ValidationError("t_raw must hold integer step indices")
        if self.num_steps is not None and np.any(t >= self.num_steps):
            raise ValidationError(f"t_raw must be < {self.num_steps}")
        if not (math.isfinite(self.t_normalizer) and self.t_normalizer > 0):
            raise ValidationError("t_normalizer must be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t_raw", t)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t_normalizer", float(self.t_normalizer))

    def __len__(self):
        return self.x.size

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[float, int, float]], t_normalizer: float,
                  num_steps: int | None = None) -> "FitDataset":
        if len(rows) == 0:
            raise ValidationError("dataset is empty")
        x, t, y = zip(*rows)
        return cls(np.array(x, float), np.array(t, float), np.array(y, float), t_normalizer, num_steps)

    @classmethod
    def from_traces(cls, traces: Sequence[TimestepTrace], t_normalizer: float | None = None) -> "FitDataset":
        """Pairs ``(x[t], t, y[t])`` for every step ``t >= 1`` of traces that carry ``y``."""
        rows = []
        num_steps = max((tr.num_steps for tr in traces), default=0)
        for tr in traces:
            if tr.y is None:
                continue
            rows.extend((tr.x[t], t, tr.y[t]) for t in range(1, tr.num_steps))
        if not rows:
            raise ValidationError("no trace provides output differences beyond step 0")
        if t_normalizer is None:
            t_normalizer = default_normalizer(num_steps)
        return cls.from_rows(rows, t_normalizer, num_steps)

    def design(self, kind: str) -> np.ndarray:
        return design_matrix(self.x, self.t_raw / self.t_normalizer, kind)


def default_normalizer(num_steps: int) -> float:
    return float(max(num_steps - 1, 1))


def fit(dataset: FitDataset, kind: str = MULTIVARIATE12) -> FitModel:
    """Ordinary least squares on the expanded features.

    SVD-based, so rank-deficient problems get the minimum-norm solution.
    """
    if len(dataset) == 0:
        raise ValidationError("dataset is empty")
    A = dataset.design(kind)
    coeffs, *_ = np.linalg.lstsq(A, dataset.y, rcond=None)
    return FitModel(kind=kind, coeffs=tuple(float(c) for c in coeffs), t_normalizer=dataset.t_normalizer)


def predict_many(model: FitModel, x, t_raw) -> np.ndarray:
    t_raw = np.asarray(t_raw, dtype=float)
    if np.any(t_raw < 0):
        raise DomainError("t_raw must be non-negative")
    A = design_matrix(x, t_raw / model.t_normalizer, model.kind)
    return np.maximum(A @ np.asarray(model.coeffs), 0.0)


def predict(model: FitModel, x: float, t_raw: int) -> float:
    """Estimated output difference at one step, clamped at zero."""
    if t_raw < 0:
        raise DomainError("t_raw must be non-negative")
    if model.kind == MULTIVARIATE12:
        feats = expand_features(x, t_raw / model.t_normalizer)
    else:
        feats = expand_baseline(x)
    return max(float(feats @ np.asarray(model.coeffs)), 0.0)


def mse(model: FitModel, dataset: FitDataset) -> float:
    if len(dataset) == 0:
        raise ValidationError("dataset is empty")
    residual = predict_many(model, dataset.x, dataset.t_raw) - dataset.y
    return float(np.mean(residual ** 2))


def zero_model(kind: str = MULTIVARIATE12, t_normalizer: float = 1.0) -> FitModel:
    return FitModel(kind=kind, coeffs=(0.0,) * COEFF_COUNT[kind], t_normalizer=t_normalizer)
