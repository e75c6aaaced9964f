"""Relative L1 step differences and dispersion statistics."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DegenerateError, DimensionError, DomainError, ValidationError

TOLERANCE = 1e-12


def l1_rel(current, next) -> float:
    """||current - next||_1 / ||next||_1.

    ``next`` is the reference (denominator) feature. In sampling order that
    is the previously computed step.
    """
    a = np.asarray(current, dtype=float).ravel()
    b = np.asarray(next, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 1:
        raise DimensionError("vectors must have at least one entry")
    denom = np.abs(b).sum()
    if not denom > TOLERANCE:
        raise DegenerateError(f"reference L1 norm {denom!r} is within {TOLERANCE} of zero")
    return float(np.abs(a - b).sum() / denom)


def sequence_rel_diffs(vectors: Sequence) -> list[float]:
    if len(vectors) < 2:
        raise ValidationError("need at least two vectors")
    out = []
    for i in range(len(vectors) - 1):
        try:
            out.append(l1_rel(vectors[i], vectors[i + 1]))
        except (DimensionError, DegenerateError) as exc:
            raise type(exc)(f"pair {i}: {exc}") from None
    return out


def step_diffs(features: Sequence) -> list[float]:
    """Trace-aligned differences for features listed in sampling order.

    Entry ``i`` is ``l1_rel(features[i], features[i - 1])``; entry 0 is the
    0.0 placeholder the trace schema reserves for the first step.
    """
    if len(features) < 1:
        raise ValidationError("need at least one feature vector")
    if len(features) == 1:
        return [0.0]
    # pairs reversed so the earlier step is the denominator
    return [0.0] + sequence_rel_diffs(list(features)[::-1])[::-1]


def coefficient_of_variation(samples) -> float:
    """Population standard deviation over mean."""
    values = np.asarray(samples, dtype=float).ravel()
    if values.size < 1:
        raise ValidationError("sample set is empty")
    if not np.all(np.isfinite(values)):
        raise DomainError("sample set contains non-finite values")
    mean = values.mean()
    if not mean > TOLERANCE:
        raise DegenerateError(f"sample mean {mean!r} is within {TOLERANCE} of zero")
    return float(values.std() / mean)


def per_step_cv(sequences) -> list[dict]:
    """CV across samples at every step (rows of ``sequences`` are samples).

    Steps whose mean is ~0 (such as the step-0 placeholder) report ``cv=None``.
    """
    arr = np.asarray(sequences, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValidationError("expected a non-empty 2-D array of samples x steps")
    rows = []
    for step in range(arr.shape[1]):
        col = arr[:, step]
        mean = float(col.mean())
        cv = coefficient_of_variation(col) if mean > TOLERANCE else None
        rows.append({"step": step, "n": int(col.size), "mean": mean, "std": float(col.std()), "cv": cv})
    return rows
