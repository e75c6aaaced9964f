"""Prompt-complexity-aware caching thresholds.

A prompt embedding is compared with a bank of complex and simple reference
prompts; the resulting complexity coefficient is pushed through a sigmoid and
used to interpolate between the lower and upper threshold bounds. Clustering
diagnostics for the bank itself live here too.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateError, DimensionError, DomainError, ValidationError
from .trace_model import COMPLEX, COMPLEX_LOW, LABELS, PAPER_LITERAL, SIMPLE, EmbeddingBank, PcaConfig

NORM_TOL = 1e-12
DENOM_TOL = 1e-15


@dataclass(frozen=True)
class ComplexityScore:
    sim_complex: float
    sim_simple: float
    R: float
    S: float
    delta_pca: float

    def to_dict(self) -> dict:
        return asdict(self)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.size} vs {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na <= NORM_TOL or nb <= NORM_TOL:
        raise DegenerateError("zero-norm vector in cosine similarity")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def bank_similarity(embedding, bank: EmbeddingBank, label: str) -> float:
    """Mean of the per-entry cosine similarities against one label's entries."""
    e = np.asarray(embedding, dtype=float).ravel()
    if e.size != bank.dim:
        raise DimensionError(f"embedding has dimension {e.size}, bank has {bank.dim}")
    refs = bank.vectors(label)
    if len(refs) == 0:
        raise ValidationError(f"bank has no {label!r} entries")
    return float(np.mean([cosine_similarity(e, r) for r in refs]))


def complexity_coefficient(sim_c: float, sim_s: float, epsilon: float = 1e-6) -> float:
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    denom = sim_c + sim_s + epsilon
    if abs(denom) < DENOM_TOL:
        raise DegenerateError(f"similarities cancel: sim_c + sim_s + eps = {denom!r}")
    return sim_c / denom


def sigmoid_stretch(R: float, k: float) -> float:
    if not k > 0:
        raise DomainError("k must be positive")
    z = -k * (R - 0.5)
    # exp overflow guard; both branches are the same logistic function
    if z >= 0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


def fuse_threshold(S: float, config: PcaConfig) -> float:
    if not 0.0 <= S <= 1.0:
        raise DomainError(f"S must lie in [0, 1], got {S!r}")
    lo, hi = config.delta_min, config.delta_max
    if config.orientation == PAPER_LITERAL:
        delta = S * hi + (1.0 - S) * lo
    elif config.orientation == COMPLEX_LOW:
        delta = S * lo + (1.0 - S) * hi
    else:
        raise ValidationError(f"unknown orientation {config.orientation!r}")
    # rounding can step a hair outside the bounds at S in {0, 1}
    return min(max(delta, lo), hi)


def score_prompt(embedding, bank: EmbeddingBank, config: PcaConfig) -> ComplexityScore:
    sim_c = bank_similarity(embedding, bank, COMPLEX)
    sim_s = bank_similarity(embedding, bank, SIMPLE)
    R = complexity_coefficient(sim_c, sim_s, config.epsilon)
    S = sigmoid_stretch(R, config.k)
    return ComplexityScore(sim_c, sim_s, R, S, fuse_threshold(S, config))


def _distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def pairwise_distance_stats(bank: EmbeddingBank) -> dict[str, float]:
    """Mean Euclidean distance within each label and across labels."""
    C, S = bank.vectors(COMPLEX), bank.vectors(SIMPLE)
    if len(C) < 2 or len(S) < 2:
        raise ValidationError("need at least two entries per label")

    def within(m):
        d = _distances(m, m)
        iu = np.triu_indices(len(m), k=1)
        return float(d[iu].mean())

    return {
        "within_complex": within(C),
        "within_simple": within(S),
        "cross": float(_distances(C, S).mean()),
    }


def silhouette(vectors, labels) -> float:
    """Mean silhouette coefficient with Euclidean distance.

    Points in singleton clusters score 0.
    """
    X = np.asarray(vectors, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    labels = np.asarray(labels)
    if len(labels) != len(X):
        raise DimensionError("vectors and labels differ in length")
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise ValidationError("silhouette needs at least two clusters")
    if len(X) < 3:
        raise ValidationError("silhouette needs at least three points")

    D = _distances(X, X)
    masks = [labels == u for u in uniq]
    sizes = np.array([m.sum() for m in masks])
    # mean distance from every point to every cluster
    sums = np.column_stack([D[:, m].sum(axis=1) for m in masks])
    own = np.searchsorted(uniq, labels)
    n = len(X)
    own_size = sizes[own]
    a = np.where(own_size > 1, sums[np.arange(n), own] / np.maximum(own_size - 1, 1), 0.0)
    other = sums / sizes
    other[np.arange(n), own] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own_size > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def bank_silhouette(bank: EmbeddingBank) -> float:
    return silhouette(np.array([v for _, v in bank.entries]), bank.labels())


def has_both_labels(bank: EmbeddingBank) -> bool:
    return all(lab in bank.labels() for lab in LABELS)
