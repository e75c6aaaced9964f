"""Seeded synthetic traces, embedding banks and factor studies.

Shapes loosely follow what recorded video-DiT runs look like: the
timestep-embedding difference is nearly flat early and prompt independent,
while output differences start large, decay fast, and scale with prompt
complexity.
"""

from __future__ import annotations

import numpy as np

from .diff_kernels import coefficient_of_variation
from .trace_model import EmbeddingBank, TimestepTrace

DEFAULT_SEED = 0


def _profiles(num_steps: int, complexity: float, rng: np.random.Generator):
    tn = np.arange(num_steps) / max(num_steps - 1, 1)
    x = 0.009 + 0.03 * tn ** 3 + rng.normal(0.0, 2e-4, num_steps)
    y = (0.05 + 0.6 * np.exp(-30.0 * tn)) * (1.0 + 0.6 * complexity) + 0.08 * tn ** 2 * (1.0 + complexity)
    y = y * np.exp(rng.normal(0.0, 0.05, num_steps))
    cfg = (0.004 + 0.02 * (1.0 - tn) ** 2 * (1.0 + 0.5 * complexity)) * np.exp(rng.normal(0.0, 0.05, num_steps))
    x, y, cfg = np.abs(x), np.abs(y), np.abs(cfg)
    x[0] = y[0] = cfg[0] = 0.0
    return x, y, cfg


def synthesize_traces(n_prompts: int = 20, num_steps: int = 50, seed: int = DEFAULT_SEED,
                      complexities=None) -> list[TimestepTrace]:
    rng = np.random.default_rng(seed)
    if complexities is None:
        complexities = rng.uniform(0.0, 1.0, n_prompts)
    traces = []
    for i, c in enumerate(complexities):
        x, y, cfg = _profiles(num_steps, float(c), rng)
        traces.append(TimestepTrace(
            prompt_id=f"synthetic-{i:03d}",
            x=tuple(round(float(v), 12) for v in x),
            y=tuple(round(float(v), 12) for v in y),
            cfg_diff=tuple(round(float(v), 12) for v in cfg),
        ))
    return traces


def synthesize_bank(n_per_label: int = 20, dim: int = 16, spread: float = 0.15,
                    seed: int = DEFAULT_SEED) -> tuple[EmbeddingBank, np.ndarray, np.ndarray]:
    """Two direction clusters; returns the bank and both cluster centres."""
    rng = np.random.default_rng(seed)
    centres = rng.normal(size=(2, dim))
    # orthogonalise so the two prompt families share no direction
    centres[1] -= centres[1] @ centres[0] / (centres[0] @ centres[0]) * centres[0]
    centres /= np.linalg.norm(centres, axis=1, keepdims=True)
    complex_vecs = centres[0] + spread * rng.normal(size=(n_per_label, dim))
    simple_vecs = centres[1] + spread * rng.normal(size=(n_per_label, dim))
    bank = EmbeddingBank.from_arrays(np.round(complex_vecs, 12), np.round(simple_vecs, 12))
    return bank, centres[0], centres[1]


def factor_study(seed: int, n_samples: int = 50, num_steps: int = 50,
                 strong: float = 0.5, weak: float = 0.05) -> dict[str, float]:
    """Mean per-step CV when only the strong or only the weak factor varies.

    Output differences are ``base(t) * exp(strong * a + weak * b)``; ``a``
    plays the prompt, ``b`` the noise seed.
    """
    rng = np.random.default_rng(seed)
    tn = np.arange(1, num_steps) / (num_steps - 1)
    base = 0.05 + 0.6 * np.exp(-30.0 * tn)
    a = rng.normal(size=n_samples)
    b = rng.normal(size=n_samples)
    a_fixed, b_fixed = rng.normal(), rng.normal()

    def mean_cv(a_vals, b_vals):
        samples = base[None, :] * np.exp(strong * a_vals[:, None] + weak * b_vals[:, None])
        return float(np.mean([coefficient_of_variation(samples[:, j]) for j in range(samples.shape[1])]))

    return {
        "vary_strong": mean_cv(a, np.full(n_samples, b_fixed)),
        "vary_weak": mean_cv(np.full(n_samples, a_fixed), b),
        "vary_both": mean_cv(a, b),
    }


def example_embedding(bank_centres, complexity: float, seed: int = DEFAULT_SEED) -> np.ndarray:
    """A prompt embedding between the simple (0) and complex (1) centres."""
    rng = np.random.default_rng(seed)
    c_complex, c_simple = bank_centres
    v = complexity * c_complex + (1.0 - complexity) * c_simple
    return np.round(v + 0.05 * rng.normal(size=v.size), 12)

