"""Frequency-split reconstruction of the unconditional CFG output.

The cond/uncond gap is cached as low- and high-frequency spectral deltas; a
later step rebuilds the unconditional output from its conditional output plus
the step-weighted deltas. 1-D signals only; callers flatten tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, NumericalError, ValidationError

DEFAULT_CUTOFF = 0.25
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class FreqSplit:
    low: np.ndarray
    high: np.ndarray
    cutoff_fraction: float

    @property
    def n(self) -> int:
        return self.low.size

    @property
    def full(self) -> np.ndarray:
        return self.low + self.high


@dataclass(frozen=True)
class FreqWeights:
    """Piecewise step weights: low band favoured before ``t0``, high band after.

    The de-prioritised band is scaled by ``beta``.
    """

    t0: int
    beta: float = 0.5

    def __post_init__(self):
        if not np.isfinite(self.beta):
            raise DomainError("beta must be finite")

    def at(self, t: int) -> tuple[float, float]:
        if t < self.t0:
            return 1.0, float(self.beta)
        return float(self.beta), 1.0


def low_mask(n: int, cutoff_fraction: float) -> np.ndarray:
    # |normalised frequency| is symmetric in k <-> n-k, so real inputs stay real
    return np.abs(np.fft.fftfreq(n)) <= cutoff_fraction / 2


def _check_signal(signal) -> np.ndarray:
    x = np.asarray(signal, dtype=float).ravel()
    if x.size < 2:
        raise ValidationError(f"signal needs at least 2 samples, got {x.size}")
    return x


def _check_cutoff(c: float):
    if not 0.0 < c < 1.0:
        raise DomainError(f"cutoff_fraction must be in (0, 1), got {c!r}")


def dft_split(signal, cutoff_fraction: float = DEFAULT_CUTOFF) -> FreqSplit:
    x = _check_signal(signal)
    _check_cutoff(cutoff_fraction)
    spectrum = np.fft.fft(x)
    mask = low_mask(x.size, cutoff_fraction)
    return FreqSplit(
        low=np.where(mask, spectrum, 0.0),
        high=np.where(mask, 0.0, spectrum),
        cutoff_fraction=cutoff_fraction,
    )


def cfg_delta(cond, uncond, cutoff: float = DEFAULT_CUTOFF) -> tuple[np.ndarray, np.ndarray]:
    c = _check_signal(cond)
    u = _check_signal(uncond)
    if c.size != u.size:
        raise DimensionError(f"cond has {c.size} samples, uncond has {u.size}")
    sc, su = dft_split(c, cutoff), dft_split(u, cutoff)
    return su.low - sc.low, su.high - sc.high


def reconstruct_uncond(cond, delta_low, delta_high, weights: FreqWeights, t: int) -> np.ndarray:
    c = _check_signal(cond)
    dl = np.asarray(delta_low, dtype=complex).ravel()
    dh = np.asarray(delta_high, dtype=complex).ravel()
    if dl.size != c.size or dh.size != c.size:
        raise DimensionError(f"spectra of length {dl.size}/{dh.size} do not match signal length {c.size}")
    w1, w2 = weights.at(t)
    out = np.fft.ifft(np.fft.fft(c) + w1 * dl + w2 * dh)
    residue = float(np.max(np.abs(out.imag)))
    if residue > IMAG_TOL:
        raise NumericalError(f"reconstruction has imaginary residue {residue:.3e} > {IMAG_TOL}")
    return out.real.copy()


def describe(cond, uncond, cutoff: float, weights: FreqWeights, t: int) -> dict:
    """Summary used by the ``cfg-freq`` command."""
    dl, dh = cfg_delta(cond, uncond, cutoff)
    rec = reconstruct_uncond(cond, dl, dh, weights, t)
    u = np.asarray(uncond, dtype=float).ravel()
    w1, w2 = weights.at(t)
    return {
        "n": int(u.size),
        "cutoff": cutoff,
        "t": t,
        "t0": weights.t0,
        "beta": weights.beta,
        "w1": w1,
        "w2": w2,
        "delta_low_norm": float(np.linalg.norm(dl)),
        "delta_high_norm": float(np.linalg.norm(dh)),
        "max_abs_error": float(np.max(np.abs(rec - u))),
        "rel_l1_error": float(np.abs(rec - u).sum() / max(np.abs(u).sum(), 1e-300)),
    }
