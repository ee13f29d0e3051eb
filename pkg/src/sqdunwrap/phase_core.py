"""Fundamental phase math: wrapping, 1-D unwrapping, noise injection, metrics.

Conventions used throughout the package:

* a phase image is a 2-D float array of radians (row-major, height x width),
* a wrapped image is a phase image whose values lie in the half-open
  principal interval (-pi, pi],
* all functions here are pure; random state is passed in explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSignalError, InvalidInputError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian noise at a target SNR (dB). ``inf`` means no noise."""

    snr_db: float
    rng_seed: int = 0


def _as_float_image(a, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] < 2 or a.shape[1] < 2:
        raise InvalidInputError(f"{name} must be a 2-D array with dims >= 2x2, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise InvalidInputError(f"{name} contains non-finite values")
    return a


def wrap_scalar(phase):
    """Principal value of a phase difference, in (-pi, pi].

    Works on scalars and arrays. Computed as the angle of the unit complex
    number exp(i*phase); the -pi branch output is folded to +pi so the
    interval is half-open at -pi. Values already inside the interval pass
    through unchanged, which makes wrapping exactly idempotent.
    """
    x = np.asarray(phase, dtype=np.float64)
    w = np.angle(np.exp(1j * x))
    w = np.where(w <= -np.pi, w + TWO_PI, w)
    w = np.where((x > -np.pi) & (x <= np.pi), x, w)
    if np.ndim(phase) == 0:
        return float(w)
    return w


def wrap(phase) -> np.ndarray:
    """Wrap a phase image to the principal interval (-pi, pi].

    The result equals ``phase - 2*pi*n`` for a per-pixel integer field n.
    Raises InvalidInputError on non-finite input.
    """
    phase = _as_float_image(phase, "phase")
    return wrap_scalar(phase)


def itoh_unwrap_1d(seq) -> np.ndarray:
    """Classical 1-D unwrapping by integrating wrapped adjacent differences.

    out[0] = seq[0]; out[k] = out[k-1] + wrap_scalar(seq[k] - seq[k-1]).
    Recovery is exact up to a global multiple of 2*pi whenever the true
    adjacent differences are below pi in magnitude.
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 1 or seq.size < 1:
        raise InvalidInputError(f"expected a 1-D sequence with length >= 1, got shape {seq.shape}")
    if seq.size == 1:
        return seq.copy()
    steps = wrap_scalar(np.diff(seq))
    return seq[0] + np.concatenate(([0.0], np.cumsum(steps)))


def add_noise(phase, spec: NoiseSpec) -> np.ndarray:
    """Add zero-mean Gaussian noise at the SNR given by ``spec``.

    Signal power is the spatial variance of ``phase`` (not its mean square),
    so the SNR measures fluctuation power and is insensitive to DC offsets.
    Deterministic given ``spec.rng_seed``. A constant image has no defined
    SNR and raises DegenerateSignalError.
    """
    phase = _as_float_image(phase, "phase")
    if np.isinf(spec.snr_db) and spec.snr_db > 0:
        return phase.copy()
    rng = np.random.default_rng(spec.rng_seed)
    return phase + gaussian_noise_for_snr(phase, float(spec.snr_db), rng)


def gaussian_noise_for_snr(phase, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean Gaussian field whose variance hits ``snr_db`` vs var(phase)."""
    signal_power = float(np.var(phase))
    if signal_power <= 0.0:
        raise DegenerateSignalError("constant image: SNR-relative noise is undefined")
    sigma = np.sqrt(signal_power / 10.0 ** (snr_db / 10.0))
    return rng.normal(0.0, sigma, size=np.shape(phase))


def nrmse(pred, truth) -> float:
    """Root-mean-square error normalized by the range of ``truth``, in percent."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise InvalidInputError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    span = float(truth.max() - truth.min())
    if span <= 0.0:
        raise InvalidInputError("truth image has zero range, NRMSE is undefined")
    rmse = float(np.sqrt(np.mean((pred - truth) ** 2)))
    return 100.0 * rmse / span


def congruence_fraction(pred, observed, tol: float = 1e-3) -> float:
    """Fraction of pixels where wrap(pred) matches the observed wrapped phase.

    A pixel agrees when |wrap_scalar(wrap(pred) - observed)| <= tol. A perfect
    unwrapping of ``observed`` scores 1.0 for any positive tolerance.
    """
    pred = np.asarray(pred, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    if pred.shape != observed.shape:
        raise InvalidInputError(f"shape mismatch: pred {pred.shape} vs observed {observed.shape}")
    if tol <= 0.0:
        raise InvalidInputError("tol must be positive")
    resid = wrap_scalar(wrap_scalar(pred) - observed)
    return float(np.mean(np.abs(resid) <= tol))
