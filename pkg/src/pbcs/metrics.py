"""Evaluation quantities: MSE in raw sample units and measurement rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datacube import DataCube
from .errors import DimensionError
from .sensing import SensingConfig


def _pair(a, b):
    a = a.samples if isinstance(a, DataCube) else np.asarray(a, dtype=np.float64)
    b = b.samples if isinstance(b, DataCube) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    """Mean of squared sample differences, no normalization."""
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def per_band_mse(a, b) -> np.ndarray:
    a, b = _pair(a, b)
    if a.ndim != 3:
        raise DimensionError("per-band MSE needs cubes")
    return np.mean((a - b) ** 2, axis=(0, 1))


def measurement_percentage(cfg: SensingConfig) -> float:
    return 100.0 * cfg.m / (cfg.n_cols * cfg.n_bands)


@dataclass(frozen=True)
class EvalResult:
    mse: float
    m_over_n: float
    per_band_mse: np.ndarray
    psnr_like: float | None = None


def evaluate(estimate, truth, cfg: SensingConfig, dynamic_range: float | None = None) -> EvalResult:
    """Bundle MSE, per-band MSE and M/N; ``psnr_like`` needs ``dynamic_range``.

    ``psnr_like = 10 log10(dynamic_range**2 / mse)`` in dB (inf for a perfect
    estimate).
    """
    err = mse(estimate, truth)
    psnr = None
    if dynamic_range is not None:
        psnr = float("inf") if err == 0 else float(10.0 * np.log10(dynamic_range**2 / err))
    return EvalResult(err, measurement_percentage(cfg), per_band_mse(estimate, truth), psnr)
