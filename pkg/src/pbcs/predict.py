"""Inter-row prediction and prediction-error measurements."""

from __future__ import annotations

import enum

import numpy as np

from .datacube import vectorize
from .errors import ConfigurationError, DimensionError, RangeError
from .sensing import SensingMatrix


class PredictorKind(enum.Enum):
    """Which neighbours feed the prediction of a row.

    ``MIDPOINT`` averages the rows above and below. The copy variants use a
    single neighbour and are what the boundary policy falls back to on the
    first and last rows.
    """

    MIDPOINT = "midpoint"
    COPY_UP = "copy-up"
    COPY_DOWN = "copy-down"

    @classmethod
    def parse(cls, name: str) -> "PredictorKind":
        if name == "ls":
            raise ConfigurationError("the least-squares predictor is reserved and not available")
        try:
            return cls(name)
        except ValueError:
            raise ConfigurationError(f"unknown predictor {name!r}") from None


def predict_row(above, below, kind: PredictorKind = PredictorKind.MIDPOINT) -> np.ndarray:
    """Predict a row from its neighbours.

    ``above`` is row ``i-1`` and ``below`` row ``i+1``. For ``COPY_UP`` only
    ``above`` is used and ``below`` may be None; ``COPY_DOWN`` is the mirror
    case.
    """
    if kind is PredictorKind.COPY_UP:
        return np.array(above, dtype=np.float64)
    if kind is PredictorKind.COPY_DOWN:
        return np.array(below, dtype=np.float64)
    a = np.asarray(above, dtype=np.float64)
    b = np.asarray(below, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"neighbour rows differ in shape: {a.shape} vs {b.shape}")
    return 0.5 * (a + b)


def predict_from_cube(samples: np.ndarray, i: int, kind: PredictorKind = PredictorKind.MIDPOINT) -> np.ndarray:
    """Prediction for row ``i`` of a ``(n_rows, n_cols, n_bands)`` iterate.

    Boundary policy: row 0 copies row 1, the last row copies the one above
    it, and a single-row cube predicts the row from its own estimate.
    ``kind`` applies to interior rows only.
    """
    n = samples.shape[0]
    if not 0 <= i < n:
        raise RangeError(f"row index {i} out of range for {n} rows")
    if n == 1:
        return np.array(samples[0])
    if i == 0:
        return predict_row(None, samples[1], PredictorKind.COPY_DOWN)
    if i == n - 1:
        return predict_row(samples[n - 2], None, PredictorKind.COPY_UP)
    return predict_row(samples[i - 1], samples[i + 1], kind)


def prediction_error_measurements(y_i, phi: SensingMatrix, f_p) -> np.ndarray:
    """``y_i - Phi_i vec(f_p)``: what is left for the error reconstruction."""
    y_i = np.asarray(y_i, dtype=np.float64)
    v = vectorize(f_p)
    if y_i.shape != (phi.m,) or v.size != phi.n:
        raise DimensionError(
            f"expected y of length {phi.m} and a row of {phi.n} samples, "
            f"got {y_i.shape} and {v.size}"
        )
    return y_i - phi.entries @ v
