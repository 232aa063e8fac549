"""Datacube model and the spectral-row conventions used throughout.

A cube is stored as a float64 array of shape ``(n_rows, n_cols, n_bands)``:
axis 0 is the along-track line (y), axis 1 the across-track pixel (x) and
axis 2 the band (lambda). A spectral row is the ``(n_cols, n_bands)`` plane
``cube[i]``. Rows are plain 2-D arrays; indices are zero-based.

Vectorization is band-major: entry ``(k, j)`` of a row lands at position
``j * n_cols + k``, i.e. the across-track columns of band 0 come first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DataError, DimensionError, RangeError

VECTORIZATION_TAG = 1  # band-major, recorded in measurement headers


@dataclass(frozen=True, eq=False)
class DataCube:
    """Immutable N_R x N_C x N_B cube of real samples.

    The array handed in is copied, widened to float64 and marked
    read-only, so instances can be shared freely between threads.
    """

    samples: np.ndarray

    def __post_init__(self):
        a = np.array(self.samples, dtype=np.float64, copy=True)
        if a.ndim != 3 or min(a.shape) < 1:
            raise DimensionError(f"cube must be a non-empty 3-D array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DataError("cube contains non-finite samples")
        a.flags.writeable = False
        object.__setattr__(self, "samples", a)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.samples.shape

    @property
    def n_rows(self) -> int:
        return self.samples.shape[0]

    @property
    def n_cols(self) -> int:
        return self.samples.shape[1]

    @property
    def n_bands(self) -> int:
        return self.samples.shape[2]

    @property
    def row_size(self) -> int:
        return self.n_cols * self.n_bands

    def __eq__(self, other):
        if not isinstance(other, DataCube):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.samples, other.samples)

    __hash__ = None

    def __repr__(self):
        return f"DataCube(n_rows={self.n_rows}, n_cols={self.n_cols}, n_bands={self.n_bands})"


def _check_index(cube: DataCube, i: int) -> int:
    if isinstance(i, (bool, np.bool_)) or not isinstance(i, (int, np.integer)):
        raise RangeError(f"row index must be an integer, got {i!r}")
    if not 0 <= i < cube.n_rows:
        raise RangeError(f"row index {i} out of range for {cube.n_rows} rows")
    return int(i)


def row(cube: DataCube, i: int) -> np.ndarray:
    """Return a writable copy of spectral row ``i`` (shape ``(n_cols, n_bands)``)."""
    return cube.samples[_check_index(cube, i)].copy()


def set_row(cube: DataCube, i: int, values) -> DataCube:
    """Return a new cube equal to ``cube`` except that row ``i`` is ``values``."""
    i = _check_index(cube, i)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (cube.n_cols, cube.n_bands):
        raise DimensionError(
            f"row shape {values.shape} does not match cube rows {(cube.n_cols, cube.n_bands)}"
        )
    a = cube.samples.copy()
    a[i] = values
    return DataCube(a)


def from_rows(rows: Iterable[np.ndarray]) -> DataCube:
    rows = [np.asarray(r, dtype=np.float64) for r in rows]
    if not rows:
        raise DimensionError("need at least one row")
    shapes = {r.shape for r in rows}
    if len(shapes) != 1 or len(rows[0].shape) != 2:
        raise DimensionError(f"rows must share one 2-D shape, got {sorted(shapes)}")
    return DataCube(np.stack(rows))


def vectorize(r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 2:
        raise DimensionError(f"spectral row must be 2-D, got shape {r.shape}")
    return r.ravel(order="F").copy()


def devectorize(v, n_cols: int, n_bands: int) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != n_cols * n_bands:
        raise DimensionError(
            f"vector of shape {v.shape} cannot form a {n_cols}x{n_bands} row"
        )
    return v.reshape((n_cols, n_bands), order="F").copy()
