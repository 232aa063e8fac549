"""Per-row Gaussian sensing and the row-by-row acquisition loop.

Sensing matrices are never stored. Each ``Phi_i`` is regenerated from
``(master_seed, i)``:

* Raw 64-bit words come from Philox4x64-10 keyed with the two words
  ``(master_seed, i)`` (``i`` zero-based). Words ``4b .. 4b+3`` are the
  bijection's output for the counter ``(b + 1, 0, 0, 0)``, so any word is
  reachable without drawing the ones before it.
* Matrix entries are numbered row-major, ``e = r * n + c`` for an ``M x n``
  matrix. Entry pair ``p = e // 2`` consumes raw words ``2p`` and ``2p + 1``,
  mapped to uniforms on (0, 1) by ``u = ((w >> 11) + 0.5) * 2**-53``.
* Box-Muller: ``rho = sqrt(-2 ln u1)``, even entry ``rho * cos(2 pi u2)``,
  odd entry ``rho * sin(2 pi u2)``, then scaled by ``1 / sqrt(M)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datacube import DataCube, vectorize
from .errors import ConfigurationError, DataError, DimensionError, RangeError

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class SensingConfig:
    m: int
    master_seed: int
    n_cols: int
    n_bands: int

    def __post_init__(self):
        for name in ("m", "n_cols", "n_bands"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
        if not 0 <= self.master_seed <= _U64:
            raise ConfigurationError(f"master_seed must fit in 64 unsigned bits, got {self.master_seed}")
        if self.m >= self.n:
            raise ConfigurationError(
                f"need strict undersampling m < n_cols*n_bands, got m={self.m}, n={self.n}"
            )

    @property
    def n(self) -> int:
        return self.n_cols * self.n_bands

    @property
    def ratio(self) -> float:
        return self.m / self.n


def _raw_words(master_seed: int, row_index: int, start: int, count: int) -> np.ndarray:
    block, offset = divmod(start, 4)
    # numpy's Philox increments its counter before each block
    # key as one 128-bit int: a list of Python ints would pass through float64
    key = int(master_seed) | (int(row_index) << 64)
    bg = np.random.Philox(key=key, counter=block)
    return bg.random_raw(offset + count)[offset:]


def gaussian_entries(master_seed: int, row_index: int, start: int, count: int) -> np.ndarray:
    """Standard-normal draws for entry indices ``start .. start+count-1``.

    Unscaled (unit variance); the result for any index does not depend on
    ``start`` or ``count``.
    """
    if start < 0 or count < 0:
        raise RangeError("entry range must be non-negative")
    if count == 0:
        return np.empty(0)
    first_pair, last_pair = start // 2, (start + count - 1) // 2
    words = _raw_words(master_seed, row_index, 2 * first_pair, 2 * (last_pair - first_pair + 1))
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    rho = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * u1.size)
    z[0::2] = rho * np.cos(2.0 * np.pi * u2)
    z[1::2] = rho * np.sin(2.0 * np.pi * u2)
    lo = start - 2 * first_pair
    return z[lo:lo + count]


@dataclass(frozen=True, eq=False)
class SensingMatrix:
    """Dense ``M x (n_cols*n_bands)`` matrix for one spectral row.

    Factorizations used by the TV solver are cached in ``cache``, so reusing
    one object across solves is cheap.
    """

    entries: np.ndarray
    row_index: int
    n_cols: int
    n_bands: int
    # scratch space for solver-side factorizations of this matrix
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]


def make_sensing_matrix(cfg: SensingConfig, i: int) -> SensingMatrix:
    if isinstance(i, bool) or not isinstance(i, (int, np.integer)) or i < 0:
        raise RangeError(f"row index must be a non-negative integer, got {i!r}")
    z = gaussian_entries(cfg.master_seed, int(i), 0, cfg.m * cfg.n)
    entries = z.reshape(cfg.m, cfg.n) / np.sqrt(cfg.m)
    entries.flags.writeable = False
    return SensingMatrix(entries, int(i), cfg.n_cols, cfg.n_bands)


def measure_row(phi: SensingMatrix, r) -> np.ndarray:
    v = vectorize(r)
    if v.size != phi.n:
        raise DimensionError(f"row has {v.size} samples, sensing matrix expects {phi.n}")
    return phi.entries @ v


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Measurements ``y`` (one row per spectral row) plus what regenerates Phi."""

    y: np.ndarray
    config: SensingConfig
    n_rows: int

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64, copy=True)
        if y.shape != (self.n_rows, self.config.m):
            raise DimensionError(
                f"measurement matrix shape {y.shape} != ({self.n_rows}, {self.config.m})"
            )
        if not np.all(np.isfinite(y)):
            raise DataError("measurements contain non-finite values")
        y.flags.writeable = False
        object.__setattr__(self, "y", y)

    @property
    def cube_shape(self) -> tuple[int, int, int]:
        return (self.n_rows, self.config.n_cols, self.config.n_bands)

    def sensing_matrix(self, i: int) -> SensingMatrix:
        if not 0 <= i < self.n_rows:
            raise RangeError(f"row index {i} out of range for {self.n_rows} rows")
        return make_sensing_matrix(self.config, i)

    def __eq__(self, other):
        if not isinstance(other, MeasurementSet):
            return NotImplemented
        return (
            self.config == other.config
            and self.n_rows == other.n_rows
            and np.array_equal(self.y, other.y)
        )

    __hash__ = None


def acquire(cube: DataCube, cfg: SensingConfig) -> MeasurementSet:
    """Sense every spectral row with its own Gaussian matrix."""
    if not isinstance(cube, DataCube):
        cube = DataCube(cube)  # raises DataError on NaN/Inf
    if (cube.n_cols, cube.n_bands) != (cfg.n_cols, cfg.n_bands):
        raise DimensionError(
            f"cube rows are {cube.n_cols}x{cube.n_bands}, config expects {cfg.n_cols}x{cfg.n_bands}"
        )
    y = np.empty((cube.n_rows, cfg.m))
    for i in range(cube.n_rows):
        y[i] = measure_row(make_sensing_matrix(cfg, i), cube.samples[i])
    return MeasurementSet(y, cfg, cube.n_rows)
