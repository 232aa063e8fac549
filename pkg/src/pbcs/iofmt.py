"""File formats: raw cubes, measurement files, CSV results, band images.

Also home to the seeded synthetic cube generator used in place of the
CCSDS AVIRIS/AIRS scenes, which are referenced by path and never bundled.

Measurement file layout (all little-endian)::

    offset size  field
    0      4     magic b"PBCS"
    4      2     format version (u16, currently 1)
    6      4     n_rows  (u32)
    10     4     n_cols  (u32)
    14     4     n_bands (u32)
    18     4     m       (u32)
    22     8     master_seed (u64)
    30     1     vectorization tag (u8, 1 = band-major)
    31     1     payload dtype tag (u8, 1 = float64 little-endian)
    32     ...   Y, n_rows x m, row-major float64
"""

from __future__ import annotations

import csv
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datacube import VECTORIZATION_TAG, DataCube
from .errors import DataError, DimensionError, FormatError, RangeError
from .sensing import MeasurementSet, SensingConfig

MAGIC = b"PBCS"
FORMAT_VERSION = 1
PAYLOAD_F64LE = 1
_HEADER = struct.Struct("<4sHIIIIQBB")

LAYOUTS = ("bsq", "bil", "bip")
_DTYPES = {"int16": "i2", "uint16": "u2"}
_ENDIAN = {"little": "<", "big": ">"}

# file axis order for each layout, in terms of cube axes (row, col, band)
_FILE_AXES = {"bsq": (2, 0, 1), "bil": (0, 2, 1), "bip": (0, 1, 2)}


@dataclass(frozen=True)
class RawCubeSpec:
    """How a headerless raw cube is laid out on disk.

    ``crop`` is an optional ``(rows, cols, bands)`` triple of zero-based
    half-open ``(start, stop)`` ranges; ``None`` in a slot keeps that axis.
    """

    layout: str
    dtype: str
    endian: str
    n_rows: int
    n_cols: int
    n_bands: int
    crop: tuple | None = None

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise FormatError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        if self.dtype not in _DTYPES:
            raise FormatError(f"dtype must be one of {tuple(_DTYPES)}, got {self.dtype!r}")
        if self.endian not in _ENDIAN:
            raise FormatError(f"endian must be 'little' or 'big', got {self.endian!r}")
        if min(self.n_rows, self.n_cols, self.n_bands) < 1:
            raise DimensionError("cube dimensions must be positive")
        if self.crop is not None:
            for rng, size in zip(self.crop, self.shape):
                if rng is None:
                    continue
                lo, hi = rng
                if not 0 <= lo < hi <= size:
                    raise RangeError(f"crop range {rng} outside axis of length {size}")

    @property
    def shape(self):
        return (self.n_rows, self.n_cols, self.n_bands)

    @property
    def numpy_dtype(self) -> np.dtype:
        return np.dtype(_ENDIAN[self.endian] + _DTYPES[self.dtype])

    @property
    def nbytes(self) -> int:
        return self.n_rows * self.n_cols * self.n_bands * 2


def read_raw_cube(path, spec: RawCubeSpec) -> DataCube:
    """Read a headerless BSQ/BIL/BIP cube, widening samples to float64.

    The file must hold exactly the declared number of samples.
    """
    path = Path(path)
    size = path.stat().st_size  # OSError propagates as an I/O failure
    if size != spec.nbytes:
        raise FormatError(f"{path}: {size} bytes, expected {spec.nbytes} for shape {spec.shape}")
    file_shape = tuple(spec.shape[a] for a in _FILE_AXES[spec.layout])
    raw = np.memmap(path, dtype=spec.numpy_dtype, mode="r", shape=file_shape)
    view = raw.transpose(np.argsort(_FILE_AXES[spec.layout]))
    if spec.crop is not None:
        view = view[tuple(slice(*r) if r is not None else slice(None) for r in spec.crop)]
    cube = DataCube(np.asarray(view, dtype=np.float64))
    del raw
    return cube


def write_raw_cube(cube: DataCube, path, layout: str = "bsq", dtype: str = "uint16", endian: str = "little"):
    """Write ``cube`` as a headerless raw file; samples must be integral and in range."""
    spec = RawCubeSpec(layout, dtype, endian, *cube.shape)
    a = cube.samples
    info = np.iinfo(spec.numpy_dtype)
    if not np.array_equal(a, np.round(a)) or a.min() < info.min or a.max() > info.max:
        raise DataError(f"cube samples are not representable as {dtype}")
    out = np.ascontiguousarray(a.transpose(_FILE_AXES[layout])).astype(spec.numpy_dtype)
    _atomic_write(path, out.tobytes())


def _atomic_write(path, data: bytes):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_cube(cube: DataCube, path):
    """Save as ``.npy`` (float64), used for reconstructed estimates."""
    with open(path, "wb") as fh:
        np.save(fh, cube.samples)


def load_cube(path) -> DataCube:
    try:
        a = np.load(path, allow_pickle=False)
    except ValueError as exc:
        raise FormatError(f"{path}: not a numpy array file ({exc})") from None
    return DataCube(a)


@dataclass(frozen=True)
class MeasurementFileHeader:
    version: int
    n_rows: int
    n_cols: int
    n_bands: int
    m: int
    master_seed: int
    vectorization: int = VECTORIZATION_TAG
    payload_dtype: int = PAYLOAD_F64LE

    def pack(self) -> bytes:
        return _HEADER.pack(
            MAGIC, self.version, self.n_rows, self.n_cols, self.n_bands,
            self.m, self.master_seed, self.vectorization, self.payload_dtype,
        )


def write_measurements(ms: MeasurementSet, path):
    cfg = ms.config
    header = MeasurementFileHeader(FORMAT_VERSION, ms.n_rows, cfg.n_cols, cfg.n_bands, cfg.m, cfg.master_seed)
    payload = np.ascontiguousarray(ms.y, dtype="<f8").tobytes()
    _atomic_write(path, header.pack() + payload)


def read_measurement_header(data: bytes) -> MeasurementFileHeader:
    if len(data) < _HEADER.size:
        raise FormatError("measurement file shorter than its header")
    magic, version, nr, nc, nb, m, seed, vec, dt = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported measurement format version {version}")
    if vec != VECTORIZATION_TAG:
        raise FormatError(f"unknown vectorization tag {vec}")
    if dt != PAYLOAD_F64LE:
        raise FormatError(f"unknown payload dtype tag {dt}")
    if min(nr, nc, nb, m) < 1:
        raise FormatError("header dimensions must be positive")
    return MeasurementFileHeader(version, nr, nc, nb, m, seed, vec, dt)


def read_measurements(path) -> MeasurementSet:
    data = Path(path).read_bytes()
    h = read_measurement_header(data)
    cfg = SensingConfig(h.m, h.master_seed, h.n_cols, h.n_bands)  # ConfigurationError if m >= n
    expected = _HEADER.size + h.n_rows * h.m * 8
    if len(data) != expected:
        raise FormatError(f"{path}: {len(data)} bytes, header implies {expected}")
    y = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(h.n_rows, h.m)
    return MeasurementSet(y.astype(np.float64), cfg, h.n_rows)


@dataclass(frozen=True)
class SyntheticCubeSpec:
    """Seeded piecewise-constant cube with smoothly drifting amplitudes.

    Every row shares one partition of the ``n_cols x n_bands`` plane into
    ``regions`` axis-aligned rectangles (random guillotine cuts). Region
    ``r`` starts at an integer amplitude drawn from ``amplitude`` and moves
    from row to row by ``trunc(drift * a * sin(omega_r * i + phase_r))``, so
    samples stay integral and no region changes by more than ``drift``
    relative per row.
    """

    shape: tuple[int, int, int]
    seed: int
    regions: int = 4
    drift: float = 0.05
    amplitude: tuple[int, int] = (500, 4000)
    frequency: tuple[float, float] = (0.1, 0.6)

    def __post_init__(self):
        nr, nc, nb = self.shape
        if min(self.shape) < 1:
            raise DimensionError("shape must be positive")
        if not 1 <= self.regions <= nc * nb:
            raise DimensionError(f"cannot split a {nc}x{nb} row into {self.regions} regions")
        if not 0 <= self.drift < 1:
            raise DataError("drift must lie in [0, 1)")
        lo, hi = self.amplitude
        if not 0 < lo <= hi:
            raise DataError("amplitude range must be positive and ordered")


def _guillotine(rng, n_cols, n_bands, regions):
    rects = [(0, n_cols, 0, n_bands)]
    while len(rects) < regions:
        splittable = [k for k, (k0, k1, j0, j1) in enumerate(rects) if k1 - k0 > 1 or j1 - j0 > 1]
        idx = splittable[rng.integers(len(splittable))]
        k0, k1, j0, j1 = rects[idx]
        axes = [ax for ax, ext in ((0, k1 - k0), (1, j1 - j0)) if ext > 1]
        ax = axes[rng.integers(len(axes))]
        if ax == 0:
            cut = int(rng.integers(k0 + 1, k1))
            pieces = [(k0, cut, j0, j1), (cut, k1, j0, j1)]
        else:
            cut = int(rng.integers(j0 + 1, j1))
            pieces = [(k0, k1, j0, cut), (k0, k1, cut, j1)]
        rects[idx:idx + 1] = pieces
    return rects


def generate_synthetic_cube(spec: SyntheticCubeSpec) -> DataCube:
    nr, nc, nb = spec.shape
    rng = np.random.default_rng(spec.seed)
    rects = _guillotine(rng, nc, nb, spec.regions)
    lo, hi = spec.amplitude
    amp = rng.integers(lo, hi, endpoint=True, size=len(rects)).astype(np.float64)
    omega = rng.uniform(*spec.frequency, size=len(rects))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=len(rects))
    cube = np.empty(spec.shape)
    for i in range(nr):
        for r, (k0, k1, j0, j1) in enumerate(rects):
            cube[i, k0:k1, j0:j1] = amp[r]
        amp = amp + np.trunc(spec.drift * amp * np.sin(omega * i + phase))
    return DataCube(cube)


RESULT_COLUMNS = ("m_percent", "method", "mse", "iterations", "wall_seconds", "repetition", "m")


def write_results_csv(rows, path):
    """Write sweep results; each row is a mapping keyed by RESULT_COLUMNS."""
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in RESULT_COLUMNS})


def write_history_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "relative_change", "mean_residual", "mse", "unconverged_rows"])
        for h in report.history:
            w.writerow([h.iteration, _fmt(h.relative_change), _fmt(h.mean_residual),
                        "" if h.mse is None else _fmt(h.mse), h.unconverged_rows])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def export_band_image(cube: DataCube, band: int, path):
    """Save one band as an 8-bit grayscale PNG with per-band min-max scaling.

    A constant band maps to mid-gray (128).
    """
    from PIL import Image

    if not 0 <= band < cube.n_bands:
        raise RangeError(f"band {band} out of range for {cube.n_bands} bands")
    plane = cube.samples[:, :, band]
    lo, hi = plane.min(), plane.max()
    if hi == lo:
        img = np.full(plane.shape, 128, dtype=np.uint8)
    else:
        img = np.round((plane - lo) * (255.0 / (hi - lo))).astype(np.uint8)
    Image.fromarray(img).save(path, format="PNG")
