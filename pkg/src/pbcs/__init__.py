"""Compressed sensing of pushbroom hyperspectral cubes with ITV reconstruction."""

from .datacube import DataCube, devectorize, from_rows, row, set_row, vectorize
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DataError,
    DimensionError,
    FormatError,
    PbcsError,
    RangeError,
    UsageError,
)
from .itv import ItvOptions, ReconstructionReport, initial_reconstruction, itv_reconstruct
from .metrics import evaluate, measurement_percentage, mse
from .predict import PredictorKind, predict_row, prediction_error_measurements
from .sensing import MeasurementSet, SensingConfig, acquire, make_sensing_matrix, measure_row
from .tvmin import TvSolverOptions, TvSolution, tv, tv_min_equality

__all__ = [
    "DataCube", "devectorize", "from_rows", "row", "set_row", "vectorize",
    "ConfigurationError", "ConvergenceError", "DataError", "DimensionError",
    "FormatError", "PbcsError", "RangeError", "UsageError",
    "ItvOptions", "ReconstructionReport", "initial_reconstruction", "itv_reconstruct",
    "evaluate", "measurement_percentage", "mse",
    "PredictorKind", "predict_row", "prediction_error_measurements",
    "MeasurementSet", "SensingConfig", "acquire", "make_sensing_matrix", "measure_row",
    "TvSolverOptions", "TvSolution", "tv", "tv_min_equality",
]
