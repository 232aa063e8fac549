import numpy as np
import pytest

from pbcs.errors import ConfigurationError, DimensionError, RangeError
from pbcs.predict import (
    PredictorKind,
    predict_from_cube,
    predict_row,
    prediction_error_measurements,
)
from pbcs.sensing import SensingConfig, make_sensing_matrix, measure_row

from conftest import matvec_loops


def test_agreeing_neighbours_are_reproduced(rng):
    r = rng.normal(size=(3, 4))
    assert np.array_equal(predict_row(r, r), r)


def test_midpoint_is_average(rng):
    r = rng.normal(size=(3, 4))
    assert np.allclose(predict_row(np.zeros_like(r), 2 * r), r, rtol=0, atol=1e-15)


def test_copy_variants():
    a, b = np.ones((2, 2)), np.full((2, 2), 3.0)
    assert np.array_equal(predict_row(a, None, PredictorKind.COPY_UP), a)
    assert np.array_equal(predict_row(None, b, PredictorKind.COPY_DOWN), b)


def test_shape_mismatch():
    with pytest.raises(DimensionError):
        predict_row(np.zeros((2, 2)), np.zeros((2, 3)))


def test_boundary_policy():
    cube = np.arange(4 * 2 * 2, dtype=float).reshape(4, 2, 2)
    assert np.array_equal(predict_from_cube(cube, 0), cube[1])
    assert np.array_equal(predict_from_cube(cube, 3), cube[2])
    assert np.array_equal(predict_from_cube(cube, 1), (cube[0] + cube[2]) / 2)
    assert np.array_equal(predict_from_cube(cube[:1], 0), cube[0])
    with pytest.raises(RangeError):
        predict_from_cube(cube, 4)


def test_parse():
    assert PredictorKind.parse("midpoint") is PredictorKind.MIDPOINT
    with pytest.raises(ConfigurationError, match="reserved"):
        PredictorKind.parse("ls")
    with pytest.raises(ConfigurationError):
        PredictorKind.parse("median")


@pytest.fixture
def phi():
    return make_sensing_matrix(SensingConfig(12, 4, 4, 5), 2)


def test_perfect_prediction_cancels(phi, rng):
    f = rng.uniform(0, 4000, size=(4, 5))
    y = measure_row(phi, f)
    e = prediction_error_measurements(y, phi, f)
    assert np.linalg.norm(e) <= 1e-10 * np.linalg.norm(y)


def test_zero_prediction_returns_measurements(phi, rng):
    y = rng.normal(size=12)
    assert np.array_equal(prediction_error_measurements(y, phi, np.zeros((4, 5))), y)


def test_matches_loop_oracle(phi, rng):
    y = rng.normal(size=12)
    f = rng.normal(size=(4, 5))
    v = f.ravel(order="F")
    expected = y - matvec_loops(phi.entries.tolist(), v.tolist())
    assert np.max(np.abs(prediction_error_measurements(y, phi, f) - expected)) <= 1e-12


def test_linearity(phi, rng):
    y = rng.normal(size=12)
    f1, f2 = rng.normal(size=(2, 4, 5))
    a = prediction_error_measurements(y, phi, f1 + f2 - f2)
    b = prediction_error_measurements(y, phi, f1)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_error_measurement_dimensions(phi):
    with pytest.raises(DimensionError):
        prediction_error_measurements(np.zeros(11), phi, np.zeros((4, 5)))
    with pytest.raises(DimensionError):
        prediction_error_measurements(np.zeros(12), phi, np.zeros((4, 4)))
