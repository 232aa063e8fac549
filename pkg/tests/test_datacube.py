import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pbcs.datacube import DataCube, devectorize, from_rows, row, set_row, vectorize
from pbcs.errors import DataError, DimensionError, RangeError

shapes3 = st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5))
finite = st.floats(-1e6, 1e6, allow_nan=False)


def labelled_cube():
    # samples labelled 100*i + 10*k + j with one-based labels
    i, k, j = np.meshgrid(np.arange(1, 3), np.arange(1, 3), np.arange(1, 3), indexing="ij")
    return DataCube(100 * i + 10 * k + j)


def test_row_of_constant_cube():
    cube = DataCube(np.full((3, 4, 5), 7.25))
    for i in range(3):
        np.testing.assert_array_equal(row(cube, i), np.full((4, 5), 7.25))


def test_row_index_arithmetic():
    cube = labelled_cube()
    np.testing.assert_array_equal(row(cube, 0), [[111, 112], [121, 122]])
    np.testing.assert_array_equal(row(cube, 1), [[211, 212], [221, 222]])


def test_row_is_a_copy():
    cube = labelled_cube()
    r = row(cube, 0)
    r[:] = 0
    assert cube.samples[0, 0, 0] == 111


def test_set_row_round_trip():
    cube = labelled_cube()
    assert set_row(cube, 1, row(cube, 1)) == cube
    other = set_row(cube, 0, np.zeros((2, 2)))
    assert other != cube and cube.samples[0, 0, 0] == 111


@pytest.mark.parametrize("i", [-1, 2, 10])
def test_row_out_of_range(i):
    with pytest.raises(RangeError):
        row(labelled_cube(), i)


def test_cube_validation():
    with pytest.raises(DataError):
        DataCube(np.array([[[np.nan]]]))
    with pytest.raises(DimensionError):
        DataCube(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        set_row(labelled_cube(), 0, np.zeros((3, 2)))


def test_cube_is_immutable_and_widened():
    cube = DataCube(np.ones((1, 2, 2), dtype=np.uint16))
    assert cube.samples.dtype == np.float64
    with pytest.raises(ValueError):
        cube.samples[0, 0, 0] = 5


def test_vectorize_band_major():
    a, b, c, d = 1.0, 2.0, 3.0, 4.0
    np.testing.assert_array_equal(vectorize([[a, b], [c, d]]), [a, c, b, d])
    np.testing.assert_array_equal(devectorize([a, c, b, d], 2, 2), [[a, b], [c, d]])
    np.testing.assert_array_equal(vectorize(np.full((3, 4), 2.5)), np.full(12, 2.5))
    np.testing.assert_array_equal(devectorize(np.zeros(6), 2, 3), np.zeros((2, 3)))


def test_vectorize_index_formula():
    r = np.arange(12.0).reshape(3, 4)
    v = vectorize(r)
    for k in range(3):
        for j in range(4):
            assert v[j * 3 + k] == r[k, j]


def test_devectorize_length_mismatch():
    with pytest.raises(DimensionError):
        devectorize(np.zeros(5), 2, 3)


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=finite))
def test_vectorize_inverse_pair(r):
    np.testing.assert_array_equal(devectorize(vectorize(r), *r.shape), r)
    v = vectorize(r)
    np.testing.assert_array_equal(vectorize(devectorize(v, *r.shape)), v)


@settings(max_examples=50)
@given(shapes3.flatmap(lambda s: arrays(np.float64, s, elements=finite)))
def test_rows_reassemble_cube(a):
    cube = DataCube(a)
    assert from_rows(row(cube, i) for i in range(cube.n_rows)) == cube
