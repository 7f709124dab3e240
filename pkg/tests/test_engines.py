"""Bit-equality across the three row engines (scalar JIT, lane JIT, numpy)."""

import numpy as np
import pytest

from mandelbench import engines
from mandelbench.core import (WINDOW_1, WINDOW_2, GridDims, Precision,
                              axis_coordinates, render_reference)

DIMS = GridDims(67, 23)  # prime-ish width so every lane count has a tail


def reference_counts(window, dims, precision):
    return render_reference(window, dims, precision).counts


@pytest.fixture(scope="module")
def w1_axes():
    return axis_coordinates(WINDOW_1, DIMS)


@pytest.mark.parametrize("precision", [Precision.SINGLE, Precision.DOUBLE])
def test_scalar_engine_matches_reference(w1_axes, precision):
    cre, cims = w1_axes
    out = np.zeros((DIMS.height, DIMS.width), np.int32)
    engines.render_rows(out, cre, cims, WINDOW_1.max_iter, precision)
    assert np.array_equal(out, reference_counts(WINDOW_1, DIMS, precision))


@pytest.mark.parametrize("lanes", engines.LANE_COUNTS)
@pytest.mark.parametrize("precision", [Precision.SINGLE, Precision.DOUBLE])
def test_lane_kernels_match_reference(w1_axes, lanes, precision):
    cre, cims = w1_axes
    out = np.zeros((DIMS.height, DIMS.width), np.int32)
    engines.render_rows(out, cre, cims, WINDOW_1.max_iter, precision,
                        lane_count=lanes)
    assert np.array_equal(out, reference_counts(WINDOW_1, DIMS, precision))


def test_numpy_engine_matches_reference(w1_axes):
    cre, cims = w1_axes
    got = engines.numpy_rows(cre, cims, WINDOW_1.max_iter, np.float32)
    assert np.array_equal(got, reference_counts(WINDOW_1, DIMS,
                                                Precision.SINGLE))


def test_numpy_engine_slice_independent(w1_axes):
    # splitting the grid into arbitrary row bands must not change pixels
    cre, cims = w1_axes
    whole = engines.numpy_rows(cre, cims, 80, np.float64)
    stitched = np.vstack([
        engines.numpy_rows(cre, cims[:7], 80, np.float64),
        engines.numpy_rows(cre, cims[7:8], 80, np.float64),
        engines.numpy_rows(cre, cims[8:], 80, np.float64),
    ])
    assert np.array_equal(whole, stitched)


def test_numpy_engine_compaction_interval_irrelevant(w1_axes):
    cre, cims = w1_axes
    a = engines.numpy_rows(cre, cims, 80, np.float32, compact_every=1)
    b = engines.numpy_rows(cre, cims, 80, np.float32, compact_every=77)
    assert np.array_equal(a, b)


def test_half_row_engine_matches_reference():
    dims = GridDims(31, 9)
    cre, cims = axis_coordinates(WINDOW_1, dims)
    out = np.zeros((dims.height, dims.width), np.int32)
    engines.render_rows(out, cre, cims, 40, Precision.HALF)
    expect = render_reference(
        type(WINDOW_1)(WINDOW_1.x1, WINDOW_1.y1, WINDOW_1.x2, WINDOW_1.y2, 40),
        dims, Precision.HALF)
    assert np.array_equal(out, expect.counts)


def test_lane_kernel_rejects_half_and_bad_counts():
    with pytest.raises(ValueError):
        engines.lane_kernel(3, Precision.SINGLE)
    with pytest.raises(ValueError):
        engines.lane_kernel(4, Precision.HALF)


def test_lane_kernel_cache_returns_same_object():
    a = engines.lane_kernel(4, Precision.SINGLE)
    b = engines.lane_kernel(4, Precision.SINGLE)
    assert a is b


@pytest.mark.parametrize("width", [1, 2, 3, 15, 16, 17, 31])
def test_ragged_tails_every_width(width):
    # widths straddling each lane count, W2 coordinates, single precision
    dims = GridDims(width, 5)
    cre, cims = axis_coordinates(WINDOW_2, dims)
    expect = reference_counts(WINDOW_2, dims, Precision.SINGLE)
    for lanes in engines.LANE_COUNTS:
        out = np.zeros((dims.height, dims.width), np.int32)
        engines.render_rows(out, cre, cims, WINDOW_2.max_iter,
                            Precision.SINGLE, lane_count=lanes)
        assert np.array_equal(out, expect), (width, lanes)


def test_vectorization_flag_is_set():
    import numba
    assert numba.config.SLP_VECTORIZE == 1
