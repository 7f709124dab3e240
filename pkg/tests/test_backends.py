"""Scheduling layers: chunk queue, thread pool, lane iteration, dispatch."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mandelbench import backends
from mandelbench.backends import (BackendKind, build_chunk_queue,
                                  iterate_lanes, render, render_multithreaded,
                                  render_vectorized)
from mandelbench.core import (WINDOW_1, WINDOW_2, WINDOW_3, GridDims,
                              Precision, Window, iterate_point,
                              render_reference)


class TestChunkQueue:
    def test_full_grid_geometry(self):
        chunks = build_chunk_queue(1072, 16)
        assert len(chunks) == 67
        assert all(count == 16 for _, count in chunks)

    def test_single_short_chunk(self):
        assert build_chunk_queue(10, 16) == [(0, 10)]

    def test_remainder_chunk(self):
        assert build_chunk_queue(33, 16) == [(0, 16), (16, 16), (32, 1)]

    def test_rejects_degenerate_inputs(self):
        with pytest.raises(ValueError):
            build_chunk_queue(0, 16)
        with pytest.raises(ValueError):
            build_chunk_queue(16, 0)

    @given(st.integers(1, 3000), st.integers(1, 64))
    @settings(max_examples=80, deadline=None)
    def test_exact_disjoint_cover(self, height, chunk_lines):
        chunks = build_chunk_queue(height, chunk_lines)
        rows = [r for start, count in chunks
                for r in range(start, start + count)]
        assert rows == list(range(height))
        assert all(count == chunk_lines for _, count in chunks[:-1])
        assert 1 <= chunks[-1][1] <= chunk_lines


class TestBackendKind:
    @pytest.mark.parametrize("text,label,parallelism", [
        ("scalar", "scalar", 1),
        ("threaded:4", "threaded:4", 4),
        ("vector:8", "vector:8", 1),
        ("vector:4,threads:2", "vector:4,threads:2", 2),
        ("device:16", "device:16", 1),
    ])
    def test_parse_roundtrip(self, text, label, parallelism):
        kind = BackendKind.parse(text)
        assert kind.label == label
        assert kind.parallelism == parallelism
        assert BackendKind.parse(kind.label) == kind

    @pytest.mark.parametrize("bad", [
        "scalar:2", "threaded:0", "vector:3", "vector:", "device:5",
        "gpu:1", "vector:4,lanes:2",
    ])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValueError):
            BackendKind.parse(bad)


class TestIterateLanes:
    def test_contract_example(self):
        got = iterate_lanes([0.0, 1.0, -2.0, 2.0], [0.0] * 4, 80,
                            Precision.SINGLE)
        assert list(got) == [80, 3, 80, 2]

    def test_uniform_lanes_hit_cap(self):
        got = iterate_lanes([0.0] * 4, [0.0] * 4, 5, Precision.SINGLE)
        assert list(got) == [5, 5, 5, 5]

    def test_dead_lane_count_frozen(self):
        # one lane dies instantly, one never; the early count must not move
        got = iterate_lanes([3.0, 0.0], [0.0, 0.0], 1000, Precision.DOUBLE)
        assert list(got) == [1, 1000]

    @given(st.lists(st.tuples(st.floats(-2.2, 1.2), st.floats(-1.2, 1.2)),
                    min_size=8, max_size=8))
    @settings(max_examples=40, deadline=None)
    def test_lanewise_equals_scalar_oracle(self, points):
        cres = [p[0] for p in points]
        cims = [p[1] for p in points]
        got = iterate_lanes(cres, cims, 120, Precision.DOUBLE)
        expect = [iterate_point(cr, ci, 120, Precision.DOUBLE)
                  for cr, ci in points]
        assert list(got) == expect


SMALL = GridDims(64, 43)


class TestRenderEquivalence:
    @pytest.mark.parametrize("n_threads", [1, 2, 4, 8])
    def test_threaded_matches_reference(self, n_threads):
        expect = render_reference(WINDOW_1, SMALL, Precision.SINGLE)
        got = render_multithreaded(WINDOW_1, SMALL, Precision.SINGLE,
                                   n_threads, 16)
        assert np.array_equal(got.counts, expect.counts)

    def test_threaded_double_window2(self):
        expect = render_reference(WINDOW_2, GridDims(40, 27), Precision.DOUBLE)
        got = render_multithreaded(WINDOW_2, GridDims(40, 27),
                                   Precision.DOUBLE, 8, 16)
        assert np.array_equal(got.counts, expect.counts)

    @pytest.mark.parametrize("lanes", [2, 4, 8, 16])
    def test_vectorized_matches_reference(self, lanes):
        expect = render_reference(WINDOW_1, SMALL, Precision.SINGLE)
        got = render_vectorized(WINDOW_1, SMALL, Precision.SINGLE, lanes, 1)
        assert np.array_equal(got.counts, expect.counts)

    def test_vectorized_ragged_column_with_threads(self):
        # 401 columns: one pixel of scalar tail after the lane strips
        dims = GridDims(401, 29)
        small_w3 = Window(WINDOW_3.x1, WINDOW_3.y1, WINDOW_3.x2, WINDOW_3.y2,
                          150)
        expect = render_reference(small_w3, dims, Precision.SINGLE)
        got = render_vectorized(small_w3, dims, Precision.SINGLE, 4, 4)
        assert np.array_equal(got.counts, expect.counts)

    def test_chunk_lines_never_change_pixels(self):
        expect = render_reference(WINDOW_2, GridDims(33, 21), Precision.SINGLE)
        for chunk_lines in (1, 2, 5, 16, 100):
            got = render_multithreaded(WINDOW_2, GridDims(33, 21),
                                       Precision.SINGLE, 3, chunk_lines)
            assert np.array_equal(got.counts, expect.counts), chunk_lines

    def test_half_grid_through_dispatcher(self):
        small = Window(WINDOW_1.x1, WINDOW_1.y1, WINDOW_1.x2, WINDOW_1.y2, 40)
        expect = render_reference(small, GridDims(24, 16), Precision.HALF)
        got = render(BackendKind.parse("threaded:2"), small, GridDims(24, 16),
                     Precision.HALF)
        assert np.array_equal(got.counts, expect.counts)

    def test_dispatcher_rejects_device_without_session(self):
        with pytest.raises(ValueError):
            render(BackendKind.parse("device:1"), WINDOW_1, SMALL,
                   Precision.SINGLE)
