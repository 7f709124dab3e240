"""ABI behavior of the compiled stub over the real OS loader."""

import ctypes
import threading
import time

import numpy as np
import pytest

from mandelbench.bridge import NativeBridge
from mandelbench.core import (GridDims, Precision, WINDOW_1,
                              render_reference)
from mandelbench.devices import DeviceSession

STUB_VERSION = 20001
_FRESH = object()


@pytest.fixture
def session(stub_path):
    s = DeviceSession(stub_path)
    yield s
    if not s.guard.stopping:
        s.guard.stop()


def raw_render(bridge, *, code=1, out=_FRESH, width=24, height=12,
               max_iter=20, row_start=0, row_count=None):
    if out is _FRESH:
        out = np.zeros(width * height, np.int32)
    if row_count is None:
        row_count = height
    ptr = (None if out is None
           else out.ctypes.data_as(ctypes.POINTER(ctypes.c_int32)))
    i32 = ctypes.c_int32
    return bridge.invoke("stub_render_rows",
                         ctypes.c_double(-2.0), ctypes.c_double(1.0),
                         ctypes.c_double(1.0), ctypes.c_double(-1.0),
                         i32(width), i32(height), i32(max_iter), i32(code),
                         i32(row_start), i32(row_count), ptr)


def read_counters(bridge):
    buf = (ctypes.c_int64 * 3)()
    assert bridge.invoke("stub_counters", buf) == 0
    return tuple(int(v) for v in buf)


class TestStatusCodes:
    def test_ok(self, session):
        assert raw_render(session.bridge) == 0

    def test_unknown_precision_code(self, session):
        assert raw_render(session.bridge, code=7) == 1

    def test_null_buffer(self, session):
        assert raw_render(session.bridge, out=None) == 2

    @pytest.mark.parametrize("kwargs", [
        dict(width=0),
        dict(height=0),
        dict(max_iter=0),
        dict(row_start=-1),
        dict(row_count=-1),
        dict(row_start=10, row_count=3),
    ])
    def test_bad_geometry(self, session, kwargs):
        assert raw_render(session.bridge, **kwargs) == 3

    def test_zero_rows_leaves_buffer_alone(self, session):
        out = np.full(24 * 12, 9, np.int32)
        assert raw_render(session.bridge, out=out, row_count=0) == 0
        assert (out == 9).all()


class TestCounters:
    def test_fresh_load_reports_no_entries(self, session):
        assert session.call_version() == STUB_VERSION  # load + smoke
        active, total, generation = read_counters(session.bridge)
        assert (active, total) == (0, 0)
        assert generation >= 1

    def test_observer_symbols_do_not_count(self, session):
        raw_render(session.bridge)
        for _ in range(5):
            session.call_version()
            read_counters(session.bridge)
        active, total, _ = read_counters(session.bridge)
        assert (active, total) == (0, 1)

    def test_every_render_counts_even_failed_ones(self, session):
        raw_render(session.bridge)
        raw_render(session.bridge, code=9)   # rejected, still an entry
        assert read_counters(session.bridge)[1] == 2

    def test_delay_hook_exposes_active_entry(self, session, monkeypatch):
        session.call_version()
        monkeypatch.setenv("STUB_DEVICE_DELAY_MS", "250")
        seen = []

        def worker():
            raw_render(session.bridge, width=4, height=2, row_count=2)

        t = threading.Thread(target=worker)
        t.start()
        time.sleep(0.08)
        seen.append(read_counters(session.bridge))
        t.join()
        monkeypatch.delenv("STUB_DEVICE_DELAY_MS")
        seen.append(read_counters(session.bridge))

        assert seen[0][0] >= 1
        assert seen[1][0] == 0


class TestRenderAgreement:
    DIMS = GridDims(48, 32)

    @pytest.mark.parametrize("precision", list(Precision))
    def test_matches_reference(self, session, precision):
        got, _ = session.render(WINDOW_1, self.DIMS, precision)
        ref = render_reference(WINDOW_1, self.DIMS, precision)
        assert (got.counts == ref.counts).all()

    def test_row_slices_compose(self, session):
        """Any row partition must produce the same pixels."""
        whole = np.zeros(48 * 32, np.int32)
        assert raw_render(session.bridge, out=whole, width=48, height=32,
                          max_iter=60) == 0
        stitched = np.zeros_like(whole)
        for start, count in ((0, 5), (5, 11), (16, 16)):
            part = np.zeros(48 * count, np.int32)
            assert raw_render(session.bridge, out=part, width=48, height=32,
                              max_iter=60, row_start=start,
                              row_count=count) == 0
            stitched[48 * start:48 * (start + count)] = part
        assert (stitched == whole).all()


def test_version_constant(stub_path):
    bridge = NativeBridge()
    bridge.configure_library_path(stub_path)
    assert bridge.invoke("stub_version") == STUB_VERSION
    bridge.unload_library()
