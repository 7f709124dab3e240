"""Virtual device library ABI + DeviceSession facade behavior."""

import threading
import time

import numpy as np
import pytest

from mandelbench.core import (GridDims, Precision, WINDOW_1, Window,
                              render_reference)
from mandelbench.devices import (PRECISION_CODES, VIRTUAL_LIB_VERSION,
                                 DeviceError, DeviceSession,
                                 VirtualDeviceLibrary)

DIMS = GridDims(40, 20)


@pytest.fixture
def session():
    s = DeviceSession(VirtualDeviceLibrary())
    yield s
    if not s.guard.stopping:
        s.guard.stop()


_FRESH = object()


def raw_render(session, *, code=1, out=_FRESH, width=40, height=20,
               max_iter=30, row_start=0, row_count=None):
    if out is _FRESH:
        out = np.zeros(width * height, np.int32)
    if row_count is None:
        row_count = height
    return session.bridge.invoke("stub_render_rows", -2.0, 1.0, 1.0, -1.0,
                                 width, height, max_iter, code, row_start,
                                 row_count, out)


class TestAbiStatusCodes:
    def test_ok(self, session):
        assert raw_render(session) == 0

    def test_unknown_precision_code(self, session):
        assert raw_render(session, code=7) == 1

    def test_null_buffer(self, session):
        assert raw_render(session, out=None) == 2

    def test_undersized_buffer(self, session):
        small = np.zeros(5, np.int32)
        assert raw_render(session, out=small) == 2

    @pytest.mark.parametrize("kwargs", [
        dict(width=0),
        dict(height=0),
        dict(max_iter=0),
        dict(row_start=-1),
        dict(row_count=-1),
        dict(row_start=15, row_count=6),  # runs past the last row
    ])
    def test_bad_geometry(self, session, kwargs):
        assert raw_render(session, **kwargs) == 3

    def test_zero_rows_succeeds_without_touching_buffer(self, session):
        out = np.full(40 * 20, 7, np.int32)
        assert raw_render(session, out=out, row_count=0) == 0
        assert (out == 7).all()


class TestCounters:
    def test_fresh_load_reports_zero_entries(self, session):
        session.call_version()  # forces the load, but is not a compute call
        active, total, generation = session.call_counters()
        assert (active, total) == (0, 0)
        assert generation == 1

    def test_total_tracks_render_calls(self, session):
        for expected in (1, 2, 3):
            raw_render(session)
            active, total, _ = session.call_counters()
            assert active == 0
            assert total == expected

    def test_active_visible_during_inflight_render(self):
        lib = VirtualDeviceLibrary(entry_delay_s=0.25)
        s = DeviceSession(lib)
        s.call_version()
        seen = []

        def worker():
            raw_render(s, width=8, height=2, row_count=2)

        t = threading.Thread(target=worker)
        t.start()
        time.sleep(0.08)
        seen.append(s.call_counters())
        t.join()
        seen.append(s.call_counters())
        s.guard.stop()

        assert seen[0][0] >= 1          # mid-flight: at least one inside
        assert seen[1] == (0, 1, 1)     # drained: none inside, one recorded

    def test_generation_follows_unload_reload(self, session):
        session.call_version()
        session.guard.stop()       # drains and unloads
        session.guard.resume()
        assert session.call_counters()[2] == 2


class TestVersionAndCodes:
    def test_version_constant(self, session):
        assert session.call_version() == VIRTUAL_LIB_VERSION

    def test_precision_code_table(self):
        assert PRECISION_CODES == {Precision.HALF: 0, Precision.SINGLE: 1,
                                   Precision.DOUBLE: 2}


class TestUseAfterClose:
    def test_any_entry_after_close_is_recorded(self):
        lib = VirtualDeviceLibrary()
        handle = lib.open_handle()
        version = handle.resolve("stub_version")
        counters = handle.resolve("stub_counters")
        handle.close()
        version()
        counters([0, 0, 0])
        assert lib.closed_entry_violations == 2

    def test_live_handle_records_none(self):
        lib = VirtualDeviceLibrary()
        handle = lib.open_handle()
        handle.resolve("stub_version")()
        assert lib.closed_entry_violations == 0
        handle.close()


class _BrokenLib:
    """Loadable target whose render entry always reports bad geometry."""

    def open_handle(self):
        outer = self

        class Handle:
            closed = False

            def resolve(self, name):
                if name == "stub_render_rows":
                    return lambda *a: 3
                raise AttributeError(name)

            def close(self):
                self.closed = True

        return Handle()


class TestSessionRender:
    @pytest.mark.parametrize("precision", list(Precision))
    def test_matches_reference(self, session, precision):
        grid, _ = session.render(WINDOW_1, DIMS, precision)
        expected = render_reference(WINDOW_1, DIMS, precision)
        assert (grid.counts == expected.counts).all()

    def test_breakdown_fields(self, session):
        window = Window(-2.0, 1.0, 1.0, -1.0, 200)
        _, bd = session.render(window, GridDims(120, 80), Precision.DOUBLE)
        assert bd.compute_ms > 0.0
        for part in (bd.boundary_ms, bd.lock_ms, bd.setup_ms):
            assert part >= 0.0

    def test_nonzero_status_raises(self):
        s = DeviceSession(_BrokenLib())
        with pytest.raises(DeviceError, match="status 3"):
            s.render(WINDOW_1, DIMS, Precision.DOUBLE)
        s.guard.stop()
