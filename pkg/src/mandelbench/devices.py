"""Device plumbing: the virtual library, the typed facade, the session.

The bridge (mandelbench.bridge) forwards symbol calls without knowing
what they mean.  This module supplies the two things layered on top:

* VirtualDeviceLibrary - an in-process implementation of the same symbol
  surface a compiled device stub exports (stub_render_rows,
  stub_counters, stub_version), with entry instrumentation.  It lets
  every lock-protocol property be tested without an OS loader, and its
  instrumentation is the oracle for the "never entered while unloaded"
  safety claim.
* DeviceSession - the typed facade: owns a bridge and a lifecycle guard,
  marshals arguments (ctypes for a real shared object, plain Python for
  the virtual library) and times the overhead decomposition of every
  render: boundary, lock, setup, compute.
"""

from __future__ import annotations

import ctypes
import threading
import time

import numpy as np

from . import engines
from .bridge import NativeBridge, SymbolUnresolvedError
from .core import GridDims, IterationGrid, Precision, Window
from .guard import LifecycleGuard
from .harness import OverheadBreakdown

#: precision wire codes shared with the compiled stub ABI
PRECISION_CODES = {Precision.HALF: 0, Precision.SINGLE: 1,
                   Precision.DOUBLE: 2}
_CODE_TO_PRECISION = {v: k for k, v in PRECISION_CODES.items()}

VIRTUAL_LIB_VERSION = 10001


class DeviceError(Exception):
    """Nonzero status from a device entry point."""


class VirtualDeviceLibrary:
    """In-process stand-in for a loadable compute library.

    open_handle()/close() model dlopen/dlclose: each open starts a new
    load generation; calls arriving after close are recorded as
    violations (they would be use-after-unload crashes on a real loader).
    A configurable entry delay widens race windows deterministically for
    the concurrency tests, mirroring the compiled stub's test hook.
    """

    name = "virtual-device-library"

    def __init__(self, entry_delay_s: float = 0.0):
        self.entry_delay_s = entry_delay_s
        self._lock = threading.Lock()
        self.load_generation = 0
        self.total_entries = 0
        self.active_entries = 0
        self.closed_entry_violations = 0
        self.open_handles = 0

    def open_handle(self):
        with self._lock:
            self.load_generation += 1
            self.open_handles += 1
        return _VirtualHandle(self)

    # -- instrumentation ----------------------------------------------

    def _enter(self, handle, counted: bool = True):
        """Record one entry.  Every entry checks the use-after-close
        oracle; only compute entries (stub_render_rows) move the
        active/total counters, so a counters query does not observe
        itself."""
        with self._lock:
            if handle.closed:
                self.closed_entry_violations += 1
            if counted:
                self.total_entries += 1
                self.active_entries += 1
        if counted and self.entry_delay_s:
            time.sleep(self.entry_delay_s)

    def _exit(self):
        with self._lock:
            self.active_entries -= 1

    # -- the exported surface ------------------------------------------

    def _render_rows(self, handle, x1, y1, x2, y2, width, height, max_iter,
                     precision_code, row_start, row_count, out):
        self._enter(handle)
        try:
            if precision_code not in _CODE_TO_PRECISION:
                return 1
            if out is None:
                return 2
            if (width < 1 or height < 1 or max_iter < 1 or row_start < 0
                    or row_count < 0 or row_start + row_count > height):
                return 3
            if row_count == 0:
                return 0
            if out.size < width * row_count:
                return 2
            precision = _CODE_TO_PRECISION[precision_code]
            xstep = (x2 - x1) / width
            ystep = (y1 - y2) / height
            cre = x1 + np.arange(width, dtype=np.float64) * xstep
            cims = y1 - (row_start
                         + np.arange(row_count, dtype=np.float64)) * ystep
            view = out[:width * row_count].reshape(row_count, width)
            engines.render_rows(view, cre, cims, max_iter, precision)
            return 0
        finally:
            self._exit()

    def _counters(self, handle, out):
        self._enter(handle, counted=False)
        if out is None or len(out) < 3:
            return 2
        with self._lock:
            out[0] = self.active_entries
            out[1] = self.total_entries
            out[2] = self.load_generation
        return 0

    def _version(self, handle):
        self._enter(handle, counted=False)
        return VIRTUAL_LIB_VERSION


class _VirtualHandle:
    _SYMBOLS = {"stub_render_rows": "_render_rows",
                "stub_counters": "_counters",
                "stub_version": "_version"}

    def __init__(self, lib: VirtualDeviceLibrary):
        self._lib = lib
        self.closed = False

    def resolve(self, name: str):
        attr = self._SYMBOLS.get(name)
        if attr is None:
            raise SymbolUnresolvedError(name)
        bound = getattr(self._lib, attr)

        def entry(*args):
            return bound(self, *args)

        return entry

    def close(self):
        self.closed = True
        with self._lib._lock:
            self._lib.open_handles -= 1


class DeviceSession:
    """Bridge + guard + marshalling + per-render overhead timing."""

    def __init__(self, target, stop_deadline: float = 5.0):
        self.bridge = NativeBridge()
        self.bridge.configure_library_path(target)
        self.guard = LifecycleGuard(self.bridge, stop_deadline=stop_deadline)
        self._virtual = hasattr(target, "open_handle")

    # -- marshalling ----------------------------------------------------

    def _call_render_rows(self, window: Window, dims: GridDims,
                          precision: Precision, row_start: int,
                          row_count: int, out: np.ndarray) -> int:
        code = PRECISION_CODES[precision]
        if self._virtual:
            return self.bridge.invoke(
                "stub_render_rows", window.x1, window.y1, window.x2,
                window.y2, dims.width, dims.height, window.max_iter, code,
                row_start, row_count, out)
        return self.bridge.invoke(
            "stub_render_rows",
            ctypes.c_double(window.x1), ctypes.c_double(window.y1),
            ctypes.c_double(window.x2), ctypes.c_double(window.y2),
            ctypes.c_int32(dims.width), ctypes.c_int32(dims.height),
            ctypes.c_int32(window.max_iter), ctypes.c_int32(code),
            ctypes.c_int32(row_start), ctypes.c_int32(row_count),
            out.ctypes.data_as(ctypes.POINTER(ctypes.c_int32)))

    def call_counters(self) -> tuple[int, int, int]:
        """(active_entries, total_entries, load_generation) snapshot."""
        if self._virtual:
            out = [0, 0, 0]
            status = self.bridge.invoke("stub_counters", out)
        else:
            buf = (ctypes.c_int64 * 3)()
            status = self.bridge.invoke("stub_counters", buf)
            out = list(buf)
        if status != 0:
            raise DeviceError(f"stub_counters failed with status {status}")
        return int(out[0]), int(out[1]), int(out[2])

    def call_version(self) -> int:
        return int(self.bridge.invoke("stub_version"))

    # -- the instrumented render ----------------------------------------

    def render(self, window: Window, dims: GridDims, precision: Precision,
               vector_width: int = 1):
        """One guarded offloaded render with its overhead decomposition.

        vector_width shapes the generated device kernel on real compute
        hardware; the stub ABI computes with host arithmetic where lane
        count cannot change results, so here it is recorded, not acted on.

        Timing spans are disjoint by construction: lock_ms is guard entry
        + bridge lock wait + guard exit, setup_ms is buffer preparation,
        compute_ms is the in-library span, and boundary_ms is whatever
        remains of the facade's total (argument marshalling, Python frame
        overhead) - so wall time always >= the sum of the parts.
        """
        t_total0 = time.perf_counter()
        t0 = time.perf_counter()
        token = self.guard.enter_guarded()
        lock_s = time.perf_counter() - t0
        try:
            t0 = time.perf_counter()
            out = np.zeros(dims.height * dims.width, dtype=np.int32)
            setup_s = time.perf_counter() - t0

            t0 = time.perf_counter()
            status = self._call_render_rows(window, dims, precision, 0,
                                            dims.height, out)
            span = time.perf_counter() - t0
            bridge_wait = self.bridge.last_lock_wait
            lock_s += bridge_wait
            compute_s = max(span - bridge_wait, 0.0)
            if status != 0:
                raise DeviceError(
                    f"stub_render_rows failed with status {status}")

            t0 = time.perf_counter()
            grid = IterationGrid(dims, out.reshape(dims.height, dims.width))
            setup_s += time.perf_counter() - t0
        finally:
            t0 = time.perf_counter()
            self.guard.leave_guarded(token)
            lock_s += time.perf_counter() - t0
        total_s = time.perf_counter() - t_total0
        boundary_s = max(total_s - lock_s - setup_s - compute_s, 0.0)
        breakdown = OverheadBreakdown(boundary_ms=boundary_s * 1e3,
                                      lock_ms=lock_s * 1e3,
                                      setup_ms=setup_s * 1e3,
                                      compute_ms=compute_s * 1e3)
        return grid, breakdown
