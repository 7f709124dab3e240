"""The execution paradigms: chunked threads, lane vectors, device offload.

All CPU backends are thin schedulers around the engines in
:mod:`mandelbench.engines`; the device backend forwards through a
:class:`mandelbench.devices.DeviceSession`.  Whatever the paradigm, every
pixel is produced by the identical operation sequence, so the outputs are
required (and tested) to be bitwise identical to ``render_reference``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from . import engines
from .core import (GridDims, IterationGrid, Precision, Window,
                   axis_coordinates)

DEFAULT_CHUNK_LINES = 16
LANE_COUNTS = engines.LANE_COUNTS
VECTOR_WIDTHS = (1, 2, 4, 8, 16)


@dataclass(frozen=True)
class BackendKind:
    """Parsed backend selector.

    kind ∈ {scalar, threaded, vector, device}; the relevant parameter
    fields are n_threads (threaded/vector), lane_count (vector) and
    vector_width (device).
    """

    kind: str
    n_threads: int = 1
    lane_count: int | None = None
    vector_width: int | None = None

    def __post_init__(self):
        if self.kind not in ("scalar", "threaded", "vector", "device"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.n_threads < 1:
            raise ValueError("n_threads must be >= 1")
        if self.kind == "vector" and self.lane_count not in LANE_COUNTS:
            raise ValueError(f"lane_count must be one of {LANE_COUNTS}")
        if self.kind == "device" and self.vector_width not in VECTOR_WIDTHS:
            raise ValueError(f"vector_width must be one of {VECTOR_WIDTHS}")

    @classmethod
    def parse(cls, text: str) -> "BackendKind":
        """Parse CLI syntax: scalar | threaded:N | vector:L[,threads:N] | device:W."""
        head, _, rest = text.strip().partition(":")
        if head == "scalar":
            if rest:
                raise ValueError("scalar takes no parameters")
            return cls("scalar")
        if head == "threaded":
            return cls("threaded", n_threads=int(rest or 0))
        if head == "vector":
            parts = [p.strip() for p in rest.split(",") if p.strip()]
            if not parts:
                raise ValueError("vector needs a lane count, e.g. vector:4")
            lanes = int(parts[0])
            threads = 1
            for extra in parts[1:]:
                key, _, val = extra.partition(":")
                if key != "threads":
                    raise ValueError(f"unknown vector parameter {extra!r}")
                threads = int(val)
            return cls("vector", n_threads=threads, lane_count=lanes)
        if head == "device":
            return cls("device", vector_width=int(rest or 1))
        raise ValueError(f"unknown backend {text!r}")

    @property
    def label(self) -> str:
        if self.kind == "scalar":
            return "scalar"
        if self.kind == "threaded":
            return f"threaded:{self.n_threads}"
        if self.kind == "vector":
            if self.n_threads == 1:
                return f"vector:{self.lane_count}"
            return f"vector:{self.lane_count},threads:{self.n_threads}"
        return f"device:{self.vector_width}"

    @property
    def parallelism(self) -> int:
        return self.n_threads if self.kind in ("threaded", "vector") else 1


def build_chunk_queue(height: int, chunk_lines: int) -> list[tuple[int, int]]:
    """Split [0, height) into FIFO row bands of chunk_lines (last may be short)."""
    if height < 1 or chunk_lines < 1:
        raise ValueError("height and chunk_lines must be positive")
    chunks = []
    for start in range(0, height, chunk_lines):
        chunks.append((start, min(chunk_lines, height - start)))
    return chunks


class _ChunkQueue:
    """Shared FIFO hand-out of row bands; the only cross-thread state."""

    def __init__(self, chunks):
        self._chunks = list(chunks)
        self._next = 0
        self._lock = threading.Lock()

    def take(self):
        with self._lock:
            if self._next >= len(self._chunks):
                return None
            chunk = self._chunks[self._next]
            self._next += 1
            return chunk


def _render_chunked(window: Window, dims: GridDims, precision: Precision,
                    n_threads: int, chunk_lines: int,
                    lane_count: int | None) -> IterationGrid:
    if n_threads < 1:
        raise ValueError("n_threads must be >= 1")
    cre, cims = axis_coordinates(window, dims)
    out = np.zeros((dims.height, dims.width), dtype=np.int32)
    queue = _ChunkQueue(build_chunk_queue(dims.height, chunk_lines))
    failures: list[BaseException] = []

    def worker():
        try:
            while True:
                chunk = queue.take()
                if chunk is None:
                    return
                start, count = chunk
                engines.render_rows(out[start:start + count],
                                    cre, cims[start:start + count],
                                    window.max_iter, precision,
                                    lane_count=lane_count)
        except BaseException as exc:  # propagate to the coordinator
            failures.append(exc)

    if precision is not Precision.HALF:
        # compile outside the worker pool so a cold JIT cannot be charged
        # to (or race inside) the measured region
        engines.render_rows(np.zeros((1, 1), np.int32), cre[:1], cims[:1],
                            1, precision, lane_count=lane_count)
    threads = [threading.Thread(target=worker, name=f"render-{i}")
               for i in range(n_threads)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if failures:
        raise RuntimeError("render worker failed") from failures[0]
    return IterationGrid(dims, out)


def render_scalar(window: Window, dims: GridDims,
                  precision: Precision = Precision.DOUBLE,
                  chunk_lines: int = DEFAULT_CHUNK_LINES) -> IterationGrid:
    return _render_chunked(window, dims, precision, 1, chunk_lines, None)


def render_multithreaded(window: Window, dims: GridDims, precision: Precision,
                         n_threads: int,
                         chunk_lines: int = DEFAULT_CHUNK_LINES) -> IterationGrid:
    return _render_chunked(window, dims, precision, n_threads, chunk_lines,
                           None)


def render_vectorized(window: Window, dims: GridDims, precision: Precision,
                      lane_count: int, n_threads: int = 1,
                      chunk_lines: int = DEFAULT_CHUNK_LINES) -> IterationGrid:
    if lane_count not in LANE_COUNTS:
        raise ValueError(f"lane_count must be one of {LANE_COUNTS}")
    lanes = None if precision is Precision.HALF else lane_count
    return _render_chunked(window, dims, precision, n_threads, chunk_lines,
                           lanes)


def iterate_lanes(c_res, c_ims, max_iter: int,
                  precision: Precision = Precision.DOUBLE):
    """Blend-mask iteration of one lane vector with per-lane coordinates.

    This is the executable statement of the vector scheme's semantics: a
    shared loop, a latched per-lane mask, a masked (never branched)
    counter increment, and an exit once every lane is dead.  Results equal
    iterate_point applied lane-wise.
    """
    lanes = len(c_res)
    if len(c_ims) != lanes:
        raise ValueError("lane coordinate lists must have equal length")
    if lanes not in LANE_COUNTS and lanes != 1:
        raise ValueError(f"lane count must be one of {LANE_COUNTS}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    dt = precision.dtype
    with np.errstate(over="ignore", invalid="ignore"):
        cr = np.array([dt(v) for v in c_res], dtype=dt)
        ci = np.array([dt(v) for v in c_ims], dtype=dt)
        zr = np.zeros(lanes, dt)
        zi = np.zeros(lanes, dt)
        mask = np.ones(lanes, np.int32)
        counts = np.zeros(lanes, np.int32)
        it = 0
        while it < max_iter:
            zr2 = zr * zr
            zi2 = zi * zi
            mask &= ((zr2 + zi2) <= dt(4.0)).astype(np.int32)
            counts += mask
            if not mask.any():
                break
            t = (zr2 - zi2) + cr
            zrzi = zr * zi
            zi = (zrzi + zrzi) + ci
            zr = t
            it += 1
    return [int(c) for c in counts]


def render_device(window: Window, dims: GridDims, precision: Precision,
                  vector_width: int, session) -> IterationGrid:
    """Offload the render through a device session (bridge + guard).

    The session owns the configured native bridge and the lifecycle guard;
    NotConfigured/Stopped/SymbolUnresolved surface as its exceptions.
    """
    grid, _ = session.render(window, dims, precision, vector_width)
    return grid


def render(backend: BackendKind, window: Window, dims: GridDims,
           precision: Precision, chunk_lines: int = DEFAULT_CHUNK_LINES,
           session=None) -> IterationGrid:
    """Dispatch a render to whichever paradigm the BackendKind names."""
    if backend.kind == "scalar":
        return render_scalar(window, dims, precision, chunk_lines)
    if backend.kind == "threaded":
        return render_multithreaded(window, dims, precision,
                                    backend.n_threads, chunk_lines)
    if backend.kind == "vector":
        return render_vectorized(window, dims, precision, backend.lane_count,
                                 backend.n_threads, chunk_lines)
    if session is None:
        raise ValueError("device backend requires a DeviceSession")
    return render_device(window, dims, precision, backend.vector_width,
                         session)
