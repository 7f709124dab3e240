"""Reference escape-time iteration, pixel/plane mapping and grid comparison.

Everything else in the package is measured against this module: the scalar
`iterate_point` loop is the ground truth for a single pixel, and
`render_reference` is the brute-force per-pixel oracle the parallel backends
must reproduce bitwise.  The loop body uses one fixed operation order

    zr2 = zr*zr;  zi2 = zi*zi;  test zr2+zi2 <= 4
    zr' = (zr2 - zi2) + cr;  zi' = (zr*zi + zr*zi) + ci

so that scalar, vector and device implementations of the same recurrence can
agree bit for bit (no fused multiply-add, no re-association).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Precision(enum.Enum):
    """Working floating-point format of the iteration.

    HALF is binary16 with round-to-nearest-even applied after every
    arithmetic operation (software emulated - host CPUs generally cannot do
    native half arithmetic).  SINGLE and DOUBLE are the ordinary IEEE 32/64
    bit formats.
    """

    HALF = "half"
    SINGLE = "single"
    DOUBLE = "double"

    @property
    def dtype(self):
        return {Precision.HALF: np.float16,
                Precision.SINGLE: np.float32,
                Precision.DOUBLE: np.float64}[self]


@dataclass(frozen=True)
class Window:
    """A rectangle of the complex plane plus its iteration budget.

    (x1, y1) is the upper-left corner, (x2, y2) the lower-right one, so
    x1 < x2 and y1 > y2 (the imaginary coordinate decreases row by row).
    """

    x1: float
    y1: float
    x2: float
    y2: float
    max_iter: int

    def __post_init__(self):
        if not (self.x1 < self.x2):
            raise ValueError(f"need x1 < x2, got {self.x1} >= {self.x2}")
        if not (self.y1 > self.y2):
            raise ValueError(f"need y1 > y2, got {self.y1} <= {self.y2}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.max_iter > 2**31 - 1:
            raise ValueError("max_iter larger than a 32-bit count")


#: The three benchmark regions: modest, intermediate and high workload.
WINDOW_1 = Window(-2.0, 1.0, 1.0, -1.0, 80)
WINDOW_2 = Window(-0.739, 0.1448888, -0.734, 0.1415, 1500)
WINDOW_3 = Window(-0.737, 0.14667, -0.736, 0.146, 3000)

BUILTIN_WINDOWS = {1: WINDOW_1, 2: WINDOW_2, 3: WINDOW_3}

#: Full-size benchmark grid, and the reduced grid for quick desk runs.
FULL_DIMS = (1600, 1072)
DESK_DIMS = (400, 268)


@dataclass(frozen=True)
class GridDims:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")

    @property
    def pixels(self) -> int:
        return self.width * self.height


@dataclass
class IterationGrid:
    """Row-major escape counts for one rendered window."""

    dims: GridDims
    counts: np.ndarray  # shape (height, width), int32

    def __post_init__(self):
        self.counts = np.ascontiguousarray(self.counts, dtype=np.int32)
        if self.counts.shape != (self.dims.height, self.dims.width):
            raise ValueError(
                f"counts shape {self.counts.shape} does not match dims "
                f"{self.dims.width}x{self.dims.height}")


@dataclass(frozen=True)
class MismatchReport:
    total_pixels: int
    differing_pixels: int
    max_abs_diff: int

    @property
    def differing_fraction(self) -> float:
        return self.differing_pixels / self.total_pixels


def _iterate_scalar(cr, ci, max_iter: int, four, zero) -> int:
    """One escape-time orbit; cr/ci/four/zero must share one numeric type."""
    zr = zero
    zi = zero
    it = 0
    while it < max_iter:
        zr2 = zr * zr
        zi2 = zi * zi
        if not (zr2 + zi2 <= four):  # catches > 4 and NaN after f16 overflow
            break
        t = (zr2 - zi2) + cr
        zrzi = zr * zi
        zi = (zrzi + zrzi) + ci
        zr = t
        it += 1
    return it


def iterate_point(c_re: float, c_im: float, max_iter: int,
                  precision: Precision = Precision.DOUBLE) -> int:
    """Number of iterations of z <- z^2 + c before |z|^2 > 4, capped.

    The test is inclusive: an orbit sitting exactly on |z|^2 == 4 keeps
    iterating (c = -2 stays at the cap forever).  The input coordinate is
    rounded once into the working precision; after that every operation is
    carried out (and rounded) in that precision.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if not (math.isfinite(c_re) and math.isfinite(c_im)):
        raise ValueError("coordinates must be finite")

    if precision is Precision.DOUBLE:
        # plain python floats are IEEE doubles; cheapest exact route
        return _iterate_scalar(float(c_re), float(c_im), max_iter, 4.0, 0.0)

    dt = precision.dtype
    with np.errstate(over="ignore", invalid="ignore"):
        return _iterate_scalar(dt(c_re), dt(c_im), max_iter, dt(4.0), dt(0.0))


def coordinate_of_pixel(window: Window, dims: GridDims,
                        col: int, row: int) -> tuple[float, float]:
    """Complex coordinate sampled by pixel (col, row), in double precision.

    The first sample sits exactly on the window corner (x1, y1) and the step
    is span/width (resp. span/height): the mapping is computed per pixel by
    multiplication so that all backends, whatever their traversal order,
    sample identical coordinates.
    """
    if not (0 <= col < dims.width):
        raise ValueError(f"col {col} outside [0, {dims.width})")
    if not (0 <= row < dims.height):
        raise ValueError(f"row {row} outside [0, {dims.height})")
    c_re = window.x1 + col * ((window.x2 - window.x1) / dims.width)
    c_im = window.y1 - row * ((window.y1 - window.y2) / dims.height)
    return c_re, c_im


def axis_coordinates(window: Window, dims: GridDims):
    """Vectorized coordinate_of_pixel: (re per column, im per row), float64."""
    xstep = (window.x2 - window.x1) / dims.width
    ystep = (window.y1 - window.y2) / dims.height
    c_re = window.x1 + np.arange(dims.width, dtype=np.float64) * xstep
    c_im = window.y1 - np.arange(dims.height, dtype=np.float64) * ystep
    return c_re, c_im


def render_reference(window: Window, dims: GridDims,
                     precision: Precision = Precision.DOUBLE) -> IterationGrid:
    """Brute-force render: one independent iterate_point call per pixel.

    Deliberately unoptimized - this is the oracle the fast paths are
    compared against, so it shares no code with them beyond iterate_point.
    """
    counts = np.empty((dims.height, dims.width), dtype=np.int32)
    for row in range(dims.height):
        for col in range(dims.width):
            c_re, c_im = coordinate_of_pixel(window, dims, col, row)
            counts[row, col] = iterate_point(c_re, c_im, window.max_iter,
                                             precision)
    return IterationGrid(dims, counts)


def grid_diff(a: IterationGrid, b: IterationGrid) -> MismatchReport:
    """Pixelwise comparison of two grids of identical dimensions."""
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    diff = np.abs(a.counts.astype(np.int64) - b.counts.astype(np.int64))
    differing = int(np.count_nonzero(diff))
    return MismatchReport(total_pixels=a.dims.pixels,
                          differing_pixels=differing,
                          max_abs_diff=int(diff.max()) if diff.size else 0)
