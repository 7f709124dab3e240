"""Escape-time fractal benchmarking workbench.

Renders regions of the Mandelbrot set through interchangeable execution
backends (scalar, chunked threads, SIMD-style lane kernels, and a device
bridge with lifecycle management), measures them under a fixed protocol,
and compares the timings with the statistics in :mod:`mandelbench.stats`.
"""

from .backends import BackendKind, render
from .core import (BUILTIN_WINDOWS, WINDOW_1, WINDOW_2, WINDOW_3, GridDims,
                   IterationGrid, MismatchReport, Precision, Window,
                   coordinate_of_pixel, grid_diff, iterate_point,
                   render_reference)
from .harness import BenchConfig, BenchSample, OverheadBreakdown, run_series
from .stats import (ComparisonResult, Method, SampleSummary, SpeedupTriple,
                    compare_samples, shapiro_wilk, speedup_triple, summarize)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_WINDOWS", "WINDOW_1", "WINDOW_2", "WINDOW_3",
    "BackendKind", "BenchConfig", "BenchSample", "ComparisonResult",
    "GridDims", "IterationGrid", "Method", "MismatchReport",
    "OverheadBreakdown", "Precision", "SampleSummary", "SpeedupTriple",
    "Window", "compare_samples", "coordinate_of_pixel", "grid_diff",
    "iterate_point", "render", "render_reference", "run_series",
    "shapiro_wilk", "speedup_triple", "summarize", "__version__",
]
