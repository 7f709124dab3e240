"""Result tables, speedup triples, charts, and image export.

The analysis side of the workbench: it takes persisted sample files and
produces, per window, a table of runtime centers with confidence
intervals, the three speedup ratios, and the significance-test letter for
each configuration, plus runtime-vs-threads chart data (SVG and CSV).

Baseline mapping.  Result cells are compared against the plain scalar
kernel family: the baseline for a cell running on N threads is
``threaded:N`` (or ``scalar`` for N = 1), the "same method, one thread"
reference is the cell's own backend with its thread count forced to 1,
and the absolute reference is ``scalar``.  A cell that is its own
baseline gets ratio 1.0 and no test letter.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass

import numpy as np

from . import stats
from .backends import BackendKind
from .core import BUILTIN_WINDOWS, IterationGrid, Window
from .harness import BenchConfig
from .stats import SampleSummary, SpeedupTriple


class ReportError(Exception):
    pass


class MissingBaselineError(ReportError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__("missing baseline configs: " + ", ".join(self.missing))


def window_label(window: Window) -> str:
    """W1/W2/W3 for the built-in rectangles, explicit text otherwise."""
    for idx, builtin in BUILTIN_WINDOWS.items():
        if builtin == window:
            return f"W{idx}"
    return (f"rect({window.x1!r},{window.y1!r},{window.x2!r},{window.y2!r})"
            f"@{window.max_iter}")


def expand_run_matrix(windows, backend_specs, precisions,
                      **config_kwargs) -> list[BenchConfig]:
    """The cross product of windows x backends x precisions.

    Backend specs may be strings (CLI syntax) or BackendKind values.
    Duplicate expansions are configuration mistakes and rejected.
    """
    configs: list[BenchConfig] = []
    seen: set[str] = set()
    for window in windows:
        for spec in backend_specs:
            backend = (spec if isinstance(spec, BackendKind)
                       else BackendKind.parse(spec))
            for precision in precisions:
                cfg = BenchConfig(backend=backend, window=window,
                                  precision=precision, **config_kwargs)
                digest = cfg.metadata()["config_hash"]
                if digest in seen:
                    raise ReportError(
                        f"duplicate configuration in run matrix: "
                        f"{backend.label} {window_label(window)} "
                        f"{precision.value}")
                seen.add(digest)
                configs.append(cfg)
    return configs


@dataclass(frozen=True)
class CellKey:
    backend: str  # canonical BackendKind label
    window: str
    precision: str
    parallelism: int

    def text(self) -> str:
        return f"{self.window}/{self.precision}/{self.backend}"


@dataclass(frozen=True)
class ReportCell:
    key: CellKey
    summary: SampleSummary
    speedups: SpeedupTriple
    method_letter: str | None  # None when the cell is its own baseline
    p_value: float | None

    @property
    def significant(self) -> bool:
        return self.p_value is not None and self.p_value < stats.ALPHA


def _baseline_keys(key: CellKey) -> tuple[CellKey, CellKey, CellKey]:
    """(same-parallelism baseline, same method @1 thread, scalar)."""
    backend = BackendKind.parse(key.backend)
    same_cfg = ("scalar" if key.parallelism == 1
                else f"threaded:{key.parallelism}")
    if backend.kind in ("scalar", "threaded"):
        one_thread = "scalar"  # single-threaded member of the scalar family
    else:
        one_thread = BackendKind(backend.kind, 1, backend.lane_count,
                                 backend.vector_width).label
    return (CellKey(same_cfg, key.window, key.precision, key.parallelism),
            CellKey(one_thread, key.window, key.precision, 1),
            CellKey("scalar", key.window, key.precision, 1))


class Report:
    """Summaries, speedups, and method letters for a set of sample files."""

    def __init__(self, cells: dict[CellKey, ReportCell]):
        self.cells = cells

    @property
    def windows(self) -> list[str]:
        return sorted({k.window for k in self.cells})

    def window_cells(self, window: str) -> list[ReportCell]:
        keys = sorted((k for k in self.cells if k.window == window),
                      key=lambda k: (k.precision, k.backend, k.parallelism))
        return [self.cells[k] for k in keys]


def build_report(series: list[tuple[dict, list]]) -> Report:
    """Assemble a Report from (metadata, samples) pairs.

    Each pair carries one persisted sample file (header metadata plus its
    records).  Every cell's three baselines must be present among the
    inputs, or MissingBaselineError names the absentees.
    """
    raw: dict[CellKey, np.ndarray] = {}
    for meta, samples in series:
        cfg = BenchConfig.from_metadata(meta)
        key = CellKey(cfg.backend.label, window_label(cfg.window),
                      cfg.precision.value, cfg.backend.parallelism)
        walls = np.array([s.wall_ms for s in samples], dtype=np.float64)
        if key in raw:
            raw[key] = np.concatenate([raw[key], walls])
        else:
            raw[key] = walls

    missing = set()
    for key in raw:
        for need in _baseline_keys(key):
            if need not in raw:
                missing.add(need.text())
    if missing:
        raise MissingBaselineError(missing)

    summaries = {key: stats.summarize(walls) for key, walls in raw.items()}
    cells: dict[CellKey, ReportCell] = {}
    for key, walls in raw.items():
        b_same, b_one, b_scalar = _baseline_keys(key)
        triple = stats.speedup_triple(summaries[key], summaries[b_same],
                                      summaries[b_one], summaries[b_scalar])
        if b_same == key:
            letter, p = None, None
        else:
            cmp = stats.compare_samples(walls, raw[b_same])
            letter, p = cmp.method.letter, cmp.p_value
        cells[key] = ReportCell(key, summaries[key], triple, letter, p)
    return Report(cells)


# -- tables ------------------------------------------------------------------

_COLUMNS = ("backend", "precision", "threads", "n", "center_ms",
            "ci95_low", "ci95_high", "speedup_vs_baseline",
            "speedup_vs_one_thread", "speedup_vs_scalar", "method", "p_value")


def _cell_row(cell: ReportCell) -> list[str]:
    s = cell.summary
    ci_lo = f"{s.ci95[0]:.4f}" if s.ci95 else ""
    ci_hi = f"{s.ci95[1]:.4f}" if s.ci95 else ""
    t = cell.speedups
    return [cell.key.backend, cell.key.precision, str(cell.key.parallelism),
            str(s.n), f"{s.center:.4f}", ci_lo, ci_hi,
            f"{t.vs_baseline_same_config:.3f}",
            f"{t.vs_same_method_one_thread:.3f}",
            f"{t.vs_single_thread_baseline:.3f}",
            cell.method_letter or "",
            f"{cell.p_value:.4g}" if cell.p_value is not None else ""]


def table_csv(report: Report, window: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_COLUMNS)
    for cell in report.window_cells(window):
        writer.writerow(_cell_row(cell))
    return buf.getvalue()


def table_text(report: Report, window: str) -> str:
    rows = [list(_COLUMNS)]
    rows += [_cell_row(c) for c in report.window_cells(window)]
    widths = [max(len(r[i]) for r in rows) for i in range(len(_COLUMNS))]
    lines = [f"== {window} =="]
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


# -- runtime-vs-threads charts ------------------------------------------------

_PALETTE = ("#1b6ca8", "#c0392b", "#1e8449", "#7d3c98", "#b7950b",
            "#117864", "#a04000", "#4a235a")


def _family(backend_label: str) -> str:
    """Chart series name: the backend with its thread count stripped."""
    backend = BackendKind.parse(backend_label)
    if backend.kind in ("scalar", "threaded"):
        return "scalar/threaded"
    return BackendKind(backend.kind, 1, backend.lane_count,
                       backend.vector_width).label


def chart_series(report: Report, window: str,
                 precision: str) -> dict[str, list[tuple[int, float]]]:
    """family -> sorted (threads, center_ms) points."""
    series: dict[str, list[tuple[int, float]]] = {}
    for cell in report.window_cells(window):
        if cell.key.precision != precision:
            continue
        pts = series.setdefault(_family(cell.key.backend), [])
        pts.append((cell.key.parallelism, cell.summary.center))
    for pts in series.values():
        pts.sort()
    return {name: series[name] for name in sorted(series)}


def chart_csv(report: Report, window: str, precision: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("window", "precision", "family", "threads", "center_ms"))
    for family, pts in chart_series(report, window, precision).items():
        for threads, center in pts:
            writer.writerow((window, precision, family, str(threads),
                             f"{center:.4f}"))
    return buf.getvalue()


def chart_svg(report: Report, window: str, precision: str,
              width: int = 640, height: int = 420) -> str:
    """Hand-rolled line chart: runtime (ms) against thread count."""
    series = chart_series(report, window, precision)
    margin_l, margin_r, margin_t, margin_b = 60, 150, 30, 45
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b

    xs = sorted({t for pts in series.values() for t, _ in pts}) or [1]
    y_max = max((c for pts in series.values() for _, c in pts), default=1.0)
    y_max = y_max * 1.05 or 1.0
    x_max = max(xs)

    def px(threads: float) -> float:
        if x_max == 1:
            return margin_l + plot_w / 2
        return margin_l + (threads - 1) / (x_max - 1) * plot_w

    def py(ms: float) -> float:
        return margin_t + plot_h - (ms / y_max) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{margin_l}" y="18" font-family="sans-serif" '
        f'font-size="13">{window} {precision}: runtime vs threads</text>',
        # axes
        f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" '
        f'y2="{margin_t + plot_h}" stroke="black"/>',
        f'<line x1="{margin_l}" y1="{margin_t + plot_h}" '
        f'x2="{margin_l + plot_w}" y2="{margin_t + plot_h}" stroke="black"/>',
        f'<text x="{margin_l + plot_w / 2:.1f}" y="{height - 8}" '
        f'font-family="sans-serif" font-size="11" '
        f'text-anchor="middle">threads</text>',
        f'<text x="14" y="{margin_t + plot_h / 2:.1f}" '
        f'font-family="sans-serif" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 14 {margin_t + plot_h / 2:.1f})">'
        f'runtime (ms)</text>',
    ]
    for t in xs:
        parts.append(
            f'<line x1="{px(t):.1f}" y1="{margin_t + plot_h}" '
            f'x2="{px(t):.1f}" y2="{margin_t + plot_h + 4}" stroke="black"/>'
            f'<text x="{px(t):.1f}" y="{margin_t + plot_h + 16}" '
            f'font-family="sans-serif" font-size="10" '
            f'text-anchor="middle">{t}</text>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        ms = frac * y_max
        parts.append(
            f'<line x1="{margin_l - 4}" y1="{py(ms):.1f}" x2="{margin_l}" '
            f'y2="{py(ms):.1f}" stroke="black"/>'
            f'<text x="{margin_l - 7}" y="{py(ms) + 3.5:.1f}" '
            f'font-family="sans-serif" font-size="10" '
            f'text-anchor="end">{ms:.3g}</text>')
    for i, (family, pts) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{px(t):.1f},{py(c):.1f}" for t, c in pts)
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        for t, c in pts:
            parts.append(f'<circle cx="{px(t):.1f}" cy="{py(c):.1f}" '
                         f'r="2.5" fill="{color}"/>')
        ly = margin_t + 12 + 16 * i
        lx = margin_l + plot_w + 10
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.5"/>'
            f'<text x="{lx + 23}" y="{ly:.1f}" font-family="sans-serif" '
            f'font-size="10">{family}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# -- images -------------------------------------------------------------------

def export_ppm(grid: IterationGrid, max_iter: int, path) -> None:
    """Binary PPM (P6): gray = floor(255 * iterations / max_iter)."""
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    gray = (grid.counts.astype(np.int64) * 255 // max_iter).astype(np.uint8)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    header = f"P6\n{grid.dims.width} {grid.dims.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rgb.tobytes())


def grid_checksum(grid: IterationGrid) -> str:
    """sha256 of the row-major little-endian int32 count buffer."""
    counts = np.ascontiguousarray(grid.counts, dtype="<i4")
    return hashlib.sha256(counts.tobytes()).hexdigest()
