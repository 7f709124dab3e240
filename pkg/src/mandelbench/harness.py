"""Measurement protocol: repeated timed renders, pauses, persistence.

A series executes `repetitions` renders of one fixed configuration,
recording wall-clock milliseconds per repetition from a monotonic clock,
with a cooling pause after every `pause_every`-th repetition (never after
the last).  Device-backed configurations additionally record the
overhead decomposition of every repetition: boundary crossing, lock
acquisition, environment setup and raw compute.

Sample files are line-oriented text.  Grammar:

    file       = header record* ;
    header     = comment* ;
    comment    = "#" SP key "=" value NL ;
    record     = index "," wall_ms "," boundary_ms "," lock_ms ","
                 setup_ms "," compute_ms NL ;

Floats are serialized with repr(), i.e. the shortest string that parses
back to the identical IEEE double, which is what makes round trips
bit-exact.  CPU-only samples leave the four breakdown fields empty
(`3,12.5,,,,`).  The header carries the complete BenchConfig plus a
sha256 config hash, so files from different configurations cannot be
appended to each other unnoticed.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from . import backends
from .core import GridDims, IterationGrid, Precision, Window

DEFAULT_REPETITIONS = 50
DEFAULT_PAUSE_EVERY = 10
DEFAULT_PAUSE_SECONDS = 10.0


class SampleFileError(Exception):
    """Malformed sample file; message carries line and field position."""


class BreakdownUnavailableError(Exception):
    """Overhead decomposition requested for a backend without a boundary."""


@dataclass(frozen=True)
class OverheadBreakdown:
    boundary_ms: float
    lock_ms: float
    setup_ms: float
    compute_ms: float

    def __post_init__(self):
        for name in ("boundary_ms", "lock_ms", "setup_ms", "compute_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def total_ms(self) -> float:
        return (self.boundary_ms + self.lock_ms + self.setup_ms
                + self.compute_ms)


@dataclass(frozen=True)
class BenchSample:
    index: int
    wall_ms: float
    breakdown: OverheadBreakdown | None = None

    def __post_init__(self):
        if self.wall_ms < 0:
            raise ValueError("wall_ms must be >= 0")


@dataclass(frozen=True)
class BenchConfig:
    backend: backends.BackendKind
    window: Window
    dims: GridDims
    precision: Precision
    repetitions: int = DEFAULT_REPETITIONS
    pause_every: int = DEFAULT_PAUSE_EVERY
    pause_seconds: float = DEFAULT_PAUSE_SECONDS
    chunk_lines: int = backends.DEFAULT_CHUNK_LINES

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.pause_every < 1:
            raise ValueError("pause_every must be >= 1")
        if self.pause_seconds < 0:
            raise ValueError("pause_seconds must be >= 0")

    def metadata(self) -> dict[str, str]:
        """Canonical key=value form; also the input to the config hash."""
        w = self.window
        meta = {
            "schema": "1",
            "backend": self.backend.label,
            "window": ",".join(repr(v) for v in (w.x1, w.y1, w.x2, w.y2)),
            "max_iter": str(w.max_iter),
            "dims": f"{self.dims.width}x{self.dims.height}",
            "precision": self.precision.value,
            "repetitions": str(self.repetitions),
            "pause_every": str(self.pause_every),
            "pause_seconds": repr(float(self.pause_seconds)),
            "chunk_lines": str(self.chunk_lines),
        }
        meta["config_hash"] = config_hash(meta)
        return meta

    @classmethod
    def from_metadata(cls, meta: dict[str, str]) -> "BenchConfig":
        x1, y1, x2, y2 = (float(v) for v in meta["window"].split(","))
        width, height = (int(v) for v in meta["dims"].split("x"))
        return cls(
            backend=backends.BackendKind.parse(meta["backend"]),
            window=Window(x1, y1, x2, y2, int(meta["max_iter"])),
            dims=GridDims(width, height),
            precision=Precision(meta["precision"]),
            repetitions=int(meta["repetitions"]),
            pause_every=int(meta["pause_every"]),
            pause_seconds=float(meta["pause_seconds"]),
            chunk_lines=int(meta["chunk_lines"]),
        )


_HASHED_KEYS = ("schema", "backend", "window", "max_iter", "dims",
                "precision", "repetitions", "pause_every", "pause_seconds",
                "chunk_lines")


def config_hash(meta: dict[str, str]) -> str:
    blob = "\n".join(f"{k}={meta[k]}" for k in _HASHED_KEYS if k in meta)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class SeriesResult:
    samples: list[BenchSample]
    verification_grid: IterationGrid
    pause_count: int
    timestamps_ns: list[int] = field(default_factory=list)


def run_series(config: BenchConfig, session=None,
               sleep=time.sleep) -> SeriesResult:
    """Execute the measurement protocol for one configuration.

    Each repetition renders (and discards) a full grid; repetition 1's
    grid is retained so callers can verify it against render_reference.
    Pauses sit outside the timed spans by construction.  `sleep` is
    injectable so protocol tests need not actually wait.
    """
    samples: list[BenchSample] = []
    timestamps: list[int] = []
    pauses = 0
    first_grid = None
    device = config.backend.kind == "device"
    if device and session is None:
        raise ValueError("device configurations need a DeviceSession")
    try:
        for index in range(1, config.repetitions + 1):
            t_start = time.perf_counter_ns()
            if device:
                grid, breakdown = session.render(
                    config.window, config.dims, config.precision,
                    config.backend.vector_width)
            else:
                grid = backends.render(config.backend, config.window,
                                       config.dims, config.precision,
                                       chunk_lines=config.chunk_lines)
                breakdown = None
            wall_ms = (time.perf_counter_ns() - t_start) / 1e6
            timestamps.append(t_start)
            samples.append(BenchSample(index, wall_ms, breakdown))
            if first_grid is None:
                first_grid = grid
            if index % config.pause_every == 0 and index < config.repetitions:
                sleep(config.pause_seconds)
                pauses += 1
    except Exception as exc:
        raise RuntimeError(
            f"series aborted after {len(samples)} of {config.repetitions} "
            f"samples: {exc}") from exc
    return SeriesResult(samples, first_grid, pauses, timestamps)


def measure_breakdown(config: BenchConfig, session=None) -> OverheadBreakdown:
    """One instrumented device render; CPU backends have no boundary."""
    if config.backend.kind != "device":
        raise BreakdownUnavailableError(
            f"{config.backend.label} runs in-process; there is no "
            "boundary/lock/setup span to decompose")
    if session is None:
        raise ValueError("device configurations need a DeviceSession")
    _, breakdown = session.render(config.window, config.dims,
                                  config.precision,
                                  config.backend.vector_width)
    return breakdown


# -- persistence ---------------------------------------------------------


def _format_sample(s: BenchSample) -> str:
    if s.breakdown is None:
        return f"{s.index},{s.wall_ms!r},,,,"
    b = s.breakdown
    return (f"{s.index},{s.wall_ms!r},{b.boundary_ms!r},{b.lock_ms!r},"
            f"{b.setup_ms!r},{b.compute_ms!r}")


def persist_samples(samples, metadata: dict[str, str], path) -> None:
    lines = [f"# {k}={v}" for k, v in metadata.items()]
    lines += [_format_sample(s) for s in samples]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def append_samples(samples, metadata: dict[str, str], path) -> None:
    """Append records to an existing file after a config-hash handshake."""
    _, existing_meta = load_samples(path)
    old = existing_meta.get("config_hash")
    new = metadata.get("config_hash")
    if old != new:
        raise SampleFileError(
            f"config hash mismatch: file has {old}, append has {new}")
    with open(path, "a") as fh:
        fh.write("\n".join(_format_sample(s) for s in samples) + "\n")


def _parse_float(text: str, lineno: int, fieldname: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise SampleFileError(
            f"line {lineno}: field {fieldname!r} is not a float: {text!r}")


def load_samples(path):
    """Parse a sample file back into (samples, metadata)."""
    metadata: dict[str, str] = {}
    samples: list[BenchSample] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                if samples:
                    raise SampleFileError(
                        f"line {lineno}: header comment after records")
                key, sep, value = line[1:].strip().partition("=")
                if not sep:
                    raise SampleFileError(
                        f"line {lineno}: malformed header {line!r}")
                metadata[key.strip()] = value
                continue
            fields = line.split(",")
            if len(fields) != 6:
                raise SampleFileError(
                    f"line {lineno}: expected 6 fields, got {len(fields)}")
            try:
                index = int(fields[0])
            except ValueError:
                raise SampleFileError(
                    f"line {lineno}: field 'index' is not an integer: "
                    f"{fields[0]!r}")
            wall = _parse_float(fields[1], lineno, "wall_ms")
            tail = fields[2:]
            if all(f == "" for f in tail):
                breakdown = None
            elif any(f == "" for f in tail):
                raise SampleFileError(
                    f"line {lineno}: breakdown fields must be all present "
                    "or all empty")
            else:
                names = ("boundary_ms", "lock_ms", "setup_ms", "compute_ms")
                vals = [_parse_float(f, lineno, n)
                        for f, n in zip(tail, names)]
                breakdown = OverheadBreakdown(*vals)
            samples.append(BenchSample(index, wall, breakdown))
    return samples, metadata
