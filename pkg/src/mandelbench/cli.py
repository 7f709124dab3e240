"""Command-line front end: render, bench, analyze.

    mandelbench render  --window 1 --dims 400x268 --backend scalar
    mandelbench bench   --windows 1,2,3 --backends scalar,threaded:4
    mandelbench analyze samples/ --out report/

Exit code 0 means every requested action succeeded; failures print
machine-readable lines prefixed ``error:`` and return nonzero.  A SIGINT
during a device benchmark runs the lifecycle stop protocol (drain guarded
entries, unload the library) before exiting.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import devices, harness, report
from .backends import BackendKind, render
from .core import BUILTIN_WINDOWS, GridDims, Precision, Window

DESK_PROFILE = dict(repetitions=10, pause_every=10, pause_seconds=0.0)
FULL_PROFILE = dict(repetitions=harness.DEFAULT_REPETITIONS,
                    pause_every=harness.DEFAULT_PAUSE_EVERY,
                    pause_seconds=harness.DEFAULT_PAUSE_SECONDS)
DESK_DIMS = GridDims(400, 268)
FULL_DIMS = GridDims(1600, 1072)


class UsageError(Exception):
    pass


class UnknownWindowError(UsageError):
    pass


def _parse_dims(text: str) -> GridDims:
    try:
        w, h = text.lower().split("x")
        return GridDims(int(w), int(h))
    except (ValueError, TypeError):
        raise UsageError(f"bad --dims {text!r}; expected WxH like 400x268")


def _parse_precision(text: str) -> Precision:
    try:
        return Precision(text)
    except ValueError:
        raise UsageError(
            f"bad --precision {text!r}; choose half, single or double")


def _pick_window(args) -> Window:
    if args.rect is not None:
        try:
            x1, y1, x2, y2 = (float(v) for v in args.rect.split(","))
        except ValueError:
            raise UsageError(f"bad --rect {args.rect!r}; expected x1,y1,x2,y2")
        if args.max_iter is None:
            raise UsageError("--rect needs --max-iter")
        return Window(x1, y1, x2, y2, args.max_iter)
    index = args.window if args.window is not None else 1
    if index not in BUILTIN_WINDOWS:
        raise UnknownWindowError(
            f"UnknownWindow: no built-in window {index}; use 1, 2 or 3")
    win = BUILTIN_WINDOWS[index]
    if args.max_iter is not None:
        win = Window(win.x1, win.y1, win.x2, win.y2, args.max_iter)
    return win


def _window_indices(text: str) -> list[Window]:
    wins = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        try:
            idx = int(piece)
        except ValueError:
            raise UsageError(f"bad window index {piece!r}")
        if idx not in BUILTIN_WINDOWS:
            raise UnknownWindowError(
                f"UnknownWindow: no built-in window {idx}; use 1, 2 or 3")
        wins.append(BUILTIN_WINDOWS[idx])
    if not wins:
        raise UsageError("--windows selected nothing")
    return wins


def _open_session(args) -> devices.DeviceSession | None:
    """A DeviceSession when any requested backend needs one."""
    lib = getattr(args, "lib", None)
    if lib is None or lib == "virtual":
        return devices.DeviceSession(devices.VirtualDeviceLibrary())
    return devices.DeviceSession(lib)


def _session_teardown(session: devices.DeviceSession | None) -> None:
    if session is not None and not session.guard.stopping:
        session.guard.stop()


# -- render -------------------------------------------------------------------

def cmd_render(args) -> int:
    window = _pick_window(args)
    dims = _parse_dims(args.dims)
    precision = _parse_precision(args.precision)
    backend = BackendKind.parse(args.backend)
    out = Path(args.out if args.out else "mandel.ppm")

    session = None
    try:
        if backend.kind == "device":
            session = _open_session(args)
            grid, _ = session.render(window, dims, precision,
                                     backend.vector_width)
        else:
            grid = render(backend, window, dims, precision)
    finally:
        _session_teardown(session)
    report.export_ppm(grid, window.max_iter, out)
    print(f"wrote {out}")
    print(f"checksum {report.grid_checksum(grid)}")
    return 0


# -- bench --------------------------------------------------------------------

def _sample_filename(cfg: harness.BenchConfig) -> str:
    label = report.window_label(cfg.window).replace("(", "_").replace(")", "")
    backend = cfg.backend.label.replace(":", "-").replace(",", "_")
    digest = cfg.metadata()["config_hash"]
    return f"{label}_{cfg.precision.value}_{backend}_{digest}.samples"


def cmd_bench(args) -> int:
    windows = _window_indices(args.windows)
    precisions = [_parse_precision(p) for p in args.precisions.split(",")]
    profile = FULL_PROFILE if args.profile == "full" else DESK_PROFILE
    if args.dims:
        dims = _parse_dims(args.dims)
    else:
        dims = FULL_DIMS if args.profile == "full" else DESK_DIMS

    configs = report.expand_run_matrix(
        windows, [b.strip() for b in args.backends.split(",")], precisions,
        dims=dims, **profile)

    out_dir = Path(args.out if args.out else "samples")
    out_dir.mkdir(parents=True, exist_ok=True)

    session = None
    if any(c.backend.kind == "device" for c in configs):
        session = _open_session(args)

    failures = 0
    try:
        for cfg in configs:
            name = _sample_filename(cfg)
            try:
                result = harness.run_series(
                    cfg, session=session if cfg.backend.kind == "device"
                    else None)
            except KeyboardInterrupt:
                raise
            except Exception as exc:
                print(f"error: {cfg.backend.label} "
                      f"{report.window_label(cfg.window)} "
                      f"{cfg.precision.value}: {exc}")
                failures += 1
                continue
            harness.persist_samples(result.samples, cfg.metadata(),
                                    out_dir / name)
            print(f"wrote {out_dir / name} ({len(result.samples)} samples, "
                  f"{result.pause_count} pauses)")
    except KeyboardInterrupt:
        _session_teardown(session)
        print("error: interrupted; guard drained and library unloaded")
        return 130
    _session_teardown(session)
    return 1 if failures else 0


# -- analyze ------------------------------------------------------------------

def _collect_sample_files(paths) -> list[Path]:
    files: list[Path] = []
    for text in paths:
        p = Path(text)
        if p.is_dir():
            files.extend(sorted(p.glob("*.samples")))
        elif p.exists():
            files.append(p)
        else:
            raise UsageError(f"no such sample file: {p}")
    if not files:
        raise UsageError("no sample files found")
    return files


def cmd_analyze(args) -> int:
    files = _collect_sample_files(args.samples)
    series = []
    for path in files:
        samples, meta = harness.load_samples(path)
        series.append((meta, samples))
    rep = report.build_report(series)

    out_dir = Path(args.out if args.out else "report")
    out_dir.mkdir(parents=True, exist_ok=True)

    for window in rep.windows:
        stem = window.replace("(", "_").replace(")", "")
        text = report.table_text(rep, window)
        (out_dir / f"table_{stem}.txt").write_text(text)
        (out_dir / f"table_{stem}.csv").write_text(
            report.table_csv(rep, window))
        sys.stdout.write(text)
        precisions = sorted({c.key.precision for c in rep.window_cells(window)})
        for precision in precisions:
            base = f"runtime_{stem}_{precision}"
            (out_dir / f"{base}.svg").write_text(
                report.chart_svg(rep, window, precision))
            (out_dir / f"{base}.csv").write_text(
                report.chart_csv(rep, window, precision))
    print(f"wrote report files to {out_dir}")
    return 0


# -- wiring --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mandelbench",
        description="escape-time fractal benchmark workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p_render = sub.add_parser("render", help="render one window to a PPM")
    p_render.add_argument("--window", type=int, default=None)
    p_render.add_argument("--rect", default=None,
                          help="custom window: x1,y1,x2,y2")
    p_render.add_argument("--max-iter", type=int, default=None)
    p_render.add_argument("--dims", default="400x268")
    p_render.add_argument("--precision", default="single")
    p_render.add_argument("--backend", default="scalar")
    p_render.add_argument("--lib", default=None,
                          help="device library path (default: virtual)")
    p_render.add_argument("--out", default=None)
    p_render.set_defaults(func=cmd_render)

    p_bench = sub.add_parser("bench", help="run benchmark series")
    p_bench.add_argument("--windows", default="1,2,3")
    p_bench.add_argument("--backends", default="scalar")
    p_bench.add_argument("--precisions", default="single")
    p_bench.add_argument("--dims", default=None)
    p_bench.add_argument("--profile", choices=("desk", "full"),
                         default="desk")
    p_bench.add_argument("--lib", default=None)
    p_bench.add_argument("--out", default=None)
    p_bench.set_defaults(func=cmd_bench)

    p_analyze = sub.add_parser("analyze", help="summarize sample files")
    p_analyze.add_argument("samples", nargs="+",
                           help="sample files or directories")
    p_analyze.add_argument("--out", default=None)
    p_analyze.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}")
        return 2
    except (harness.SampleFileError, report.ReportError,
            devices.DeviceError) as exc:
        print(f"error: {exc}")
        return 1
    except ValueError as exc:
        print(f"error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
