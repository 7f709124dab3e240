"""Runtime loader wrapper: lazy resolution plus a load/unload protocol.

The protocol uses three pieces of state: a reader-preferred shared lock
(`usage`), a plain mutex (`flag_guard`) and a tri-state flag.  Every
forwarded call holds the shared side of `usage`; unloading takes the
exclusive side, so it waits until the library is idle.  `flag_guard`
protects the flag/symbol table and is only ever taken either while
`usage` is already held or on its own - one global order, no deadlock.
Reader preference is deliberate: while calls keep arriving it would be
pointless to evict the library only to reload it on the very next call,
so the unloader waits for a natural idle gap.

Lazy semantics: configuring a path loads nothing.  The first invoke (or
the first after an unload) loads the library and starts a new "load
generation"; each symbol is resolved at most once per generation and the
table is discarded on unload.
"""

from __future__ import annotations

import enum
import threading
import time
from dataclasses import dataclass


class BridgeError(Exception):
    """Base class for all bridge failures."""


class InvalidPathError(BridgeError):
    pass


class NotConfiguredError(BridgeError):
    """Invoke arrived before any library path was configured."""


class LoadFailedError(BridgeError):
    pass


class SymbolUnresolvedError(BridgeError):
    pass


class ReconfigureWhileLoadedError(BridgeError):
    pass


class LibraryState(enum.Enum):
    NEVER_LOADED = "never_loaded"
    LOADED = "loaded"
    UNLOADED = "unloaded"


@dataclass(frozen=True)
class LibrarySnapshot:
    state: LibraryState
    path: str | None
    generation: int


class UnloadResult(enum.Enum):
    UNLOADED = "unloaded"
    ALREADY_UNLOADED = "already_unloaded"
    NOOP_NOT_LOADED = "noop_not_loaded"


class _ReaderPreferredLock:
    """Shared/exclusive lock where readers never yield to a waiting writer."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    def acquire_shared(self):
        with self._cond:
            # only an *active* writer blocks a reader; a waiting writer
            # does not (that is the preference)
            while self._writer:
                self._cond.wait()
            self._readers += 1

    def release_shared(self):
        with self._cond:
            self._readers -= 1
            if self._readers == 0:
                self._cond.notify_all()

    def acquire_exclusive(self):
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True

    def release_exclusive(self):
        with self._cond:
            self._writer = False
            self._cond.notify_all()


def _open_target(target):
    """Open a configured target: a filesystem path or a virtual library.

    Anything with an ``open_handle()`` method is treated as an in-process
    library; strings go through the OS runtime loader.  Either way the
    result must offer resolve(name) -> callable and close().
    """
    if hasattr(target, "open_handle"):
        return target.open_handle()
    return _OsLibraryHandle(str(target))


class _OsLibraryHandle:
    """dlopen/dlsym/dlclose via ctypes; one handle per load generation."""

    def __init__(self, path: str):
        import ctypes
        try:
            self._cdll = ctypes.CDLL(path)
        except OSError as exc:
            raise LoadFailedError(f"cannot load {path!r}: {exc}") from exc
        self._closed = False

    def resolve(self, name: str):
        try:
            return getattr(self._cdll, name)
        except AttributeError as exc:
            raise SymbolUnresolvedError(name) from exc

    def close(self):
        if self._closed:
            return
        self._closed = True
        import _ctypes
        _ctypes.dlclose(self._cdll._handle)
        self._cdll = None


class NativeBridge:
    def __init__(self):
        self._usage = _ReaderPreferredLock()
        self._flag_guard = threading.Lock()
        # everything below is protected by _flag_guard
        self._state = LibraryState.NEVER_LOADED
        self._target = None
        self._handle = None
        self._generation = 0
        self._symbols: dict[str, object] = {}
        self._resolution_counts: dict[tuple[str, int], int] = {}
        self._local = threading.local()

    # -- configuration -------------------------------------------------

    def configure_library_path(self, target) -> None:
        """Record where the library lives; nothing is loaded yet."""
        if isinstance(target, str) and not target:
            raise InvalidPathError("empty library path")
        if target is None:
            raise InvalidPathError("no library target")
        with self._flag_guard:
            if self._state is LibraryState.LOADED:
                raise ReconfigureWhileLoadedError(
                    "unload before changing the library path")
            self._target = target
            if self._state is LibraryState.UNLOADED:
                # a fresh target invalidates the old generation's identity
                # but the tri-state flag stays UNLOADED: reload is lazy
                self._symbols.clear()

    # -- the hot path ----------------------------------------------------

    def invoke(self, symbol: str, *args, **kwargs):
        """Forward a call into the library, loading/resolving lazily.

        Lock walk: shared usage -> flag_guard -> (load if needed, resolve
        if not cached) -> drop flag_guard -> forward the call -> drop
        shared usage.  The forwarded call itself runs under the shared
        lock only, so invokes proceed concurrently with each other.
        """
        t0 = time.perf_counter()
        self._usage.acquire_shared()
        try:
            with self._flag_guard:
                self._local.last_lock_wait = time.perf_counter() - t0
                if self._state is LibraryState.NEVER_LOADED:
                    if self._target is None:
                        raise NotConfiguredError(
                            "library path has not been configured")
                    self._load_locked()
                elif self._state is LibraryState.UNLOADED:
                    self._load_locked()
                entry = self._symbols.get(symbol)
                if entry is None:
                    entry = self._handle.resolve(symbol)
                    self._symbols[symbol] = entry
                    key = (symbol, self._generation)
                    self._resolution_counts[key] = \
                        self._resolution_counts.get(key, 0) + 1
            return entry(*args, **kwargs)
        finally:
            self._usage.release_shared()

    def _load_locked(self):
        handle = _open_target(self._target)
        self._handle = handle
        self._symbols = {}
        self._generation += 1
        self._state = LibraryState.LOADED

    # -- unload ----------------------------------------------------------

    def unload_library(self) -> UnloadResult:
        """Evict the library once every in-flight invoke has finished."""
        self._usage.acquire_exclusive()
        try:
            with self._flag_guard:
                if self._state is LibraryState.NEVER_LOADED:
                    return UnloadResult.NOOP_NOT_LOADED
                if self._state is LibraryState.UNLOADED:
                    return UnloadResult.ALREADY_UNLOADED
                handle, self._handle = self._handle, None
                self._symbols = {}
                self._state = LibraryState.UNLOADED
            # the handle close happens outside flag_guard (it may run
            # arbitrary loader code) but still under the exclusive lock,
            # so no invoke can observe a half-closed library
            handle.close()
            return UnloadResult.UNLOADED
        finally:
            self._usage.release_exclusive()

    # -- observability ---------------------------------------------------

    def library_state(self) -> LibrarySnapshot:
        with self._flag_guard:
            path = None
            if self._target is not None:
                path = getattr(self._target, "name", None) or str(self._target)
            if self._state is LibraryState.NEVER_LOADED:
                path = None
            return LibrarySnapshot(self._state, path, self._generation)

    def resolution_counts(self) -> dict[tuple[str, int], int]:
        """How many times each (symbol, generation) was actually resolved."""
        with self._flag_guard:
            return dict(self._resolution_counts)

    @property
    def last_lock_wait(self) -> float:
        """Seconds the calling thread spent acquiring locks in its last invoke."""
        return getattr(self._local, "last_lock_wait", 0.0)
