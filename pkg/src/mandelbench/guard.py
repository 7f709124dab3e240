"""Stop/resume gate for device work: the writer-preferred counterpart.

Where the bridge's lock prefers readers (don't evict a busy library), this
gate prefers the writer: a stop request must win against a continuous
stream of new computations, otherwise shutdown could starve while the
process is being torn down around it.  Protocol:

* every device computation runs between enter_guarded() and
  leave_guarded(token), holding the shared side of the gate;
* enter checks the stop flag under the mutex after acquiring the shared
  side and backs out (no locks held) if stopping;
* long pipelines poll checkpoint(token) between kernels and abort early;
* stop() sets the flag under the mutex, then takes and immediately
  releases the exclusive side - by then no shared holder remains - and
  finally unloads the attached bridge library.

Tokens are plain transferable objects: a computation may enter on one
thread and leave on another.
"""

from __future__ import annotations

import enum
import itertools
import threading
import time


class GuardStoppedError(Exception):
    """enter_guarded refused: the host has been told to stop."""


class GuardTimeoutError(Exception):
    """stop() gave up waiting; carries the tokens still in flight."""

    def __init__(self, stuck_tokens):
        self.stuck_tokens = list(stuck_tokens)
        names = ", ".join(str(t) for t in self.stuck_tokens) or "none"
        super().__init__(f"stop() deadline expired; tokens in flight: {names}")


class Checkpoint(enum.Enum):
    CONTINUE = "continue"
    ABORT_REQUESTED = "abort_requested"


class GuardToken:
    _ids = itertools.count(1)

    def __init__(self):
        self.token_id = next(self._ids)
        self.released = False

    def __repr__(self):
        state = "released" if self.released else "live"
        return f"<GuardToken {self.token_id} {state}>"


class _WriterPreferredGate:
    """Shared/exclusive lock where a waiting writer blocks new readers."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False
        self._writers_waiting = 0

    def acquire_shared(self):
        with self._cond:
            while self._writer or self._writers_waiting:
                self._cond.wait()
            self._readers += 1

    def release_shared(self):
        with self._cond:
            self._readers -= 1
            self._cond.notify_all()

    def acquire_exclusive(self, timeout=None):
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cond:
            self._writers_waiting += 1
            try:
                while self._writer or self._readers:
                    if deadline is None:
                        self._cond.wait()
                    else:
                        remaining = deadline - time.monotonic()
                        if remaining <= 0 or not self._cond.wait(remaining):
                            if self._writer or self._readers:
                                return False
                self._writer = True
                return True
            finally:
                self._writers_waiting -= 1
                if not self._writer:
                    self._cond.notify_all()

    def release_exclusive(self):
        with self._cond:
            self._writer = False
            self._cond.notify_all()


class LifecycleGuard:
    """The stop/resume protocol around an optional NativeBridge."""

    def __init__(self, bridge=None, stop_deadline: float = 5.0):
        self._gate = _WriterPreferredGate()
        self._flag_guard = threading.Lock()
        self._stop_flag = 0
        self._bridge = bridge
        self._stop_deadline = stop_deadline
        self._live_tokens: set[GuardToken] = set()

    def enter_guarded(self) -> GuardToken:
        """Claim a shared slot; raises GuardStoppedError when stopping.

        The shared gate is taken first, then the flag is tested under the
        mutex; on refusal both are released before raising, so a denied
        caller holds nothing.
        """
        self._gate.acquire_shared()
        with self._flag_guard:
            if self._stop_flag:
                self._gate.release_shared()
                raise GuardStoppedError("guard is stopping; no new device work")
            token = GuardToken()
            self._live_tokens.add(token)
            return token

    def leave_guarded(self, token: GuardToken) -> None:
        with self._flag_guard:
            if token.released:
                raise ValueError(f"{token} released twice")
            token.released = True
            self._live_tokens.discard(token)
        self._gate.release_shared()

    def checkpoint(self, token: GuardToken) -> Checkpoint:
        """Between pipeline stages: has a stop been requested meanwhile?"""
        if token.released:
            raise ValueError(f"{token} is no longer held")
        with self._flag_guard:
            if self._stop_flag:
                return Checkpoint.ABORT_REQUESTED
            return Checkpoint.CONTINUE

    def stop(self, deadline: float | None = None) -> None:
        """Set the flag, drain all guarded work, unload the library.

        Writer preference makes this immune to reader starvation: new
        enter_guarded callers queue behind the waiting writer and then
        fail the flag test, so stop() returns within roughly the longest
        in-flight computation.  A deadline (default 5 s) bounds the wait;
        expiry raises GuardTimeoutError naming the stuck tokens.
        Idempotent - a second stop() drains an already-empty gate.
        """
        with self._flag_guard:
            self._stop_flag = 1
        limit = self._stop_deadline if deadline is None else deadline
        if not self._gate.acquire_exclusive(timeout=limit):
            with self._flag_guard:
                stuck = list(self._live_tokens)
            raise GuardTimeoutError(stuck)
        # release the writer lock before evicting the library: no readers
        # can be waiting here, they would have failed the stop flag already
        self._gate.release_exclusive()
        if self._bridge is not None:
            self._bridge.unload_library()

    def resume(self) -> None:
        """Clear the flag; the library reloads lazily on the next invoke."""
        with self._flag_guard:
            self._stop_flag = 0

    @property
    def stopping(self) -> bool:
        with self._flag_guard:
            return bool(self._stop_flag)

    @property
    def live_token_count(self) -> int:
        with self._flag_guard:
            return len(self._live_tokens)
