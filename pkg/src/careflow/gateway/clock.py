"""Virtual clock shared by every component.

Time is integer seconds on a scenario-defined axis, never wall clock:
all timestamps in resources, events, and traces come from here, which is
what makes replays byte-identical.  The clock only moves forward.
"""
from __future__ import annotations

import threading


class VirtualClock:
    def __init__(self, start: int = 0, mode: str = "scripted"):
        if mode not in ("scripted", "manual"):
            raise ValueError(f"bad clock mode {mode!r}")
        self.mode = mode
        self._now = start
        self._lock = threading.Lock()

    def now(self) -> int:
        return self._now

    def advance_to(self, target: int) -> int:
        """Move forward to target; moving backwards is ignored (monotone)."""
        with self._lock:
            if target > self._now:
                self._now = target
            return self._now
