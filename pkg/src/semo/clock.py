"""Instant providers: the wall clock and a controllable test clock."""

from __future__ import annotations

import time


class SystemClock:
    """Millisecond wall clock; sleep blocks the calling thread."""

    def now_ms(self) -> int:
        return time.time_ns() // 1_000_000

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


class SimulatedClock:
    """Deterministic clock whose sleep() simply advances the current instant.

    `on_advance`, when set, is called with the new time after every sleep;
    tests use it to trip a stop signal at a chosen instant.
    """

    def __init__(self, start_ms: int = 0):
        self._now_ms = int(start_ms)
        self.on_advance = None

    def now_ms(self) -> int:
        return self._now_ms

    def sleep(self, seconds: float) -> None:
        self._now_ms += int(round(seconds * 1000))
        if self.on_advance is not None:
            self.on_advance(self._now_ms)
