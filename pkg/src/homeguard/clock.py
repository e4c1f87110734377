"""Millisecond clocks: simulated for tests and scenarios, wall time for live runs."""

import threading
import time
from datetime import datetime, timezone


class SimClock:
    """Deterministic clock; time moves only through advance()/sleep().

    Epoch 0 is the scenario epoch (rendered as the unix epoch in ISO output).
    """

    def __init__(self, start_ms: int = 0):
        self._now_ms = int(start_ms)
        self._lock = threading.Lock()

    def now_ms(self) -> int:
        with self._lock:
            return self._now_ms

    def sleep(self, seconds: float) -> None:
        self.advance_ms(int(round(seconds * 1000)))

    def advance_ms(self, delta_ms: int) -> int:
        if delta_ms < 0:
            raise ValueError("simulated clock cannot move backwards")
        with self._lock:
            self._now_ms += int(delta_ms)
            return self._now_ms

    def advance_to_ms(self, target_ms: int) -> int:
        """Jump forward to target_ms; never moves backwards."""
        with self._lock:
            if target_ms > self._now_ms:
                self._now_ms = int(target_ms)
            return self._now_ms


class WallClock:
    def now_ms(self) -> int:
        return int(time.time() * 1000)

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


def iso_utc(ms: int) -> str:
    """Render a millisecond timestamp as e.g. 1970-01-01T00:00:05Z."""
    return datetime.fromtimestamp(ms / 1000, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
