"""
Simulated Clock
Tick counter advanced only by the scenario engine
"""

from src.domain.errors import EngineError


class SimClock:
    """Monotonic tick counter"""

    def __init__(self, start: int = 0):
        self._now = start

    @property
    def now(self) -> int:
        return self._now

    def advance(self, ticks: int = 1) -> int:
        if ticks < 0:
            raise EngineError(f"Clock cannot move backwards by {ticks}")
        self._now += ticks
        return self._now

    def advance_to(self, tick: int) -> int:
        if tick < self._now:
            raise EngineError(f"Clock at {self._now} cannot go back to {tick}")
        self._now = tick
        return self._now
