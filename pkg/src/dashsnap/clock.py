"""Injected clocks. No engine code reads wall time directly; everything
receives a clock so months-long scenarios replay deterministically."""

from __future__ import annotations

from datetime import date, datetime, timedelta
from typing import Protocol

from .dates import Duration, add_duration


class Clock(Protocol):
    def now(self) -> datetime: ...


class WallClock:
    def now(self) -> datetime:
        return datetime.now()


class VirtualClock:
    """Settable, manually advanced time source."""

    def __init__(self, start: datetime):
        self._now = start

    def now(self) -> datetime:
        return self._now

    def set(self, to: datetime) -> None:
        if to < self._now:
            raise ValueError(f"virtual clock cannot move backwards ({to} < {self._now})")
        self._now = to

    def advance(self, by: Duration | timedelta) -> datetime:
        if isinstance(by, Duration):
            new_date = add_duration(self._now.date(), by)
            self._now = datetime.combine(new_date, self._now.time())
        else:
            self._now = self._now + by
        return self._now


class FrozenClock:
    """A fixed instant; used to timestamp an update at its scheduled due time."""

    def __init__(self, instant: datetime):
        self._instant = instant

    def now(self) -> datetime:
        return self._instant


def today(clock: Clock) -> date:
    return clock.now().date()
