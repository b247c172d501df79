"""Calendar durations and date arithmetic.

Month, quarter, and year addition clamps the day-of-month to the last valid
day of the target month (2022-01-31 + 1 month = 2022-02-28). Repeated
shifting therefore compounds: a start of Jan 31 moved forward month by month
visits Feb 28, then Mar 28.
"""

from __future__ import annotations

import calendar
import re
from dataclasses import dataclass
from datetime import date, timedelta

UNITS = ("day", "week", "month", "quarter", "year")

# months per unit for the units expressed in calendar months
_MONTHS = {"month": 1, "quarter": 3, "year": 12}

_DURATION_RE = re.compile(r"^\s*(\d+)\s+(day|week|month|quarter|year)s?\s*$")


@dataclass(frozen=True)
class Duration:
    count: int
    unit: str  # one of UNITS

    def __str__(self) -> str:
        return format_duration(self)


class DurationParseError(ValueError):
    pass


def parse_duration(text: str) -> Duration:
    """Parse "1 month" / "2 weeks" style duration strings."""
    m = _DURATION_RE.match(text)
    if not m:
        raise DurationParseError(f"not a duration: {text!r} (expected e.g. '1 month', '2 weeks')")
    return Duration(int(m.group(1)), m.group(2))


def format_duration(d: Duration) -> str:
    suffix = "" if d.count == 1 else "s"
    return f"{d.count} {d.unit}{suffix}"


def add_months(day: date, months: int) -> date:
    """Shift by whole calendar months, clamping the day-of-month."""
    month_index = day.year * 12 + (day.month - 1) + months
    year, month = divmod(month_index, 12)
    month += 1
    last = calendar.monthrange(year, month)[1]
    return date(year, month, min(day.day, last))


def add_duration(day: date, dur: Duration) -> date:
    if dur.unit == "day":
        return day + timedelta(days=dur.count)
    if dur.unit == "week":
        return day + timedelta(weeks=dur.count)
    if dur.unit in _MONTHS:
        return add_months(day, dur.count * _MONTHS[dur.unit])
    raise ValueError(f"unknown duration unit: {dur.unit}")


def duration_between(start: date, end: date) -> Duration:
    """Express end - start as the coarsest exact Duration.

    Tries year, quarter, month, week, then day; a unit matches when some
    whole count of it lands exactly on `end` (under the clamping rule).
    Always succeeds: the day unit matches any positive gap.
    """
    if end <= start:
        raise ValueError(f"end {end} not after start {start}")
    days = (end - start).days
    for unit in ("year", "quarter", "month"):
        months = _MONTHS[unit]
        # candidate count from the month distance
        total_months = (end.year - start.year) * 12 + (end.month - start.month)
        count, rem = divmod(total_months, months)
        if rem == 0 and count >= 1 and add_months(start, count * months) == end:
            return Duration(count, unit)
    if days % 7 == 0:
        return Duration(days // 7, "week")
    return Duration(days, "day")


def unit_rank(unit: str) -> int:
    return UNITS.index(unit)


def period_starts(start: date, end: date, unit: str) -> list[date]:
    """Start dates of consecutive `unit` periods tiling [start, end)."""
    starts = []
    cur = start
    step = Duration(1, unit)
    while cur < end:
        starts.append(cur)
        cur = add_duration(cur, step)
    return starts


def period_label(start: date, unit: str) -> str:
    """Human label for the period beginning at `start`."""
    if unit == "day":
        return start.isoformat()
    if unit == "week":
        return f"week of {start.isoformat()}"
    if unit == "month":
        return f"{start.year:04d}-{start.month:02d}"
    if unit == "quarter":
        return f"{start.year:04d}-Q{(start.month - 1) // 3 + 1}"
    if unit == "year":
        return f"{start.year:04d}"
    raise ValueError(f"unknown duration unit: {unit}")
