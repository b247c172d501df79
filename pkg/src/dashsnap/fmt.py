"""Number formatting for captions and chart labels.

Chat-context readability: thousands separators, at most 2 decimal places,
percentages rounded to the whole percent.
"""

from __future__ import annotations

from datetime import date


def format_number(v: float | int | None) -> str:
    if v is None:
        return "–"
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, int) or float(v).is_integer():
        return f"{int(v):,}"
    text = f"{v:,.2f}"
    return text.rstrip("0").rstrip(".")


def format_percent(ratio: float | None) -> str:
    """0.6 -> '60%'. Rounded to the whole percent."""
    if ratio is None:
        return "–"
    return f"{round(ratio * 100):d}%"


def format_value(v) -> str:
    if isinstance(v, date):
        return v.isoformat()
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return format_number(v)
    return str(v)
