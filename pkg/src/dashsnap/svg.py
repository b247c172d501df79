"""Minimal deterministic SVG writer.

Attribute order follows insertion order of the keyword arguments and float
coordinates are formatted to at most 2 decimals, so identical inputs always
produce byte-identical markup (golden-file friendly).
"""

from __future__ import annotations

from xml.sax.saxutils import escape, quoteattr

DEFAULT_PALETTE = (
    "#4c78a8",
    "#f58518",
    "#e45756",
    "#72b7b2",
    "#54a24b",
    "#eeca3b",
    "#b279a2",
    "#ff9da6",
    "#9d755d",
    "#bab0ac",
)

GOAL_GRAY = "#d9d9d9"
FONT_FAMILY = "sans-serif"


def fnum(v: float | int) -> str:
    """Fixed-precision coordinate formatting: 12, 12.5, 12.34."""
    if isinstance(v, int):
        return str(v)
    text = f"{v:.2f}"
    return text.rstrip("0").rstrip(".") if "." in text else text


class SvgBuilder:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self._parts: list[str] = []

    def _attrs(self, attrs: dict) -> str:
        chunks = []
        for k, v in attrs.items():
            if v is None:
                continue
            name = k.rstrip("_").replace("_", "-")
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                v = fnum(v)
            chunks.append(f" {name}={quoteattr(str(v))}")
        return "".join(chunks)

    def elem(self, tag: str, **attrs) -> None:
        self._parts.append(f"<{tag}{self._attrs(attrs)}/>")

    def rect(self, x, y, w, h, **attrs) -> None:
        self.elem("rect", x=x, y=y, width=w, height=h, **attrs)

    def line(self, x1, y1, x2, y2, **attrs) -> None:
        self.elem("line", x1=x1, y1=y1, x2=x2, y2=y2, **attrs)

    def circle(self, cx, cy, r, **attrs) -> None:
        self.elem("circle", cx=cx, cy=cy, r=r, **attrs)

    def polyline(self, points: list[tuple[float, float]], **attrs) -> None:
        coords = " ".join(f"{fnum(x)},{fnum(y)}" for x, y in points)
        self.elem("polyline", points=coords, **attrs)

    def polygon(self, points: list[tuple[float, float]], **attrs) -> None:
        coords = " ".join(f"{fnum(x)},{fnum(y)}" for x, y in points)
        self.elem("polygon", points=coords, **attrs)

    def text(self, x, y, content: str, **attrs) -> None:
        self._parts.append(f"<text{self._attrs(dict(x=x, y=y, **attrs))}>{escape(content)}</text>")

    def group(self, **attrs):
        return _Group(self, attrs)

    def render(self) -> str:
        body = "".join(self._parts)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}" '
            f'font-family="{FONT_FAMILY}">{body}</svg>'
        )


class _Group:
    def __init__(self, builder: SvgBuilder, attrs: dict):
        self.builder = builder
        self.attrs = attrs

    def __enter__(self):
        self.builder._parts.append(f"<g{self.builder._attrs(self.attrs)}>")
        return self.builder

    def __exit__(self, *exc):
        self.builder._parts.append("</g>")
        return False


def nice_ceiling(value: float) -> float:
    """Smallest of 1/2/5 x 10^k at or above value; axis-friendly max."""
    if value <= 0:
        return 1.0
    import math

    exp = math.floor(math.log10(value))
    for mult in (1, 2, 5, 10):
        candidate = mult * 10**exp
        if value <= candidate:
            return float(candidate)
    return float(10 ** (exp + 1))
