"""
Minimal SVG charts with byte-stable output.

Only lines, paths, rectangles and text are emitted. Coordinates are
rounded to two decimals and attributes are written in a fixed order, so a
given input always renders to the same bytes.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence
from xml.sax.saxutils import escape

__all__ = ["SvgDocument", "line_chart", "bar_chart", "PALETTE"]

PALETTE = ("#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
REFERENCE_COLOR = "#d62728"


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


class SvgDocument:
    def __init__(self, width: int = 640, height: int = 420):
        self.width, self.height = width, height
        self._items: list = []

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0, dash: Optional[str] = None):
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self._items.append(
            f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
            f'stroke="{stroke}" stroke-width="{_f(width)}"{extra}/>'
        )

    def path(self, points: Sequence, stroke="#000000", width=1.5, dash: Optional[str] = None, cls: str = "series"):
        if not points:
            return
        d = " ".join(("M" if i == 0 else "L") + f"{_f(x)},{_f(y)}" for i, (x, y) in enumerate(points))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self._items.append(
            f'<path class="{cls}" d="{d}" fill="none" stroke="{stroke}" stroke-width="{_f(width)}"{extra}/>'
        )

    def rect(self, x, y, w, h, fill="#1f77b4"):
        self._items.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" fill="{fill}"/>')

    def text(self, x, y, s, size=11, anchor="start", rotate: Optional[float] = None):
        rot = f' transform="rotate({_f(rotate)} {_f(x)} {_f(y)})"' if rotate is not None else ""
        self._items.append(
            f'<text x="{_f(x)}" y="{_f(y)}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}"{rot}>{escape(str(s))}</text>'
        )

    def render(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="#ffffff"/>\n'
        )
        return head + "\n".join(self._items) + ("\n" if self._items else "") + "</svg>\n"


def _label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.2e}"
    return f"{v:.4g}"


def _nice_ticks(lo: float, hi: float, k: int = 5) -> list:
    span = hi - lo
    raw = span / k
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks, t = [], start
    while t <= hi + 1e-9 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks


class _Frame:
    """Plot area with data-to-pixel maps."""

    L, R, T, B = 70, 150, 40, 55

    def __init__(self, doc, xlim, ylim, log_x):
        self.doc, self.log_x = doc, log_x
        self.x0, self.x1 = self.L, doc.width - self.R
        self.y0, self.y1 = doc.height - self.B, self.T
        self.xlim, self.ylim = xlim, ylim

    def _tx(self, x):
        return math.log10(x) if self.log_x else x

    def px(self, x):
        a, b = (self._tx(v) for v in self.xlim)
        return self.x0 + (self._tx(x) - a) / (b - a) * (self.x1 - self.x0)

    def py(self, y):
        a, b = self.ylim
        return self.y0 - (y - a) / (b - a) * (self.y0 - self.y1)

    def axes(self, title, xlabel, ylabel, xticks=None, yticks=None):
        d = self.doc
        d.text(d.width / 2, 22, title, size=14, anchor="middle")
        d.line(self.x0, self.y0, self.x1, self.y0)
        d.line(self.x0, self.y0, self.x0, self.y1)
        for t in xticks or []:
            x = self.px(t)
            d.line(x, self.y0, x, self.y0 + 5)
            d.text(x, self.y0 + 18, _label(t), anchor="middle")
        for t in yticks or []:
            y = self.py(t)
            d.line(self.x0 - 5, y, self.x0, y)
            d.text(self.x0 - 8, y + 4, _label(t), anchor="end")
        d.text((self.x0 + self.x1) / 2, d.height - 15, xlabel, size=12, anchor="middle")
        d.text(18, (self.y0 + self.y1) / 2, ylabel, size=12, anchor="middle", rotate=-90)

    def legend(self, entries):
        d = self.doc
        for i, (label, color, dash) in enumerate(entries):
            y = self.y1 + 10 + 18 * i
            d.line(self.x1 + 15, y, self.x1 + 40, y, stroke=color, width=2, dash=dash)
            d.text(self.x1 + 45, y + 4, label)


def _pad(lo, hi, frac=0.05, log=False):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = (hi - lo) * frac
    lo, hi = lo - pad, hi + pad
    return (10 ** lo, 10 ** hi) if log else (lo, hi)


def line_chart(
    series: dict,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    log_x: bool = False,
    reference=None,
    reference_label: str = "reference",
) -> str:
    """
    One polyline per series (``label -> [(x, y), ...]``), plus an optional
    dashed reference curve given as a callable ``f(x)`` sampled across the
    x-axis range. Series with no finite points are skipped.
    """
    doc = SvgDocument()
    pts = {k: [(float(x), float(y)) for x, y in v if math.isfinite(x) and math.isfinite(y)]
           for k, v in series.items()}
    pts = {k: sorted(v) for k, v in pts.items() if v}
    xs = [x for v in pts.values() for x, _ in v if not log_x or x > 0]
    if not xs:
        frame = _Frame(doc, (1.0, 10.0) if log_x else (0.0, 1.0), (0.0, 1.0), log_x)
        frame.axes(title, xlabel, ylabel)
        doc.text((frame.x0 + frame.x1) / 2, (frame.y0 + frame.y1) / 2, "no data", anchor="middle")
        return doc.render()
    xlim = _pad(min(xs), max(xs), log=log_x)
    ref_pts = []
    if reference is not None:
        for i in range(61):
            if log_x:
                x = 10 ** (math.log10(xlim[0]) + i / 60 * (math.log10(xlim[1]) - math.log10(xlim[0])))
            else:
                x = xlim[0] + i / 60 * (xlim[1] - xlim[0])
            y = reference(x)
            if y is not None and math.isfinite(y):
                ref_pts.append((x, y))
    ys = [y for v in pts.values() for _, y in v] + [y for _, y in ref_pts]
    lo, hi = min(ys), max(ys)
    ylim = _pad(min(lo, 0.0) if lo >= 0 else lo, hi)
    frame = _Frame(doc, xlim, ylim, log_x)
    xticks = sorted(set(xs)) if log_x else _nice_ticks(*xlim)
    frame.axes(title, xlabel, ylabel, [t for t in xticks if xlim[0] <= t <= xlim[1]], _nice_ticks(*ylim))
    entries = []
    for i, (label, v) in enumerate(sorted(pts.items())):
        color = PALETTE[i % len(PALETTE)]
        doc.path([(frame.px(x), frame.py(y)) for x, y in v], stroke=color, width=2)
        for x, y in v:
            doc.rect(frame.px(x) - 2.5, frame.py(y) - 2.5, 5, 5, fill=color)
        entries.append((label, color, None))
    if ref_pts:
        doc.path([(frame.px(x), frame.py(y)) for x, y in ref_pts], stroke=REFERENCE_COLOR,
                 width=1.5, dash="6,4", cls="reference")
        entries.append((reference_label, REFERENCE_COLOR, "6,4"))
    frame.legend(entries)
    return doc.render()


def bar_chart(values: Sequence, title: str = "", ylabel: str = "") -> str:
    """Vertical bars from ``[(label, value), ...]`` in the given order."""
    doc = SvgDocument()
    vals = [(str(k), float(v)) for k, v in values if math.isfinite(float(v))]
    top = max([v for _, v in vals] + [0.0])
    ylim = _pad(0.0, top if top > 0 else 1.0)
    ylim = (0.0, ylim[1])
    frame = _Frame(doc, (0.0, max(len(vals), 1)), ylim, False)
    frame.axes(title, "", ylabel, [], _nice_ticks(*ylim))
    for i, (label, v) in enumerate(vals):
        left, right = frame.px(i + 0.15), frame.px(i + 0.85)
        doc.rect(left, frame.py(v), right - left, frame.py(0.0) - frame.py(v), fill=PALETTE[i % len(PALETTE)])
        doc.text((left + right) / 2, frame.y0 + 18, label, anchor="middle")
    if not vals:
        doc.text((frame.x0 + frame.x1) / 2, (frame.y0 + frame.y1) / 2, "no data", anchor="middle")
    return doc.render()
