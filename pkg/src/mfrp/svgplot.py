"""Minimal self-contained SVG line charts (log axes, error bars, legend)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _fmt(v):
    return f"{v:.2f}"


def _tick_label(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.0e}"
    return f"{v:g}"


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 12))
        v += step
    return ticks


@dataclass
class Series:
    x: list
    y: list
    label: str = ""
    yerr: list | None = None
    color: str | None = None
    dashed: bool = False


@dataclass
class Figure:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlog: bool = False
    ylog: bool = False
    width: int = 640
    height: int = 420
    # value drawn at the left edge of a log x axis in place of x == 0
    zero_label: bool = True
    series: list = field(default_factory=list)
    hlines: list = field(default_factory=list)

    def line(self, x, y, label="", yerr=None, color=None, dashed=False):
        self.series.append(Series(list(map(float, x)), list(map(float, y)), label,
                                  None if yerr is None else list(map(float, yerr)), color, dashed))
        return self

    def hline(self, y, label=""):
        self.hlines.append((float(y), label))
        return self

    # -- coordinate handling ------------------------------------------------

    def _xs(self):
        return [v for s in self.series for v in s.x]

    def _x_transform(self):
        if not self.xlog:
            return (lambda v: v), None
        pos = [v for v in self._xs() if v > 0]
        lo = min(pos) if pos else 1.0
        zero_at = math.log10(lo) - 1.0
        return (lambda v: math.log10(v) if v > 0 else zero_at), zero_at

    def _y_transform(self):
        if not self.ylog:
            return lambda v: v
        return lambda v: math.log10(v) if v > 0 else float("nan")

    def render(self):
        fx, zero_at = self._x_transform()
        fy = self._y_transform()
        ml, mr, mt, mb = 70, 150, 40, 55
        pw, ph = self.width - ml - mr, self.height - mt - mb
        xs = [fx(v) for v in self._xs()]
        ys = []
        for s in self.series:
            for i, v in enumerate(s.y):
                e = s.yerr[i] if s.yerr else 0.0
                for w in (v - e, v + e) if e else (v,):
                    t = fy(w)
                    if math.isfinite(t):
                        ys.append(t)
        ys += [fy(y) for y, _ in self.hlines if math.isfinite(fy(y))]
        if not xs:
            xs = [0.0, 1.0]
        if not ys:
            ys = [0.0, 1.0]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        pad = 0.05 * (y1 - y0)
        y0, y1 = y0 - pad, y1 + pad

        def px(v):
            return ml + (fx(v) - x0) / (x1 - x0) * pw

        def py(v):
            return mt + (1.0 - (fy(v) - y0) / (y1 - y0)) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}" font-family="sans-serif" font-size="12">',
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>',
            f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        ]
        if self.title:
            out.append(f'<text x="{ml + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(self.title)}</text>')
        out.append(f'<text x="{ml + pw / 2:.1f}" y="{self.height - 12}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(
            f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(self.ylabel)}</text>'
        )
        # x ticks
        if self.xlog:
            ticks = [10.0**k for k in range(math.ceil(x0 - 1e-9), math.floor(x1 + 1e-9) + 1)]
            if zero_at is not None and any(v == 0 for v in self._xs()):
                ticks = [0.0] + [t for t in ticks if math.log10(t) > zero_at + 0.3]
        else:
            ticks = _nice_ticks(x0, x1)
        for t in ticks:
            X = px(t)
            out.append(f'<line x1="{_fmt(X)}" y1="{mt + ph}" x2="{_fmt(X)}" y2="{mt + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{_fmt(X)}" y="{mt + ph + 18}" text-anchor="middle">{_tick_label(t)}</text>')
        # y ticks
        if self.ylog:
            yt = [10.0**k for k in range(math.ceil(y0), math.floor(y1) + 1)]
        else:
            yt = _nice_ticks(y0, y1)
        for t in yt:
            Y = py(t)
            out.append(f'<line x1="{ml - 5}" y1="{_fmt(Y)}" x2="{ml}" y2="{_fmt(Y)}" stroke="black"/>')
            out.append(f'<text x="{ml - 8}" y="{_fmt(Y + 4)}" text-anchor="end">{_tick_label(t)}</text>')
        for y, label in self.hlines:
            Y = py(y)
            out.append(f'<line x1="{ml}" y1="{_fmt(Y)}" x2="{ml + pw}" y2="{_fmt(Y)}" stroke="gray" stroke-dasharray="4 3"/>')
            if label:
                out.append(f'<text x="{ml + pw - 4}" y="{_fmt(Y - 4)}" text-anchor="end" fill="gray">{escape(label)}</text>')
        for k, s in enumerate(self.series):
            color = s.color or PALETTE[k % len(PALETTE)]
            pts = [(px(x), py(y)) for x, y in zip(s.x, s.y) if math.isfinite(fy(y))]
            dash = ' stroke-dasharray="6 4"' if s.dashed else ""
            if len(pts) > 1:
                path = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
                out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
            for a, b in pts:
                out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="2.5" fill="{color}"/>')
            if s.yerr:
                for x, y, e in zip(s.x, s.y, s.yerr):
                    lo, hi = py(y - e), py(y + e)
                    if not (math.isfinite(lo) and math.isfinite(hi)):
                        continue
                    X = px(x)
                    out.append(f'<line x1="{_fmt(X)}" y1="{_fmt(lo)}" x2="{_fmt(X)}" y2="{_fmt(hi)}" stroke="{color}"/>')
                    for Y in (lo, hi):
                        out.append(f'<line x1="{_fmt(X - 3)}" y1="{_fmt(Y)}" x2="{_fmt(X + 3)}" y2="{_fmt(Y)}" stroke="{color}"/>')
            if s.label:
                ly = mt + 14 + 18 * k
                out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 30}" y2="{ly - 4}" stroke="{color}" stroke-width="2"{dash}/>')
                out.append(f'<text x="{ml + pw + 35}" y="{ly}">{escape(s.label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.render())
        return path
