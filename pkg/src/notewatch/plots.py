"""Minimal SVG rendering for curves and histograms."""

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 480, 360
MARGIN = {"left": 56, "right": 16, "top": 32, "bottom": 48}
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


class _Frame:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        return MARGIN["top"] + (1.0 - (y - self.y0) / (self.y1 - self.y0)) * self.ph


def _axes(frame, title, xlabel, ylabel):
    out = [f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{frame.pw}" '
           f'height="{frame.ph}" fill="none" stroke="#333"/>',
           f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" text-anchor="middle" '
           f'font-size="12">{escape(xlabel)}</text>',
           f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>']
    for t in _ticks(frame.x0, frame.x1):
        x = frame.px(t)
        out.append(f'<text x="{x:.1f}" y="{HEIGHT - MARGIN["bottom"] + 16}" '
                   f'text-anchor="middle" font-size="10">{t:.3g}</text>')
    for t in _ticks(frame.y0, frame.y1):
        y = frame.py(t)
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{y + 3:.1f}" text-anchor="end" '
                   f'font-size="10">{t:.3g}</text>')
    return out


def _document(body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">\n' + "\n".join(body) + "\n</svg>\n")


def line_plot(series, title, xlabel, ylabel, xlim=None, ylim=None, step=False):
    """``series`` is a list of ``(label, xs, ys)``; non-finite points break the line."""
    finite = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)
              if math.isfinite(x) and math.isfinite(y)]
    xs_all = [p[0] for p in finite] or [0.0, 1.0]
    ys_all = [p[1] for p in finite] or [0.0, 1.0]
    frame = _Frame(xlim or (min(xs_all), max(xs_all)), ylim or (min(ys_all), max(ys_all)))
    body = _axes(frame, title, xlabel, ylabel)
    for i, (label, xs, ys) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        segments, current = [], []
        prev = None
        for x, y in zip(xs, ys):
            if not (math.isfinite(x) and math.isfinite(y)):
                if current:
                    segments.append(current)
                current, prev = [], None
                continue
            if step and prev is not None:
                current.append((x, prev[1]))
            current.append((x, y))
            prev = (x, y)
        if current:
            segments.append(current)
        for seg in segments:
            pts = " ".join(f"{frame.px(x):.2f},{frame.py(y):.2f}" for x, y in seg)
            body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                        f'points="{pts}"/>')
        body.append(f'<text x="{WIDTH - MARGIN["right"] - 4}" y="{MARGIN["top"] + 14 + 14 * i}" '
                    f'text-anchor="end" font-size="11" fill="{color}">{escape(label)}</text>')
    return _document(body)


def histogram_plot(panels, title, xlabel):
    """Side-by-side bar histograms; ``panels`` is a list of ``(label, edges, counts)``."""
    body = [f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">'
            f'{escape(title)}</text>']
    n = max(1, len(panels))
    pw = (WIDTH - 24) / n
    top, bottom = MARGIN["top"], HEIGHT - MARGIN["bottom"]
    for i, (label, edges, counts) in enumerate(panels):
        left = 12 + i * pw + 28
        width = pw - 40
        color = COLORS[1] if i == 0 else COLORS[0]
        peak = max(counts) if counts else 1
        peak = peak or 1
        lo, hi = (edges[0], edges[-1]) if edges else (0.0, 1.0)
        span = (hi - lo) or 1.0
        body.append(f'<rect x="{left:.1f}" y="{top}" width="{width:.1f}" '
                    f'height="{bottom - top}" fill="none" stroke="#333"/>')
        for c, a, b in zip(counts, edges[:-1], edges[1:]):
            x = left + (a - lo) / span * width
            w = (b - a) / span * width
            h = c / peak * (bottom - top)
            body.append(f'<rect x="{x:.2f}" y="{bottom - h:.2f}" width="{max(w - 0.5, 0.5):.2f}" '
                        f'height="{h:.2f}" fill="{color}"/>')
        body.append(f'<text x="{left + width / 2:.1f}" y="{top - 4}" text-anchor="middle" '
                    f'font-size="11">{escape(label)} (max {peak})</text>')
        body.append(f'<text x="{left:.1f}" y="{bottom + 14}" font-size="10">{lo:.3g}</text>')
        body.append(f'<text x="{left + width:.1f}" y="{bottom + 14}" text-anchor="end" '
                    f'font-size="10">{hi:.3g}</text>')
        body.append(f'<text x="{left + width / 2:.1f}" y="{bottom + 30}" text-anchor="middle" '
                    f'font-size="11">{escape(xlabel)}</text>')
    return _document(body)
