"""Minimal static SVG charts: line plots and 2d tree drawings."""

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 480, 320
MARGIN = 50
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


def _fmt(x):
    return f"{x:.2f}"


def _ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def _frame(title, xlabel, ylabel, stamp):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<!-- manifest {escape(stamp)} -->" if stamp else "",
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    return [p for p in parts if p]


def line_chart(series, title="", xlabel="", ylabel="", logx=False, stamp=""):
    """``series`` maps a label to ``(xs, ys)``. Returns the SVG document as text."""
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if math.isfinite(y)]
    tx = (lambda x: math.log10(x)) if logx else (lambda x: x)
    xs = [tx(x) for x, _ in pts] or [0.0, 1.0]
    ys = [y for _, y in pts] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(0.0, min(ys)), max(ys)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def sx(x):
        return MARGIN + (tx(x) - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def sy(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    out = _frame(title, xlabel, ylabel, stamp)
    out.append(f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>')
    out.append(f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>')
    for t in _ticks(y0, y1):
        yy = sy(t)
        out.append(f'<text x="{MARGIN - 4}" y="{_fmt(yy + 4)}" text-anchor="end" font-size="10">{t:.3g}</text>')
    for t in _ticks(x0, x1):
        xx = MARGIN + (t - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)
        label = 10**t if logx else t
        out.append(f'<text x="{_fmt(xx)}" y="{HEIGHT - MARGIN + 14}" text-anchor="middle" font-size="10">{label:.3g}</text>')
    for i, (label, (xs_, ys_)) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs_, ys_) if math.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        for x, y in zip(xs_, ys_):
            if math.isfinite(y):
                out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>')
        out.append(f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 14 * i}" font-size="10" fill="{color}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def segments_chart(segments, title="", stamp="", marks=()):
    """Draw 2d line segments ``((x0, y0), (x1, y1))`` with optional highlighted points."""
    pts = [p for s in segments for p in s] + list(marks)
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1e-9)
    scale = (min(WIDTH, HEIGHT) - 2 * MARGIN) / span

    def sx(x):
        return MARGIN + (x - x0) * scale

    def sy(y):
        return HEIGHT - MARGIN - (y - y0) * scale

    out = _frame(title, "x1", "x2", stamp)
    for a, b in segments:
        out.append(f'<line x1="{_fmt(sx(a[0]))}" y1="{_fmt(sy(a[1]))}" x2="{_fmt(sx(b[0]))}" y2="{_fmt(sy(b[1]))}" stroke="#555" stroke-width="1"/>')
    for p in marks:
        out.append(f'<circle cx="{_fmt(sx(p[0]))}" cy="{_fmt(sy(p[1]))}" r="3" fill="#d62728"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
