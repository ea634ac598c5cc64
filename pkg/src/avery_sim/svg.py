"""Minimal self-contained SVG charts (line, step, grouped bar, scatter).

Output is deterministic: coordinates are printed with two decimals and series keep input order.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

WIDTH, HEIGHT = 720, 360
MARGIN = dict(left=64, right=150, top=36, bottom=48)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _nice_range(lo, hi):
    if lo == hi:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, title, xlabel, ylabel, xrange, yrange):
        self.parts = []
        self.x0, self.x1 = xrange
        self.y0, self.y1 = yrange
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel

    def sx(self, x):
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def sy(self, y):
        return MARGIN["top"] + (1 - (y - self.y0) / (self.y1 - self.y0)) * self.ph

    def add(self, text):
        self.parts.append(text)

    def axes(self, xticks=True):
        left, top = MARGIN["left"], MARGIN["top"]
        self.add(
            f'<rect x="{left}" y="{top}" width="{self.pw}" height="{self.ph}" fill="none" stroke="#333"/>'
        )
        for i in range(6):
            yv = self.y0 + (self.y1 - self.y0) * i / 5
            y = self.sy(yv)
            self.add(f'<line x1="{left}" y1="{y:.2f}" x2="{left + self.pw}" y2="{y:.2f}" stroke="#ddd"/>')
            self.add(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end" font-size="11">{yv:.2f}</text>')
        if xticks:
            for i in range(6):
                xv = self.x0 + (self.x1 - self.x0) * i / 5
                x = self.sx(xv)
                self.add(
                    f'<text x="{x:.2f}" y="{top + self.ph + 16}" text-anchor="middle" font-size="11">{xv:.1f}</text>'
                )
        self.add(
            f'<text x="{WIDTH / 2:.2f}" y="20" text-anchor="middle" font-size="14" '
            f'font-weight="bold">{escape(self.title)}</text>'
        )
        self.add(
            f'<text x="{left + self.pw / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle" '
            f'font-size="12">{escape(self.xlabel)}</text>'
        )
        self.add(
            f'<text x="16" y="{top + self.ph / 2:.2f}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 16 {top + self.ph / 2:.2f})">{escape(self.ylabel)}</text>'
        )

    def legend(self, labels):
        x = WIDTH - MARGIN["right"] + 12
        for i, label in enumerate(labels):
            y = MARGIN["top"] + 14 + 18 * i
            color = PALETTE[i % len(PALETTE)]
            self.add(f'<rect x="{x}" y="{y - 9}" width="10" height="10" fill="{color}"/>')
            self.add(f'<text x="{x + 16}" y="{y}" font-size="11">{escape(label)}</text>')

    def render(self):
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">\n'
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"


def line_chart(series, title, xlabel, ylabel, step=False, hlines=(), yrange=None):
    """``series`` is ``[(label, [(x, y), ...]), ...]``; ``hlines`` is ``[(label, y), ...]``."""
    xs = [x for _, pts in series for x, _ in pts] or [0.0, 1.0]
    ys = [y for _, pts in series for _, y in pts] + [y for _, y in hlines] or [0.0, 1.0]
    canvas = _Canvas(title, xlabel, ylabel, (min(xs), max(xs) if max(xs) > min(xs) else min(xs) + 1),
                     yrange or _nice_range(min(ys), max(ys)))
    canvas.axes()
    for i, (_, pts) in enumerate(series):
        if not pts:
            continue
        coords = []
        for j, (x, y) in enumerate(pts):
            if step and j > 0:
                coords.append(f"{canvas.sx(x):.2f},{canvas.sy(pts[j - 1][1]):.2f}")
            coords.append(f"{canvas.sx(x):.2f},{canvas.sy(y):.2f}")
        color = PALETTE[i % len(PALETTE)]
        canvas.add(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(coords)}"/>')
    for label, y in hlines:
        yy = canvas.sy(y)
        canvas.add(
            f'<line x1="{MARGIN["left"]}" y1="{yy:.2f}" x2="{MARGIN["left"] + canvas.pw}" y2="{yy:.2f}" '
            f'stroke="#555" stroke-dasharray="6 4"/>'
        )
        canvas.add(
            f'<text x="{MARGIN["left"] + canvas.pw - 4}" y="{yy - 4:.2f}" text-anchor="end" '
            f'font-size="10">{escape(label)}</text>'
        )
    canvas.legend([label for label, _ in series])
    return canvas.render()


def bar_chart(groups, series_labels, title, ylabel, yrange=None):
    """``groups`` is ``[(group label, [value per series]), ...]``."""
    values = [v for _, vals in groups for v in vals if v == v]
    lo, hi = (min(values), max(values)) if values else (0.0, 1.0)
    canvas = _Canvas(title, "", ylabel, (0.0, float(max(1, len(groups)))), yrange or _nice_range(lo, hi))
    canvas.axes(xticks=False)
    n = max(1, len(series_labels))
    slot = canvas.pw / max(1, len(groups))
    bar_w = slot * 0.8 / n
    base = canvas.sy(canvas.y0)
    for g, (label, vals) in enumerate(groups):
        left = MARGIN["left"] + g * slot + slot * 0.1
        for i, v in enumerate(vals):
            if v != v:  # NaN: nothing delivered
                continue
            top = canvas.sy(v)
            color = PALETTE[i % len(PALETTE)]
            canvas.add(
                f'<rect x="{left + i * bar_w:.2f}" y="{top:.2f}" width="{bar_w:.2f}" '
                f'height="{base - top:.2f}" fill="{color}"/>'
            )
        canvas.add(
            f'<text x="{left + slot * 0.4:.2f}" y="{MARGIN["top"] + canvas.ph + 16}" '
            f'text-anchor="middle" font-size="11">{escape(label)}</text>'
        )
    canvas.legend(series_labels)
    return canvas.render()


def scatter_chart(series, title, xlabel, ylabel):
    xs = [x for _, pts in series for x, _ in pts] or [0.0, 1.0]
    ys = [y for _, pts in series for _, y in pts] or [0.0, 1.0]
    canvas = _Canvas(title, xlabel, ylabel, _nice_range(min(xs), max(xs)), _nice_range(min(ys), max(ys)))
    canvas.axes()
    for i, (_, pts) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        # later series drawn smaller so coincident points stay visible
        r = max(2.0, 6.0 - 1.2 * i)
        for x, y in pts:
            canvas.add(
                f'<circle cx="{canvas.sx(x):.2f}" cy="{canvas.sy(y):.2f}" r="{r:.1f}" fill="{color}" '
                f'fill-opacity="0.8"/>'
            )
    canvas.legend([label for label, _ in series])
    return canvas.render()
