"""Minimal static SVG charts (lines and grouped bars), no plotting deps.

Output is deterministic: no timestamps, fixed palette, values rounded to a
fixed precision. CSV files remain the canonical artifacts; these renderings
are conveniences for eyeballing the same data.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")

WIDTH = 640
HEIGHT = 400
MARGIN_LEFT = 62
MARGIN_RIGHT = 16
MARGIN_TOP = 42
MARGIN_BOTTOM = 46


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _frame(title: str, description: str, body: list[str]) -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<desc>{escape(description)}</desc>",
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{escape(title)}</text>',
    ]
    parts.extend(body)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _axes(x_label: str, y_label: str, y_lo: float, y_hi: float) -> list[str]:
    x0, x1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    y0, y1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP
    parts = [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{escape(x_label)}</text>',
        f'<text x="16" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {(y0 + y1) / 2})">{escape(y_label)}</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = y0 + (y1 - y0) * frac
        value = y_lo + (y_hi - y_lo) * frac
        parts.append(f'<line x1="{x0 - 4}" y1="{_fmt(y)}" x2="{x0}" y2="{_fmt(y)}" stroke="black"/>')
        parts.append(
            f'<text x="{x0 - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{value:.2f}</text>'
        )
    return parts


def _legend(labels) -> list[str]:
    parts = []
    x = MARGIN_LEFT + 8
    y = MARGIN_TOP - 8
    for i, label in enumerate(labels):
        color = PALETTE[i % len(PALETTE)]
        parts.append(f'<rect x="{x}" y="{y - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(
            f'<text x="{x + 14}" y="{y}" font-family="sans-serif" '
            f'font-size="11">{escape(label)}</text>'
        )
        x += 14 + 7 * len(label) + 18
    return parts


def line_chart(series, title: str, x_label: str, y_label: str, description: str = "") -> str:
    """series: list of (label, xs, ys) triples sharing one coordinate frame."""
    if not series:
        raise ValueError("need at least one series")
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys]
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(0.0, min(all_y)), max(1.0, max(all_y))
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    x0, x1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    y0, y1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP

    def px(x):
        return x0 + (x - x_lo) / (x_hi - x_lo) * (x1 - x0)

    def py(y):
        return y0 + (y - y_lo) / (y_hi - y_lo) * (y1 - y0)

    body = _axes(x_label, y_label, y_lo, y_hi)
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        body.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for x, y in zip(xs, ys):
            body.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="2.5" fill="{color}"/>')
    body.extend(_legend([label for label, _, _ in series]))
    return _frame(title, description, body)


def bar_chart(group_labels, series, title: str, y_label: str, description: str = "") -> str:
    """Grouped bars: one cluster per group label, one bar per series.

    series: list of (label, values) with len(values) == len(group_labels).
    """
    if not series or not group_labels:
        raise ValueError("need at least one series and one group")
    n_groups = len(group_labels)
    n_series = len(series)
    all_y = [v for _, values in series for v in values]
    y_lo = min(0.0, min(all_y))
    y_hi = max(1.0, max(all_y))
    x0, x1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    y0, y1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP
    group_w = (x1 - x0) / n_groups
    bar_w = group_w * 0.8 / n_series

    def py(y):
        return y0 + (y - y_lo) / (y_hi - y_lo) * (y1 - y0)

    body = _axes("", y_label, y_lo, y_hi)
    for g, label in enumerate(group_labels):
        cx = x0 + group_w * (g + 0.5)
        body.append(
            f'<text x="{_fmt(cx)}" y="{y0 + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{escape(str(label))}</text>'
        )
    for s, (label, values) in enumerate(series):
        color = PALETTE[s % len(PALETTE)]
        for g, value in enumerate(values):
            left = x0 + group_w * g + group_w * 0.1 + bar_w * s
            top = py(value)
            body.append(
                f'<rect x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(bar_w)}" '
                f'height="{_fmt(py(y_lo) - top)}" fill="{color}"/>'
            )
    body.extend(_legend([label for label, _ in series]))
    return _frame(title, description, body)
