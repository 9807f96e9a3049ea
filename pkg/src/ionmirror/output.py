"""Deterministic CSV tables and minimal self-contained SVG line plots."""

import csv
import math
from pathlib import Path


def fmt(value):
    """Shortest round-trip text for a CSV cell."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    if hasattr(value, "item"):
        return fmt(value.item())
    return str(value)


def write_csv(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Header and rows of a CSV written by write_csv, numbers parsed as float."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for row in reader:
            parsed = []
            for cell in row:
                try:
                    parsed.append(float(cell))
                except ValueError:
                    parsed.append(cell)
            rows.append(parsed)
    return header, rows


PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _esc(text):
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def line_plot(series, xlabel, ylabel, title="", hlines=(), logy=False, width=640, height=420):
    """SVG text for a set of ``(label, xs, ys)`` polylines.

    ``hlines`` are ``(label, y)`` dashed reference lines. Coordinates are
    printed with fixed precision so the output is byte-stable.
    """
    ml, mr, mt, mb = 70, 160, 36, 50
    pw, ph = width - ml - mr, height - mt - mb
    tf = (lambda v: math.log10(v)) if logy else (lambda v: v)
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [tf(y) for _, _, ys in series for y in ys if not logy or y > 0]
    ys_all += [tf(y) for _, y in hlines if not logy or y > 0]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (tf(y) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{ml + pw / 2:.1f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _nice_ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{mt + ph}" x2="{px(t):.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{mt + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y0, y1):
        yv = 10**t if logy else t
        yy = mt + ph - (t - y0) / (y1 - y0) * ph
        out.append(f'<line x1="{ml - 5}" y1="{yy:.2f}" x2="{ml}" y2="{yy:.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{yy + 4:.2f}" text-anchor="end">{yv:.3g}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{_esc(ylabel)}</text>')
    legend_y = mt + 10
    for i, (label, y) in enumerate(hlines):
        if logy and y <= 0:
            continue
        yy = py(y)
        out.append(f'<line x1="{ml}" y1="{yy:.2f}" x2="{ml + pw}" y2="{yy:.2f}" stroke="gray" '
                   f'stroke-dasharray="6 4"/>')
        out.append(f'<text x="{ml + pw + 8}" y="{legend_y:.1f}" fill="gray">{_esc(label)}</text>')
        legend_y += 16
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys) if not logy or y > 0)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{pts}"/>')
        out.append(f'<line x1="{ml + pw + 8}" y1="{legend_y - 4:.1f}" x2="{ml + pw + 28}" '
                   f'y2="{legend_y - 4:.1f}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 32}" y="{legend_y:.1f}">{_esc(label)}</text>')
        legend_y += 16
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, text):
    Path(path).write_text(text)
    return Path(path)
