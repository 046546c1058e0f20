"""Tiny dependency-free SVG writers for trade-off curves and heatmaps.

Output is deterministic (fixed float formatting, no timestamps) so the
optional figures rerun byte-identically like the CSVs.
"""

from __future__ import annotations

from pathlib import Path

PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3",
           "#937860", "#da8bc3", "#8c8c8c")

_W, _H, _PAD = 480, 360, 48


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_chart(path, series: dict, title: str, xlabel: str, ylabel: str) -> Path:
    """Polyline chart of {label: [(x, y), ...]} with x, y in [0, 1]."""
    w, h, pad = _W, _H, _PAD
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<text x="{w / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{w / 2}" y="{h - 8}" text-anchor="middle" font-size="11">{xlabel}</text>',
        f'<text x="14" y="{h / 2}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 14 {h / 2})">{ylabel}</text>',
        f'<rect x="{pad}" y="{pad}" width="{w - 2 * pad}" height="{h - 2 * pad}" '
        'fill="none" stroke="#333"/>',
    ]

    def sx(x):
        return pad + x * (w - 2 * pad)

    def sy(y):
        return h - pad - y * (h - 2 * pad)

    for k, (label, points) in enumerate(sorted(series.items())):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in points)
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        for x, y in points:
            parts.append(
                f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="2.5" fill="{color}"/>'
            )
        parts.append(
            f'<text x="{w - pad + 4}" y="{pad + 14 * k + 10}" font-size="10" '
            f'fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n")
    return path


def heatmap(path, matrix, labels, title: str) -> Path:
    """Diverging heatmap of a square matrix with values in [-1, 1]."""
    n = len(labels)
    cell = max(12, min(28, 360 // max(n, 1)))
    pad = 90
    w = h = pad + n * cell + 20
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<text x="{w / 2}" y="16" text-anchor="middle" font-size="13">{title}</text>',
    ]
    for i, row in enumerate(matrix):
        for j, v in enumerate(row):
            # blue (negative) through white to red (positive)
            t = max(-1.0, min(1.0, float(v)))
            if t >= 0:
                r, g, b = 255, int(255 * (1 - t)), int(255 * (1 - t))
            else:
                r, g, b = int(255 * (1 + t)), int(255 * (1 + t)), 255
            parts.append(
                f'<rect x="{pad + j * cell}" y="{pad + i * cell}" width="{cell}" '
                f'height="{cell}" fill="rgb({r},{g},{b})" stroke="#ddd"/>'
            )
    for i, label in enumerate(labels):
        parts.append(
            f'<text x="{pad - 4}" y="{pad + i * cell + cell * 0.7}" font-size="9" '
            f'text-anchor="end">{label}</text>'
        )
        parts.append(
            f'<text x="{pad + i * cell + cell / 2}" y="{pad - 4}" font-size="9" '
            f'text-anchor="start" transform="rotate(-60 {pad + i * cell + cell / 2} '
            f'{pad - 4})">{label}</text>'
        )
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n")
    return path
