"""
Dependency-free SVG output: actual-vs-predicted line charts and a correlation heatmap.

Output is a pure function of the inputs (no timestamps), so reruns are byte-identical.
"""

from pathlib import Path
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

ACTUAL_COLOR = "#1f77b4"
PREDICTED_COLOR = "#ff7f0e"

SVG_HEADER = (
    '<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
    'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">\n'
    '<rect width="100%" height="100%" fill="white"/>\n'
)


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _polyline(xs: np.ndarray, ys: np.ndarray, color: str) -> str:
    finite = np.isfinite(ys)
    points = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs[finite], ys[finite]))
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>\n'


def line_plot(
    actual: Sequence[float],
    predicted: Sequence[float],
    title: str,
    start: int = 0,
    width: int = 800,
    height: int = 320,
) -> str:
    """Actual (blue) and predicted (orange) against absolute row index."""
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    margin_l, margin_r, margin_t, margin_b = 60, 20, 30, 40
    plot_w, plot_h = width - margin_l - margin_r, height - margin_t - margin_b

    both = np.concatenate([actual, predicted])
    both = both[np.isfinite(both)]
    lo, hi = (float(both.min()), float(both.max())) if len(both) else (0.0, 1.0)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    n = max(len(actual), len(predicted), 2)

    def sx(i: np.ndarray) -> np.ndarray:
        return margin_l + plot_w * i / (n - 1)

    def sy(v: np.ndarray) -> np.ndarray:
        return margin_t + plot_h * (1.0 - (v - lo) / (hi - lo))

    parts = [SVG_HEADER.format(width=width, height=height)]
    parts.append(f'<text x="{width // 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>\n')
    parts.append(
        f'<rect x="{margin_l}" y="{margin_t}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>\n'
    )
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        y = _fmt(float(sy(np.asarray(v))))
        parts.append(f'<line x1="{margin_l}" y1="{y}" x2="{margin_l + plot_w}" y2="{y}" stroke="#eee"/>\n')
        parts.append(f'<text x="{margin_l - 6}" y="{y}" text-anchor="end" dy="4">{v:.2f}</text>\n')
    for k in range(5):
        i = (n - 1) * k / 4
        x = _fmt(float(sx(np.asarray(i))))
        parts.append(
            f'<text x="{x}" y="{margin_t + plot_h + 16}" text-anchor="middle">{start + int(round(i))}</text>\n'
        )
    parts.append(f'<text x="{margin_l + plot_w // 2}" y="{height - 6}" text-anchor="middle">row</text>\n')

    parts.append(_polyline(sx(np.arange(len(actual))), sy(actual), ACTUAL_COLOR))
    parts.append(_polyline(sx(np.arange(len(predicted))), sy(predicted), PREDICTED_COLOR))

    lx = margin_l + 10
    for k, (label, color) in enumerate((("actual", ACTUAL_COLOR), ("predicted", PREDICTED_COLOR))):
        y = margin_t + 14 + 14 * k
        parts.append(f'<line x1="{lx}" y1="{y - 4}" x2="{lx + 18}" y2="{y - 4}" stroke="{color}" stroke-width="2"/>\n')
        parts.append(f'<text x="{lx + 24}" y="{y}">{label}</text>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def diverging_color(r: float) -> str:
    """Blue for -1, white for 0, red for +1."""
    r = float(np.clip(r, -1.0, 1.0)) if np.isfinite(r) else 0.0
    if r >= 0:
        g = int(round(255 * (1.0 - r)))
        return f"#ff{g:02x}{g:02x}"
    g = int(round(255 * (1.0 + r)))
    return f"#{g:02x}{g:02x}ff"


def heatmap(r: np.ndarray, labels: Sequence[str], title: str = "Correlation", cell: int = 26) -> str:
    n = len(labels)
    label_w = 150
    width = label_w + n * cell + 20
    height = label_w + n * cell + 40
    parts = [SVG_HEADER.format(width=width, height=height)]
    parts.append(f'<text x="{width // 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>\n')
    top = label_w + 20
    for i, name in enumerate(labels):
        y = top + i * cell
        x = label_w + i * cell
        parts.append(f'<text x="{label_w - 4}" y="{y + cell * 0.65:.1f}" text-anchor="end">{escape(name)}</text>\n')
        parts.append(
            f'<text transform="translate({x + cell * 0.65:.1f},{top - 4}) rotate(-60)">{escape(name)}</text>\n'
        )
        for j in range(n):
            value = float(r[i, j])
            parts.append(
                f'<rect x="{label_w + j * cell}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{diverging_color(value)}" stroke="white"><title>{escape(name)} / '
                f"{escape(labels[j])}: {value:.3f}</title></rect>\n"
            )
    parts.append("</svg>\n")
    return "".join(parts)


def write_svg(svg: str, path: str | Path, directory: Optional[str | Path] = None) -> Path:
    path = Path(directory) / path if directory is not None else Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg, encoding="utf-8")
    return path
