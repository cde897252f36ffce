"""Minimal deterministic SVG emission: axes, polylines, scatter markers.

Pure text output, no plotting dependency; identical inputs produce
byte-identical files.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

_COLORS = ("#e6a817", "#2f6fb3", "#c0392b", "#2e8b57", "#8e44ad", "#555555")


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


class SvgCanvas:
    """Maps data coordinates onto a fixed-size SVG viewport with margins."""

    def __init__(
        self,
        xlim: Tuple[float, float],
        ylim: Tuple[float, float],
        width: int = 520,
        height: int = 420,
        title: str = "",
        xlabel: str = "",
        ylabel: str = "",
    ):
        self.xlim, self.ylim = xlim, ylim
        self.width, self.height = width, height
        self.margin = 50
        self.parts: List[str] = []
        self.parts.append(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">'
        )
        self.parts.append(f'<rect width="{width}" height="{height}" fill="white"/>')
        self._axes(title, xlabel, ylabel)

    def _tx(self, x: float) -> float:
        lo, hi = self.xlim
        return self.margin + (x - lo) / (hi - lo) * (self.width - 2 * self.margin)

    def _ty(self, y: float) -> float:
        lo, hi = self.ylim
        return self.height - self.margin - (y - lo) / (hi - lo) * (self.height - 2 * self.margin)

    def _axes(self, title: str, xlabel: str, ylabel: str) -> None:
        m, w, h = self.margin, self.width, self.height
        self.parts.append(
            f'<rect x="{m}" y="{m}" width="{w - 2 * m}" height="{h - 2 * m}" '
            f'fill="none" stroke="black" stroke-width="1"/>'
        )
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            xv = self.xlim[0] + frac * (self.xlim[1] - self.xlim[0])
            yv = self.ylim[0] + frac * (self.ylim[1] - self.ylim[0])
            px, py = self._tx(xv), self._ty(yv)
            self.parts.append(
                f'<text x="{_fmt(px)}" y="{h - m + 18}" font-size="11" '
                f'text-anchor="middle">{_fmt(xv)}</text>'
            )
            self.parts.append(
                f'<text x="{m - 8}" y="{_fmt(py + 4)}" font-size="11" '
                f'text-anchor="end">{_fmt(yv)}</text>'
            )
        if title:
            self.parts.append(
                f'<text x="{w / 2}" y="{m - 16}" font-size="14" text-anchor="middle">{title}</text>'
            )
        if xlabel:
            self.parts.append(
                f'<text x="{w / 2}" y="{h - 10}" font-size="12" text-anchor="middle">{xlabel}</text>'
            )
        if ylabel:
            self.parts.append(
                f'<text x="14" y="{h / 2}" font-size="12" text-anchor="middle" '
                f'transform="rotate(-90 14 {h / 2})">{ylabel}</text>'
            )

    def polyline(self, xs: Sequence[float], ys: Sequence[float], color: str, label: str = "") -> None:
        pts = " ".join(f"{_fmt(self._tx(x))},{_fmt(self._ty(y))}" for x, y in zip(xs, ys))
        cls = f' class="series-{label}"' if label else ""
        self.parts.append(
            f'<polyline{cls} points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )

    def scatter(
        self, xs: Sequence[float], ys: Sequence[float], color: str, label: str, radius: float = 2.5
    ) -> None:
        for x, y in zip(xs, ys):
            self.parts.append(
                f'<circle class="marker-{label}" cx="{_fmt(self._tx(x))}" '
                f'cy="{_fmt(self._ty(y))}" r="{_fmt(radius)}" fill="{color}" fill-opacity="0.7"/>'
            )

    def legend(self, entries: Sequence[Tuple[str, str]]) -> None:
        x0, y0 = self.width - self.margin - 120, self.margin + 10
        for i, (name, color) in enumerate(entries):
            y = y0 + 16 * i
            self.parts.append(f'<circle cx="{x0}" cy="{y}" r="4" fill="{color}"/>')
            self.parts.append(f'<text x="{x0 + 10}" y="{y + 4}" font-size="11">{name}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_plot(
    path: str,
    xs: Sequence[float],
    series: Sequence[Tuple[str, Sequence[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    ylim: Optional[Tuple[float, float]] = None,
) -> None:
    """One or more polylines over a shared x axis, written atomically."""
    xlim = (min(xs), max(xs)) if len(xs) > 1 else (xs[0] - 1, xs[0] + 1)
    if ylim is None:
        all_y = [v for _, ys in series for v in ys]
        ylim = (min(0.0, min(all_y)), max(1.0, max(all_y)))
    canvas = SvgCanvas(xlim, ylim, title=title, xlabel=xlabel, ylabel=ylabel)
    for i, (name, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        canvas.polyline(xs, ys, color, label=name)
        canvas.scatter(xs, ys, color, label=name, radius=3.0)
    canvas.legend([(name, _COLORS[i % len(_COLORS)]) for i, (name, _) in enumerate(series)])
    write_svg(path, canvas.render())


def write_svg(path: str, content: str) -> None:
    import os

    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(content)
    os.replace(tmp, path)
