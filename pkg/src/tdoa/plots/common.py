import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import BinaryIO, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.tdoa.services.optimizers import Algorithm

SVG_NAMESPACE = "http://www.w3.org/2000/svg"

WIDTH = 720
HEIGHT = 460
# Поля: слева подписи оси Y, справа легенда
MARGIN_LEFT = 80
MARGIN_RIGHT = 160
MARGIN_TOP = 40
MARGIN_BOTTOM = 60


@dataclass(frozen=True)
class SeriesStyle:
    color: str
    dash: Optional[str] = None


PALETTE: Dict[Algorithm, SeriesStyle] = {
    Algorithm.SGD: SeriesStyle("#1f77b4"),
    Algorithm.SGD_MOMENTUM: SeriesStyle("#ff7f0e", "8 4"),
    Algorithm.RMSPROP: SeriesStyle("#17becf", "2 3"),
    Algorithm.ADAM: SeriesStyle("#d62728", "10 3 2 3"),
    Algorithm.RMSPROP_AF: SeriesStyle("#2ca02c"),
}


def fmt(value: float) -> str:
    """Координата с двумя знаками: вывод не зависит от шума младших разрядов."""
    text = f"{value:.2f}"
    return "0.00" if text == "-0.00" else text


def padded_range(lo: float, hi: float, fraction: float = 0.05) -> Tuple[float, float]:
    if not np.isfinite(lo) or not np.isfinite(hi):
        return 0.0, 1.0
    if hi - lo <= 0:
        half = max(abs(lo) * 0.1, 0.5)
        return lo - half, hi + half
    pad = (hi - lo) * fraction
    return lo - pad, hi + pad


def linear_ticks(lo: float, hi: float, count: int = 6) -> List[float]:
    return [float(v) for v in np.linspace(lo, hi, count)]


class Axes:
    """Перевод координат данных в пиксели области построения."""

    def __init__(self, x_range: Tuple[float, float], y_range: Tuple[float, float]):
        self.x_range = x_range
        self.y_range = y_range
        self.left = MARGIN_LEFT
        self.right = WIDTH - MARGIN_RIGHT
        self.top = MARGIN_TOP
        self.bottom = HEIGHT - MARGIN_BOTTOM

    def px(self, x: float, y: float) -> Tuple[float, float]:
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        u = self.left + (x - x0) / (x1 - x0) * (self.right - self.left)
        v = self.bottom - (y - y0) / (y1 - y0) * (self.bottom - self.top)
        return u, v

    def contains(self, x: float, y: float) -> bool:
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        return x0 <= x <= x1 and y0 <= y <= y1


class Canvas:
    def __init__(self, title: str):
        self.root = ET.Element(
            "svg",
            xmlns=SVG_NAMESPACE,
            version="1.1",
            width=str(WIDTH),
            height=str(HEIGHT),
            viewBox=f"0 0 {WIDTH} {HEIGHT}",
        )
        ET.SubElement(self.root, "rect", x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="white")
        self.text(WIDTH / 2, MARGIN_TOP / 2 + 5, title, anchor="middle", size=15)
        self._legend_rows = 0

    def group(self, css_class: str) -> ET.Element:
        return ET.SubElement(self.root, "g", {"class": css_class})

    def text(
        self,
        x: float,
        y: float,
        content: str,
        anchor: str = "start",
        size: int = 12,
        rotate: bool = False,
        parent: Optional[ET.Element] = None,
    ) -> ET.Element:
        attributes = {
            "x": fmt(x),
            "y": fmt(y),
            "font-family": "sans-serif",
            "font-size": str(size),
            "text-anchor": anchor,
        }
        if rotate:
            attributes["transform"] = f"rotate(-90 {fmt(x)} {fmt(y)})"
        element = ET.SubElement(self.root if parent is None else parent, "text", attributes)
        element.text = content
        return element

    def line(self, p: Tuple[float, float], q: Tuple[float, float], stroke: str = "black", parent=None) -> ET.Element:
        return ET.SubElement(
            self.root if parent is None else parent,
            "line",
            x1=fmt(p[0]),
            y1=fmt(p[1]),
            x2=fmt(q[0]),
            y2=fmt(q[1]),
            stroke=stroke,
        )

    def polyline(
        self,
        points: Sequence[Tuple[float, float]],
        style: SeriesStyle,
        css_class: str,
        width: float = 1.5,
        parent=None,
    ) -> ET.Element:
        attributes = {
            "class": css_class,
            "points": " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points),
            "fill": "none",
            "stroke": style.color,
            "stroke-width": str(width),
        }
        if style.dash:
            attributes["stroke-dasharray"] = style.dash
        return ET.SubElement(self.root if parent is None else parent, "polyline", attributes)

    def circle(self, center: Tuple[float, float], radius: float, fill: str, css_class: str, parent=None) -> ET.Element:
        return ET.SubElement(
            self.root if parent is None else parent,
            "circle",
            {"class": css_class, "cx": fmt(center[0]), "cy": fmt(center[1]), "r": fmt(radius), "fill": fill},
        )

    def frame(self, axes: Axes, x_label: str, y_label: str, x_ticks, y_ticks) -> None:
        """Рамка области построения, деления и подписи осей."""
        group = self.group("axes")
        ET.SubElement(
            group,
            "rect",
            x=fmt(axes.left),
            y=fmt(axes.top),
            width=fmt(axes.right - axes.left),
            height=fmt(axes.bottom - axes.top),
            fill="none",
            stroke="black",
        )
        for value, label in x_ticks:
            u, _ = axes.px(value, axes.y_range[0])
            self.line((u, axes.bottom), (u, axes.bottom + 5), parent=group)
            self.text(u, axes.bottom + 18, label, anchor="middle", size=11, parent=group)
        for value, label in y_ticks:
            _, v = axes.px(axes.x_range[0], value)
            self.line((axes.left - 5, v), (axes.left, v), parent=group)
            self.text(axes.left - 8, v + 4, label, anchor="end", size=11, parent=group)
        self.text((axes.left + axes.right) / 2, HEIGHT - 15, x_label, anchor="middle", parent=group)
        self.text(20, (axes.top + axes.bottom) / 2, y_label, anchor="middle", rotate=True, parent=group)

    def legend_entry(self, label: str, style: SeriesStyle) -> None:
        x = WIDTH - MARGIN_RIGHT + 15
        y = MARGIN_TOP + 15 + 20 * self._legend_rows
        group = self.group("legend")
        self.polyline([(x, y), (x + 30, y)], style, "legend-line", width=2.0, parent=group)
        self.text(x + 38, y + 4, label, size=11, parent=group)
        self._legend_rows += 1

    def write(self, sink: BinaryIO) -> None:
        tree = ET.ElementTree(self.root)
        ET.indent(tree)
        tree.write(sink, encoding="utf-8", xml_declaration=True)
        sink.write(b"\n")
