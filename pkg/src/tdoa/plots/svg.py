import logging
import math
from enum import Enum
from typing import BinaryIO, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.tdoa.errors import InvalidArgumentError
from src.tdoa.plots.common import PALETTE, Axes, Canvas, SeriesStyle, linear_ticks, padded_range
from src.tdoa.services.harness import ConvergenceTrace
from src.tdoa.services.measurement_model import hyperbola_points, pair_list
from src.tdoa.services.scenarios import Scenario

logger = logging.getLogger(__name__)

# Нижняя граница J для логарифмической шкалы
COST_FLOOR = 1e-12
HYPERBOLA_STYLE = SeriesStyle("#b0b0b0", "3 3")


class PlotKind(str, Enum):
    CONVERGENCE = "convergence"
    TRAJECTORY = "trajectory"


def _style(trace: ConvergenceTrace) -> SeriesStyle:
    return PALETTE.get(trace.algorithm, SeriesStyle("black"))


def _decade_ticks(lo: float, hi: float) -> List[Tuple[float, str]]:
    decades = list(range(math.ceil(lo), math.floor(hi) + 1))
    if len(decades) < 2:
        return [(value, f"{10 ** value:.3g}") for value in linear_ticks(lo, hi, 4)]
    stride = max(1, len(decades) // 6)
    return [(float(d), f"1e{d}") for d in decades[::stride]]


def _plot_convergence(traces: Sequence[ConvergenceTrace], title: str) -> Canvas:
    log_costs = [np.log10(np.maximum(trace.costs, COST_FLOOR)) for trace in traces]
    last = max(len(trace) for trace in traces) - 1
    x_range = (0.0, float(max(last, 1)))
    y_range = padded_range(min(float(c.min()) for c in log_costs), max(float(c.max()) for c in log_costs))
    axes = Axes(x_range, y_range)

    canvas = Canvas(title)
    x_ticks = [(v, f"{v:g}") for v in np.round(linear_ticks(*x_range)).tolist()]
    canvas.frame(axes, "Number of iterations", "Cost function J", x_ticks, _decade_ticks(*y_range))

    series = canvas.group("series-group")
    for trace, costs in zip(traces, log_costs):
        style = _style(trace)
        points = [axes.px(k, value) for k, value in enumerate(costs)]
        css_class = f"series {trace.algorithm.slug}"
        if len(points) == 1:
            canvas.circle(points[0], 3.0, style.color, css_class, parent=series)
        else:
            canvas.polyline(points, style, css_class, parent=series)
        canvas.legend_entry(trace.algorithm.value, style)
    return canvas


def _segments(points: np.ndarray, axes: Axes) -> List[List[Tuple[float, float]]]:
    """Куски ветви гиперболы, попадающие в область построения."""
    segments: List[List[Tuple[float, float]]] = []
    current: List[Tuple[float, float]] = []
    for x, y in points:
        if axes.contains(x, y):
            current.append(axes.px(x, y))
        elif current:
            segments.append(current)
            current = []
    if current:
        segments.append(current)
    return [segment for segment in segments if len(segment) > 1]


def _plot_trajectory(traces: Sequence[ConvergenceTrace], scenario: Scenario, title: str) -> Canvas:
    receivers = scenario.receivers.positions
    cloud = np.vstack([receivers, scenario.true_position[None, :]] + [trace.positions for trace in traces])
    lo = cloud.min(axis=0)
    hi = cloud.max(axis=0)
    # Одинаковый масштаб по обеим осям
    half = max(float(np.max(hi - lo)) / 2.0, 1.0) * 1.1
    center = (lo + hi) / 2.0
    axes = Axes((center[0] - half, center[0] + half), (center[1] - half, center[1] + half))

    canvas = Canvas(title)
    x_ticks = [(v, f"{v:.0f}") for v in linear_ticks(*axes.x_range)]
    y_ticks = [(v, f"{v:.0f}") for v in linear_ticks(*axes.y_range)]
    canvas.frame(axes, "x (m)", "y (m)", x_ticks, y_ticks)

    measurements = next((t.measurements for t in traces if t.measurements is not None), None)
    if measurements is not None:
        loci = canvas.group("hyperbolas")
        for (i, j), delta_d in zip(pair_list(len(receivers)), measurements):
            try:
                points = hyperbola_points(receivers[i], receivers[j], float(delta_d), half_span=4.0, count=241)
            except InvalidArgumentError:
                logger.debug(f"[EMIT] pair ({i},{j}) Δd={delta_d:.3f} has no locus, skipped")
                continue
            for segment in _segments(points, axes):
                canvas.polyline(segment, HYPERBOLA_STYLE, "hyperbola", width=1.0, parent=loci)

    paths = canvas.group("series-group")
    for trace in traces:
        style = _style(trace)
        points = [axes.px(x, y) for x, y in trace.positions]
        css_class = f"series {trace.algorithm.slug}"
        if len(points) == 1:
            canvas.circle(points[0], 4.0, style.color, css_class, parent=paths)
        else:
            canvas.polyline(points, style, css_class, parent=paths)
        canvas.legend_entry(trace.algorithm.value, style)

    anchors = canvas.group("receivers")
    for index, (x, y) in enumerate(receivers):
        u, v = axes.px(x, y)
        canvas.circle((u, v), 5.0, "black", "receiver", parent=anchors)
        canvas.text(u + 7, v - 7, f"R{index + 1}", size=11, parent=anchors)
    u, v = axes.px(*scenario.true_position)
    canvas.circle((u, v), 5.0, "#9467bd", "transmitter")
    canvas.text(u + 7, v + 14, "true position", size=11)
    return canvas


def emit_svg(
    traces: Sequence[ConvergenceTrace],
    kind: Union[str, PlotKind],
    sink: BinaryIO,
    scenario: Optional[Scenario] = None,
) -> None:
    """Самодостаточный SVG: сходимость J по итерациям или траектории оценок на плоскости."""
    kind = PlotKind(kind)
    drawable = [trace for trace in traces if len(trace) > 0]
    if not drawable:
        raise InvalidArgumentError("emit_svg needs at least one non-empty trace")

    title_scenario = scenario.name if scenario is not None else drawable[0].scenario
    if kind is PlotKind.CONVERGENCE:
        canvas = _plot_convergence(drawable, f"Convergence of algorithms: {title_scenario}")
    else:
        if scenario is None:
            raise InvalidArgumentError("trajectory plot needs the scenario geometry")
        canvas = _plot_trajectory(drawable, scenario, f"Iterative position estimation: {title_scenario}")
    canvas.write(sink)
