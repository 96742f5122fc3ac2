"""Hand-rolled SVG rendering of a scene on its two working planes.

Two panels sit side by side: the floor plan (x right, y up) and the
elevation (y right, z up).  The room is outlined, fixed furniture is
filled light gray, the goal placement is dashed, and the movable item's
live placement is filled.  Openings are strips on the floor plan only;
they carry no height information, so the elevation omits them.

All numbers are written with a fixed four-decimal format and the
document carries no timestamps or generated ids, so equal inputs always
produce byte-identical files.
"""

from dataclasses import dataclass

from .env import EnvState
from .geometry import Box3, Plane, Rect2, Vec3, project
from .scene import Scene
from .training import EpisodeTrace

PANEL = 300.0          # drawing area per panel, px
MARGIN = 24.0
GAP = 48.0
LABEL_H = 18.0

_STYLE = {
    "room": 'fill="none" stroke="#333333" stroke-width="2"',
    "fixed": 'fill="#d8d8d8" stroke="#a0a0a0" stroke-width="1"',
    "opening": 'fill="#8ecae6" stroke="none"',
    "goal": 'fill="none" stroke="#2a9d4e" stroke-width="2" stroke-dasharray="6 4"',
    "current": 'fill="#4472c4" fill-opacity="0.55" stroke="#24447c" stroke-width="1.5"',
    "trace": 'fill="none" stroke="#e05252" stroke-width="1.5"',
}


def _fmt(x: float) -> str:
    return f"{x:.4f}"


@dataclass(frozen=True)
class _PanelMap:
    """Meters-to-pixels transform for one panel, v axis flipped."""

    origin_x: float
    origin_y: float
    scale: float
    room: Rect2

    def to_px(self, u: float, v: float) -> tuple[float, float]:
        return (self.origin_x + (u - self.room.min_u) * self.scale,
                self.origin_y + (self.room.max_v - v) * self.scale)

    def rect(self, r: Rect2, style: str) -> str:
        x, y = self.to_px(r.min_u, r.max_v)
        return (f'<rect x="{_fmt(x)}" y="{_fmt(y)}" '
                f'width="{_fmt(r.su * self.scale)}" '
                f'height="{_fmt(r.sv * self.scale)}" {style}/>')

    def polyline(self, points_uv: list[tuple[float, float]], style: str) -> str:
        pts = " ".join("{},{}".format(*map(_fmt, self.to_px(u, v)))
                       for u, v in points_uv)
        return f'<polyline points="{pts}" {style}/>'


def _panel_map(room: Rect2, origin_x: float, origin_y: float) -> _PanelMap:
    scale = PANEL / max(room.su, room.sv)
    return _PanelMap(origin_x, origin_y, scale, room)


def _trace_points(scene: Scene, trace: EpisodeTrace,
                  plane: Plane) -> list[tuple[float, float]]:
    """Start placement plus one vertex per accepted move on the plane."""
    axes = (0, 1) if plane is Plane.XY else (1, 2)
    start = scene.movable.box.center.as_tuple()
    points = [(start[axes[0]], start[axes[1]])]
    want = "xy" if plane is Plane.XY else "yz"
    for rec in trace.records:
        if rec.surface == want and rec.accepted:
            points.append((rec.placement[axes[0]], rec.placement[axes[1]]))
    return points


def render_svg(scene: Scene, state: EnvState | None = None,
               trace: EpisodeTrace | None = None) -> str:
    """Render the scene to an SVG 1.1 document string.

    The movable item is drawn at ``state.current`` when a state is given,
    at the last traced placement when only a trace is given, and at its
    stored start placement otherwise.  A trace also draws the movement
    polyline on both panels.
    """
    if state is not None:
        current = state.current
    elif trace is not None and trace.records:
        current = Box3(Vec3(*trace.records[-1].placement),
                       scene.movable.box.size)
    else:
        current = scene.movable.box

    parts: list[str] = []
    width = 2 * MARGIN + 2 * PANEL + GAP
    height = 2 * MARGIN + PANEL + LABEL_H
    parts.append('<?xml version="1.0" encoding="UTF-8"?>')
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">')
    parts.append(f'<rect x="0" y="0" width="{_fmt(width)}" '
                 f'height="{_fmt(height)}" fill="#ffffff"/>')

    for i, plane in enumerate((Plane.XY, Plane.YZ)):
        origin_x = MARGIN + i * (PANEL + GAP)
        origin_y = MARGIN + LABEL_H
        room = project(scene.room, plane)
        panel = _panel_map(room, origin_x, origin_y)
        title = "floor plan (x-y)" if plane is Plane.XY else "elevation (y-z)"
        parts.append(f'<text x="{_fmt(origin_x)}" y="{_fmt(MARGIN + 12.0)}" '
                     f'font-family="monospace" font-size="13" '
                     f'fill="#333333">{title}</text>')
        parts.append(panel.rect(room, _STYLE["room"]))
        if plane is Plane.XY:
            for opening in scene.openings:
                parts.append(panel.rect(opening.rect, _STYLE["opening"]))
        for item in scene.fixed_items:
            parts.append(panel.rect(project(item.box, plane), _STYLE["fixed"]))
        parts.append(panel.rect(project(scene.goal, plane), _STYLE["goal"]))
        parts.append(panel.rect(project(current, plane), _STYLE["current"]))
        if trace is not None:
            points = _trace_points(scene, trace, plane)
            if len(points) >= 2:
                parts.append(panel.polyline(points, _STYLE["trace"]))

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_svg(path, scene: Scene, state: EnvState | None = None,
             trace: EpisodeTrace | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_svg(scene, state, trace))
