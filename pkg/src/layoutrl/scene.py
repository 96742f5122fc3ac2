"""Scene model: a room, its openings, fixed clutter, one movable item, a goal.

A scene is the full episode setup.  The movable item starts somewhere, the
goal box says where it should end up, and everything is axis-aligned.  Room
extents are carved into ``divisions`` lattice cells per axis; generated
sizes and placements snap to that lattice so the goal is exactly reachable
by fixed-size moves (the simulator step size is one cell).

Coordinate frame: x east, y north, z up.  The four walls are named by
compass direction: east = +x, west = -x, north = +y, south = -y.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .geometry import Box3, Plane, Rect2, Vec3, box_inside, project_xy, rect_inside

ROOM_TYPES = ("tatami", "bedroom", "balcony", "kitchen")
WALLS = ("east", "west", "north", "south")
OPENING_KINDS = ("door", "window")
SCHEMA_VERSION = 1

# containment slack for validation; generated coordinates are exact up to
# float rounding, hand-built scenes should not rely on more than this
_VALIDATE_TOL = 1e-9


class SceneError(Exception):
    """Bad scene data: unreadable file, schema mismatch, or invalid content."""


@dataclass(frozen=True)
class Opening:
    """Door or window, stored as a thin strip on the floor plan."""

    kind: str
    wall: str
    rect: Rect2


@dataclass(frozen=True)
class FurnitureItem:
    """One piece of furniture; exactly one item per scene is movable."""

    item_id: str
    box: Box3
    movable: bool


@dataclass(frozen=True)
class Scene:
    """Complete episode setup."""

    room_type: str
    room: Box3
    openings: tuple[Opening, ...]
    items: tuple[FurnitureItem, ...]
    goal: Box3
    seed: int

    @property
    def movable(self) -> FurnitureItem:
        for item in self.items:
            if item.movable:
                return item
        raise SceneError("scene has no movable item")

    @property
    def fixed_items(self) -> tuple[FurnitureItem, ...]:
        return tuple(item for item in self.items if not item.movable)

    def with_movable_center(self, center: Vec3) -> "Scene":
        """Copy of the scene with the movable item recentered."""
        items = tuple(
            replace(item, box=Box3(center, item.box.size)) if item.movable else item
            for item in self.items
        )
        return replace(self, items=items)


# ---------------------------------------------------------------------------
# Generator configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorConfig:
    """Sampling ranges for one room type.

    Ranges are (low, high) in meters.  ``square_footprint`` ties the x and
    y room extents to a single draw.  The movable-item upper bound is
    clamped per scene so the item always fits with at least one lattice
    cell of clearance per side.
    """

    room_type: str = "bedroom"
    room_size_x: tuple[float, float] = (3.0, 5.0)
    room_size_y: tuple[float, float] = (3.0, 5.0)
    room_size_z: tuple[float, float] = (2.6, 3.0)
    square_footprint: bool = False
    item_size: tuple[float, float] = (0.6, 2.0)
    door_count: tuple[int, int] = (1, 1)
    window_count: tuple[int, int] = (0, 2)
    fixed_count: tuple[int, int] = (0, 2)
    fixed_size: tuple[float, float] = (0.3, 0.9)
    goal_rule: str = "wall"  # "wall" | "uniform"
    divisions: int = 64


_ROOM_DEFAULTS: dict[str, dict] = {
    "bedroom": dict(room_size_x=(3.0, 5.0), room_size_y=(3.0, 5.0),
                    room_size_z=(2.6, 3.0)),
    "tatami": dict(room_size_x=(2.5, 4.0), room_size_y=(2.5, 4.0),
                   room_size_z=(2.4, 3.0), square_footprint=True),
    "balcony": dict(room_size_x=(1.5, 2.5), room_size_y=(3.0, 5.0),
                    room_size_z=(2.4, 3.0), window_count=(0, 1)),
    "kitchen": dict(room_size_x=(2.0, 4.0), room_size_y=(2.0, 4.0),
                    room_size_z=(2.4, 3.0)),
}


def default_config(room_type: str, **overrides) -> GeneratorConfig:
    """Stock sampling ranges for one of the four room types."""
    if room_type not in ROOM_TYPES:
        raise SceneError(f"unknown room type {room_type!r}, expected one of {ROOM_TYPES}")
    kwargs: dict = dict(room_type=room_type)
    kwargs.update(_ROOM_DEFAULTS[room_type])
    kwargs.update(overrides)
    return GeneratorConfig(**kwargs)


def _check_range(name: str, rng_pair, lo_ok: float | None = None) -> None:
    lo, hi = rng_pair
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise SceneError(f"invalid range for {name}: {rng_pair!r}")
    if lo_ok is not None and lo <= lo_ok:
        raise SceneError(f"{name} lower bound must exceed {lo_ok}, got {lo}")


def validate_config(cfg: GeneratorConfig) -> None:
    """Raise SceneError when sampling ranges cannot produce a valid scene."""
    if cfg.room_type not in ROOM_TYPES:
        raise SceneError(f"unknown room type {cfg.room_type!r}")
    if cfg.goal_rule not in ("wall", "uniform"):
        raise SceneError(f"unknown goal rule {cfg.goal_rule!r}")
    if cfg.divisions < 4:
        raise SceneError(f"divisions must be at least 4, got {cfg.divisions}")
    for name in ("room_size_x", "room_size_y", "room_size_z"):
        _check_range(name, getattr(cfg, name), lo_ok=0.0)
    _check_range("item_size", cfg.item_size, lo_ok=0.0)
    _check_range("fixed_size", cfg.fixed_size, lo_ok=0.0)
    for name in ("door_count", "window_count", "fixed_count"):
        lo, hi = getattr(cfg, name)
        if lo < 0 or lo > hi:
            raise SceneError(f"invalid count range for {name}: ({lo}, {hi})")
    # the movable item must fit in the smallest possible room on every axis
    smallest = min(cfg.room_size_x[0], cfg.room_size_y[0], cfg.room_size_z[0])
    if cfg.item_size[0] >= smallest:
        raise SceneError(
            f"item_size lower bound {cfg.item_size[0]} does not fit the "
            f"smallest room extent {smallest}")


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _snap_item_size(raw: float, extent: float, divisions: int) -> float:
    """Snap a sampled size to an even number of lattice cells.

    Even cell counts keep the item's half-size on the lattice, which makes
    wall-flush centers reachable by whole-cell moves.  At least one free
    cell per side is preserved.
    """
    delta = extent / divisions
    m = int(round(raw / (2.0 * delta)))
    m = max(1, min(m, (divisions - 2) // 2))
    return 2.0 * m * delta


def _lattice_center(room_lo: float, half: float, delta: float, k: int) -> float:
    return room_lo + half + k * delta


def generate_scene(cfg: GeneratorConfig, seed: int) -> Scene:
    """Sample one scene; deterministic in (cfg, seed).

    Args:
        cfg: Sampling ranges, already or implicitly validated.
        seed: Non-negative seed; stored on the scene for provenance.

    Returns:
        A scene whose movable item starts exactly at the goal placement.
        Use :func:`randomize_start` for a fresh start position.
    """
    validate_config(cfg)
    if seed < 0:
        raise SceneError(f"seed must be non-negative, got {seed}")
    rng = np.random.default_rng(seed)

    ex = rng.uniform(*cfg.room_size_x)
    ey = ex if cfg.square_footprint else rng.uniform(*cfg.room_size_y)
    ez = rng.uniform(*cfg.room_size_z)
    room = Box3(Vec3(0.0, 0.0, ez / 2.0), Vec3(ex, ey, ez))
    deltas = (ex / cfg.divisions, ey / cfg.divisions, ez / cfg.divisions)
    room_lo = room.min_corner.as_tuple()

    # movable item size, snapped to even cell counts per axis
    extents = (ex, ey, ez)
    size = []
    for axis in range(3):
        hi = min(cfg.item_size[1], extents[axis] - 2.0 * deltas[axis])
        raw = rng.uniform(cfg.item_size[0], max(cfg.item_size[0], hi))
        size.append(_snap_item_size(raw, extents[axis], cfg.divisions))
    cells = [int(round(s / d)) for s, d in zip(size, deltas)]  # even counts

    # goal placement on the lattice of feasible centers
    flush_axis, flush_high = -1, False
    if cfg.goal_rule == "wall":
        wall = WALLS[int(rng.integers(len(WALLS)))]
        flush_axis = 0 if wall in ("east", "west") else 1
        flush_high = wall in ("east", "north")
    goal_center = []
    for axis in range(3):
        k_max = cfg.divisions - cells[axis]
        if axis == flush_axis:
            k = k_max if flush_high else 0
        else:
            k = int(rng.integers(k_max + 1))
        goal_center.append(
            _lattice_center(room_lo[axis], size[axis] / 2.0, deltas[axis], k))
    goal = Box3(Vec3(*goal_center), Vec3(*size))

    openings = _sample_openings(cfg, rng, room)
    fixed = _sample_fixed_items(cfg, rng, room)
    items = (FurnitureItem("movable", Box3(goal.center, goal.size), True),) + fixed
    return Scene(cfg.room_type, room, openings, items, goal, int(seed))


def _sample_openings(cfg: GeneratorConfig, rng: np.random.Generator,
                     room: Box3) -> tuple[Opening, ...]:
    counts = [("door", int(rng.integers(cfg.door_count[0], cfg.door_count[1] + 1))),
              ("window", int(rng.integers(cfg.window_count[0], cfg.window_count[1] + 1)))]
    widths = {"door": (0.8, 1.0), "window": (0.8, 1.6)}
    depth = 0.08  # strip thickness drawn into the room
    lo, hi = room.min_corner, room.max_corner
    openings = []
    for kind, n in counts:
        for _ in range(n):
            wall = WALLS[int(rng.integers(len(WALLS)))]
            along_x = wall in ("north", "south")  # strip runs along x
            span = (hi.x - lo.x) if along_x else (hi.y - lo.y)
            width = min(rng.uniform(*widths[kind]), 0.8 * span)
            offset = rng.uniform(0.0, span - width)
            if along_x:
                cu = lo.x + offset + width / 2.0
                cv = (hi.y - depth / 2.0) if wall == "north" else (lo.y + depth / 2.0)
                rect = Rect2(cu, cv, width, depth, Plane.XY)
            else:
                cv = lo.y + offset + width / 2.0
                cu = (hi.x - depth / 2.0) if wall == "east" else (lo.x + depth / 2.0)
                rect = Rect2(cu, cv, depth, width, Plane.XY)
            openings.append(Opening(kind, wall, rect))
    return tuple(openings)


def _sample_fixed_items(cfg: GeneratorConfig, rng: np.random.Generator,
                        room: Box3) -> tuple[FurnitureItem, ...]:
    n = int(rng.integers(cfg.fixed_count[0], cfg.fixed_count[1] + 1))
    lo = room.min_corner
    items = []
    for i in range(n):
        sx, sy = rng.uniform(cfg.fixed_size[0], cfg.fixed_size[1], 2)
        sz = rng.uniform(cfg.fixed_size[0], min(cfg.fixed_size[1], room.size.z))
        cx = rng.uniform(lo.x + sx / 2.0, lo.x + room.size.x - sx / 2.0)
        cy = rng.uniform(lo.y + sy / 2.0, lo.y + room.size.y - sy / 2.0)
        box = Box3(Vec3(cx, cy, lo.z + sz / 2.0), Vec3(sx, sy, sz))
        items.append(FurnitureItem(f"fixed_{i}", box, False))
    return tuple(items)


def randomize_start(scene: Scene, seed: int, divisions: int = 64) -> Scene:
    """Resample the movable item's start uniformly over feasible lattice centers.

    Each axis is drawn independently from the step lattice anchored at the
    goal center, restricted to centers that keep the item inside the room.
    Anchoring at the goal keeps the goal reachable by whole-cell moves even
    for hand-built scenes.  An axis where the item fills the room has a
    single feasible center (the room center).
    """
    rng = np.random.default_rng(seed)
    room = scene.room
    room_lo = room.min_corner.as_tuple()
    room_hi = room.max_corner.as_tuple()
    extents = room.size.as_tuple()
    goal_c = scene.goal.center.as_tuple()
    size = scene.movable.box.size.as_tuple()
    center = []
    for axis in range(3):
        half = size[axis] / 2.0
        lo_c = room_lo[axis] + half
        hi_c = room_hi[axis] - half
        delta = extents[axis] / divisions
        k_min = -int(math.floor((goal_c[axis] - lo_c) / delta + 1e-9))
        k_max = int(math.floor((hi_c - goal_c[axis]) / delta + 1e-9))
        k = int(rng.integers(k_min, k_max + 1))
        c = goal_c[axis] + k * delta
        center.append(min(max(c, lo_c), hi_c))
    return scene.with_movable_center(Vec3(*center))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


def validate_scene(scene: Scene) -> list[str]:
    """Return a list of violation messages; empty means the scene is valid."""
    problems: list[str] = []
    room = scene.room
    if scene.room_type not in ROOM_TYPES:
        problems.append(f"unknown room type {scene.room_type!r}")
    if not _finite(*room.center.as_tuple(), *room.size.as_tuple()):
        problems.append("room has non-finite coordinates")
        return problems  # nothing else is checkable
    if min(room.size.as_tuple()) <= 0.0:
        problems.append("room size must be positive on every axis")
        return problems
    if not isinstance(scene.seed, int) or scene.seed < 0:
        problems.append(f"seed must be a non-negative integer, got {scene.seed!r}")

    movable = [it for it in scene.items if it.movable]
    if len(movable) != 1:
        problems.append(f"expected exactly one movable item, found {len(movable)}")
    for item in scene.items:
        if not _finite(*item.box.center.as_tuple(), *item.box.size.as_tuple()):
            problems.append(f"item {item.item_id!r} has non-finite coordinates")
        elif min(item.box.size.as_tuple()) <= 0.0:
            problems.append(f"item {item.item_id!r} size must be positive")
        elif item.movable and not box_inside(item.box, room, tol=_VALIDATE_TOL):
            problems.append(f"movable item {item.item_id!r} is not inside the room")

    if not _finite(*scene.goal.center.as_tuple(), *scene.goal.size.as_tuple()):
        problems.append("goal has non-finite coordinates")
    elif min(scene.goal.size.as_tuple()) <= 0.0:
        problems.append("goal size must be positive on every axis")
    else:
        if not box_inside(scene.goal, room, tol=_VALIDATE_TOL):
            problems.append("goal is not inside the room")
        if len(movable) == 1:
            gs, ms = scene.goal.size.as_tuple(), movable[0].box.size.as_tuple()
            if any(not math.isclose(g, m, rel_tol=1e-9, abs_tol=1e-9)
                   for g, m in zip(gs, ms)):
                problems.append("goal size does not match the movable item size")

    footprint = project_xy(room)
    for i, op in enumerate(scene.openings):
        if op.kind not in OPENING_KINDS:
            problems.append(f"opening {i} has unknown kind {op.kind!r}")
        if op.wall not in WALLS:
            problems.append(f"opening {i} has unknown wall {op.wall!r}")
            continue
        if op.rect.plane is not Plane.XY:
            problems.append(f"opening {i} rect must lie on the XY plane")
            continue
        if not rect_inside(op.rect, footprint, tol=_VALIDATE_TOL):
            problems.append(f"opening {i} is not inside the room footprint")
        wall_coord = {"east": (op.rect.max_u, footprint.max_u),
                      "west": (op.rect.min_u, footprint.min_u),
                      "north": (op.rect.max_v, footprint.max_v),
                      "south": (op.rect.min_v, footprint.min_v)}[op.wall]
        if abs(wall_coord[0] - wall_coord[1]) > 1e-6:
            problems.append(f"opening {i} does not touch its wall {op.wall!r}")
    return problems


# ---------------------------------------------------------------------------
# Serialization (JSON, schema version 1)
# ---------------------------------------------------------------------------

def _vec_to_list(v: Vec3) -> list[float]:
    return [v.x, v.y, v.z]


def _box_to_dict(b: Box3) -> dict:
    return {"center": _vec_to_list(b.center), "size": _vec_to_list(b.size)}


def scene_to_dict(scene: Scene) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "room_type": scene.room_type,
        "seed": scene.seed,
        "room": _box_to_dict(scene.room),
        "openings": [
            {"kind": op.kind, "wall": op.wall,
             "center": [op.rect.cu, op.rect.cv],
             "size": [op.rect.su, op.rect.sv]}
            for op in scene.openings
        ],
        "items": [
            {"id": it.item_id, "movable": it.movable, **_box_to_dict(it.box)}
            for it in scene.items
        ],
        "goal": _box_to_dict(scene.goal),
    }


def _need(mapping: dict, field: str, where: str):
    if field not in mapping:
        raise SceneError(f"missing field {field!r} in {where}")
    return mapping[field]


def _box_from_dict(d: dict, where: str) -> Box3:
    center = _need(d, "center", where)
    size = _need(d, "size", where)
    if len(center) != 3 or len(size) != 3:
        raise SceneError(f"{where}: center and size must have 3 components")
    return Box3(Vec3(*map(float, center)), Vec3(*map(float, size)))


def scene_from_dict(data: dict) -> Scene:
    version = _need(data, "schema_version", "scene")
    if version != SCHEMA_VERSION:
        raise SceneError(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
    openings = []
    for i, op in enumerate(_need(data, "openings", "scene")):
        where = f"openings[{i}]"
        center = _need(op, "center", where)
        size = _need(op, "size", where)
        rect = Rect2(float(center[0]), float(center[1]),
                     float(size[0]), float(size[1]), Plane.XY)
        openings.append(Opening(_need(op, "kind", where), _need(op, "wall", where), rect))
    items = []
    for i, it in enumerate(_need(data, "items", "scene")):
        where = f"items[{i}]"
        items.append(FurnitureItem(_need(it, "id", where),
                                   _box_from_dict(it, where),
                                   bool(_need(it, "movable", where))))
    return Scene(
        room_type=_need(data, "room_type", "scene"),
        room=_box_from_dict(_need(data, "room", "scene"), "room"),
        openings=tuple(openings),
        items=tuple(items),
        goal=_box_from_dict(_need(data, "goal", "scene"), "goal"),
        seed=int(_need(data, "seed", "scene")),
    )


def scene_to_json(scene: Scene) -> str:
    return json.dumps(scene_to_dict(scene), indent=2) + "\n"


def scene_from_json(text: str) -> Scene:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"unparseable scene JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SceneError("scene JSON must be an object")
    return scene_from_dict(data)


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(scene_to_json(scene))


def load_scene(path: str | Path) -> Scene:
    p = Path(path)
    if not p.exists():
        raise SceneError(f"scene file not found: {p}")
    return scene_from_json(p.read_text())
