"""Simulator for moving the furniture item on the two working planes.

Two agents share one underlying 3D placement.  The floor-plan agent moves
the item in x and y; the elevation agent moves it in z (its other axis, y,
is shared and only ever changed by the floor-plan agent).  Moves are one
lattice cell at a time: the step size on an axis is the room extent there
divided by ``EnvParams.divisions``.

Boundary handling depends on the mode carried by the state:

* ``train``: a move that would leave the room is rejected outright; the
  state, the step counters, and the reward are all untouched and the
  caller picks another action ("drop rule").
* ``test``: the same move is accepted with zero displacement; it costs a
  step and earns the usual reward ("stop rule").

Rewards are the goal/item IoU on the acting plane, scaled by ``theta1``.
An episode ends when both planes reach ``success_iou`` or either plane
exhausts its per-plane step budget.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .geometry import Box3, Plane, Vec3, boxes_overlap, project, rect_iou
from .scene import Scene, SceneError, validate_scene

# room extents are reported in observations relative to this span so the
# entry stays in [0, 1] for any realistic room
ROOM_SCALE = 10.0

MODES = ("train", "test")

# slack for the wall test only; accepted centers are clamped back onto the
# exact feasible interval so float drift never accumulates
_WALL_TOL = 1e-9

# centers this close to the goal-anchored lattice (in cells) are snapped onto
# it, so a long walk of +delta/-delta additions stays drift-free
_LATTICE_TOL = 1e-9


class Action(Enum):
    """Moves, named from the acting plane's point of view."""

    RIGHT = "right"
    LEFT = "left"
    BELOW = "below"
    UP = "up"
    DOWN = "down"


# per-plane action order fixes the Q-network output indexing
PLANE_ACTIONS: dict[Plane, tuple[Action, ...]] = {
    Plane.XY: (Action.RIGHT, Action.LEFT, Action.BELOW, Action.UP),
    Plane.YZ: (Action.UP, Action.DOWN),
}

# (axis, direction): axis 0=x, 1=y, 2=z
_DISPLACEMENT: dict[tuple[Plane, Action], tuple[int, float]] = {
    (Plane.XY, Action.RIGHT): (0, +1.0),
    (Plane.XY, Action.LEFT): (0, -1.0),
    (Plane.XY, Action.UP): (1, +1.0),
    (Plane.XY, Action.BELOW): (1, -1.0),
    (Plane.YZ, Action.UP): (2, +1.0),
    (Plane.YZ, Action.DOWN): (2, -1.0),
}

OBS_DIM = 12


@dataclass(frozen=True)
class EnvParams:
    """Simulator constants; the defaults are the reference setup."""

    theta1: float = 1.0
    success_iou: float = 0.95
    max_steps: int = 200            # accepted steps allowed per plane
    divisions: int = 64             # lattice cells per room axis
    deltas: tuple[float, float, float] | None = None  # explicit step sizes
    shaped: bool = False            # reward IoU deltas instead of IoU levels


@dataclass(frozen=True)
class EnvState:
    """Immutable snapshot of one episode."""

    scene: Scene
    current: Box3
    steps_xy: int
    steps_yz: int
    mode: str

    @property
    def step_count(self) -> int:
        return self.steps_xy + self.steps_yz


@dataclass(frozen=True)
class StepOutcome:
    """Result of one attempted move.

    ``reward`` is None exactly when the move was rejected (train-mode drop
    rule); a stopped test-mode move still earns its reward.
    """

    state: EnvState
    reward: float | None
    accepted: bool
    terminal: bool


def step_sizes(scene: Scene, params: EnvParams) -> tuple[float, float, float]:
    """Per-axis move distance: one lattice cell, unless overridden."""
    if params.deltas is not None:
        return params.deltas
    s = scene.room.size
    return (s.x / params.divisions, s.y / params.divisions, s.z / params.divisions)


def reset(scene: Scene, mode: str = "train", params: EnvParams = EnvParams()) -> EnvState:
    """Start an episode from the scene's recorded start placement."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    problems = validate_scene(scene)
    if problems:
        raise SceneError("invalid scene: " + "; ".join(problems))
    return EnvState(scene=scene, current=scene.movable.box,
                    steps_xy=0, steps_yz=0, mode=mode)


def surface_iou(state: EnvState, plane: Plane) -> float:
    """Goal/item IoU on one working plane."""
    return rect_iou(project(state.scene.goal, plane), project(state.current, plane))


def surface_reward(state: EnvState, plane: Plane, theta1: float = 1.0) -> float:
    """Per-step reward on one plane: theta1-scaled IoU of the current placement."""
    return theta1 * surface_iou(state, plane)


def success(state: EnvState, params: EnvParams = EnvParams()) -> bool:
    """Both planes at or above the success IoU."""
    return (surface_iou(state, Plane.XY) >= params.success_iou
            and surface_iou(state, Plane.YZ) >= params.success_iou)


def is_terminal(state: EnvState, params: EnvParams = EnvParams()) -> bool:
    return (success(state, params)
            or state.steps_xy >= params.max_steps
            or state.steps_yz >= params.max_steps)


def _axis_bounds(state: EnvState, axis: int) -> tuple[float, float]:
    """Feasible interval for the item center on one axis."""
    room_lo = state.scene.room.min_corner.as_tuple()[axis]
    room_hi = state.scene.room.max_corner.as_tuple()[axis]
    half = state.current.size.as_tuple()[axis] / 2.0
    return room_lo + half, room_hi - half


def _move_is_inside(state: EnvState, plane: Plane, action: Action,
                    params: EnvParams) -> tuple[bool, int, float]:
    if action not in PLANE_ACTIONS[plane]:
        raise ValueError(f"action {action.value!r} is not legal on plane {plane.value}")
    axis, direction = _DISPLACEMENT[(plane, action)]
    delta = step_sizes(state.scene, params)[axis]
    new_c = state.current.center.as_tuple()[axis] + direction * delta
    goal_c = state.scene.goal.center.as_tuple()[axis]
    cells = (new_c - goal_c) / delta
    if abs(cells - round(cells)) < _LATTICE_TOL:
        new_c = goal_c + round(cells) * delta
    lo, hi = _axis_bounds(state, axis)
    return (lo - _WALL_TOL <= new_c <= hi + _WALL_TOL), axis, new_c


def valid_actions(state: EnvState, plane: Plane,
                  params: EnvParams = EnvParams()) -> tuple[Action, ...]:
    """Actions whose full step keeps the item inside the room."""
    return tuple(a for a in PLANE_ACTIONS[plane]
                 if _move_is_inside(state, plane, a, params)[0])


def valid_action_mask(state: EnvState, plane: Plane,
                      params: EnvParams = EnvParams()) -> np.ndarray:
    """Boolean mask over the plane's action indices."""
    return np.array([_move_is_inside(state, plane, a, params)[0]
                     for a in PLANE_ACTIONS[plane]], dtype=bool)


def step(state: EnvState, plane: Plane, action: Action,
         params: EnvParams = EnvParams()) -> StepOutcome:
    """Attempt one move on one plane.

    Pure function of its arguments; the input state is never mutated.

    Args:
        state: Current episode state (carries the mode).
        plane: Acting plane.
        action: One of the plane's actions, see ``PLANE_ACTIONS``.
        params: Simulator constants.

    Returns:
        StepOutcome with the next state, the earned reward (None when the
        move was dropped), whether the move was accepted, and whether the
        resulting state is terminal.
    """
    inside, axis, new_c = _move_is_inside(state, plane, action, params)

    if not inside and state.mode == "train":
        # drop rule: nothing happens, not even a step count
        return StepOutcome(state, None, False, is_terminal(state, params))

    if inside:
        lo, hi = _axis_bounds(state, axis)
        coords = list(state.current.center.as_tuple())
        coords[axis] = min(max(new_c, lo), hi)
        current = Box3(Vec3(*coords), state.current.size)
    else:
        # stop rule: the move is consumed but the item does not leave the wall
        current = state.current

    next_state = replace(
        state,
        current=current,
        steps_xy=state.steps_xy + (1 if plane is Plane.XY else 0),
        steps_yz=state.steps_yz + (1 if plane is Plane.YZ else 0),
    )
    if params.shaped:
        reward = params.theta1 * (surface_iou(next_state, plane) - surface_iou(state, plane))
    else:
        reward = surface_reward(next_state, plane, params.theta1)
    return StepOutcome(next_state, reward, True, is_terminal(next_state, params))


def observe(state: EnvState, plane: Plane) -> np.ndarray:
    """12-entry observation for one plane, every entry in [-1, 1].

    Layout: current center (u, v), goal center (u, v), item half-size
    (u, v), room extent (u, v), then the signed face-to-wall gaps
    (negative-u, positive-u, negative-v, positive-v).  Centers are relative
    to the room center and, like half-sizes and gaps, divided by the room
    extent on that axis; room extents are divided by ``ROOM_SCALE``.
    """
    cur = project(state.current, plane)
    goal = project(state.scene.goal, plane)
    room = project(state.scene.room, plane)
    out = np.empty(OBS_DIM)
    out[0] = (cur.cu - room.cu) / room.su
    out[1] = (cur.cv - room.cv) / room.sv
    out[2] = (goal.cu - room.cu) / room.su
    out[3] = (goal.cv - room.cv) / room.sv
    out[4] = cur.su / 2.0 / room.su
    out[5] = cur.sv / 2.0 / room.sv
    out[6] = room.su / ROOM_SCALE
    out[7] = room.sv / ROOM_SCALE
    out[8] = (cur.min_u - room.min_u) / room.su
    out[9] = (room.max_u - cur.max_u) / room.su
    out[10] = (cur.min_v - room.min_v) / room.sv
    out[11] = (room.max_v - cur.max_v) / room.sv
    return out


def overlaps_fixed_items(state: EnvState) -> bool:
    """Does the item currently share volume with any fixed furniture?

    Such overlaps are legal (only the room boundary constrains movement);
    callers record them as episode statistics.
    """
    return any(boxes_overlap(state.current, item.box)
               for item in state.scene.fixed_items)
