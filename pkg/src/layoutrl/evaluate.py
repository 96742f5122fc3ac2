"""Greedy-policy evaluation over randomized starts, plus the report table.

Every rollout draws its start placement and its policy randomness from
streams keyed by (master seed, scene seed, start index), never by list
position, so shuffling the scene list cannot change a single number.
Aggregation reduces rows in a canonical order for the same reason.

A uniform-random baseline is rolled out on the exact same starts and
reported alongside the policy columns.
"""

from dataclasses import dataclass

import numpy as np

from .agent import select_action
from .corridor import (  # noqa: F401  (re-exported oracle surface)
    CorridorMDP,
    greedy_policy,
    optimal_q,
    train_tabular,
    value_iteration,
)
from .env import (
    OBS_DIM,
    PLANE_ACTIONS,
    EnvParams,
    is_terminal,
    observe,
    reset,
    step,
    surface_iou,
)
from .geometry import Plane, box_iou3d
from .scene import Scene, randomize_start
from .seeding import substream, substream_seed

# success for reporting: near-perfect 3D overlap at episode end
SUCCESS_IOU_3D = 0.95


class GreedyPolicy:
    """Argmax over a Q-network's outputs; ties go to the lowest index."""

    def __init__(self, net):
        self.net = net
        self._mask = np.ones(net.n_actions, dtype=bool)

    def __call__(self, obs: np.ndarray, rng) -> int:
        return select_action(self.net.forward(obs), self._mask, 0.0)


class RandomPolicy:
    """Uniform over all actions of the plane; the baseline policy."""

    def __init__(self, n_actions: int):
        self.n_actions = int(n_actions)

    def __call__(self, obs: np.ndarray, rng) -> int:
        return int(rng.integers(self.n_actions))


class OraclePolicy:
    """Shortest-path reference: close the per-axis gap, then hold.

    Works off the observation alone.  Once centered it pushes into a
    flush wall when one exists (the stop rule turns that into a hold);
    otherwise it dithers one cell, which costs at most one extra
    iteration before both planes line up.

    Exact final IoU 1.0 is guaranteed only when the item is one-cell
    sharp on every axis: (size - delta) / (size + delta) below the
    success threshold.  A bulkier item can cross the threshold while
    still a cell away, ending the episode early at a near-perfect IoU.
    """

    def __init__(self, plane: Plane, divisions: int = 64):
        self.plane = plane
        self.tol = 0.5 / divisions
        self.flush = 0.25 / divisions

    def __call__(self, obs: np.ndarray, rng) -> int:
        du = obs[2] - obs[0]
        dv = obs[3] - obs[1]
        if self.plane is Plane.XY:
            if abs(du) > self.tol:
                return 0 if du > 0 else 1          # Right / Left
            if abs(dv) > self.tol:
                return 3 if dv > 0 else 2          # Up / Below
            for gap, action in ((obs[8], 1), (obs[9], 0), (obs[10], 2), (obs[11], 3)):
                if gap < self.flush:
                    return action                  # push into the flush wall
            return 1
        if abs(dv) > self.tol:
            return 0 if dv > 0 else 1              # Up / Down
        if obs[10] < self.flush:
            return 1                               # hold against the floor
        if obs[11] < self.flush:
            return 0                               # hold against the ceiling
        return 1


@dataclass(frozen=True)
class RolloutResult:
    scene_seed: int
    start_index: int
    room_type: str
    iou_xy: float
    iou_yz: float
    iou_3d: float
    success: bool
    iterations: int


@dataclass(frozen=True)
class TypeReport:
    """Aggregates for one room type; baseline columns mirror the policy's."""

    room_type: str
    count: int
    mean_xy: float
    std_xy: float
    mean_yz: float
    std_yz: float
    mean_3d: float
    std_3d: float
    success_rate: float
    base_mean_xy: float
    base_std_xy: float
    base_mean_yz: float
    base_std_yz: float
    base_mean_3d: float
    base_std_3d: float
    base_success_rate: float


@dataclass(frozen=True)
class EvalReport:
    types: tuple[TypeReport, ...]
    n_starts: int
    seed: int


def rollout(scene: Scene, policy_xy, policy_yz, params: EnvParams,
            rng=None) -> tuple[float, float, float, int]:
    """One test-mode episode; returns (iou_xy, iou_yz, iou_3d, iterations)."""
    state = reset(scene, "test", params)
    iterations = 0
    while True:
        iterations += 1
        a = policy_xy(observe(state, Plane.XY), rng)
        state = step(state, Plane.XY, PLANE_ACTIONS[Plane.XY][a], params).state
        a = policy_yz(observe(state, Plane.YZ), rng)
        state = step(state, Plane.YZ, PLANE_ACTIONS[Plane.YZ][a], params).state
        if is_terminal(state, params):
            break
    return (surface_iou(state, Plane.XY), surface_iou(state, Plane.YZ),
            box_iou3d(state.current, scene.goal), iterations)


def _population_std(values: np.ndarray) -> float:
    return float(np.std(values, ddof=0))


def evaluate(policy_xy, policy_yz, scenes: list[Scene], n_starts: int = 40,
             seed: int = 0, params: EnvParams = EnvParams(),
             baseline: bool = True) -> EvalReport:
    """Roll out the policy pair over every scene and aggregate per type.

    Each scene contributes n_starts randomized starts.  The uniform-random
    baseline runs on the same starts from its own rng streams; pass
    baseline=False to skip it (its columns then read 0).
    """
    if not scenes:
        raise ValueError("scene list is empty")
    if n_starts <= 0:
        raise ValueError("n_starts must be positive")
    random_xy = RandomPolicy(len(PLANE_ACTIONS[Plane.XY]))
    random_yz = RandomPolicy(len(PLANE_ACTIONS[Plane.YZ]))
    rows: list[RolloutResult] = []
    base_rows: list[RolloutResult] = []
    for scene in scenes:
        for k in range(n_starts):
            start = randomize_start(
                scene, substream_seed(seed, "eval", scene.seed, k),
                params.divisions)
            rng = substream(seed, "eval", scene.seed, k, 0)
            xy, yz, d3, iters = rollout(start, policy_xy, policy_yz, params, rng)
            rows.append(RolloutResult(scene.seed, k, scene.room_type,
                                      xy, yz, d3, d3 >= SUCCESS_IOU_3D, iters))
            if baseline:
                rng = substream(seed, "eval", scene.seed, k, 1)
                xy, yz, d3, iters = rollout(start, random_xy, random_yz,
                                            params, rng)
                base_rows.append(RolloutResult(scene.seed, k, scene.room_type,
                                               xy, yz, d3,
                                               d3 >= SUCCESS_IOU_3D, iters))
    return _aggregate(rows, base_rows, n_starts, seed)


def _aggregate(rows, base_rows, n_starts, seed) -> EvalReport:
    # canonical reduction order: scene order must not leak into the sums
    rows = sorted(rows, key=lambda r: (r.room_type, r.scene_seed, r.start_index))
    base = {(r.room_type, r.scene_seed, r.start_index): r for r in base_rows}
    reports = []
    for room_type in sorted({r.room_type for r in rows}):
        mine = [r for r in rows if r.room_type == room_type]
        theirs = [base.get((r.room_type, r.scene_seed, r.start_index))
                  for r in mine]
        theirs = [r for r in theirs if r is not None]
        xy = np.array([r.iou_xy for r in mine])
        yz = np.array([r.iou_yz for r in mine])
        d3 = np.array([r.iou_3d for r in mine])
        if theirs:
            bxy = np.array([r.iou_xy for r in theirs])
            byz = np.array([r.iou_yz for r in theirs])
            bd3 = np.array([r.iou_3d for r in theirs])
            bsr = float(np.mean([r.success for r in theirs]))
        else:
            bxy = byz = bd3 = np.zeros(1)
            bsr = 0.0
        reports.append(TypeReport(
            room_type=room_type,
            count=len(mine),
            mean_xy=float(xy.mean()), std_xy=_population_std(xy),
            mean_yz=float(yz.mean()), std_yz=_population_std(yz),
            mean_3d=float(d3.mean()), std_3d=_population_std(d3),
            success_rate=float(np.mean([r.success for r in mine])),
            base_mean_xy=float(bxy.mean()), base_std_xy=_population_std(bxy),
            base_mean_yz=float(byz.mean()), base_std_yz=_population_std(byz),
            base_mean_3d=float(bd3.mean()), base_std_3d=_population_std(bd3),
            base_success_rate=bsr,
        ))
    return EvalReport(tuple(reports), n_starts, seed)


def _cell(mean: float, std: float) -> str:
    return f"{mean:.3f}±{std:.3f}"


def report_table(report: EvalReport) -> str:
    """Aligned text table, one row per room type, mean±std to 3 decimals."""
    headers = ("room type", "rollouts", "xy", "yz", "3d", "success",
               "random xy", "random yz", "random 3d")
    body = []
    for t in report.types:
        body.append((
            t.room_type, str(t.count),
            _cell(t.mean_xy, t.std_xy),
            _cell(t.mean_yz, t.std_yz),
            _cell(t.mean_3d, t.std_3d),
            f"{t.success_rate:.3f}",
            _cell(t.base_mean_xy, t.base_std_xy),
            _cell(t.base_mean_yz, t.base_std_yz),
            _cell(t.base_mean_3d, t.base_std_3d),
        ))
    widths = [max(len(h), *(len(row[i]) for row in body))
              for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def report_to_dict(report: EvalReport) -> dict:
    """Machine-readable form; field names match TypeReport."""
    return {
        "n_starts": report.n_starts,
        "seed": report.seed,
        "types": [
            {f: getattr(t, f) for f in t.__dataclass_fields__}
            for t in report.types
        ],
    }
