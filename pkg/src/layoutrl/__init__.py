"""Cooperative two-surface DQN simulator for furniture placement in 3D rooms.

Two goal-conditioned agents move one furniture item on the floor plan
(x-y) and the elevation (y-z) of a room; rewards are goal-overlap IoU
per plane, and the elevation agent trains on a blend of both planes'
rewards.  The package bundles the geometry kernel, the scene generator,
the lattice simulator, the from-scratch DQN, the cooperative training
loop, evaluation and rendering, and a CLI tying them together.
"""

from .agent import (
    Adam,
    CheckpointError,
    DQNAgent,
    ExplorationSchedule,
    QNetwork,
    ReplayBuffer,
    TabularQ,
    TrainingError,
    Transition,
    select_action,
    sync_target,
    td_target,
    update_step,
)
from .corridor import CorridorMDP, greedy_policy, train_tabular, value_iteration
from .env import (
    OBS_DIM,
    Action,
    EnvParams,
    EnvState,
    StepOutcome,
    is_terminal,
    observe,
    reset,
    step,
    success,
    surface_iou,
    surface_reward,
    valid_action_mask,
    valid_actions,
)
from .evaluate import (
    EvalReport,
    GreedyPolicy,
    OraclePolicy,
    RandomPolicy,
    evaluate,
    report_table,
    report_to_dict,
)
from .figures import report_bars, training_curves
from .geometry import (
    Box3,
    Plane,
    Rect2,
    Vec3,
    box_inside,
    box_iou3d,
    boxes_overlap,
    project,
    project_xy,
    project_yz,
    rect_inside,
    rect_iou,
)
from .render import render_svg, save_svg
from .scene import (
    ROOM_TYPES,
    FurnitureItem,
    GeneratorConfig,
    Opening,
    Scene,
    SceneError,
    default_config,
    generate_scene,
    load_scene,
    randomize_start,
    save_scene,
    validate_scene,
)
from .training import (
    CoopConfig,
    EpisodeTrace,
    StepRecord,
    TrainResult,
    coop_reward,
    run_coop_iteration,
    run_episode,
    train,
)

__version__ = "0.1.0"
