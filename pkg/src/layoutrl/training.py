"""Cooperative two-surface training loop.

Each iteration runs the floor-plan agent first, then the elevation
agent on the intermediate state, so the elevation observation already
reflects the floor-plan move along the shared y axis.  The floor-plan
agent trains on its own reward; the elevation agent trains on the blend
theta2 * R1 + theta3 * R2.  Terminal is evaluated after both moves, and
every episode runs at least one full iteration, so a start placed on
the goal still produces a one-iteration trace.

An env step is one lockstep iteration of the surface pair: both agents
move once per step.  Episode caps (max_steps), the exploration decay
(eps_decay_steps) and the training budget (max_env_steps) all count
this same unit.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import (
    CheckpointError,
    DQNAgent,
    ExplorationSchedule,
    Transition,
    agent_arrays,
    agent_meta,
    restore_agent,
)
from .env import (
    PLANE_ACTIONS,
    EnvParams,
    EnvState,
    is_terminal,
    observe,
    reset,
    step,
    success,
    surface_iou,
    valid_action_mask,
)
from .geometry import Plane, box_iou3d
from .scene import Scene, randomize_start
from .seeding import substream, substream_seed

CHECKPOINT_SCHEMA = 1

METRICS_FIELDS = ("episode", "env_steps", "loss_xy", "loss_yz", "iou_xy",
                  "iou_yz", "iou_3d", "success", "epsilon_xy", "epsilon_yz")


@dataclass(frozen=True)
class CoopConfig:
    """Hyperparameters for a cooperative training run.

    max_env_steps, max_steps and eps_decay_steps all count lockstep
    iterations (one move by each agent).
    """

    theta1: float = 1.0
    theta2: float = 0.5
    theta3: float = 0.5
    gamma_xy: float = 0.95
    gamma_yz: float = 0.95
    episodes: int = 500
    max_env_steps: int = 50_000
    success_iou: float = 0.95
    max_steps: int = 200
    divisions: int = 64
    shaped_reward: bool = False
    hidden: tuple[int, ...] = (128, 128)
    lr: float = 1e-3
    buffer_capacity: int = 50_000
    batch_size: int = 64
    target_sync_every: int = 500
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 20_000
    checkpoint_every: int = 100
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if min(self.theta1, self.theta2, self.theta3) <= 0.0:
            raise ValueError("theta weights must be positive")
        for g in (self.gamma_xy, self.gamma_yz):
            if not 0.0 <= g < 1.0:
                raise ValueError("discounts must lie in [0, 1)")
        if self.episodes <= 0 or self.max_env_steps <= 0:
            raise ValueError("episode and step budgets must be positive")
        if not 0.0 < self.success_iou <= 1.0:
            raise ValueError("success_iou must lie in (0, 1]")
        if self.max_steps <= 0 or self.divisions < 2:
            raise ValueError("max_steps and divisions must be positive")
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch size cannot exceed buffer capacity")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


def env_params(cfg: CoopConfig) -> EnvParams:
    return EnvParams(theta1=cfg.theta1, success_iou=cfg.success_iou,
                     max_steps=cfg.max_steps, divisions=cfg.divisions,
                     shaped=cfg.shaped_reward)


def config_to_dict(cfg: CoopConfig) -> dict:
    d = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    d["hidden"] = list(cfg.hidden)
    return d


def config_from_dict(d: dict) -> CoopConfig:
    known = set(CoopConfig.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    if "hidden" in d:
        d = dict(d, hidden=tuple(d["hidden"]))
    return CoopConfig(**d)


def coop_reward(r1: float, r2: float, theta2: float, theta3: float) -> float:
    """Elevation agent's training reward: theta2 * r1 + theta3 * r2."""
    return theta2 * r1 + theta3 * r2


@dataclass(frozen=True, eq=False)
class StepRecord:
    """One agent's move within an iteration, with training bookkeeping."""

    surface: str             # "xy" or "yz"
    obs: np.ndarray
    action: int
    raw_reward: float        # the surface's own reward after the move
    reward_trained: float    # what enters the replay buffer
    r1: float                # the iteration's floor-plan reward
    accepted: bool
    placement: tuple[float, float, float]  # item center after the move
    obs_after: np.ndarray
    mask_after: np.ndarray
    terminal: bool           # episode terminal after the full iteration


@dataclass
class EpisodeTrace:
    records: list[StepRecord]
    final_iou_xy: float
    final_iou_yz: float
    final_iou_3d: float
    steps_xy: int
    steps_yz: int
    iterations: int
    success: bool
    loss_xy: float | None = None
    loss_yz: float | None = None


def run_coop_iteration(state: EnvState, act_xy, act_yz, params: EnvParams,
                       theta2: float, theta3: float):
    """One cooperative iteration; returns (next state, [xy, yz] records).

    `act_xy` and `act_yz` map (observation, valid mask) to an action
    index.  Train mode passes the in-room mask (the drop rule never
    fires); test mode passes an all-true mask and relies on the stop
    rule at the walls.
    """
    if state.steps_xy >= params.max_steps or state.steps_yz >= params.max_steps:
        raise ValueError("iteration requested after the step budget is spent")
    train = state.mode == "train"

    obs1 = observe(state, Plane.XY)
    mask1 = (valid_action_mask(state, Plane.XY, params) if train
             else np.ones(len(PLANE_ACTIONS[Plane.XY]), dtype=bool))
    a1 = int(act_xy(obs1, mask1))
    out1 = step(state, Plane.XY, PLANE_ACTIONS[Plane.XY][a1], params)
    if train and not out1.accepted:
        raise ValueError("train-mode action must come from the valid mask")
    mid = out1.state
    r1 = out1.reward

    obs2 = observe(mid, Plane.YZ)
    mask2 = (valid_action_mask(mid, Plane.YZ, params) if train
             else np.ones(len(PLANE_ACTIONS[Plane.YZ]), dtype=bool))
    a2 = int(act_yz(obs2, mask2))
    out2 = step(mid, Plane.YZ, PLANE_ACTIONS[Plane.YZ][a2], params)
    if train and not out2.accepted:
        raise ValueError("train-mode action must come from the valid mask")
    nxt = out2.state
    r2 = out2.reward

    terminal = is_terminal(nxt, params)
    mid_c = mid.current.center
    nxt_c = nxt.current.center
    rec1 = StepRecord("xy", obs1, a1, r1, r1, r1, out1.accepted,
                      (mid_c.x, mid_c.y, mid_c.z), observe(nxt, Plane.XY),
                      valid_action_mask(nxt, Plane.XY, params), terminal)
    rec2 = StepRecord("yz", obs2, a2, r2, coop_reward(r1, r2, theta2, theta3),
                      r1, out2.accepted, (nxt_c.x, nxt_c.y, nxt_c.z),
                      observe(nxt, Plane.YZ),
                      valid_action_mask(nxt, Plane.YZ, params), terminal)
    return nxt, [rec1, rec2]


def run_episode(scene: Scene, act_xy, act_yz, cfg: CoopConfig, mode: str,
                params: EnvParams | None = None,
                after_iteration=None) -> EpisodeTrace:
    """Reset and iterate until terminal; always runs one full iteration."""
    if params is None:
        params = env_params(cfg)
    state = reset(scene, mode=mode, params=params)
    records: list[StepRecord] = []
    losses_xy: list[float] = []
    losses_yz: list[float] = []
    iterations = 0
    while True:
        state, recs = run_coop_iteration(state, act_xy, act_yz, params,
                                         cfg.theta2, cfg.theta3)
        records.extend(recs)
        iterations += 1
        if after_iteration is not None:
            lx, lz = after_iteration(recs)
            if lx is not None:
                losses_xy.append(lx)
            if lz is not None:
                losses_yz.append(lz)
        if is_terminal(state, params):
            break
    return EpisodeTrace(
        records=records,
        final_iou_xy=surface_iou(state, Plane.XY),
        final_iou_yz=surface_iou(state, Plane.YZ),
        final_iou_3d=box_iou3d(state.current, scene.goal),
        steps_xy=state.steps_xy,
        steps_yz=state.steps_yz,
        iterations=iterations,
        success=success(state, params),
        loss_xy=float(np.mean(losses_xy)) if losses_xy else None,
        loss_yz=float(np.mean(losses_yz)) if losses_yz else None,
    )


def build_agents(cfg: CoopConfig) -> tuple[DQNAgent, DQNAgent]:
    """Fresh per-surface agents with seed-derived substreams."""
    schedule = ExplorationSchedule(cfg.eps_start, cfg.eps_end,
                                   cfg.eps_decay_steps)
    agents = []
    for idx, (n_actions, gamma) in enumerate(
            ((len(PLANE_ACTIONS[Plane.XY]), cfg.gamma_xy),
             (len(PLANE_ACTIONS[Plane.YZ]), cfg.gamma_yz))):
        agents.append(DQNAgent(
            n_actions=n_actions,
            hidden=cfg.hidden,
            lr=cfg.lr,
            gamma=gamma,
            buffer_capacity=cfg.buffer_capacity,
            batch_size=cfg.batch_size,
            target_sync_every=cfg.target_sync_every,
            schedule=schedule,
            init_rng=substream(cfg.seed, "init", idx),
            explore_rng=substream(cfg.seed, "explore", idx),
            sample_rng=substream(cfg.seed, "sample", idx),
        ))
    return agents[0], agents[1]


def store_and_update(agent_xy: DQNAgent, agent_yz: DQNAgent):
    """Iteration hook: push both transitions, run both update steps."""

    def hook(recs):
        losses = []
        for agent, rec in ((agent_xy, recs[0]), (agent_yz, recs[1])):
            agent.remember(Transition(rec.obs, rec.action, rec.reward_trained,
                                      rec.obs_after, rec.terminal,
                                      rec.mask_after))
            losses.append(agent.maybe_update())
        return losses[0], losses[1]

    return hook


# ---------------------------------------------------------------------------
# Checkpoint files
# ---------------------------------------------------------------------------

def save_checkpoint(path, cfg: CoopConfig, agent_xy: DQNAgent,
                    agent_yz: DQNAgent, order_rng: np.random.Generator,
                    episode: int, env_steps: int) -> None:
    meta = {
        "schema_version": CHECKPOINT_SCHEMA,
        "config": config_to_dict(cfg),
        "episode": episode,
        "env_steps": env_steps,
        "agent_xy": agent_meta(agent_xy),
        "agent_yz": agent_meta(agent_yz),
        "order_state": order_rng.bit_generator.state,
    }
    arrays = {**agent_arrays(agent_xy, "xy"), **agent_arrays(agent_yz, "yz")}
    blob = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), np.uint8)
    np.savez(path, __meta__=blob, **arrays)


def load_checkpoint(path):
    """Returns (meta dict, array mapping); raises CheckpointError."""
    try:
        data = np.load(path)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if "__meta__" not in data:
        raise CheckpointError(f"checkpoint {path} has no metadata record")
    try:
        meta = json.loads(bytes(data["__meta__"]).decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"checkpoint {path} metadata is corrupt") from exc
    if meta.get("schema_version") != CHECKPOINT_SCHEMA:
        raise CheckpointError(
            f"checkpoint schema {meta.get('schema_version')!r} not supported")
    return meta, data


def restore_training(meta, arrays):
    """Rebuild (cfg, agent_xy, agent_yz, order_rng, episode, env_steps)."""
    try:
        cfg = config_from_dict(meta["config"])
        agent_xy = restore_agent(meta["agent_xy"], arrays, "xy")
        agent_yz = restore_agent(meta["agent_yz"], arrays, "yz")
        order_rng = np.random.default_rng(0)
        order_rng.bit_generator.state = meta["order_state"]
        return cfg, agent_xy, agent_yz, order_rng, int(meta["episode"]), \
            int(meta["env_steps"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint metadata: {exc}") from exc


# ---------------------------------------------------------------------------
# Full training runs
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    episodes: int
    env_steps: int
    checkpoint_path: Path
    metrics_path: Path
    manifest_path: Path


def _metrics_row(episode, env_steps, trace, eps_xy, eps_yz) -> str:
    def fmt(x):
        return "nan" if x is None else f"{x:.6f}"

    return (f"{episode},{env_steps},{fmt(trace.loss_xy)},{fmt(trace.loss_yz)},"
            f"{trace.final_iou_xy:.6f},{trace.final_iou_yz:.6f},"
            f"{trace.final_iou_3d:.6f},{int(trace.success)},"
            f"{eps_xy:.6f},{eps_yz:.6f}\n")


def train(cfg: CoopConfig, scenes: list[Scene], out_dir,
          resume: bool = False) -> TrainResult:
    """Train both agents over the scene stream; fully seeded and resumable.

    Scenes are drawn iid from the list via the order stream; each episode
    randomizes the start placement with a seed keyed to the episode index,
    so a resumed run replays the exact schedule of a straight-through run.
    Stops at the episode budget or once another full episode could push
    past max_env_steps.  On a non-finite loss the last checkpoint on disk
    is left untouched and the error propagates.
    """
    if not scenes:
        raise ValueError("scene list is empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out / "checkpoint.npz"
    metrics_path = out / "metrics.csv"
    manifest_path = out / "manifest.json"
    params = env_params(cfg)

    if resume:
        meta, arrays = load_checkpoint(checkpoint_path)
        saved_cfg, agent_xy, agent_yz, order_rng, episode, env_steps = \
            restore_training(meta, arrays)
        # budgets may be extended on resume; everything else must match
        budget_fields = ("episodes", "max_env_steps", "checkpoint_every")
        saved_d, new_d = config_to_dict(saved_cfg), config_to_dict(cfg)
        for k in budget_fields:
            saved_d.pop(k), new_d.pop(k)
        if saved_d != new_d:
            raise CheckpointError("config does not match the checkpoint")
        if not metrics_path.exists():
            raise CheckpointError("metrics log missing for resume")
        # drop rows past the checkpoint so the log continues without gaps
        lines = metrics_path.read_text().splitlines(keepends=True)
        kept = lines[:1] + [ln for ln in lines[1:]
                            if int(ln.split(",", 1)[0]) <= episode]
        metrics_path.write_text("".join(kept))
    else:
        agent_xy, agent_yz = build_agents(cfg)
        order_rng = substream(cfg.seed, "order")
        episode = 0
        env_steps = 0
        metrics_path.write_text(",".join(METRICS_FIELDS) + "\n")

    hook = store_and_update(agent_xy, agent_yz)
    episode_cap = cfg.max_steps  # iterations one episode can spend

    with metrics_path.open("a") as metrics:
        while episode < cfg.episodes and env_steps + episode_cap <= cfg.max_env_steps:
            scene = scenes[int(order_rng.integers(len(scenes)))]
            start = randomize_start(scene, substream_seed(cfg.seed, "start", episode),
                                    cfg.divisions)
            trace = run_episode(start, agent_xy.act_train, agent_yz.act_train,
                                cfg, "train", params, hook)
            episode += 1
            # both agents move once per iteration, so either counter works
            env_steps = agent_xy.env_steps
            metrics.write(_metrics_row(episode, env_steps, trace,
                                       agent_xy.epsilon, agent_yz.epsilon))
            if episode % cfg.checkpoint_every == 0:
                save_checkpoint(checkpoint_path, cfg, agent_xy, agent_yz,
                                order_rng, episode, env_steps)

    save_checkpoint(checkpoint_path, cfg, agent_xy, agent_yz, order_rng,
                    episode, env_steps)
    manifest = {
        "schema_version": CHECKPOINT_SCHEMA,
        "checkpoint": checkpoint_path.name,
        "metrics": metrics_path.name,
        "episodes": episode,
        "env_steps": env_steps,
        "config": config_to_dict(cfg),
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return TrainResult(episode, env_steps, checkpoint_path, metrics_path,
                       manifest_path)
