"""Command-line interface: gen | train | eval | render.

Every command prints its full effective configuration (defaults
included) and writes it to run_config.json in the output directory, so
any run can be replayed from its log alone.  Values are resolved as
flags over config-file entries over built-in defaults.

Exit codes: 0 success, 1 usage error (bad flags or parameter values),
2 data error (missing or malformed files), 3 numerical failure.
"""

import argparse
import json
import sys
from pathlib import Path

from .agent import CheckpointError, TrainingError
from .env import PLANE_ACTIONS, EnvParams
from .evaluate import (
    GreedyPolicy,
    OraclePolicy,
    RandomPolicy,
    evaluate,
    report_table,
    report_to_dict,
)
from .figures import report_bars, training_curves
from .geometry import Plane
from .render import save_svg
from .scene import (
    ROOM_TYPES,
    Scene,
    SceneError,
    default_config,
    generate_scene,
    load_scene,
    randomize_start,
    save_scene,
)
from .seeding import substream_seed
from .training import (
    CoopConfig,
    config_from_dict,
    config_to_dict,
    env_params,
    load_checkpoint,
    restore_training,
    run_episode,
    train,
)

MANIFEST_SCHEMA = 1


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

def _echo_config(command: str, config: dict, out_dir: Path | None) -> None:
    """Log the effective configuration and persist it beside the outputs."""
    payload = {"command": command, **config}
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(f"effective config:\n{text}")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "run_config.json").write_text(text + "\n")


def _read_json(path: Path) -> dict:
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SceneError(f"{path}: expected a JSON object")
    return data


def _build_coop_config(args) -> CoopConfig:
    """Defaults, then the config file, then explicit flags."""
    values = config_to_dict(CoopConfig())
    if args.config is not None:
        file_values = _read_json(Path(args.config))
        unknown = set(file_values) - set(values)
        if unknown:
            raise SceneError(
                f"{args.config}: unknown config fields {sorted(unknown)}")
        values.update(file_values)
    for field in ("episodes", "max_env_steps", "seed", "threads",
                  "shaped_reward"):
        flag = getattr(args, field)
        if flag is not None:
            values[field] = flag
    return config_from_dict(values)


def _load_scenes(root: Path) -> list[Scene]:
    """Every scene file under root, in sorted-path order."""
    if root.is_file():
        return [load_scene(root)]
    if not root.is_dir():
        raise FileNotFoundError(f"no such scene path: {root}")
    skip = {"manifest.json", "run_config.json"}
    paths = sorted(p for p in root.rglob("*.json") if p.name not in skip)
    if not paths:
        raise SceneError(f"no scene files under {root}")
    return [load_scene(p) for p in paths]


def _note_threads(threads: int) -> None:
    if threads > 1:
        print(f"note: --threads {threads} requested; execution is "
              f"single-threaded in this build")


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def _gen_one_type(room_type: str, count: int, seed: int, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    type_index = ROOM_TYPES.index(room_type)
    cfg = default_config(room_type)
    entries = []
    for i in range(count):
        scene_seed = substream_seed(seed, "gen", type_index, i)
        scene = generate_scene(cfg, scene_seed)
        name = f"scene_{i:04d}.json"
        save_scene(scene, out / name)
        entries.append({"file": name, "seed": scene_seed})
    manifest = {
        "schema_version": MANIFEST_SCHEMA,
        "room_type": room_type,
        "count": count,
        "master_seed": seed,
        "scenes": entries,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def cmd_gen(args) -> int:
    out = Path(args.out)
    _echo_config("gen", {"type": args.type, "count": args.count,
                         "seed": args.seed, "out": str(out)}, out)
    if args.count < 0:
        raise ValueError("--count must be non-negative")
    types = ROOM_TYPES if args.type == "all" else (args.type,)
    for room_type in types:
        target = out / room_type if args.type == "all" else out
        manifest = _gen_one_type(room_type, args.count, args.seed, target)
        print(f"wrote {manifest['count']} {room_type} scene(s) to {target}")
    if args.type == "all":
        top = {
            "schema_version": MANIFEST_SCHEMA,
            "count": args.count,
            "master_seed": args.seed,
            "types": {t: f"{t}/manifest.json" for t in ROOM_TYPES},
        }
        (out / "manifest.json").write_text(
            json.dumps(top, indent=2, sort_keys=True) + "\n")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _build_coop_config(args)
    out = Path(args.out)
    _echo_config("train", {**config_to_dict(cfg), "scenes": str(args.scenes),
                           "out": str(out), "resume": bool(args.resume)}, out)
    _note_threads(cfg.threads)
    scenes = _load_scenes(Path(args.scenes))
    result = train(cfg, scenes, out, resume=bool(args.resume))
    training_curves(result.metrics_path, out / "training_curves.png")
    print(f"trained {result.episodes} episode(s), {result.env_steps} env "
          f"step(s); checkpoint at {result.checkpoint_path}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _report_csv(report) -> str:
    fields = ("room_type", "count", "mean_xy", "std_xy", "mean_yz", "std_yz",
              "mean_3d", "std_3d", "success_rate", "base_mean_xy",
              "base_std_xy", "base_mean_yz", "base_std_yz", "base_mean_3d",
              "base_std_3d", "base_success_rate")
    lines = [",".join(fields)]
    for t in report.types:
        row = []
        for f in fields:
            v = getattr(t, f)
            row.append(str(v) if isinstance(v, (str, int)) else f"{v:.6f}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    out = Path(args.out)
    if args.policy == "greedy" and args.checkpoint is None:
        raise ValueError("--policy greedy requires --checkpoint")
    _echo_config("eval", {"checkpoint": args.checkpoint,
                          "scenes": str(args.scenes), "out": str(out),
                          "policy": args.policy, "n_starts": args.n_starts,
                          "seed": args.seed, "threads": args.threads}, out)
    _note_threads(args.threads)
    scenes = _load_scenes(Path(args.scenes))

    params = EnvParams()
    metrics_path = None
    if args.checkpoint is not None:
        checkpoint_path = Path(args.checkpoint)
        meta, arrays = load_checkpoint(checkpoint_path)
        cfg, agent_xy, agent_yz, _, _, _ = restore_training(meta, arrays)
        params = env_params(cfg)
        sibling = checkpoint_path.parent / "metrics.csv"
        metrics_path = sibling if sibling.exists() else None
    if args.policy == "greedy":
        policy_xy = GreedyPolicy(agent_xy.net)
        policy_yz = GreedyPolicy(agent_yz.net)
    elif args.policy == "oracle":
        policy_xy = OraclePolicy(Plane.XY, params.divisions)
        policy_yz = OraclePolicy(Plane.YZ, params.divisions)
    else:
        policy_xy = RandomPolicy(len(PLANE_ACTIONS[Plane.XY]))
        policy_yz = RandomPolicy(len(PLANE_ACTIONS[Plane.YZ]))

    report = evaluate(policy_xy, policy_yz, scenes, n_starts=args.n_starts,
                      seed=args.seed, params=params)
    table = report_table(report)
    print(table, end="")
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(table)
    (out / "report.csv").write_text(_report_csv(report))
    (out / "report.json").write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")
    report_bars(report, out / "report_bars.png")
    if metrics_path is not None:
        training_curves(metrics_path, out / "training_curves.png")
    print(f"report written to {out}")
    return 0


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------

def cmd_render(args) -> int:
    out = Path(args.out)
    _echo_config("render", {"scenes": str(args.scenes),
                            "checkpoint": args.checkpoint, "out": str(out),
                            "seed": args.seed}, out)
    scenes = _load_scenes(Path(args.scenes))
    policies = None
    cfg = CoopConfig()
    if args.checkpoint is not None:
        meta, arrays = load_checkpoint(Path(args.checkpoint))
        cfg, agent_xy, agent_yz, _, _, _ = restore_training(meta, arrays)
        policies = (GreedyPolicy(agent_xy.net), GreedyPolicy(agent_yz.net))
    out.mkdir(parents=True, exist_ok=True)
    params = env_params(cfg)
    for index, scene in enumerate(scenes):
        name = f"{scene.room_type}_{scene.seed}_{index:04d}.svg"
        if policies is None:
            save_svg(out / name, scene)
        else:
            start = randomize_start(
                scene, substream_seed(args.seed, "eval", scene.seed, index),
                params.divisions)
            trace = run_episode(
                start,
                lambda obs, mask: policies[0](obs, None),
                lambda obs, mask: policies[1](obs, None),
                cfg, "test", params)
            save_svg(out / name, start, trace=trace)
    print(f"rendered {len(scenes)} scene(s) to {out}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing and entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layoutrl",
        description="Cooperative furniture-placement learning toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic scenes")
    p.add_argument("--type", choices=ROOM_TYPES + ("all",), default="bedroom")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the two agents")
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file with training config fields")
    p.add_argument("--episodes", type=int)
    p.add_argument("--max-env-steps", type=int, dest="max_env_steps")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--shaped-reward", action="store_const", const=True,
                   dest="shaped_reward",
                   help="train on per-step IoU change instead of absolute IoU")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a policy over random starts")
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--policy", choices=("greedy", "oracle", "random"),
                   default="greedy")
    p.add_argument("--n-starts", type=int, default=40, dest="n_starts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="render scenes to SVG")
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint",
                   help="draw the greedy rollout trace from this checkpoint")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_render)
    return parser


def entry(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, SceneError,
            CheckpointError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except TrainingError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(entry())


if __name__ == "__main__":
    main()
