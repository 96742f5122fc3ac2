"""Command-line interface: file outputs, precedence, exit codes."""

import csv
import json
from pathlib import Path

import pytest

from layoutrl.cli import entry
from layoutrl.scene import ROOM_TYPES, load_scene


def _run(*argv) -> int:
    return entry(list(argv))


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("scenes")
    assert _run("gen", "--type", "bedroom", "--count", "2",
                "--seed", "11", "--out", str(out)) == 0
    return out


def _one_cell_sharp(scene, success_iou=0.95, divisions=64) -> bool:
    """Item small enough that a one-cell offset on any axis denies success.

    On such scenes an episode cannot terminate early at the success
    threshold, so the oracle policy always finishes at IoU exactly 1.0.
    """
    for axis in range(3):
        size = scene.movable.box.size.as_tuple()[axis]
        delta = scene.room.size.as_tuple()[axis] / divisions
        if (size - delta) / (size + delta) >= success_iou:
            return False
    return True


@pytest.fixture(scope="module")
def solvable_dir(tmp_path_factory) -> Path:
    """Generated scenes filtered down to the oracle-solvable ones."""
    raw = tmp_path_factory.mktemp("solvable_raw")
    assert _run("gen", "--type", "bedroom", "--count", "4",
                "--seed", "5", "--out", str(raw)) == 0
    out = tmp_path_factory.mktemp("solvable")
    kept = [p for p in sorted(raw.glob("scene_*.json"))
            if _one_cell_sharp(load_scene(p))]
    assert len(kept) >= 2
    for p in kept:
        (out / p.name).write_bytes(p.read_bytes())
    return out


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory, scene_dir) -> Path:
    out = tmp_path_factory.mktemp("trained")
    rc = _run("train", "--scenes", str(scene_dir), "--out", str(out),
              "--episodes", "2", "--max-env-steps", "400", "--seed", "3")
    assert rc == 0
    return out


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def test_gen_writes_scenes_manifest_and_config(tmp_path, capsys):
    out = tmp_path / "g"
    assert _run("gen", "--type", "kitchen", "--count", "3",
                "--seed", "5", "--out", str(out)) == 0
    assert "effective config:" in capsys.readouterr().out
    files = sorted(p.name for p in out.iterdir())
    assert files == ["manifest.json", "run_config.json", "scene_0000.json",
                     "scene_0001.json", "scene_0002.json"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["room_type"] == "kitchen"
    assert manifest["count"] == 3 and manifest["master_seed"] == 5
    assert [e["file"] for e in manifest["scenes"]] == [
        "scene_0000.json", "scene_0001.json", "scene_0002.json"]
    for e in manifest["scenes"]:
        scene = load_scene(out / e["file"])
        assert scene.room_type == "kitchen" and scene.seed == e["seed"]


def test_gen_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert _run("gen", "--type", "tatami", "--count", "2",
                    "--seed", "9", "--out", str(out)) == 0
    for name in ("scene_0000.json", "scene_0001.json", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_gen_count_zero_writes_empty_manifest(tmp_path):
    out = tmp_path / "empty"
    assert _run("gen", "--count", "0", "--out", str(out)) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["scenes"] == []
    assert not list(out.glob("scene_*.json"))


def test_gen_all_types_builds_one_directory_per_type(tmp_path):
    out = tmp_path / "all"
    assert _run("gen", "--type", "all", "--count", "1", "--out", str(out)) == 0
    top = json.loads((out / "manifest.json").read_text())
    assert sorted(top["types"]) == sorted(ROOM_TYPES)
    for t in ROOM_TYPES:
        sub = json.loads((out / t / "manifest.json").read_text())
        assert sub["room_type"] == t and sub["count"] == 1
        assert load_scene(out / t / "scene_0000.json").room_type == t


def test_gen_negative_count_is_a_usage_error(tmp_path, capsys):
    assert _run("gen", "--count", "-1", "--out", str(tmp_path / "x")) == 1
    assert "usage error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def test_train_writes_artifacts(trained_dir):
    for name in ("checkpoint.npz", "metrics.csv", "manifest.json",
                 "run_config.json", "training_curves.png"):
        assert (trained_dir / name).exists(), name
    with open(trained_dir / "metrics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2  # one row per episode
    echoed = json.loads((trained_dir / "run_config.json").read_text())
    assert echoed["command"] == "train"
    assert echoed["episodes"] == 2 and echoed["seed"] == 3


def test_train_flags_override_config_file(tmp_path, scene_dir):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"episodes": 7, "seed": 21,
                                    "max_env_steps": 400}))
    out = tmp_path / "t"
    assert _run("train", "--scenes", str(scene_dir), "--out", str(out),
                "--config", str(cfg_path), "--episodes", "1") == 0
    echoed = json.loads((out / "run_config.json").read_text())
    # flag beats file; file beats default
    assert echoed["episodes"] == 1
    assert echoed["seed"] == 21
    with open(out / "metrics.csv", newline="") as fh:
        assert len(list(csv.DictReader(fh))) == 1


def test_train_unknown_config_field_is_a_data_error(tmp_path, scene_dir, capsys):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({"learning_rate": 0.1}))
    rc = _run("train", "--scenes", str(scene_dir),
              "--out", str(tmp_path / "t"), "--config", str(cfg_path))
    assert rc == 2
    assert "data error" in capsys.readouterr().err


def test_train_missing_scenes_is_a_data_error(tmp_path):
    assert _run("train", "--scenes", str(tmp_path / "nowhere"),
                "--out", str(tmp_path / "t")) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_divergence_is_a_numerical_failure(tmp_path, scene_dir, capsys):
    cfg_path = tmp_path / "hot.json"
    cfg_path.write_text(json.dumps({"lr": 1e280, "episodes": 2,
                                    "max_env_steps": 400}))
    rc = _run("train", "--scenes", str(scene_dir),
              "--out", str(tmp_path / "t"), "--config", str(cfg_path))
    assert rc == 3
    assert "numerical failure" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def test_eval_oracle_is_perfect_and_rerun_identical(tmp_path, solvable_dir,
                                                    capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert _run("eval", "--policy", "oracle",
                    "--scenes", str(solvable_dir),
                    "--out", str(out), "--n-starts", "2", "--seed", "4") == 0
    stdout = capsys.readouterr().out
    assert "1.000±0.000" in stdout
    table = (a / "report.txt").read_text()
    assert "bedroom" in table and "1.000±0.000" in table
    with open(a / "report.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and float(rows[0]["mean_3d"]) == 1.0
    payload = json.loads((a / "report.json").read_text())
    assert payload["types"][0]["success_rate"] == 1.0
    assert (a / "report_bars.png").exists()
    for name in ("report.txt", "report.csv", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_eval_greedy_needs_a_checkpoint(tmp_path, scene_dir, capsys):
    rc = _run("eval", "--scenes", str(scene_dir), "--out", str(tmp_path / "e"))
    assert rc == 1
    assert "usage error" in capsys.readouterr().err


def test_eval_greedy_from_checkpoint(tmp_path, scene_dir, trained_dir):
    out = tmp_path / "e"
    rc = _run("eval", "--scenes", str(scene_dir), "--out", str(out),
              "--checkpoint", str(trained_dir / "checkpoint.npz"),
              "--n-starts", "1")
    assert rc == 0
    assert (out / "report.txt").exists()
    # sibling metrics.csv found next to the checkpoint
    assert (out / "training_curves.png").exists()


def test_eval_missing_checkpoint_is_a_data_error(tmp_path, scene_dir):
    rc = _run("eval", "--scenes", str(scene_dir), "--out", str(tmp_path / "e"),
              "--checkpoint", str(tmp_path / "gone.npz"))
    assert rc == 2


def test_eval_accepts_a_single_scene_file(tmp_path, scene_dir):
    rc = _run("eval", "--policy", "random",
              "--scenes", str(scene_dir / "scene_0000.json"),
              "--out", str(tmp_path / "e"), "--n-starts", "1")
    assert rc == 0


def test_eval_threads_note(tmp_path, scene_dir, capsys):
    rc = _run("eval", "--policy", "random", "--scenes", str(scene_dir),
              "--out", str(tmp_path / "e"), "--n-starts", "1",
              "--threads", "4")
    assert rc == 0
    assert "single-threaded" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------

def test_render_writes_one_svg_per_scene(tmp_path, scene_dir):
    out = tmp_path / "r"
    assert _run("render", "--scenes", str(scene_dir), "--out", str(out)) == 0
    svgs = sorted(p.name for p in out.glob("*.svg"))
    assert len(svgs) == 2
    for name in svgs:
        assert name.startswith("bedroom_")
        text = (out / name).read_text()
        assert text.startswith('<?xml version="1.0"')
        assert "<polyline" not in text


def test_render_with_checkpoint_draws_rollout_traces(tmp_path, scene_dir,
                                                     trained_dir):
    out = tmp_path / "r"
    rc = _run("render", "--scenes", str(scene_dir), "--out", str(out),
              "--checkpoint", str(trained_dir / "checkpoint.npz"))
    assert rc == 0
    for path in out.glob("*.svg"):
        assert "<polyline" in path.read_text()


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def test_help_exits_zero():
    assert _run("--help") == 0


def test_bad_invocations_exit_one():
    assert _run() == 1                       # no command
    assert _run("bogus") == 1                # unknown command
    assert _run("eval", "--scenes", "x") == 1  # missing required --out
    assert _run("gen", "--type", "mansion", "--out", "x") == 1
