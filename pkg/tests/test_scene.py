"""Scene generator, validation, start randomization, and serialization."""

import math
from pathlib import Path

import numpy as np
import pytest

from layoutrl.geometry import Box3, Vec3, box_inside
from layoutrl.scene import (
    ROOM_TYPES,
    FurnitureItem,
    Scene,
    SceneError,
    default_config,
    generate_scene,
    load_scene,
    randomize_start,
    save_scene,
    scene_from_json,
    scene_to_json,
    validate_scene,
)

DATA = Path(__file__).parent / "data"


def simple_scene(goal_center=(-1.5, 0.5, 0.5), size=(1.0, 1.0, 1.0)) -> Scene:
    room = Box3(Vec3(0.0, 0.0, 1.5), Vec3(4.0, 4.0, 3.0))
    goal = Box3(Vec3(*goal_center), Vec3(*size))
    item = FurnitureItem("movable", goal, True)
    return Scene("bedroom", room, (), (item,), goal, 0)


# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------

def test_generator_is_deterministic():
    cfg = default_config("bedroom")
    assert generate_scene(cfg, 7) == generate_scene(cfg, 7)
    assert scene_to_json(generate_scene(cfg, 7)) == scene_to_json(generate_scene(cfg, 7))


def test_generator_golden_file():
    golden = (DATA / "golden_scene_bedroom_seed0.json").read_text()
    assert scene_to_json(generate_scene(default_config("bedroom"), 0)) == golden


def test_different_seeds_differ():
    cfg = default_config("bedroom")
    assert generate_scene(cfg, 0) != generate_scene(cfg, 1)


@pytest.mark.parametrize("room_type", ROOM_TYPES)
def test_generated_scenes_validate(room_type):
    cfg = default_config(room_type)
    for seed in range(500):
        assert validate_scene(generate_scene(cfg, seed)) == []


def test_generated_scenes_validate_wide_seed_sweep():
    # cheap full-range sweep on one type; per-type sweeps above cover the rest
    cfg = default_config("bedroom")
    for seed in range(0, 10_000, 7):
        assert validate_scene(generate_scene(cfg, seed)) == []


def test_tatami_is_square():
    cfg = default_config("tatami")
    for seed in range(50):
        s = generate_scene(cfg, seed)
        assert s.room.size.x == s.room.size.y


def test_movable_starts_at_goal():
    s = generate_scene(default_config("kitchen"), 3)
    assert s.movable.box == s.goal


def test_wall_rule_puts_goal_flush_on_some_wall():
    cfg = default_config("bedroom")
    for seed in range(100):
        s = generate_scene(cfg, seed)
        lo, hi = s.room.min_corner, s.room.max_corner
        glo, ghi = s.goal.min_corner, s.goal.max_corner
        gaps = [glo.x - lo.x, hi.x - ghi.x, glo.y - lo.y, hi.y - ghi.y]
        assert min(abs(g) for g in gaps) < 1e-9


def test_goal_sits_on_movement_lattice():
    # goal center must be whole cells away from the wall-flush center
    cfg = default_config("bedroom")
    for seed in range(100):
        s = generate_scene(cfg, seed)
        lo = s.room.min_corner.as_tuple()
        ext = s.room.size.as_tuple()
        goal = s.goal.center.as_tuple()
        size = s.goal.size.as_tuple()
        for axis in range(3):
            delta = ext[axis] / cfg.divisions
            k = (goal[axis] - (lo[axis] + size[axis] / 2.0)) / delta
            assert abs(k - round(k)) < 1e-6


def test_invalid_config_rejected():
    with pytest.raises(SceneError):
        default_config("garage")
    with pytest.raises(SceneError):
        generate_scene(default_config("bedroom", room_size_x=(5.0, 3.0)), 0)
    with pytest.raises(SceneError):
        # item cannot fit the smallest room
        generate_scene(default_config("bedroom", item_size=(3.5, 4.0)), 0)
    with pytest.raises(SceneError):
        generate_scene(default_config("bedroom"), -1)


# ---------------------------------------------------------------------------
# randomize_start
# ---------------------------------------------------------------------------

def test_randomize_start_deterministic_and_inside():
    scene = generate_scene(default_config("bedroom"), 5)
    a = randomize_start(scene, 11)
    b = randomize_start(scene, 11)
    assert a == b
    for seed in range(200):
        s = randomize_start(scene, seed)
        assert box_inside(s.movable.box, s.room, tol=1e-9)
        assert validate_scene(s) == []


def test_randomize_start_changes_start():
    scene = simple_scene()
    differing = sum(
        randomize_start(scene, seed).movable.box.center != scene.goal.center
        for seed in range(100)
    )
    # the lattice has 49*49*43 centers; a collision with the goal is possible
    # in principle but does not occur for these seeds
    assert differing == 100


def test_randomize_start_uniform_mean():
    # 4 m room, 1 m item: 49 feasible lattice centers per horizontal axis,
    # symmetric about the room center; the empirical mean of 1000 draws must
    # land within 3 sigma of the room center
    scene = simple_scene()
    centers = np.array([
        randomize_start(scene, seed).movable.box.center.as_tuple()
        for seed in range(1000)
    ])
    delta = 4.0 / 64
    sigma = delta * math.sqrt(48 * 50 / 12)  # discrete uniform on 0..48
    lim = 3 * sigma / math.sqrt(1000)
    assert abs(centers[:, 0].mean() - 0.0) < lim
    assert abs(centers[:, 1].mean() - 0.0) < lim


def test_randomize_start_keeps_goal_on_lattice():
    scene = simple_scene()
    delta = 4.0 / 64
    for seed in range(100):
        c = randomize_start(scene, seed).movable.box.center
        for got, goal in ((c.x, -1.5), (c.y, 0.5)):
            k = (got - goal) / delta
            assert abs(k - round(k)) < 1e-9


def test_randomize_start_full_size_axis_pins_center():
    scene = simple_scene(goal_center=(0.0, 0.5, 0.5), size=(4.0, 1.0, 1.0))
    for seed in range(20):
        s = randomize_start(scene, seed)
        assert s.movable.box.center.x == 0.0


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def test_validation_catches_protruding_movable():
    s = simple_scene(goal_center=(0.0, 0.0, 0.5)).with_movable_center(Vec3(1.8, 0.0, 0.5))
    problems = validate_scene(s)
    assert any("inside the room" in p for p in problems)


def test_validation_catches_goal_size_mismatch():
    room = Box3(Vec3(0, 0, 1.5), Vec3(4, 4, 3))
    item = FurnitureItem("movable", Box3(Vec3(0, 0, 0.5), Vec3(1, 1, 1)), True)
    goal = Box3(Vec3(0, 0, 0.5), Vec3(1, 1, 1.2))
    s = Scene("bedroom", room, (), (item,), goal, 0)
    assert any("goal size" in p for p in validate_scene(s))


def test_validation_requires_exactly_one_movable():
    room = Box3(Vec3(0, 0, 1.5), Vec3(4, 4, 3))
    box = Box3(Vec3(0, 0, 0.5), Vec3(1, 1, 1))
    both = (FurnitureItem("a", box, True), FurnitureItem("b", box, True))
    s = Scene("bedroom", room, (), both, box, 0)
    assert any("exactly one movable" in p for p in validate_scene(s))
    s = Scene("bedroom", room, (), (FurnitureItem("a", box, False),), box, 0)
    assert any("exactly one movable" in p for p in validate_scene(s))


def test_validation_accepts_flush_placement():
    # flush against the west wall is legal (closed containment)
    s = simple_scene(goal_center=(-1.5, 0.0, 0.5))
    assert validate_scene(s) == []


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def test_roundtrip_is_field_identical():
    for room_type in ROOM_TYPES:
        cfg = default_config(room_type)
        for seed in range(250):
            scene = generate_scene(cfg, seed)
            again = scene_from_json(scene_to_json(scene))
            assert again == scene
            assert scene_to_json(again) == scene_to_json(scene)


def test_save_load_roundtrip(tmp_path):
    scene = generate_scene(default_config("balcony"), 9)
    path = tmp_path / "scene.json"
    save_scene(scene, path)
    assert load_scene(path) == scene


def test_load_missing_file():
    with pytest.raises(SceneError, match="not found"):
        load_scene("/nonexistent/scene.json")


def test_load_reports_missing_field():
    scene = generate_scene(default_config("bedroom"), 1)
    import json

    data = json.loads(scene_to_json(scene))
    del data["goal"]
    with pytest.raises(SceneError, match="goal"):
        scene_from_json(json.dumps(data))


def test_load_rejects_wrong_schema_version():
    scene = generate_scene(default_config("bedroom"), 1)
    import json

    data = json.loads(scene_to_json(scene))
    data["schema_version"] = 99
    with pytest.raises(SceneError, match="schema_version"):
        scene_from_json(json.dumps(data))


def test_load_rejects_garbage():
    with pytest.raises(SceneError, match="unparseable"):
        scene_from_json("{not json")
