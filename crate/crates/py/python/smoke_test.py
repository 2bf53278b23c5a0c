"""Smoke test for the grasplab extension. Run after `maturin develop` or `pip install`."""

import math
import tempfile
from pathlib import Path

import grasplab


def test_plan_z_branches():
    assert grasplab.plan_z(0.05, 0.10, 1.0, 0.95, 0.005) == 1.0 - 0.005
    assert grasplab.plan_z(0.25, 0.10, 1.0, 0.75, 0.005) == 0.75 + 0.10 - 0.005


def test_grippers():
    for gid, n in [("R3", 3), ("P3", 3), ("R4", 4), ("P4", 4)]:
        g = grasplab.Gripper(gid)
        assert g.id == gid
        assert g.finger_count == n == g.actuator_count
        assert len(g.layout(0.0, 0.0, 0.0)) == n
    assert not grasplab.Gripper("R3").with_skin(False).skinned


def test_force_closure_routes_agree():
    three = [(math.cos(a) * 0.03, math.sin(a) * 0.03, math.cos(a), math.sin(a), 0.5)
             for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)]
    assert grasplab.force_closure(three) and grasplab.force_closure_lp(three)
    two = three[:2]
    assert grasplab.force_closure(two) == grasplab.force_closure_lp(two)


def test_scene_and_grasp():
    scene = grasplab.Scene(1, seed=0, objects=["pringles"])
    w, h = scene.image_size
    assert len(scene.render()) == w * h * 3
    assert len(scene.depth()) == w * h
    u, v = scene.object_pixels()[0]
    out = scene.execute(grasplab.Gripper("R3"), u, v, 0.0)
    assert out.success and out.failure_reason is None


def test_planner_round_trip():
    planner = grasplab.Planner(9, seed=1, tiny=True)
    scene = grasplab.Scene(2, seed=3)
    rows, cols, bins, probs = planner.probability_map(scene)
    assert bins == 9 and len(probs) == rows * cols * bins
    assert all(0.0 < p < 1.0 for p in probs)
    u, v, theta, z, p = planner.plan(scene, grasplab.Gripper("R3"))
    assert -math.pi / 2 <= theta < math.pi / 2 and 0.0 < p < 1.0
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "tiny.grsp"
        planner.save(str(path))
        again = grasplab.Planner.load(str(path))
        assert again.probability_map(scene)[3] == probs
    assert grasplab.Planner(1, seed=1).parameter_count == 1366377 - 8 * 1025


def test_collect_and_wilson():
    frac, text = grasplab.collect(grasplab.Gripper("R3"), 50, seed=7)
    assert 0.0 <= frac <= 1.0
    assert len([l for l in text.splitlines() if not l.startswith("#")]) == 50
    lo, hi = grasplab.wilson(5, 10)
    assert abs(lo - 0.2366) < 1e-4 and abs(hi - 0.7634) < 1e-4


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            fn()
            print("ok", name)
