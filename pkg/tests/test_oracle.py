import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_object, random_object
from kinoplan.actions import Grasp, Move, Release, RotateCCW, RotateCW, waypoints_of
from kinoplan.errors import BadStep, DegenerateRadius, InfeasibleTask, InvariantViolation
from kinoplan.kinematics import JointType, ManipulationMode, axis_distance, classify_manipulation_mode, project_onto_manifold
from kinoplan.oracle import (
    ManipulationTask,
    PlannerConfig,
    arc_waypoints,
    chord_deviation,
    linear_waypoints,
    plan,
    step_count,
    twist_actions,
)
from kinoplan.sim import TrialStatus, execute

D30 = math.radians(30)


def rodrigues_oracle(p, angle):
    """Rotation about +z through the origin, written out by hand."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]])


def test_arc_example(door):
    pts = arc_waypoints(door.joint, door.contact, math.radians(90), D30)
    want = [rodrigues_oracle((0.5, 0, 0.4), math.radians(a)) for a in (30, 60, 90)]
    assert len(pts) == 3
    for got, w in zip(pts, want):
        assert np.allclose(got.array(), w, atol=1e-12)
    rounded = [tuple(round(v, 4) + 0.0 for v in p) for p in pts]
    assert rounded == [(0.433, 0.25, 0.4), (0.25, 0.433, 0.4), (0.0, 0.5, 0.4)]


def test_arc_single_step(door):
    assert len(arc_waypoints(door.joint, door.contact, D30, D30)) == 1


def test_arc_negative_mirrors():
    obj = make_object("revolute", (0, 0, 1), (0, 0, 0), -math.pi, math.pi, 0, (0.5, 0, 0.4))
    pts = arc_waypoints(obj.joint, obj.contact, -math.radians(90), D30)
    assert np.allclose(pts[0].array(), rodrigues_oracle((0.5, 0, 0.4), -D30), atol=1e-12)
    assert round(pts[0].y, 4) == -0.25
    assert np.allclose(pts[-1].array(), [0, -0.5, 0.4], atol=1e-12)


def test_arc_errors(door, faucet):
    with pytest.raises(DegenerateRadius):
        arc_waypoints(faucet.joint, faucet.contact, math.radians(90), D30)
    with pytest.raises(BadStep):
        arc_waypoints(door.joint, door.contact, 1.0, 0.0)
    with pytest.raises(BadStep):
        step_count(1.0, -0.1)


def test_linear_examples():
    obj = make_object("prismatic", (1, 0, 0), (0, 0, 0), -1, 1, 0, (0.2, 0.1, 0.3))
    pts = linear_waypoints(obj.joint, obj.contact, 0.3, 0.1)
    assert np.allclose([p.array() for p in pts], [(0.3, 0.1, 0.3), (0.4, 0.1, 0.3), (0.5, 0.1, 0.3)], atol=1e-12)
    (one,) = linear_waypoints(obj.joint, obj.contact, 0.05, 0.1)
    assert one.x == pytest.approx(0.25, abs=1e-12)
    back = linear_waypoints(obj.joint, obj.contact, -0.2, 0.1)
    assert [round(p.x - 0.2, 12) for p in back] == [-0.1, -0.2]


def test_twist_examples():
    assert twist_actions(math.radians(90)) == [RotateCCW()] * 3
    assert twist_actions(math.radians(-45)) == [RotateCW()] * 2
    with pytest.raises(InvariantViolation):
        ManipulationTask("turn on the bottle", 0.0)


def test_step_count_tolerates_text_rounding():
    # a 4-decimal 90 degrees is a hair above three 30 degree steps
    assert step_count(round(math.radians(90), 4), D30) == 3
    assert step_count(0.3, 0.1) == 3
    assert step_count(0.31, 0.1) == 4


def test_drawer_plan_shape(drawer):
    seq = plan(drawer, ManipulationTask("open the drawer", 0.3), PlannerConfig(linear_step=0.1))
    kinds = [type(a) for a in seq]
    assert kinds == [Move, Move, Grasp, Move, Move, Move, Release]
    assert np.allclose(seq.actions[0].target.array(), [0.35, 0, 0.5])
    assert seq.actions[1].target == drawer.contact.position


def test_button_plan_shape(button):
    seq = plan(button, ManipulationTask("turn on the button", 0.02, push=True))
    assert all(isinstance(a, Move) for a in seq)
    assert len(seq) == 3


def test_bottle_plan_shape():
    bottle = make_object("revolute", (0, 0, 1), (0, 0, 0), 0, math.pi, 0, (0.004, 0, 0.1), approach=(0, 0, 1))
    seq = plan(bottle, ManipulationTask("turn on the bottle", math.radians(90)))
    assert [type(a) for a in seq] == [Move, Move, Grasp, RotateCCW, RotateCCW, RotateCCW, Release]


def test_infeasible_tasks(drawer, door):
    with pytest.raises(InfeasibleTask):
        plan(drawer, ManipulationTask("open the drawer", 0.5))
    with pytest.raises(InfeasibleTask):
        plan(drawer, ManipulationTask("close the drawer", -0.1))
    with pytest.raises(InfeasibleTask):
        plan(door, ManipulationTask("open the door", 3.5))


def test_planner_config_invariants():
    with pytest.raises(InvariantViolation):
        PlannerConfig(arc_step=0)
    with pytest.raises(InvariantViolation):
        PlannerConfig(twist_step=math.radians(45))


def test_chord_deviation():
    assert chord_deviation(0.5, math.radians(90)) == pytest.approx(0.1464, abs=1e-4)
    # 15 degree steps stay below the stuck threshold for any radius up to 1 m
    assert chord_deviation(1.0, math.radians(15)) < 0.02


def _random_task(rng, obj):
    j = obj.joint
    room_up, room_down = j.upper - j.state, j.state - j.lower
    cap = math.pi if j.joint_type is JointType.REVOLUTE else 10.0
    if max(room_up, room_down) < 1e-3:
        return None
    if room_up >= room_down:
        delta = rng.uniform(0.5, 1.0) * min(room_up, cap)
    else:
        delta = -rng.uniform(0.5, 1.0) * min(room_down, cap)
    return ManipulationTask("move it", delta)


@settings(max_examples=300)
@given(st.integers(0, 2**32 - 1))
def test_arc_invariants(seed):
    rng = np.random.default_rng(seed)
    obj = random_object(rng, JointType.REVOLUTE, min_radius=0.05)
    task = _random_task(rng, obj)
    if task is None:
        return
    j = obj.joint
    r = axis_distance(j, obj.contact.position)
    pts = arc_waypoints(j, obj.contact, task.delta, math.radians(15))
    for p in pts:
        assert abs(axis_distance(j, p) - r) <= 1e-9
    params = [project_onto_manifold(j, obj.contact, p)[0] for p in pts]
    param, _, dev = project_onto_manifold(j, obj.contact, pts[-1])
    assert abs(param - (j.state + task.delta)) <= 1e-9
    assert dev <= 1e-9
    steps = np.diff([j.state] + params) * math.copysign(1, task.delta)
    assert (steps > 0).all()


@settings(max_examples=300)
@given(st.integers(0, 2**32 - 1))
def test_linear_invariants(seed):
    rng = np.random.default_rng(seed)
    obj = random_object(rng, JointType.PRISMATIC)
    task = _random_task(rng, obj)
    if task is None:
        return
    j = obj.joint
    pts = linear_waypoints(j, obj.contact, task.delta, 0.05)
    params = [project_onto_manifold(j, obj.contact, p)[0] for p in pts]
    assert abs(params[-1] - (j.state + task.delta)) <= 1e-9
    assert all(project_onto_manifold(j, obj.contact, p)[2] <= 1e-9 for p in pts)
    assert (np.diff([j.state] + params) * math.copysign(1, task.delta) > 0).all()


def test_oracle_closure_randomized():
    rng = np.random.default_rng(12)
    counts = {m: 0 for m in ManipulationMode}
    while sum(counts.values()) < 200:
        kind = rng.integers(4)
        if kind == 3:
            # twist: on-axis contact, delta a multiple of 30 degrees
            k = int(rng.integers(1, 7))
            obj = make_object(
                "revolute", tuple(random_unit_tuple(rng)), (0, 0, 0), 0, k * D30, 0, (0, 0, 0), approach=(0, 0, 1)
            )
            task = ManipulationTask("twist", k * D30)
        else:
            jt = JointType.PRISMATIC if kind < 2 else JointType.REVOLUTE
            obj = random_object(rng, jt, min_radius=0.05)
            task = _random_task(rng, obj)
            if task is None:
                continue
            if kind == 1:
                task = ManipulationTask("push", task.delta, push=True)
                if task.delta * float(np.dot(obj.joint.axis.array(), obj.contact.approach.array())) > 0:
                    # push direction must oppose the approach; flip the approach
                    obj = make_object(
                        "prismatic", tuple(obj.joint.axis), tuple(obj.joint.origin), obj.joint.lower, obj.joint.upper,
                        obj.joint.state, tuple(obj.contact.position), tuple(-obj.contact.approach.array()),
                    )
        mode = classify_manipulation_mode(obj, task.push)
        counts[mode] += 1
        seq = plan(obj, task)
        assert seq.is_valid
        outcome = execute(obj, seq, task)
        assert outcome.status is TrialStatus.SUCCESS, (mode, outcome)
        if mode is not ManipulationMode.TWIST_GRASP:
            assert outcome.achieved_delta == pytest.approx(task.delta, abs=1e-9)
        else:
            assert outcome.achieved_delta == pytest.approx(task.delta, abs=1e-12)
    assert all(counts.values())


def random_unit_tuple(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def test_plan_waypoints_count(drawer):
    seq = plan(drawer, ManipulationTask("open the drawer", 0.3), PlannerConfig(linear_step=0.1))
    assert len(waypoints_of(seq)) == 5
