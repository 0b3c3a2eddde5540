"""
Analytic planner: the ground-truth action sequence for a task, computed from the
object's joint structure.

It doubles as the demonstration generator and as the backend of the mock LLM
client, so its output must be a pure function of (object, task, config).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from kinoplan.actions import (
    ROTATE_STEP,
    Action,
    ActionSequence,
    Grasp,
    Move,
    Release,
    RotateCCW,
    RotateCW,
)
from kinoplan.errors import BadStep, DegenerateRadius, InfeasibleTask, InvariantViolation
from kinoplan.kinematics import (
    TWIST_RADIUS,
    ArticulatedObject,
    ContactPoint,
    JointType,
    KinematicJoint,
    ManipulationMode,
    Vec3,
    axis_distance,
    classify_manipulation_mode,
    contact_position_at,
)

# commanded deltas travel through 4-decimal text, so step counts tolerate a
# sliver of overshoot before rounding up (1e-4 of a step)
STEP_SLACK = 1e-4


@dataclass(frozen=True)
class ManipulationTask:
    """An instruction plus the joint displacement it commands.

    ``start_state`` optionally pins the joint state the task starts from; the
    benchmark poses one object instance differently per instruction.
    """

    instruction: str
    delta: float
    push: bool = False
    start_state: float | None = None

    def __post_init__(self):
        if not self.instruction.strip():
            raise InvariantViolation("task instruction must be non-empty")
        if not math.isfinite(self.delta) or self.delta == 0.0:
            raise InvariantViolation(f"task delta must be finite and non-zero, got {self.delta}")


@dataclass(frozen=True)
class PlannerConfig:
    arc_step: float = math.radians(15.0)
    linear_step: float = 0.05
    approach_offset: float = 0.05
    twist_step: float = ROTATE_STEP

    def __post_init__(self):
        for name in ("arc_step", "linear_step", "approach_offset", "twist_step"):
            if not getattr(self, name) > 0:
                raise InvariantViolation(f"PlannerConfig.{name} must be positive")
        if abs(self.twist_step - ROTATE_STEP) > 1e-12:
            raise InvariantViolation("twist_step is fixed at 30 degrees by the action language")


def step_count(total: float, step: float) -> int:
    if not step > 0:
        raise BadStep(f"step must be positive, got {step}")
    return max(1, math.ceil(abs(total) / step - STEP_SLACK))


def check_task(obj: ArticulatedObject, task: ManipulationTask) -> None:
    joint = obj.joint
    if joint.joint_type is JointType.REVOLUTE and abs(task.delta) > math.pi + 1e-12:
        raise InfeasibleTask(f"revolute delta {task.delta} exceeds pi")
    target = joint.state + task.delta
    if not joint.within_limits(target):
        raise InfeasibleTask(
            f"target {target:.6f} outside joint limits [{joint.lower}, {joint.upper}]"
        )


def arc_waypoints(
    joint: KinematicJoint, contact: ContactPoint, delta: float, step: float
) -> list[Vec3]:
    if joint.joint_type is not JointType.REVOLUTE:
        raise ValueError("arc_waypoints needs a revolute joint")
    r = axis_distance(joint, contact.position)
    if r <= TWIST_RADIUS:
        raise DegenerateRadius(f"contact radius {r:.4f} m is too small for an arc")
    n = step_count(delta, step)
    params = [joint.state + delta * i / n for i in range(1, n)] + [joint.state + delta]
    return [contact_position_at(joint, contact, p) for p in params]


def linear_waypoints(
    joint: KinematicJoint, contact: ContactPoint, delta: float, step: float
) -> list[Vec3]:
    if joint.joint_type is not JointType.PRISMATIC:
        raise ValueError("linear_waypoints needs a prismatic joint")
    n = step_count(delta, step)
    c, a = contact.position.array(), joint.axis.array()
    offsets = [delta * i / n for i in range(1, n)] + [delta]
    return [Vec3.of(c + d * a) for d in offsets]


def twist_actions(delta: float) -> list[Action]:
    """Quantized 30-degree gripper turns; CCW is positive about the joint axis."""
    if abs(delta) > math.pi + 1e-12:
        raise InfeasibleTask(f"twist of {delta} rad exceeds pi")
    if delta == 0:
        return []
    k = step_count(delta, ROTATE_STEP)
    verb = RotateCCW if delta > 0 else RotateCW
    return [verb() for _ in range(k)]


def approach_point(contact: ContactPoint, offset: float) -> Vec3:
    return Vec3.of(contact.position.array() + offset * contact.approach.array())


def plan(
    obj: ArticulatedObject, task: ManipulationTask, config: PlannerConfig | None = None
) -> ActionSequence:
    config = config or PlannerConfig()
    check_task(obj, task)
    mode = classify_manipulation_mode(obj, task.push)
    joint, contact = obj.joint, obj.contact
    actions: list[Action] = [Move(approach_point(contact, config.approach_offset)), Move(contact.position)]

    if mode is ManipulationMode.LINEAR_PUSH:
        path = linear_waypoints(joint, contact, task.delta, config.linear_step)
        actions += [Move(w) for w in path]
    elif mode is ManipulationMode.TWIST_GRASP:
        actions += [Grasp(), *twist_actions(task.delta), Release()]
    else:
        if mode is ManipulationMode.LINEAR_GRASP:
            path = linear_waypoints(joint, contact, task.delta, config.linear_step)
        else:
            path = arc_waypoints(joint, contact, task.delta, config.arc_step)
        actions += [Grasp(), *(Move(w) for w in path), Release()]
    return ActionSequence(tuple(actions)).validate()


def manipulation_mode(obj: ArticulatedObject, task: ManipulationTask) -> ManipulationMode:
    return classify_manipulation_mode(obj, task.push)


def chord_deviation(radius: float, segment_angle: float) -> float:
    """Largest gap between a circular arc and its chord."""
    return radius * (1.0 - math.cos(segment_angle / 2.0))

