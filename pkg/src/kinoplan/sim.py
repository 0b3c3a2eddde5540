"""
Kinematic simulator for single-joint objects.

The gripper follows waypoints along straight segments. While it holds the
contact, every sub-sample of a segment is projected onto the contact's manifold;
a residual above ``stuck_threshold`` means the plan asked the object to move
somewhere its joint cannot go, and the trial fails as stuck. This stands in for
the force limits of a physical simulator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from kinoplan.actions import (
    ROTATE_STEP,
    Action,
    ActionSequence,
    Grasp,
    Move,
    Release,
    RotateCCW,
    RotateCW,
    sequence_violation,
)
from kinoplan.errors import DegenerateRadius, InvariantViolation
from kinoplan.kinematics import (
    TWIST_RADIUS,
    ArticulatedObject,
    JointType,
    Vec3,
    axis_distance,
    contact_position_at,
    project_onto_manifold,
)
from kinoplan.oracle import ManipulationTask

LIMIT_SLACK = 1e-6


@dataclass(frozen=True)
class SimConfig:
    stuck_threshold: float = 0.02
    grasp_reach: float = 0.01
    segment_resolution: float = 0.01
    success_fraction: float = 0.9
    # the gripper starts this far out along the contact's approach direction
    home_offset: float = 0.3

    def __post_init__(self):
        for name in ("stuck_threshold", "grasp_reach", "segment_resolution", "home_offset"):
            if not getattr(self, name) > 0:
                raise InvariantViolation(f"SimConfig.{name} must be positive")
        if not 0 < self.success_fraction <= 1:
            raise InvariantViolation("SimConfig.success_fraction must lie in (0, 1]")


class TrialStatus(str, Enum):
    SUCCESS = "Success"
    STUCK = "StuckFailure"
    GRASP_MISS = "GraspMissFailure"
    UNDERSHOOT = "UnderShootFailure"
    WRONG_DIRECTION = "WrongDirectionFailure"
    MALFORMED_PLAN = "MalformedPlanFailure"
    LIMIT_VIOLATION = "LimitViolationFailure"


@dataclass(frozen=True)
class TrialOutcome:
    status: TrialStatus
    achieved_delta: float
    steps_executed: int

    @property
    def success(self) -> bool:
        return self.status is TrialStatus.SUCCESS

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "achieved_delta": self.achieved_delta,
            "steps_executed": self.steps_executed,
        }


@dataclass
class GripperState:
    position: Vec3
    grasped: bool = False
    roll_steps: int = 0


@dataclass(frozen=True)
class StepEvent:
    name: str
    failure: TrialStatus | None = None
    detail: str = ""


@dataclass
class Simulator:
    """One trial's worth of mutable state. Not shared between threads."""

    obj: ArticulatedObject
    config: SimConfig = field(default_factory=SimConfig)
    push: bool = False

    def __post_init__(self):
        joint = self.obj.joint
        self.initial_state = joint.state
        self.state = joint.state
        self.twist_geometry = (
            joint.joint_type is JointType.REVOLUTE
            and axis_distance(joint, self.obj.contact.position) < TWIST_RADIUS
        )
        self.push_context = joint.joint_type is JointType.PRISMATIC and self.push
        home = self.obj.contact.position.array() + self.config.home_offset * self.obj.contact.approach.array()
        self.gripper = GripperState(Vec3.of(home))
        self.failed: TrialStatus | None = None
        self.max_deviation = 0.0

    # -- geometry ----------------------------------------------------------

    def contact_position(self) -> Vec3:
        return contact_position_at(self.obj.joint, self.obj.contact, self.state)

    def _current(self):
        joint = replace(self.obj.joint, state=self.state)
        contact = replace(self.obj.contact, position=self.contact_position())
        return joint, contact

    def _set_state(self, param: float) -> StepEvent | None:
        joint = self.obj.joint
        if not joint.within_limits(param, LIMIT_SLACK):
            return StepEvent("limit", TrialStatus.LIMIT_VIOLATION, f"joint parameter {param:.6f} outside limits")
        self.state = min(max(param, joint.lower), joint.upper)
        return None

    def _samples(self, target: Vec3):
        start = self.gripper.position.array()
        end = target.array()
        n = max(1, math.ceil(float(np.linalg.norm(end - start)) / self.config.segment_resolution))
        for i in range(1, n + 1):
            yield Vec3.of(start + (end - start) * (i / n)) if i < n else target

    # -- actions -----------------------------------------------------------

    def step(self, action: Action) -> StepEvent:
        if self.failed is not None:
            raise RuntimeError("simulator already failed")
        match action:
            case Move(target=target):
                event = self._drag(target) if self.gripper.grasped else self._free_move(target)
            case Grasp():
                event = self._grasp()
            case Release():
                self.gripper.grasped = False
                event = StepEvent("release")
            case RotateCW() | RotateCCW():
                event = self._rotate(+1 if isinstance(action, RotateCCW) else -1)
            case _:
                event = StepEvent("malformed", TrialStatus.MALFORMED_PLAN, f"not an action: {action!r}")
        if event.failure is not None:
            self.failed = event.failure
        return event

    def _free_move(self, target: Vec3) -> StepEvent:
        if not self.push_context:
            self.gripper.position = target
            return StepEvent("move")
        axis = self.obj.joint.axis.array()
        # pushing moves the contact away from the side the gripper approaches from
        push_sign = -float(np.dot(axis, self.obj.contact.approach.array()))
        pushed = False
        for sample in self._samples(target):
            rel = sample.array() - self.contact_position().array()
            t = float(np.dot(axis, rel))
            lateral = float(np.linalg.norm(rel - t * axis))
            if t * push_sign > 0 and lateral <= self.config.stuck_threshold:
                bad = self._set_state(self.state + t)
                if bad:
                    return bad
                pushed = True
        self.gripper.position = target
        return StepEvent("push" if pushed else "move")

    def _drag(self, target: Vec3) -> StepEvent:
        for sample in self._samples(target):
            joint, contact = self._current()
            try:
                param, projected, deviation = project_onto_manifold(joint, contact, sample)
            except DegenerateRadius:
                param, projected = self.state, contact.position
                deviation = float(np.linalg.norm(sample.array() - projected.array()))
            self.max_deviation = max(self.max_deviation, deviation)
            if deviation > self.config.stuck_threshold:
                return StepEvent("stuck", TrialStatus.STUCK, f"deviation {deviation:.4f} m off the joint manifold")
            bad = self._set_state(param)
            if bad:
                return bad
            self.gripper.position = projected if self.state == param else self.contact_position()
        return StepEvent("drag")

    def _grasp(self) -> StepEvent:
        contact = self.contact_position()
        gap = float(np.linalg.norm(self.gripper.position.array() - contact.array()))
        if gap > self.config.grasp_reach:
            return StepEvent("grasp", TrialStatus.GRASP_MISS, f"gripper {gap:.4f} m from contact")
        self.gripper.grasped = True
        self.gripper.position = contact
        return StepEvent("grasp")

    def _rotate(self, sign: int) -> StepEvent:
        self.gripper.roll_steps += sign
        if not (self.gripper.grasped and self.twist_geometry):
            return StepEvent("roll")
        bad = self._set_state(self.state + sign * ROTATE_STEP)
        if bad:
            return bad
        self.gripper.position = self.contact_position()
        return StepEvent("twist")

    def snapshot(self, index: int, event: StepEvent) -> dict:
        return {
            "step": index,
            "gripper": list(self.gripper.position),
            "joint_state": self.state,
            "event": event.failure.value if event.failure else event.name,
        }


def judge_success(task: ManipulationTask, achieved_delta: float, config: SimConfig | None = None) -> bool:
    return judge_status(task, achieved_delta, config) is TrialStatus.SUCCESS


def judge_status(task: ManipulationTask, achieved_delta: float, config: SimConfig | None = None) -> TrialStatus:
    config = config or SimConfig()
    if abs(achieved_delta) > 1e-9 and math.copysign(1.0, achieved_delta) != math.copysign(1.0, task.delta):
        return TrialStatus.WRONG_DIRECTION
    if abs(achieved_delta) < config.success_fraction * abs(task.delta):
        return TrialStatus.UNDERSHOOT
    return TrialStatus.SUCCESS


def execute(
    obj: ArticulatedObject,
    seq: ActionSequence,
    task: ManipulationTask,
    config: SimConfig | None = None,
    trace: list[dict] | None = None,
) -> TrialOutcome:
    """Run a plan from the object's current state and judge the result."""
    config = config or SimConfig()
    if sequence_violation(seq) is not None:
        return TrialOutcome(TrialStatus.MALFORMED_PLAN, 0.0, 0)
    sim = Simulator(obj, config, push=task.push)
    executed = 0
    for i, action in enumerate(seq):
        event = sim.step(action)
        if trace is not None:
            trace.append(sim.snapshot(i, event))
        if event.failure is not None:
            return TrialOutcome(event.failure, sim.state - sim.initial_state, executed)
        executed += 1
    achieved = sim.state - sim.initial_state
    return TrialOutcome(judge_status(task, achieved, config), achieved, executed)


def write_trace(path: str | Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
