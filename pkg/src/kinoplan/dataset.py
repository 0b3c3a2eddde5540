"""
Synthetic benchmark objects: sixteen categories, seeded instances.

Every instance is built in a local frame (front face toward +x, z up), turned by
a yaw drawn from a small set of rotations with exact 2-decimal cosines/sines,
and dropped at a random base point inside a 0.8 m workspace cube. Objects are
then canonicalized through their own ``.kin.xml`` text so that what a planner
reads from the description is exactly what the simulator runs.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from kinoplan.description import canonicalize
from kinoplan.errors import UnknownCategory
from kinoplan.kinematics import (
    ArticulatedObject,
    ContactPoint,
    JointType,
    KinematicJoint,
    ManipulationMode,
    Vec3,
    pose_object,
)
from kinoplan.oracle import ManipulationTask

# (cos, sin) pairs whose products stay exactly representable at 4 decimals
YAWS = (
    (1.0, 0.0), (0.96, 0.28), (0.8, 0.6), (0.6, 0.8), (0.28, 0.96), (0.0, 1.0),
    (0.96, -0.28), (0.8, -0.6), (0.6, -0.8), (0.28, -0.96), (0.0, -1.0),
)
WORKSPACE_LOW = (0.3, -0.4, 0.1)
WORKSPACE_SIZE = 0.8


@dataclass(frozen=True)
class CategorySpec:
    """Generation recipe for one object category.

    ``family`` picks the joint layout; ``size`` is the contact radius (revolute)
    or travel (prismatic) range in meters; ``limit_deg`` the upper joint limit
    range for hinged objects. ``instructions`` pairs each instruction with the
    direction it drives the joint (+1 from the lower limit, -1 from the upper).
    """

    name: str
    mode: ManipulationMode
    family: str
    instructions: tuple[tuple[str, int], ...]
    size: tuple[float, float]
    limit_deg: tuple[float, float] = (90.0, 90.0)
    movable: str = "door"
    contact: str = "handle"
    seen: bool = True

    @property
    def instruction_names(self) -> tuple[str, ...]:
        return tuple(i for i, _ in self.instructions)


def _pair(verb_on: str, verb_off: str, name: str) -> tuple[tuple[str, int], ...]:
    return ((f"{verb_on} the {name}", +1), (f"{verb_off} the {name}", -1))


_ARC = ManipulationMode.ARC_GRASP
CATEGORIES: dict[str, CategorySpec] = {
    c.name: c
    for c in [
        # seen: the categories demonstrations are drawn from
        CategorySpec("drawer", ManipulationMode.LINEAR_GRASP, "drawer", _pair("open", "close", "drawer"),
                     (0.2, 0.5), movable="drawer"),
        CategorySpec("oven", _ARC, "hinge_bottom", _pair("open", "close", "oven"), (0.3, 0.5), (80, 90)),
        CategorySpec("safe", _ARC, "hinge_vertical", _pair("open", "close", "safe"), (0.25, 0.45), (90, 120)),
        CategorySpec("strap", _ARC, "lid", _pair("lift", "lay down", "strap"), (0.1, 0.25), (90, 110),
                     movable="strap", contact="strap"),
        CategorySpec("refrigerator", _ARC, "hinge_vertical", _pair("open", "close", "refrigerator"),
                     (0.4, 0.7), (90, 120)),
        CategorySpec("button", ManipulationMode.LINEAR_PUSH, "button", (("turn on the button", +1),),
                     (0.01, 0.03), movable="button", contact="button"),
        CategorySpec("faucet", ManipulationMode.TWIST_GRASP, "knob", _pair("turn on", "turn off", "faucet"),
                     (0.003, 0.015), movable="knob", contact="knob"),
        CategorySpec("bottle", ManipulationMode.TWIST_GRASP, "knob", (("turn on the bottle", +1),),
                     (0.0, 0.01), movable="cap", contact="cap"),
        # unseen
        CategorySpec("dishwasher", _ARC, "hinge_bottom", _pair("open", "close", "dishwasher"), (0.4, 0.6),
                     (80, 90), seen=False),
        CategorySpec("cabinet", _ARC, "hinge_vertical", _pair("open", "close", "cabinet"), (0.25, 0.5),
                     (90, 120), seen=False),
        CategorySpec("door", _ARC, "hinge_vertical", _pair("open", "close", "door"), (0.4, 1.0), (90, 120),
                     seen=False),
        CategorySpec("bucket", _ARC, "lid", _pair("lift", "lay down", "bucket"), (0.1, 0.2), (90, 100),
                     movable="handle", seen=False),
        CategorySpec("window", _ARC, "hinge_vertical", _pair("open", "close", "window"), (0.3, 0.6), (60, 90),
                     movable="sash", seen=False),
        CategorySpec("trashcan", _ARC, "lid", _pair("open", "close", "trashcan"), (0.15, 0.35), (90, 110),
                     movable="lid", contact="lid", seen=False),
        CategorySpec("laptop", _ARC, "lid", _pair("open", "close", "laptop"), (0.2, 0.3), (100, 120),
                     movable="screen", contact="lid", seen=False),
        CategorySpec("stapler", _ARC, "lid", (("press the stapler", -1),), (0.1, 0.15), (20, 30),
                     movable="arm", contact="arm", seen=False),
    ]
}
SEEN = tuple(n for n, c in CATEGORIES.items() if c.seen)
UNSEEN = tuple(n for n, c in CATEGORIES.items() if not c.seen)


def get_category(name: str | CategorySpec) -> CategorySpec:
    if isinstance(name, CategorySpec):
        return name
    try:
        return CATEGORIES[name]
    except KeyError:
        raise UnknownCategory(f"unknown category {name!r}") from None


def _r4(value: float) -> float:
    r = round(value, 4)
    return 0.0 if r == 0 else r


def _local_layout(spec: CategorySpec, rng: random.Random):
    """Joint type, local axis, local contact offset, local approach, limits."""
    lo, hi = spec.size
    size = _r4(rng.uniform(lo, hi))
    upper_rad = _r4(math.radians(rng.uniform(*spec.limit_deg)))
    lateral = _r4(rng.uniform(-0.1, 0.1))
    front = (1.0, 0.0, 0.0)
    if spec.family == "drawer":
        return JointType.PRISMATIC, (1.0, 0.0, 0.0), (0.0, lateral, 0.0), front, (0.0, size)
    if spec.family == "button":
        return JointType.PRISMATIC, (-1.0, 0.0, 0.0), (0.0, 0.0, 0.0), front, (0.0, size)
    if spec.family == "hinge_vertical":
        height = _r4(rng.uniform(-0.2, 0.2))
        if rng.random() < 0.5:
            return JointType.REVOLUTE, (0.0, 0.0, 1.0), (0.0, -size, height), front, (0.0, upper_rad)
        return JointType.REVOLUTE, (0.0, 0.0, -1.0), (0.0, size, height), front, (0.0, upper_rad)
    if spec.family == "hinge_bottom":
        return JointType.REVOLUTE, (0.0, 1.0, 0.0), (0.0, lateral, size), front, (0.0, upper_rad)
    if spec.family == "lid":
        return JointType.REVOLUTE, (0.0, -1.0, 0.0), (size, lateral, 0.0), (0.0, 0.0, 1.0), (0.0, upper_rad)
    if spec.family == "knob":
        steps = rng.choice((3, 4))
        upper = _r4(steps * math.radians(30.0))
        return JointType.REVOLUTE, (0.0, 0.0, 1.0), (size, 0.0, 0.05), (0.0, 0.0, 1.0), (0.0, upper)
    raise ValueError(f"unknown family {spec.family!r}")


def _yaw(cs: tuple[float, float], v) -> tuple[float, float, float]:
    c, s = cs
    x, y, z = v
    return (_r4(c * x - s * y), _r4(s * x + c * y), _r4(z))


def _task_delta(spec: CategorySpec, lower: float, upper: float, direction: int, rng: random.Random) -> float:
    span = upper - lower
    if spec.family == "knob":
        # one 30 degree step short of the full range
        steps = round(span / math.radians(30.0)) - 1
        return direction * _r4(steps * math.radians(30.0))
    return direction * _r4(rng.uniform(0.6, 0.9) * span)


def generate_instance(
    category: str | CategorySpec, seed: int
) -> tuple[ArticulatedObject, list[ManipulationTask]]:
    """Deterministic object instance for ``(category, seed)`` and one task per instruction.

    The returned object sits at its lower joint limit. Each task carries the
    ``start_state`` it should be run from; see :func:`object_for_task`.
    """
    spec = get_category(category)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    rng = random.Random(f"{spec.name}:{seed}")
    jtype, axis_l, offset_l, approach_l, (lower, upper) = _local_layout(spec, rng)
    yaw = rng.choice(YAWS)
    base = tuple(_r4(lo + rng.uniform(0.0, WORKSPACE_SIZE)) for lo in WORKSPACE_LOW)
    offset = _yaw(yaw, offset_l)
    position = tuple(_r4(b + o) for b, o in zip(base, offset))
    joint = KinematicJoint(jtype, Vec3(*_yaw(yaw, axis_l)), Vec3(*base), lower, upper, lower)
    contact = ContactPoint(spec.contact, Vec3(*position), Vec3(*_yaw(yaw, approach_l)))
    obj = canonicalize(
        ArticulatedObject(spec.name, ((0, f"{spec.name} body"), (1, spec.movable)), joint, contact)
    )

    tasks = []
    for instruction, direction in spec.instructions:
        start = lower if direction > 0 else upper
        delta = _task_delta(spec, lower, upper, direction, rng)
        tasks.append(
            ManipulationTask(instruction, delta, push=spec.mode is ManipulationMode.LINEAR_PUSH, start_state=start)
        )
    return obj, tasks


def object_for_task(obj: ArticulatedObject, task: ManipulationTask) -> ArticulatedObject:
    """The instance posed at the task's start state, exactly representable as text."""
    if task.start_state is None or task.start_state == obj.joint.state:
        return obj
    return canonicalize(pose_object(obj, task.start_state))


def instruction_slug(instruction: str) -> str:
    words = instruction.lower().split()
    if words[-2:-1] == ["the"]:
        words = words[:-2]
    return "_".join(words)
