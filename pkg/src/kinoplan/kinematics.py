"""
Geometric types for single-joint articulated objects and the joint-manifold math.

Everything lives in the world frame. An object's base pose is baked into the
joint origin/axis and the contact point when the object is built, so there is no
frame-transform layer. A joint parameter is an angle (radians) for revolute joints
and a displacement (meters) for prismatic joints.

The "manifold" of an object is the curve traced by its contact point as the joint
parameter sweeps through its range: a circle arc around the axis line for a
revolute joint, a straight line along the axis for a prismatic one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Iterator

import numpy as np

from kinoplan.errors import (
    DegenerateRadius,
    FixedJoint,
    InvariantViolation,
    OutOfLimits,
    ZeroVector,
)

UNIT_TOL = 1e-9
LIMIT_TOL = 1e-9
ZERO_NORM = 1e-12
MIN_RADIUS = 1e-9
# contacts closer than this to a revolute axis are twisted, not swung
TWIST_RADIUS = 0.02


@dataclass(frozen=True, slots=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)):
                raise InvariantViolation(f"Vec3.{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise InvariantViolation(f"Vec3.{name} is not finite: {value}")
            object.__setattr__(self, name, float(value))

    def __iter__(self) -> Iterator[float]:
        yield self.x
        yield self.y
        yield self.z

    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @classmethod
    def of(cls, values: Iterable[float]) -> "Vec3":
        x, y, z = (float(v) for v in values)
        return cls(x, y, z)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


def normalize(v: Vec3) -> Vec3:
    """Return the unit vector parallel to ``v``.

    Raises:
        ZeroVector: if ``‖v‖ <= 1e-12``.
    """
    n = v.norm()
    if n <= ZERO_NORM:
        raise ZeroVector(f"cannot normalize vector of length {n:g}")
    if n == 1.0:
        return v
    return Vec3(v.x / n, v.y / n, v.z / n)


class JointType(str, Enum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"
    FIXED = "fixed"


class ManipulationMode(str, Enum):
    LINEAR_GRASP = "LinearGrasp"
    LINEAR_PUSH = "LinearPush"
    ARC_GRASP = "ArcGrasp"
    TWIST_GRASP = "TwistGrasp"


def _is_unit(v: Vec3) -> bool:
    return abs(v.norm() - 1.0) <= UNIT_TOL


@dataclass(frozen=True, slots=True)
class KinematicJoint:
    joint_type: JointType
    axis: Vec3
    origin: Vec3
    lower: float
    upper: float
    state: float

    def __post_init__(self):
        object.__setattr__(self, "joint_type", JointType(self.joint_type))
        for name in ("lower", "upper", "state"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvariantViolation(f"joint {name} is not finite")
            object.__setattr__(self, name, value)
        if not _is_unit(self.axis):
            raise InvariantViolation(f"joint axis is not unit length (norm {self.axis.norm():.12g})")
        if self.lower > self.upper:
            raise InvariantViolation(f"joint limits inverted: lower={self.lower} > upper={self.upper}")
        if not (self.lower - LIMIT_TOL <= self.state <= self.upper + LIMIT_TOL):
            raise InvariantViolation(
                f"joint state {self.state} outside limits [{self.lower}, {self.upper}]"
            )
        if self.joint_type is JointType.FIXED and not (
            self.lower == self.upper == self.state == 0.0
        ):
            raise InvariantViolation("fixed joints must have lower = upper = state = 0")

    def within_limits(self, param: float, tol: float = LIMIT_TOL) -> bool:
        return self.lower - tol <= param <= self.upper + tol


@dataclass(frozen=True, slots=True)
class ContactPoint:
    name: str
    position: Vec3
    approach: Vec3

    def __post_init__(self):
        if not self.name:
            raise InvariantViolation("contact name must be non-empty")
        if not _is_unit(self.approach):
            raise InvariantViolation(
                f"contact approach is not unit length (norm {self.approach.norm():.12g})"
            )


@dataclass(frozen=True, slots=True)
class ArticulatedObject:
    name: str
    parts: tuple[tuple[int, str], ...]
    joint: KinematicJoint
    contact: ContactPoint

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple((int(i), str(n)) for i, n in self.parts))
        self.validate()

    def validate(self) -> None:
        if not self.name:
            raise InvariantViolation("object name must be non-empty")
        if [i for i, _ in self.parts] != [0, 1]:
            raise InvariantViolation("object must have exactly two parts with ids 0 (base) and 1 (movable)")
        if self.joint.joint_type is JointType.FIXED:
            raise InvariantViolation("object must have one actuated (non-fixed) joint")


# -- vector helpers on numpy arrays -------------------------------------------


def _rotate(v: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of ``v`` about the unit direction ``axis``."""
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * (np.dot(axis, v) * (1.0 - c))


def radial_offset(joint: KinematicJoint, point: Vec3) -> np.ndarray:
    """Component of ``point - origin`` perpendicular to the joint axis."""
    a = joint.axis.array()
    rel = point.array() - joint.origin.array()
    return rel - a * np.dot(a, rel)


def axis_distance(joint: KinematicJoint, point: Vec3) -> float:
    """Perpendicular distance from ``point`` to the joint's axis line."""
    return float(np.linalg.norm(radial_offset(joint, point)))


def contact_position_at(joint: KinematicJoint, contact: ContactPoint, param: float) -> Vec3:
    """Where the contact point sits when the joint is at ``param``.

    ``contact.position`` is taken to be the location at ``joint.state``.
    """
    if not joint.within_limits(param):
        raise OutOfLimits(f"param {param} outside limits [{joint.lower}, {joint.upper}]")
    if param == joint.state or joint.joint_type is JointType.FIXED:
        return contact.position
    d = param - joint.state
    if joint.joint_type is JointType.PRISMATIC:
        return Vec3.of(contact.position.array() + d * joint.axis.array())
    o = joint.origin.array()
    rotated = _rotate(contact.position.array() - o, joint.axis.array(), d)
    return Vec3.of(o + rotated)


def project_onto_manifold(
    joint: KinematicJoint, contact: ContactPoint, p: Vec3
) -> tuple[float, Vec3, float]:
    """Nearest point of the contact's manifold to ``p``.

    Returns ``(param, projected, deviation)``. ``param`` is not clamped to the
    joint limits. For revolute joints the angle is taken on the branch within
    (-pi, pi] of the current state.
    """
    if joint.joint_type is JointType.FIXED:
        raise FixedJoint("cannot project onto the manifold of a fixed joint")
    a = joint.axis.array()
    c = contact.position.array()
    q = p.array()
    if joint.joint_type is JointType.PRISMATIC:
        t = float(np.dot(a, q - c))
        projected = c + t * a
        return joint.state + t, Vec3.of(projected), float(np.linalg.norm(q - projected))

    o = joint.origin.array()
    u0 = radial_offset(joint, contact.position)
    r = float(np.linalg.norm(u0))
    if r <= MIN_RADIUS:
        raise DegenerateRadius(f"contact lies on the joint axis (r = {r:g})")
    height = float(np.dot(a, c - o))
    rel = q - o
    v = rel - a * np.dot(a, rel)
    vn = float(np.linalg.norm(v))
    if vn <= MIN_RADIUS:
        # every point of the circle is equidistant; stay where we are
        theta = 0.0
        radial = u0
    else:
        theta = math.atan2(float(np.dot(a, np.cross(u0, v))), float(np.dot(u0, v)))
        radial = v * (r / vn)
    projected = o + a * height + radial
    return joint.state + theta, Vec3.of(projected), float(np.linalg.norm(q - projected))


def classify_manipulation_mode(obj: ArticulatedObject, push: bool) -> ManipulationMode:
    joint = obj.joint
    if joint.joint_type is JointType.FIXED:
        raise FixedJoint(f"{obj.name}: fixed joints cannot be manipulated")
    if joint.joint_type is JointType.PRISMATIC:
        return ManipulationMode.LINEAR_PUSH if push else ManipulationMode.LINEAR_GRASP
    if axis_distance(joint, obj.contact.position) < TWIST_RADIUS:
        return ManipulationMode.TWIST_GRASP
    return ManipulationMode.ARC_GRASP


def pose_object(obj: ArticulatedObject, state: float) -> ArticulatedObject:
    """Copy of ``obj`` with its joint moved to ``state`` and the contact carried along."""
    position = contact_position_at(obj.joint, obj.contact, state)
    approach = obj.contact.approach
    if obj.joint.joint_type is JointType.REVOLUTE and state != obj.joint.state:
        turned = _rotate(approach.array(), obj.joint.axis.array(), state - obj.joint.state)
        approach = normalize(Vec3.of(turned))
    return replace(
        obj,
        joint=replace(obj.joint, state=state),
        contact=replace(obj.contact, position=position, approach=approach),
    )
