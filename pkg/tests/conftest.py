import math

import numpy as np
import pytest
from hypothesis import strategies as st

from kinoplan.kinematics import (
    ArticulatedObject,
    ContactPoint,
    JointType,
    KinematicJoint,
    Vec3,
)

coord = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False, allow_infinity=False)


@st.composite
def unit_vectors(draw):
    v = np.array([draw(st.floats(-1, 1, allow_nan=False)) for _ in range(3)])
    n = np.linalg.norm(v)
    if n < 1e-3:
        v, n = np.array([0.0, 0.0, 1.0]), 1.0
    return Vec3.of(v / n)


def random_unit(rng: np.random.Generator) -> Vec3:
    while True:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
        if n > 1e-3:
            return Vec3.of(v / n)


def random_joint(rng: np.random.Generator, joint_type: JointType | None = None) -> KinematicJoint:
    joint_type = joint_type or (JointType.REVOLUTE, JointType.PRISMATIC)[rng.integers(2)]
    axis = random_unit(rng)
    origin = Vec3.of(rng.uniform(-1, 1, 3))
    if joint_type is JointType.REVOLUTE:
        lower = -rng.uniform(0, math.pi)
        upper = rng.uniform(0, math.pi)
    else:
        lower = -rng.uniform(0, 0.5)
        upper = rng.uniform(0, 0.5)
    state = rng.uniform(lower, upper)
    return KinematicJoint(joint_type, axis, origin, lower, upper, state)


def random_object(rng: np.random.Generator, joint_type: JointType | None = None, min_radius: float = 0.05):
    """Random valid object; revolute contacts sit at least ``min_radius`` off the axis."""
    joint = random_joint(rng, joint_type)
    a = joint.axis.array()
    while True:
        offset = rng.uniform(-1, 1, 3)
        radial = offset - a * np.dot(a, offset)
        if np.linalg.norm(radial) >= min_radius:
            break
    contact = ContactPoint("handle", Vec3.of(joint.origin.array() + offset), random_unit(rng))
    return ArticulatedObject("thing", ((0, "base"), (1, "link")), joint, contact)


def make_object(joint_type, axis, origin, lower, upper, state, position, approach=(1, 0, 0), name="thing"):
    joint = KinematicJoint(JointType(joint_type), Vec3(*axis), Vec3(*origin), lower, upper, state)
    contact = ContactPoint("handle", Vec3(*position), Vec3(*approach))
    return ArticulatedObject(name, ((0, "base"), (1, "movable")), joint, contact)


@pytest.fixture
def drawer():
    return make_object("prismatic", (1, 0, 0), (0, 0, 0), 0.0, 0.4, 0.0, (0.3, 0.0, 0.5), name="drawer")


@pytest.fixture
def door():
    # r = 0.5 about +z through the origin, 0..120 degrees
    return make_object("revolute", (0, 0, 1), (0, 0, 0), 0.0, math.radians(120), 0.0, (0.5, 0.0, 0.4), name="door")


@pytest.fixture
def faucet():
    return make_object(
        "revolute", (0, 0, 1), (0, 0, 0), 0.0, math.pi, 0.0, (0.005, 0.0, 0.05), approach=(0, 0, 1), name="faucet"
    )


@pytest.fixture
def button():
    return make_object(
        "prismatic", (-1, 0, 0), (0, 0, 0), 0.0, 0.03, 0.0, (0.0, 0.0, 0.0), approach=(1, 0, 0), name="button"
    )
