import math

import pytest

from kinoplan.dataset import CATEGORIES, SEEN, UNSEEN, generate_instance, get_category, instruction_slug, object_for_task
from kinoplan.description import parse_description, serialize_description
from kinoplan.errors import UnknownCategory
from kinoplan.kinematics import JointType, ManipulationMode, axis_distance, classify_manipulation_mode

MODES = {
    "drawer": ManipulationMode.LINEAR_GRASP,
    "button": ManipulationMode.LINEAR_PUSH,
    "faucet": ManipulationMode.TWIST_GRASP,
    "bottle": ManipulationMode.TWIST_GRASP,
}


def test_category_table():
    assert len(CATEGORIES) == 16
    assert SEEN == ("drawer", "oven", "safe", "strap", "refrigerator", "button", "faucet", "bottle")
    assert len(UNSEEN) == 8
    for name, spec in CATEGORIES.items():
        assert spec.mode is MODES.get(name, ManipulationMode.ARC_GRASP)
        assert 1 <= len(spec.instructions) <= 2
    assert get_category("window").instruction_names == ("open the window", "close the window")
    assert get_category("bucket").instruction_names == ("lift the bucket", "lay down the bucket")
    assert get_category("button").instruction_names == ("turn on the button",)
    with pytest.raises(UnknownCategory):
        get_category("toaster")


def test_deterministic():
    assert generate_instance("drawer", 0) == generate_instance("drawer", 0)
    assert generate_instance("drawer", 0) != generate_instance("drawer", 1)


@pytest.mark.parametrize("name", list(CATEGORIES))
def test_instances_are_valid(name):
    spec = get_category(name)
    for seed in range(20):
        obj, tasks = generate_instance(name, seed)
        obj.validate()
        assert obj.name == name
        # canonical: the text form reads back identically
        assert parse_description(serialize_description(obj)) == obj
        assert len(tasks) == len(spec.instructions)
        j = obj.joint
        for task in tasks:
            assert task.start_state in (j.lower, j.upper)
            posed = object_for_task(obj, task)
            assert classify_manipulation_mode(posed, task.push) is spec.mode
            assert j.lower - 1e-9 <= task.start_state + task.delta <= j.upper + 1e-9
            assert abs(task.delta) >= 0.5 * (j.upper - j.lower)
            if j.joint_type is JointType.REVOLUTE:
                assert abs(task.delta) <= math.pi
            if spec.mode is ManipulationMode.TWIST_GRASP:
                steps = abs(task.delta) / math.radians(30)
                assert abs(steps - round(steps)) < 1e-3
            if spec.mode is ManipulationMode.ARC_GRASP:
                assert axis_distance(posed.joint, posed.contact.position) > 0.05


def test_faucet_always_twists():
    for seed in range(100):
        obj, tasks = generate_instance("faucet", seed)
        assert classify_manipulation_mode(obj, False) is ManipulationMode.TWIST_GRASP


def test_door_radius_range():
    for seed in range(50):
        obj, _ = generate_instance("door", seed)
        assert 0.4 - 1e-4 <= axis_distance(obj.joint, obj.contact.position) <= 1.0 + 1e-4


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        generate_instance("drawer", -1)


def test_instruction_slug():
    assert instruction_slug("lay down the strap") == "lay_down"
    assert instruction_slug("turn on the button") == "turn_on"
    assert instruction_slug("open the drawer") == "open"
