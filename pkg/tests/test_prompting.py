import json
import math
from pathlib import Path

import pytest

from kinoplan.actions import emit_actions
from kinoplan.clients import MockOracleClient
from kinoplan.dataset import CATEGORIES, SEEN, generate_instance, object_for_task
from kinoplan.description import serialize_description
from kinoplan.errors import AlignmentError, EmptyPlan, NoActionsFound, PromptError, SequenceError, StageError
from kinoplan.oracle import ManipulationTask, plan
from kinoplan.prompting import (
    CURRENT_MARKER,
    STAGE1_MARKER,
    STAGE2_MARKER,
    Demonstration,
    PipelineTrace,
    build_stage1_prompt,
    build_stage2_prompt,
    description_properties,
    generate_demo_store,
    load_demo_store,
    parse_sequence_plan,
    parse_task,
    parse_waypoint_response,
    plan_with_llm,
    render_task,
)

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def demos():
    return generate_demo_store()


@pytest.fixture
def drawer_k(drawer):
    return serialize_description(drawer)


class ScriptedClient:
    """Replies from a fixed list and records every prompt it sees."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.prompts = []

    def complete(self, prompt):
        self.prompts.append(prompt)
        return self.replies.pop(0)


def test_stage1_prompt_contract(drawer_k):
    p = build_stage1_prompt("open the drawer", drawer_k)
    assert drawer_k.text.rstrip() in p
    assert STAGE1_MARKER in p and "open the drawer" in p
    assert "copy" in p
    assert p == build_stage1_prompt("open the drawer", drawer_k)
    with pytest.raises(PromptError):
        build_stage1_prompt("  ", drawer_k)


def test_stage2_prompt_contract(demos, drawer_k):
    p = build_stage2_prompt("1. Locate the handle.", demos, drawer_k, "open the drawer")
    assert STAGE2_MARKER in p
    for verb in ("move(x, y, z)", "grasp()", "release()", "rotate_cw()", "rotate_ccw()"):
        assert verb in p
    positions = [p.index(f"=== Demonstration {i} ===") for i in range(1, 18)]
    assert positions == sorted(positions)
    assert "=== Demonstration 18 ===" not in p
    for d, pos in zip(demos, positions):
        # store order, actions in canonical text
        assert p.index(emit_actions(d.actions), pos) > pos
    assert p.rindex(CURRENT_MARKER) > positions[-1]
    assert p.endswith("Waypoints:\n")
    with pytest.raises(PromptError):
        build_stage2_prompt("1. x", [], drawer_k, "open the drawer")


def test_task_block_round_trip():
    task = ManipulationTask("lay down the strap", -1.5708, push=False)
    assert parse_task("noise\n" + render_task(task) + "\nmore") == task
    push = ManipulationTask("turn on the button", 0.02, push=True)
    assert parse_task(render_task(push)) == push
    with pytest.raises(PromptError):
        parse_task("nothing here")


def test_description_properties(drawer_k):
    props = dict(description_properties(drawer_k))
    assert props["object.joint.axis"] == "(1.0000, 0.0000, 0.0000)"
    assert props["object.contact.position"] == "(0.3000, 0.0000, 0.5000)"
    assert props["object.joint.limit.upper"] == "0.4000"


def test_alignment_examples(drawer_k):
    seq = parse_sequence_plan("1. grasp the handle at (0.3000, 0.0000, 0.5000)", drawer_k)
    assert seq.cited == [("object.contact.position", "(0.3000, 0.0000, 0.5000)")]
    with pytest.raises(AlignmentError) as exc:
        parse_sequence_plan("1. slide along axis (0.0000, 1.0000, 0.0000)", drawer_k)
    assert exc.value.value == "(0.0000, 1.0000, 0.0000)" and exc.value.step == 1
    with pytest.raises(EmptyPlan):
        parse_sequence_plan("", drawer_k)
    with pytest.raises(EmptyPlan):
        parse_sequence_plan("   \n", drawer_k)


def test_alignment_accepts_other_decimal_forms(drawer_k):
    seq = parse_sequence_plan("- pull along [1, 0, 0.0] up to 0.4 m.\n- release", drawer_k)
    assert ("object.joint.axis", "(1.0000, 0.0000, 0.0000)") in seq.cited
    assert ("object.joint.limit.upper", "0.4000") in seq.cited
    assert len(seq.steps) == 2


def test_uncited_scalars_are_recorded_not_rejected(drawer_k):
    seq = parse_sequence_plan("1. pull by 0.25 m in 5 waypoints", drawer_k)
    assert seq.steps[0].numbers == ("0.2500", "5.0000")
    assert seq.cited == []


def test_waypoint_response_parsing():
    reply = "Here is the plan:\n```\nmove(0.1, 0.2, 0.3)\ngrasp()\nrelease()\n```\nDone."
    assert len(parse_waypoint_response(reply)) == 3
    listed = "1. move(0, 0, 0);\n2. grasp()\n- rotate_ccw()\n* release()"
    assert len(parse_waypoint_response(listed)) == 4
    with pytest.raises(NoActionsFound):
        parse_waypoint_response("I would open the drawer by pulling it.")
    with pytest.raises(SequenceError):
        parse_waypoint_response("move(0, 0, 0)\nrotate_cw()")


def test_mock_pipeline_matches_oracle_on_benchmark(demos):
    client = MockOracleClient()
    n = 0
    for cat in CATEGORIES:
        for seed in range(3):
            obj, tasks = generate_instance(cat, seed)
            for task in tasks:
                posed = object_for_task(obj, task)
                got = plan_with_llm(client, posed, task, demos)
                assert emit_actions(got) == emit_actions(plan(posed, task))
                n += 1
    assert n == 87


def test_retry_then_wrapped_error(drawer, demos):
    good_stage1 = "1. Locate the handle at (0.3000, 0.0000, 0.5000)."
    client = ScriptedClient([good_stage1, "no idea", "still no idea"])
    with pytest.raises(StageError) as exc:
        plan_with_llm(client, drawer, ManipulationTask("open the drawer", 0.3), demos)
    assert exc.value.stage == "stage2"
    assert isinstance(exc.value.cause, NoActionsFound)
    assert len(client.prompts) == 3


def test_retry_recovers(drawer, demos):
    good_stage1 = "1. Locate the handle at (0.3000, 0.0000, 0.5000)."
    client = ScriptedClient(["", good_stage1, "garbage", "move(0.3, 0, 0.5)\ngrasp()\nmove(0.6, 0, 0.5)\nrelease()"])
    seq = plan_with_llm(client, drawer, ManipulationTask("open the drawer", 0.3), demos)
    assert len(seq) == 4 and len(client.prompts) == 4


def test_alignment_gate_stops_before_stage2(drawer, demos):
    fabricated = "1. Grasp the handle at (0.9000, 0.1000, 0.5000)."
    client = ScriptedClient([fabricated, fabricated])
    trace = PipelineTrace()
    with pytest.raises(StageError) as exc:
        plan_with_llm(client, drawer, ManipulationTask("open the drawer", 0.3), demos, trace)
    assert exc.value.stage == "stage1" and isinstance(exc.value.cause, AlignmentError)
    assert all(STAGE2_MARKER not in p for p in client.prompts)
    assert [e.stage for e in trace.exchanges] == ["stage1", "stage1"]


def test_client_exception_is_wrapped_without_retry(drawer, demos):
    class Boom:
        calls = 0

        def complete(self, prompt):
            Boom.calls += 1
            raise ConnectionError("down")

    with pytest.raises(StageError) as exc:
        plan_with_llm(Boom(), drawer, ManipulationTask("open the drawer", 0.3), demos)
    assert exc.value.stage == "stage1" and Boom.calls == 1


def test_demo_store(demos, tmp_path):
    assert len(demos) == 17
    assert {d.category for d in demos} == set(SEEN)
    assert sum(d.index == 1 for d in demos) == 3
    for d in demos:
        d.check()
        values = {v for _, v in description_properties(d.description)}
        for _, v in parse_sequence_plan(d.sequence_plan, d.description).cited:
            assert v in values
    generate_demo_store(out_dir=tmp_path / "a")
    generate_demo_store(out_dir=tmp_path / "b")
    files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files_a == sorted(d.filename for d in demos)
    for name in files_a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    loaded = load_demo_store(tmp_path / "a")
    assert [d.to_json() for d in loaded] == [d.to_json() for d in demos]
    assert [d.filename for d in loaded] == [d.filename for d in demos]


def test_demo_file_schema(demos):
    data = demos[0].to_json()
    assert set(data) == {"description", "instruction", "sequence_plan", "actions"}
    assert Demonstration.from_json(json.loads(json.dumps(data)), demos[0].filename) == demos[0]


def test_demo_store_rejects_unseen():
    with pytest.raises(ValueError):
        generate_demo_store(categories=["door"])


def test_demo_check_rejects_fabricated(demos):
    d = demos[0]
    bad = Demonstration(d.description, d.instruction, "1. go to (9.0000, 9.0000, 9.0000)", d.actions)
    with pytest.raises(AlignmentError):
        bad.check()


def test_golden_prompts(demos):
    obj, tasks = generate_instance("door", 0)
    task = tasks[0]
    posed = object_for_task(obj, task)
    k = serialize_description(posed)
    instruction = render_task(task)
    p1 = build_stage1_prompt(instruction, k)
    stage1 = MockOracleClient().complete(p1)
    p2 = build_stage2_prompt(stage1, demos, k, instruction)
    assert p1 == (GOLDEN / "stage1_door_open.txt").read_text(encoding="utf-8")
    assert p2 == (GOLDEN / "stage2_door_open.txt").read_text(encoding="utf-8")


def test_twist_sequence_plan_mentions_turns():
    obj, tasks = generate_instance("faucet", 0)
    posed = object_for_task(obj, tasks[1])
    client = MockOracleClient()
    text = client.complete(build_stage1_prompt(render_task(tasks[1]), serialize_description(posed)))
    assert "clockwise 30-degree turns" in text
    assert math.isclose(tasks[1].delta, -tasks[0].delta)
