"""
Two-stage prompting: a textual manipulation sequence first, then DSL waypoints.

Stage 1 shows the model the task and the object's kinematic description and asks
for numbered steps that copy any property they mention straight out of the
description. Those steps are checked against the description before stage 2 runs:
a coordinate triple that is not in the description is rejected as fabricated.
Stage 2 adds the demonstration store as in-context examples and asks for the
plan in the five-verb action language.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence, TypeVar

from kinoplan.actions import (
    ActionSequence,
    Move,
    RotateCCW,
    RotateCW,
    emit_actions,
    parse_actions,
    parse_line,
)
from kinoplan.dataset import SEEN, generate_instance, instruction_slug, object_for_task
from kinoplan.description import (
    KinematicDescription,
    _build_tree,
    fmt,
    serialize_description,
)
from kinoplan.errors import (
    AlignmentError,
    EmptyPlan,
    GrammarError,
    InvariantViolation,
    KinoplanError,
    NoActionsFound,
    PromptError,
    StageError,
)
from kinoplan.kinematics import ArticulatedObject, JointType, ManipulationMode, axis_distance
from kinoplan.oracle import ManipulationTask, PlannerConfig, plan

STAGE1_MARKER = "Step 1 of 2: manipulation sequence planning."
STAGE2_MARKER = "Step 2 of 2: manipulation waypoint generation."
CURRENT_MARKER = "=== Current task ==="

_HEADER = "You are planning how a robot arm manipulates an articulated object."

STAGE1_PREAMBLE = f"""{_HEADER}
{STAGE1_MARKER}

The kinematic description lists the object's parts, its joint (type, axis,
origin, limits and current state) and the contact point the gripper should use.
Write a numbered list of manipulation steps. Each step should name the kinematic
components it relies on, such as the contact and the joint. When a step refers
to a component, copy that component's properties (coordinates, axis direction,
limits) exactly as written in the description, four decimals included. Never
write a coordinate that does not appear in the description.
"""

STAGE2_PREAMBLE = f"""{_HEADER}
{STAGE2_MARKER}

Control the gripper with these five commands, one per line:
move(x, y, z)   move the gripper to position (x, y, z), in meters
grasp()         close the gripper
release()       open the gripper
rotate_cw()     turn the gripper clockwise by 30 degrees about the joint axis
rotate_ccw()    turn the gripper counter-clockwise by 30 degrees about the joint axis

Each example below gives a task, the kinematic description of the object, its
manipulation sequence and the resulting commands. Produce the commands for the
current task by following its manipulation sequence.
"""

STAGE2_REQUEST = "Reply with the commands only, one per line, four decimals per coordinate."


class LlmClient(Protocol):
    def complete(self, prompt: str) -> str: ...


# -- task text ----------------------------------------------------------------


def render_task(task: ManipulationTask) -> str:
    """The instruction as the model sees it, with the commanded displacement."""
    interaction = "push" if task.push else "grasp"
    return (
        f"Instruction: {task.instruction.strip()}\n"
        f"Joint displacement: {fmt(task.delta)}\n"
        f"Contact interaction: {interaction}"
    )


_TASK_RE = re.compile(
    r"Instruction:[ \t]*(?P<instruction>[^\n]+)\n"
    r"Joint displacement:[ \t]*(?P<delta>\S+)\n"
    r"Contact interaction:[ \t]*(?P<mode>push|grasp)"
)


def parse_task(text: str) -> ManipulationTask:
    """Inverse of :func:`render_task`; uses the last task block in ``text``."""
    matches = list(_TASK_RE.finditer(text))
    if not matches:
        raise PromptError("no task block found")
    m = matches[-1]
    try:
        delta = float(m.group("delta"))
        return ManipulationTask(m.group("instruction").strip(), delta, push=m.group("mode") == "push")
    except (ValueError, InvariantViolation) as exc:
        raise PromptError(f"bad task block: {exc}") from None


def extract_description(text: str) -> KinematicDescription:
    """The last ``<object>...</object>`` document embedded in a prompt."""
    end = text.rfind("</object>")
    start = text.rfind("<object", 0, end)
    if start < 0 or end < 0:
        raise PromptError("no kinematic description found")
    return KinematicDescription(text[start : end + len("</object>")] + "\n")


# -- description properties ---------------------------------------------------

_VECTOR_TAGS = ("axis", "origin", "position", "approach")


def description_properties(k: KinematicDescription | str) -> list[tuple[str, str]]:
    """Every numeric property of a description as ``(name, text)``.

    Vectors appear both whole, as ``"(x, y, z)"``, and per component.
    """
    text = k.text if isinstance(k, KinematicDescription) else k
    root = _build_tree(text)
    props: list[tuple[str, str]] = []

    def walk(node, path):
        here = f"{path}.{node.tag}" if path else node.tag
        if node.tag in _VECTOR_TAGS and all(c in node.attrib for c in "xyz"):
            try:
                triple = tuple(fmt(float(node.attrib[c])) for c in "xyz")
            except ValueError:
                triple = None
            if triple:
                props.append((here, "(" + ", ".join(triple) + ")"))
        for key, raw in node.attrib.items():
            try:
                value = float(raw)
            except ValueError:
                continue
            if math.isfinite(value) and key not in ("id", "parent", "child"):
                props.append((f"{here}.{key}", fmt(value)))
        for child in node.children:
            walk(child, here)

    walk(root, "")
    return props


# -- stage 1 -------------------------------------------------------------------


def build_stage1_prompt(instruction: str, k: KinematicDescription) -> str:
    if not instruction or not instruction.strip():
        raise PromptError("instruction must be non-empty")
    return (
        f"{STAGE1_PREAMBLE}\n"
        f"Task:\n{instruction.strip()}\n\n"
        f"Kinematic description:\n{k.text.rstrip()}\n\n"
        f"Manipulation sequence:\n"
    )


@dataclass(frozen=True)
class PlanStep:
    text: str
    cited_properties: tuple[tuple[str, str], ...]
    numbers: tuple[str, ...] = ()


@dataclass(frozen=True)
class ManipulationSequence:
    steps: tuple[PlanStep, ...]

    @property
    def cited(self) -> list[tuple[str, str]]:
        return [p for s in self.steps for p in s.cited_properties]


_STEP_RE = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s+(.*\S)\s*$")
_NUM = r"[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?"
_TRIPLE_RE = re.compile(rf"[(\[]\s*({_NUM})\s*,\s*({_NUM})\s*,\s*({_NUM})\s*[)\]]")
_SCALAR_RE = re.compile(rf"(?<![\w.]){_NUM}(?!\w|\.\d)")


def _split_steps(text: str) -> list[str]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("```")]
    if not any(_STEP_RE.match(ln) for ln in lines):
        return [ln.strip() for ln in lines]
    steps: list[str] = []
    for ln in lines:
        m = _STEP_RE.match(ln)
        if m:
            steps.append(m.group(1))
        elif steps:
            steps[-1] += " " + ln.strip()
    return steps


def _four(token: str) -> str | None:
    try:
        value = float(token)
    except ValueError:
        return None
    return fmt(value) if math.isfinite(value) else None


def parse_sequence_plan(text: str, k: KinematicDescription) -> ManipulationSequence:
    """Split a stage-1 answer into steps and check the properties it copies.

    Every coordinate triple must be one of the description's vectors; scalar
    numbers are cited when their 4-decimal form is a description value.

    Raises:
        EmptyPlan: no steps.
        AlignmentError: a triple does not occur in the description.
    """
    if not text or not text.strip():
        raise EmptyPlan("manipulation sequence is empty")
    props = description_properties(k)
    vectors: dict[str, str] = {}
    scalars: dict[str, str] = {}
    for name, value in props:
        target = vectors if value.startswith("(") else scalars
        target.setdefault(value, name)

    steps = []
    for index, step_text in enumerate(_split_steps(text), start=1):
        cited: list[tuple[str, str]] = []
        numbers: list[str] = []
        for m in _TRIPLE_RE.finditer(step_text):
            parts = [_four(g) for g in m.groups()]
            value = "(" + ", ".join(p or "?" for p in parts) + ")"
            if value not in vectors:
                raise AlignmentError(
                    f"step {index} cites {m.group(0)!r}, which is not in the kinematic description",
                    value=value,
                    step=index,
                )
            cited.append((vectors[value], value))
            numbers.extend(parts)
        rest = _TRIPLE_RE.sub(" ", step_text)
        for m in _SCALAR_RE.finditer(rest):
            value = _four(m.group(0))
            if value is None:
                continue
            numbers.append(value)
            if value in scalars:
                cited.append((scalars[value], value))
        steps.append(PlanStep(step_text, tuple(cited), tuple(numbers)))
    if not steps:
        raise EmptyPlan("manipulation sequence has no steps")
    return ManipulationSequence(tuple(steps))


def render_sequence_plan(obj: ArticulatedObject, task: ManipulationTask, config: PlannerConfig | None = None) -> str:
    """Template stage-1 answer for the analytic plan; only copies description values."""
    config = config or PlannerConfig()
    k = serialize_description(obj)
    props = dict(description_properties(k))
    seq = plan(obj, task, config)
    joint, contact = obj.joint, obj.contact
    mode = ManipulationMode.LINEAR_PUSH if (task.push and joint.joint_type is JointType.PRISMATIC) else None
    part = obj.parts[1][1]
    position = props["object.contact.position"]
    approach = props["object.contact.approach"]
    axis = props["object.joint.axis"]
    origin = props["object.joint.origin"]
    lower, upper = props["object.joint.limit.lower"], props["object.joint.limit.upper"]
    delta = fmt(task.delta)
    moves = sum(isinstance(a, Move) for a in seq) - 2

    where = contact.name if contact.name == part else f"{contact.name} of the {part}"
    steps = [
        f"Locate the {where} at {position}.",
        f"Move the gripper in front of the {contact.name} along the approach direction {approach}, "
        f"then onto the {contact.name} at {position}.",
    ]
    if mode is ManipulationMode.LINEAR_PUSH:
        steps.append(
            f"Without grasping, push the {contact.name} along the prismatic joint axis {axis} "
            f"by {delta} m in {moves} waypoint(s), staying within the joint limits [{lower}, {upper}]."
        )
    else:
        steps.append(f"Close the gripper on the {contact.name}.")
        if any(isinstance(a, (RotateCW, RotateCCW)) for a in seq):
            turns = sum(isinstance(a, (RotateCW, RotateCCW)) for a in seq)
            sense = "counter-clockwise" if task.delta > 0 else "clockwise"
            steps.append(
                f"Twist the {contact.name} about the revolute joint axis {axis} through {origin} "
                f"by {delta} rad with {turns} {sense} 30-degree turns, "
                f"staying within the joint limits [{lower}, {upper}]."
            )
        elif joint.joint_type is JointType.REVOLUTE:
            radius = fmt(axis_distance(joint, contact.position))
            steps.append(
                f"Swing the {part} about the revolute joint axis {axis} through {origin} by {delta} rad, "
                f"keeping the {contact.name} on the circle of radius {radius} m around the axis, "
                f"in {moves} waypoints within the joint limits [{lower}, {upper}]."
            )
        else:
            steps.append(
                f"Slide the {part} along the prismatic joint axis {axis} by {delta} m "
                f"in {moves} waypoint(s), staying within the joint limits [{lower}, {upper}]."
            )
        steps.append("Release the gripper.")
    return "\n".join(f"{i}. {s}" for i, s in enumerate(steps, start=1))


# -- demonstrations -------------------------------------------------------------


@dataclass(frozen=True)
class Demonstration:
    description: KinematicDescription
    instruction: str
    sequence_plan: str
    actions: ActionSequence
    category: str = ""
    slug: str = ""
    index: int = 0

    @property
    def filename(self) -> str:
        return f"{self.category}_{self.slug}_{self.index}.demo.json"

    def check(self) -> None:
        """Raise unless the actions are valid and the plan only copies real properties."""
        self.actions.validate()
        seq = parse_sequence_plan(self.sequence_plan, self.description)
        values = {v for _, v in description_properties(self.description)}
        for _, value in seq.cited:
            if value not in values:
                raise AlignmentError(f"cited value {value} not in description", value=value)

    def to_json(self) -> dict:
        return {
            "description": self.description.text,
            "instruction": self.instruction,
            "sequence_plan": self.sequence_plan,
            "actions": emit_actions(self.actions),
        }

    @classmethod
    def from_json(cls, data: dict, filename: str = "") -> "Demonstration":
        stem = filename.removesuffix(".demo.json")
        category, _, rest = stem.partition("_")
        slug, _, index = rest.rpartition("_")
        return cls(
            KinematicDescription(data["description"]),
            data["instruction"],
            data["sequence_plan"],
            parse_actions(data["actions"]),
            category,
            slug,
            int(index) if index.isdigit() else 0,
        )


# base demos: one per seen instruction; these three get a second, re-posed copy
EXTRA_DEMOS = (("drawer", 0), ("oven", 0), ("safe", 0))
DEMO_SEED = 1000


def make_demonstration(
    obj: ArticulatedObject, task: ManipulationTask, config: PlannerConfig | None = None, index: int = 0
) -> Demonstration:
    config = config or PlannerConfig()
    demo = Demonstration(
        serialize_description(obj),
        render_task(task),
        render_sequence_plan(obj, task, config),
        plan(obj, task, config),
        obj.name,
        instruction_slug(task.instruction),
        index,
    )
    demo.check()
    return demo


def generate_demo_store(
    categories: Sequence[str] = SEEN,
    config: PlannerConfig | None = None,
    seed: int = DEMO_SEED,
    out_dir: str | Path | None = None,
) -> list[Demonstration]:
    """Build (and optionally write) the demonstration store.

    The eight seen categories give 14 instructions; three of them get a second
    instance with a different pose, for 17 demonstrations in all.
    """
    config = config or PlannerConfig()
    unknown = [c for c in categories if c not in SEEN]
    if unknown:
        raise ValueError(f"demonstrations only come from seen categories, got {unknown}")
    demos: list[Demonstration] = []
    for name in categories:
        obj, tasks = generate_instance(name, seed)
        for task in tasks:
            demos.append(make_demonstration(object_for_task(obj, task), task, config, 0))
    for name, which in EXTRA_DEMOS:
        if name not in categories:
            continue
        obj, tasks = generate_instance(name, seed + 1)
        task = tasks[which]
        demos.append(make_demonstration(object_for_task(obj, task), task, config, 1))
    demos.sort(key=lambda d: d.filename)
    if out_dir is not None:
        write_demo_store(demos, out_dir)
    return demos


def write_demo_store(demos: Sequence[Demonstration], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for demo in demos:
        path = out / demo.filename
        path.write_text(json.dumps(demo.to_json(), indent=2) + "\n", encoding="utf-8")
        paths.append(path)
    return paths


def load_demo_store(directory: str | Path) -> list[Demonstration]:
    paths = sorted(Path(directory).glob("*.demo.json"))
    return [Demonstration.from_json(json.loads(p.read_text(encoding="utf-8")), p.name) for p in paths]


# -- stage 2 -------------------------------------------------------------------


def _block(title: str, task_text: str, k: KinematicDescription, sequence: str, actions: str | None) -> str:
    body = (
        f"=== {title} ===\n"
        f"Task:\n{task_text.strip()}\n\n"
        f"Kinematic description:\n{k.text.rstrip()}\n\n"
        f"Manipulation sequence:\n{sequence.strip()}\n\n"
        f"Waypoints:\n"
    )
    if actions is not None:
        body += actions.strip() + "\n"
    return body


def build_stage2_prompt(
    stage1_output: str, demos: Sequence[Demonstration], k: KinematicDescription, instruction: str
) -> str:
    if not demos:
        raise PromptError("stage 2 needs at least one demonstration")
    if not instruction or not instruction.strip():
        raise PromptError("instruction must be non-empty")
    blocks = [
        _block(f"Demonstration {i}", d.instruction, d.description, d.sequence_plan, emit_actions(d.actions))
        for i, d in enumerate(demos, start=1)
    ]
    current = _block(CURRENT_MARKER.strip("= "), instruction, k, stage1_output, None)
    return STAGE2_PREAMBLE + "\n" + "\n".join(blocks) + "\n" + STAGE2_REQUEST + "\n\n" + current


_LIST_PREFIX = re.compile(r"^(?:\d+[.)]|[-*•])\s+")


def parse_waypoint_response(text: str) -> ActionSequence:
    """Pull the DSL lines out of a model reply, ignoring prose and code fences."""
    kept = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        candidate = _LIST_PREFIX.sub("", line.strip().strip("`").strip()).rstrip(";").strip()
        if not candidate or candidate.startswith("#"):
            continue
        try:
            if parse_line(candidate, lineno) is not None:
                kept.append(candidate)
        except GrammarError:
            continue
    if not kept:
        raise NoActionsFound("reply contains no action commands")
    return parse_actions("\n".join(kept))


# -- pipeline ----------------------------------------------------------------------

T = TypeVar("T")


@dataclass
class Exchange:
    stage: str
    prompt: str
    response: str


@dataclass
class PipelineTrace:
    exchanges: list[Exchange] = field(default_factory=list)


def _run_stage(
    stage: str,
    client: LlmClient,
    prompt: str,
    parse: Callable[[str], T],
    trace: PipelineTrace | None,
    attempts: int = 2,
) -> tuple[str, T]:
    last: Exception | None = None
    for _ in range(attempts):
        try:
            response = client.complete(prompt)
        except Exception as exc:
            raise StageError(stage, exc) from exc
        if trace is not None:
            trace.exchanges.append(Exchange(stage, prompt, response))
        try:
            return response, parse(response)
        except KinoplanError as exc:
            last = exc
    assert last is not None
    raise StageError(stage, last) from last


def plan_with_llm(
    client: LlmClient,
    obj: ArticulatedObject,
    task: ManipulationTask,
    demos: Sequence[Demonstration],
    trace: PipelineTrace | None = None,
) -> ActionSequence:
    """Description, stage 1, alignment gate, stage 2, DSL parse.

    Each stage is retried once when its reply fails to parse; the error that
    ends the attempt is wrapped in :class:`StageError` naming the stage.
    """
    if not demos:
        raise PromptError("no demonstrations loaded")
    k = serialize_description(obj)
    instruction = render_task(task)
    p1 = build_stage1_prompt(instruction, k)
    stage1_text, _ = _run_stage("stage1", client, p1, lambda t: parse_sequence_plan(t, k), trace)
    p2 = build_stage2_prompt(stage1_text, demos, k, instruction)
    _, seq = _run_stage("stage2", client, p2, parse_waypoint_response, trace)
    return seq

