"""
The five-verb action language shared by planners and the simulator.

One action per line::

    move(<real>, <real>, <real>)
    grasp()
    release()
    rotate_cw()
    rotate_ccw()

``#`` starts a comment line; blank lines are skipped; whitespace inside the
parentheses is free. Each rotate turns the gripper by exactly 30 degrees.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Union

from kinoplan.description import fmt
from kinoplan.errors import GrammarError, SequenceError
from kinoplan.kinematics import Vec3

ROTATE_STEP = math.radians(30.0)


@dataclass(frozen=True, slots=True)
class Move:
    target: Vec3


@dataclass(frozen=True, slots=True)
class Grasp:
    pass


@dataclass(frozen=True, slots=True)
class Release:
    pass


@dataclass(frozen=True, slots=True)
class RotateCW:
    pass


@dataclass(frozen=True, slots=True)
class RotateCCW:
    pass


Action = Union[Move, Grasp, Release, RotateCW, RotateCCW]
Waypoint = Vec3

_VERBS = {
    "grasp": Grasp,
    "release": Release,
    "rotate_cw": RotateCW,
    "rotate_ccw": RotateCCW,
}

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_MOVE_RE = re.compile(rf"^move\(\s*({_NUM})\s*,\s*({_NUM})\s*,\s*({_NUM})\s*\)$")
_NULLARY_RE = re.compile(r"^(grasp|release|rotate_cw|rotate_ccw)\(\s*\)$")


def sequence_violation(actions: Iterable[Action]) -> tuple[int, str] | None:
    """First alternation-rule violation as ``(index, reason)``, or None."""
    grasped = False
    moved = False
    for i, act in enumerate(actions):
        match act:
            case Move():
                moved = True
            case Grasp():
                if grasped:
                    return i, "grasp while already grasped"
                if not moved:
                    return i, "grasp before any move"
                grasped = True
            case Release():
                if not grasped:
                    return i, "release while not grasped"
                grasped = False
            case RotateCW() | RotateCCW():
                if not grasped:
                    return i, "rotate before grasp"
            case _:
                return i, f"not an action: {act!r}"
    return None


@dataclass(frozen=True)
class ActionSequence:
    """An ordered plan. Construction does not validate; call :meth:`validate`."""

    actions: tuple[Action, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def validate(self) -> "ActionSequence":
        bad = sequence_violation(self.actions)
        if bad is not None:
            index, reason = bad
            raise SequenceError(f"action {index + 1}: {reason}", index)
        return self

    @property
    def is_valid(self) -> bool:
        return sequence_violation(self.actions) is None


def parse_line(line: str, lineno: int) -> Action | None:
    """Parse a single line; None for blanks and comments."""
    text = line.strip()
    if not text or text.startswith("#"):
        return None
    m = _MOVE_RE.match(text)
    if m:
        values = [float(g) for g in m.groups()]
        if not all(math.isfinite(v) for v in values):
            raise GrammarError(f"move target is not finite: {text!r}", lineno)
        return Move(Vec3(*values))
    m = _NULLARY_RE.match(text)
    if m:
        return _VERBS[m.group(1)]()
    raise GrammarError(f"unrecognized action {text!r}", lineno)


def parse_actions(text: str) -> ActionSequence:
    actions = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        act = parse_line(line, lineno)
        if act is not None:
            actions.append(act)
    return ActionSequence(tuple(actions)).validate()


def _emit_one(act: Action) -> str:
    match act:
        case Move(target=t):
            return f"move({fmt(t.x)}, {fmt(t.y)}, {fmt(t.z)})"
        case Grasp():
            return "grasp()"
        case Release():
            return "release()"
        case RotateCW():
            return "rotate_cw()"
        case RotateCCW():
            return "rotate_ccw()"
    raise TypeError(f"not an action: {act!r}")


def emit_actions(seq: ActionSequence | Iterable[Action]) -> str:
    """Canonical text: one action per line, no trailing newline."""
    return "\n".join(_emit_one(a) for a in seq)


def canonical(seq: ActionSequence) -> ActionSequence:
    """The sequence as it reads back from its canonical text (4-decimal targets)."""
    return parse_actions(emit_actions(seq))


def waypoints_of(seq: ActionSequence) -> list[Waypoint]:
    return [a.target for a in seq if isinstance(a, Move)]
