"""
Textual kinematic description of an articulated object (``.kin.xml``).

The canonical document looks like::

    <object name="drawer">
      <part id="0" name="base"/>
      <part id="1" name="drawer"/>
      <joint type="prismatic" parent="0" child="1">
        <axis x="1.0000" y="0.0000" z="0.0000"/>
        <origin x="0.6000" y="0.0000" z="0.4000"/>
        <limit lower="0.0000" upper="0.4000"/>
        <state value="0.0000"/>
      </joint>
      <contact name="handle">
        <position x="0.6000" y="0.0000" z="0.4000"/>
        <approach x="1.0000" y="0.0000" z="0.0000"/>
      </contact>
    </object>

Reals are always written with four decimals, element and attribute order is
fixed, indentation is two spaces, lines end with LF. ``docs/kin_xml.md`` holds the
grammar.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from xml.parsers import expat
from xml.sax.saxutils import escape

from kinoplan.errors import InvariantViolation, ParseError, SchemaError
from kinoplan.kinematics import (
    UNIT_TOL,
    ArticulatedObject,
    ContactPoint,
    JointType,
    KinematicJoint,
    Vec3,
)

DECIMALS = 4
# 4-decimal quantization of a unit vector moves its norm by at most ~1e-4;
# larger deviations are reported
QUANTIZATION_TOL = 5e-4


def fmt(value: float) -> str:
    s = f"{value:.{DECIMALS}f}"
    return "0.0000" if s == "-0.0000" else s


def fmt_vec(v) -> str:
    return "(" + ", ".join(fmt(c) for c in v) + ")"


def _normalized(values: tuple[float, float, float]) -> tuple[float, float, float]:
    n = math.sqrt(sum(c * c for c in values))
    if abs(n - 1.0) <= UNIT_TOL:
        return values
    return tuple(c / n for c in values)


def _stable_unit_text(v: Vec3) -> tuple[str, str, str]:
    """Four-decimal text for a unit vector that survives parse-normalize-print.

    Printing ``v`` rounded can yield digits whose normalization rounds
    differently; among the lattice neighbours of the rounded vector pick the one
    closest to ``v`` that is a fixed point.
    """
    base = [round(c, DECIMALS) for c in v]
    step = 10.0 ** -DECIMALS
    best = None
    for reach in (1, 2):
        offsets = range(-reach, reach + 1)
        for dx, dy, dz in itertools.product(offsets, offsets, offsets):
            cand = tuple(fmt(b + d * step) for b, d in zip(base, (dx, dy, dz)))
            values = tuple(float(c) for c in cand)
            if sum(c * c for c in values) == 0.0:
                continue
            if tuple(fmt(c) for c in _normalized(values)) != cand:
                continue
            dist = sum((a - b) ** 2 for a, b in zip(values, v))
            if best is None or dist < best[0]:
                best = (dist, cand)
        if best is not None:
            return best[1]
    return tuple(fmt(c) for c in v)


@dataclass(frozen=True)
class KinematicDescription:
    """A canonical ``.kin.xml`` document."""

    text: str

    def __str__(self) -> str:
        return self.text


def _attr(value: str) -> str:
    for ch in value:
        if ord(ch) < 0x20:
            raise InvariantViolation(f"control character in name {value!r}")
    return escape(value, {'"': "&quot;"})


def _vec_elem(tag: str, xyz) -> str:
    x, y, z = xyz
    return f'<{tag} x="{x}" y="{y}" z="{z}"/>'


def serialize_description(obj: ArticulatedObject) -> KinematicDescription:
    obj.validate()
    j, c = obj.joint, obj.contact
    if j.joint_type is JointType.FIXED:
        raise InvariantViolation("cannot describe an object without an actuated joint")
    for label, v in (("joint axis", j.axis), ("contact approach", c.approach)):
        if abs(v.norm() - 1.0) > UNIT_TOL:
            raise InvariantViolation(f"{label} is not unit length (norm {v.norm():.12g})")
    lines = [f'<object name="{_attr(obj.name)}">']
    for pid, pname in obj.parts:
        lines.append(f'  <part id="{pid}" name="{_attr(pname)}"/>')
    lines += [
        f'  <joint type="{j.joint_type.value}" parent="0" child="1">',
        "    " + _vec_elem("axis", _stable_unit_text(j.axis)),
        "    " + _vec_elem("origin", [fmt(v) for v in j.origin]),
        f'    <limit lower="{fmt(j.lower)}" upper="{fmt(j.upper)}"/>',
        f'    <state value="{fmt(j.state)}"/>',
        "  </joint>",
        f'  <contact name="{_attr(c.name)}">',
        "    " + _vec_elem("position", [fmt(v) for v in c.position]),
        "    " + _vec_elem("approach", _stable_unit_text(c.approach)),
        "  </contact>",
        "</object>",
    ]
    return KinematicDescription("\n".join(lines) + "\n")


# -- parsing ------------------------------------------------------------------


class Severity(str, Enum):
    ERROR = "Error"
    WARNING = "Warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    line: int
    message: str
    # tag the problem is about; for a missing element, the missing tag
    element: str | None = None


class Diagnostics(list):
    """List of :class:`Diagnostic`; a document parses iff it holds no errors."""

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self if d.severity is Severity.ERROR]

    @property
    def warnings(self) -> list[Diagnostic]:
        return [d for d in self if d.severity is Severity.WARNING]

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass
class _Node:
    tag: str
    attrib: dict[str, str]
    line: int
    children: list["_Node"]


def _build_tree(text: str) -> _Node:
    parser = expat.ParserCreate()
    root: list[_Node] = []
    stack: list[_Node] = []

    def start(tag, attrs):
        node = _Node(tag, dict(attrs), parser.CurrentLineNumber, [])
        if stack:
            stack[-1].children.append(node)
        else:
            root.append(node)
        stack.append(node)

    def end(tag):
        stack.pop()

    def no_doctype(*args):
        raise ParseError("DOCTYPE declarations are not allowed", parser.CurrentLineNumber)

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.StartDoctypeDeclHandler = no_doctype
    try:
        parser.Parse(text, True)
    except expat.ExpatError as exc:
        raise ParseError(expat.ErrorString(exc.code), exc.lineno) from None
    except (ValueError, UnicodeError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"unreadable document: {exc}") from None
    return root[0]


class _Analyzer:
    """Walks a parsed tree, collecting every problem it finds."""

    def __init__(self):
        self.diags = Diagnostics()

    def error(self, node: _Node | int, message: str, element: str | None = None) -> None:
        if isinstance(node, int):
            line = node
        else:
            line, element = node.line, element or node.tag
        self.diags.append(Diagnostic(Severity.ERROR, line, message, element))

    def warn(self, node: _Node, message: str) -> None:
        self.diags.append(Diagnostic(Severity.WARNING, node.line, message, node.tag))

    def one(self, parent: _Node, tag: str, where: str) -> _Node | None:
        found = [c for c in parent.children if c.tag == tag]
        if not found:
            self.error(parent, f"missing required element <{tag}> in {where}", tag)
            return None
        if len(found) > 1:
            self.error(found[1], f"duplicate {tag}")
        return found[0]

    def number(self, node: _Node, key: str) -> float | None:
        raw = node.attrib.get(key)
        if raw is None:
            self.error(node, f"<{node.tag}> is missing attribute {key!r}")
            return None
        try:
            value = float(raw.strip())
        except ValueError:
            self.error(node, f"<{node.tag}> attribute {key}={raw!r} is not a number")
            return None
        if not math.isfinite(value):
            self.error(node, f"<{node.tag}> attribute {key}={raw!r} is not finite")
            return None
        return value

    def vector(self, node: _Node | None) -> tuple[float, float, float] | None:
        if node is None:
            return None
        xyz = [self.number(node, k) for k in ("x", "y", "z")]
        if any(v is None for v in xyz):
            return None
        return tuple(xyz)

    def unit(self, node: _Node | None) -> tuple[float, float, float] | None:
        v = self.vector(node)
        if v is None:
            return None
        n = math.sqrt(sum(c * c for c in v))
        if n <= 1e-12:
            self.error(node, f"<{node.tag}> is a zero vector")
            return None
        if abs(n - 1.0) > QUANTIZATION_TOL:
            self.warn(node, f"<{node.tag}> is not unit length (norm {n:.6g}); normalized")
        return _normalized(v)

    def unknown_children(self, node: _Node, known: set[str]) -> None:
        for child in node.children:
            if child.tag not in known:
                self.warn(child, f"unknown element <{child.tag}> ignored")

    def analyze(self, root: _Node) -> ArticulatedObject | None:
        if root.tag != "object":
            self.error(root, f"root element must be <object>, found <{root.tag}>")
            return None
        name = root.attrib.get("name", "")
        if not name:
            self.error(root, "<object> needs a non-empty name attribute")
        self.unknown_children(root, {"part", "joint", "contact"})

        parts = self.parts(root)
        joint = self.joint(self.one(root, "joint", "<object>"))
        contact = self.contact(self.one(root, "contact", "<object>"))

        if self.diags.errors or None in (parts, joint, contact):
            return None
        try:
            return ArticulatedObject(name=name, parts=parts, joint=joint, contact=contact)
        except InvariantViolation as exc:
            self.error(root, str(exc))
            return None

    def parts(self, root: _Node):
        found = [c for c in root.children if c.tag == "part"]
        by_id: dict[int, str] = {}
        for node in found:
            raw = node.attrib.get("id")
            try:
                pid = int(raw) if raw is not None else None
            except ValueError:
                pid = None
            if pid not in (0, 1):
                self.error(node, f"<part> id must be 0 or 1, got {raw!r}")
                continue
            if pid in by_id:
                self.error(node, f"duplicate part id {pid}")
                continue
            pname = node.attrib.get("name", "")
            if not pname:
                self.error(node, "<part> needs a non-empty name attribute")
            by_id[pid] = pname
        for pid in (0, 1):
            if pid not in by_id:
                self.error(root, f"missing required element <part id=\"{pid}\">", "part")
        if len(by_id) != 2:
            return None
        return ((0, by_id[0]), (1, by_id[1]))

    def joint(self, node: _Node | None) -> KinematicJoint | None:
        if node is None:
            return None
        raw_type = node.attrib.get("type")
        try:
            jtype = JointType(raw_type)
        except ValueError:
            self.error(node, f"unknown joint type {raw_type!r}")
            jtype = None
        if jtype is JointType.FIXED:
            self.error(node, "joint must be revolute or prismatic")
            jtype = None
        for key, expected in (("parent", "0"), ("child", "1")):
            raw = node.attrib.get(key)
            if raw is None or raw.strip() != expected:
                self.error(node, f"joint {key} must be {expected!r}, got {raw!r}")
        self.unknown_children(node, {"axis", "origin", "limit", "state"})
        axis = self.unit(self.one(node, "axis", "<joint>"))
        origin = self.vector(self.one(node, "origin", "<joint>"))
        limit = self.one(node, "limit", "<joint>")
        lower = upper = state = None
        if limit is not None:
            lower, upper = self.number(limit, "lower"), self.number(limit, "upper")
            if lower is not None and upper is not None and lower > upper:
                self.error(limit, f"joint limits inverted: lower={lower} > upper={upper}")
                lower = upper = None
        state_node = self.one(node, "state", "<joint>")
        if state_node is not None:
            state = self.number(state_node, "value")
            if state is not None and lower is not None and upper is not None:
                if not (lower <= state <= upper):
                    self.error(state_node, f"joint state {state} outside limits [{lower}, {upper}]")
                    state = None
        if None in (jtype, axis, origin, lower, upper, state):
            return None
        return KinematicJoint(jtype, Vec3(*axis), Vec3(*origin), lower, upper, state)

    def contact(self, node: _Node | None) -> ContactPoint | None:
        if node is None:
            return None
        name = node.attrib.get("name", "")
        if not name:
            self.error(node, "<contact> needs a non-empty name attribute")
        self.unknown_children(node, {"position", "approach"})
        position = self.vector(self.one(node, "position", "<contact>"))
        approach = self.unit(self.one(node, "approach", "<contact>"))
        if not name or position is None or approach is None:
            return None
        return ContactPoint(name, Vec3(*position), Vec3(*approach))


def _analyze(text: str) -> tuple[ArticulatedObject | None, Diagnostics]:
    if not isinstance(text, str):
        raise TypeError(f"expected str, got {type(text).__name__}")
    root = _build_tree(text)
    analyzer = _Analyzer()
    obj = analyzer.analyze(root)
    return obj, analyzer.diags


def parse_description(text: str | KinematicDescription) -> ArticulatedObject:
    """Parse a ``.kin.xml`` document.

    Raises:
        ParseError: the document is not well-formed XML.
        SchemaError: a required element is missing or duplicated, the joint
            type is unknown, limits are inverted, or a value is malformed.
    """
    if isinstance(text, KinematicDescription):
        text = text.text
    obj, diags = _analyze(text)
    if diags.errors:
        first = diags.errors[0]
        raise SchemaError(first.message, first.line, first.element)
    assert obj is not None
    return obj


def validate_description(text: str | KinematicDescription) -> Diagnostics:
    if isinstance(text, KinematicDescription):
        text = text.text
    try:
        _, diags = _analyze(text)
    except ParseError as exc:
        return Diagnostics([Diagnostic(Severity.ERROR, exc.line or 0, str(exc))])
    return diags


def canonicalize(obj: ArticulatedObject) -> ArticulatedObject:
    """The object exactly as it reads back from its own description."""
    return parse_description(serialize_description(obj))
