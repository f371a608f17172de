"""Contact-state algebra, the canonical task set and task-model documents.

A task is either a grasp, a release, or a manipulation that moves the target
object from one contact state to another.  A GMR operation is a grasp, a chain
of manipulations, then a release.  Task models pair each task with the skill
parameters a robot needs to reproduce it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

from .errors import MalformedLabel, NonCanonicalTask, SchemaViolation, ValidationError

Vec3 = tuple[float, float, float]

UNIT_TOL = 1e-9


class ContactState(str, Enum):
    NC = "NC"  # non-contact
    PC = "PC"  # planar contact
    PR = "PR"  # prismatic contact
    OP = "OP"  # one-way prismatic (slider at a limit)
    RV = "RV"  # revolute contact
    OR = "OR"  # one-way revolute (hinge at a limit)

    @classmethod
    def parse(cls, label: str) -> "ContactState":
        try:
            return cls(label)
        except ValueError:
            raise MalformedLabel(f"unknown contact state {label!r}") from None


CANONICAL_PAIRS = frozenset(
    (ContactState(a), ContactState(b))
    for a, b in [
        ("NC", "NC"), ("NC", "PC"), ("PC", "NC"), ("PC", "PC"),
        ("OP", "PR"), ("PR", "OP"), ("PR", "PR"),
        ("OR", "RV"), ("RV", "OR"), ("RV", "RV"),
    ]
)

# Object states in which a grasp may start an operation.
GRASPABLE_STATES = frozenset({ContactState.PC, ContactState.OP, ContactState.OR})


class TaskKind(str, Enum):
    GRASP = "grasp"
    RELEASE = "release"
    MANIPULATION = "manipulation"


@dataclass(frozen=True)
class Task:
    kind: TaskKind
    src: ContactState | None = None
    dst: ContactState | None = None

    def __post_init__(self):
        if self.kind is TaskKind.MANIPULATION:
            if self.src is None or self.dst is None:
                raise MalformedLabel("manipulation task needs both contact states")
            if (self.src, self.dst) not in CANONICAL_PAIRS:
                raise NonCanonicalTask(f"{self.src.value}-{self.dst.value} is not in the task set")
        elif self.src is not None or self.dst is not None:
            raise MalformedLabel(f"{self.kind.value} carries no contact states")

    @classmethod
    def grasp(cls) -> "Task":
        return cls(TaskKind.GRASP)

    @classmethod
    def release(cls) -> "Task":
        return cls(TaskKind.RELEASE)

    @classmethod
    def manip(cls, src, dst) -> "Task":
        return cls(TaskKind.MANIPULATION, ContactState(src), ContactState(dst))

    @property
    def is_manipulation(self) -> bool:
        return self.kind is TaskKind.MANIPULATION

    @property
    def label(self) -> str:
        if self.is_manipulation:
            return f"{self.src.value}-{self.dst.value}"
        return self.kind.value

    def __str__(self):
        return self.label

    def __repr__(self):
        return f"Task({self.label})"


GRASP = Task.grasp()
RELEASE = Task.release()


def canonical_task_set() -> frozenset[Task]:
    """The twelve tasks: grasp, release and the ten contact-state transitions."""
    return frozenset([GRASP, RELEASE] + [Task(TaskKind.MANIPULATION, a, b) for a, b in CANONICAL_PAIRS])


def parse_task_label(label: str) -> Task:
    text = label.strip()
    low = text.lower()
    if low == "grasp":
        return GRASP
    if low == "release":
        return RELEASE
    parts = text.split("-")
    if len(parts) != 2:
        raise MalformedLabel(f"cannot parse task label {label!r}")
    src = ContactState.parse(parts[0].upper())
    dst = ContactState.parse(parts[1].upper())
    return Task(TaskKind.MANIPULATION, src, dst)


def validate_chain(seq: Sequence[Task]) -> None:
    """Raise ValidationError at the first task that breaks the GMR grammar."""
    if not seq:
        raise ValueError("empty task sequence")
    if seq[0] != GRASP:
        raise ValidationError(0, "NotGraspFirst", f"got {seq[0].label}")
    last = len(seq) - 1
    for i in range(1, last):
        task = seq[i]
        if not task.is_manipulation:
            raise ValidationError(i, "NonCanonicalTask", f"{task.label} inside the chain")
        prev = seq[i - 1]
        if prev.is_manipulation and prev.dst != task.src:
            raise ValidationError(i, "ChainBreak", f"{prev.label} then {task.label}")
    if seq[last] != RELEASE:
        raise ValidationError(last, "NotReleaseLast", f"got {seq[last].label}")


class ControlClass(str, Enum):
    POSITION = "PositionGoal"
    FORCE = "ForceGoal"
    HYBRID = "HybridGoal"
    GRASP_RELEASE = "GraspRelease"


def classify_control(task: Task) -> ControlClass:
    if not task.is_manipulation:
        return ControlClass.GRASP_RELEASE
    if task.src == task.dst:
        return ControlClass.POSITION if task.src is ContactState.NC else ControlClass.HYBRID
    return ControlClass.FORCE


class ForceRole(str, Enum):
    DETACHING = "DetachingAxis"
    ATTACHING = "AttachingAxis"
    SURFACE_NORMAL = "SurfaceNormal"
    ORTHOGONAL_PLANE = "OrthogonalPlane"
    RADIAL = "RadialToCenter"


class Hand(str, Enum):
    LEFT = "Left"
    RIGHT = "Right"


def _finite(x: Any, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaViolation(f"{what} must be a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise SchemaViolation(f"{what} must be finite")
    return x


def _vec(v: Any, n: int, what: str) -> tuple:
    try:
        items = list(v)
    except TypeError:
        raise SchemaViolation(f"{what} must be a {n}-vector") from None
    if len(items) != n:
        raise SchemaViolation(f"{what} must have {n} components")
    return tuple(_finite(x, what) for x in items)


def _unit(v: Any, what: str) -> Vec3:
    t = _vec(v, 3, what)
    if abs(math.sqrt(sum(x * x for x in t)) - 1.0) > UNIT_TOL:
        raise SchemaViolation(f"{what} is not unit norm")
    return t


def _set(obj, name, value):
    object.__setattr__(obj, name, value)


@dataclass(frozen=True)
class Waypoints:
    points: tuple[Vec3, ...]

    def __post_init__(self):
        pts = tuple(_vec(p, 3, "waypoint") for p in self.points)
        if len(pts) < 2:
            raise SchemaViolation("waypoints need at least two points")
        _set(self, "points", pts)


@dataclass(frozen=True)
class PlaneTrajectory:
    """Path expressed in the in-plane basis returned by ``plane_basis(normal)``."""

    origin: Vec3
    normal: Vec3
    path2d: tuple[tuple[float, float], ...]

    def __post_init__(self):
        _set(self, "origin", _vec(self.origin, 3, "plane origin"))
        _set(self, "normal", _unit(self.normal, "plane normal"))
        path = tuple(_vec(p, 2, "plane path point") for p in self.path2d)
        if not path:
            raise SchemaViolation("plane trajectory path is empty")
        _set(self, "path2d", path)


@dataclass(frozen=True)
class LineTrajectory:
    origin: Vec3
    direction: Vec3
    displacements: tuple[float, ...]

    def __post_init__(self):
        _set(self, "origin", _vec(self.origin, 3, "line origin"))
        _set(self, "direction", _unit(self.direction, "line direction"))
        d = tuple(_finite(x, "displacement") for x in self.displacements)
        if not d:
            raise SchemaViolation("line trajectory has no displacements")
        _set(self, "displacements", d)


@dataclass(frozen=True)
class CircleTrajectory:
    """Arc traversed counterclockwise about ``axis`` from start to end angle.

    Angles are measured in the basis ``plane_basis(axis)``.
    """

    center: Vec3
    axis: Vec3
    radius: float
    start_angle: float
    end_angle: float

    def __post_init__(self):
        _set(self, "center", _vec(self.center, 3, "circle center"))
        _set(self, "axis", _unit(self.axis, "circle axis"))
        r = _finite(self.radius, "radius")
        if r <= 0:
            raise SchemaViolation("radius must be positive")
        _set(self, "radius", r)
        _set(self, "start_angle", _finite(self.start_angle, "start angle"))
        _set(self, "end_angle", _finite(self.end_angle, "end angle"))


PositionParams = Waypoints | PlaneTrajectory | LineTrajectory | CircleTrajectory


@dataclass(frozen=True)
class ForceParams:
    """Force direction and magnitude.

    ``secondary_axis`` is present only for the OrthogonalPlane role, where the
    force acts in the plane spanned by ``axis`` and ``secondary_axis``.
    """

    axis: Vec3
    magnitude: float
    role: ForceRole
    secondary_axis: Vec3 | None = None

    def __post_init__(self):
        _set(self, "axis", _unit(self.axis, "force axis"))
        m = _finite(self.magnitude, "force magnitude")
        if m <= 0:
            raise SchemaViolation("force magnitude must be positive")
        _set(self, "magnitude", m)
        _set(self, "role", ForceRole(self.role))
        if self.role is ForceRole.ORTHOGONAL_PLANE:
            if self.secondary_axis is None:
                raise SchemaViolation("OrthogonalPlane force needs two axes")
            sec = _unit(self.secondary_axis, "secondary force axis")
            if abs(sum(a * b for a, b in zip(self.axis, sec))) > 1e-9:
                raise SchemaViolation("force plane axes are not orthogonal")
            _set(self, "secondary_axis", sec)
        elif self.secondary_axis is not None:
            raise SchemaViolation(f"{self.role.value} force takes a single axis")


@dataclass(frozen=True)
class GraspParams:
    object_name: str
    object_attribute: str
    grasp_type: str
    hand: Hand
    grasp_location: str

    def __post_init__(self):
        for name in ("object_name", "object_attribute", "grasp_type", "grasp_location"):
            if not isinstance(getattr(self, name), str):
                raise SchemaViolation(f"{name} must be a string")
        if not self.object_name:
            raise SchemaViolation("object name is empty")
        _set(self, "hand", Hand(self.hand))


@dataclass(frozen=True)
class ReleaseParams:
    release_location: str

    def __post_init__(self):
        if not isinstance(self.release_location, str):
            raise SchemaViolation("release location must be a string")


@dataclass(frozen=True)
class ArmPostureFrame:
    """Quantized arm directions at one instant.

    ``dirs`` holds direction indices for (left upper arm, left forearm,
    right upper arm, right forearm), or None when the skeleton was incomplete.
    """

    timestamp: float
    dirs: tuple[int, int, int, int] | None
    valid: bool = True

    def __post_init__(self):
        _set(self, "timestamp", _finite(self.timestamp, "posture timestamp"))
        if self.dirs is not None:
            d = tuple(self.dirs)
            if len(d) != 4 or any(isinstance(i, bool) or not isinstance(i, int) or not 0 <= i < 26 for i in d):
                raise SchemaViolation(f"bad posture direction indices {self.dirs!r}")
            _set(self, "dirs", d)


@dataclass(frozen=True)
class SkillParams:
    position: PositionParams | None = None
    force: ForceParams | None = None
    grasp: GraspParams | None = None
    release: ReleaseParams | None = None
    postures: tuple[ArmPostureFrame, ...] = ()

    def __post_init__(self):
        _set(self, "postures", tuple(self.postures))


@dataclass(frozen=True)
class ParamSchema:
    position: type | None = None
    force_role: ForceRole | None = None
    grasp: bool = False
    release: bool = False


_DETACHING = {("NC", "PC"), ("OP", "PR"), ("OR", "RV")}
_ATTACHING = {("PC", "NC"), ("PR", "OP"), ("RV", "OR")}


def required_params(task: Task) -> ParamSchema:
    """Skill-parameter fields a task model must carry, and no others."""
    if task == GRASP:
        return ParamSchema(grasp=True)
    if task == RELEASE:
        return ParamSchema(release=True)
    pair = (task.src.value, task.dst.value)
    # contact-making transitions carry the DetachingAxis role, contact-breaking ones AttachingAxis
    if pair in _DETACHING:
        return ParamSchema(force_role=ForceRole.DETACHING)
    if pair in _ATTACHING:
        return ParamSchema(force_role=ForceRole.ATTACHING)
    return {
        ("NC", "NC"): ParamSchema(position=Waypoints),
        ("PC", "PC"): ParamSchema(position=PlaneTrajectory, force_role=ForceRole.SURFACE_NORMAL),
        ("PR", "PR"): ParamSchema(position=LineTrajectory, force_role=ForceRole.ORTHOGONAL_PLANE),
        ("RV", "RV"): ParamSchema(position=CircleTrajectory, force_role=ForceRole.RADIAL),
    }[pair]


def check_params(task: Task, params: SkillParams) -> None:
    schema = required_params(task)
    label = task.label
    if schema.position is None:
        if params.position is not None:
            raise SchemaViolation(f"{label} takes no position parameters")
    elif type(params.position) is not schema.position:
        raise SchemaViolation(f"{label} needs {schema.position.__name__} position parameters")
    if schema.force_role is None:
        if params.force is not None:
            raise SchemaViolation(f"{label} takes no force parameters")
    elif params.force is None or params.force.role is not schema.force_role:
        raise SchemaViolation(f"{label} needs force parameters with role {schema.force_role.value}")
    if schema.grasp != (params.grasp is not None):
        raise SchemaViolation(f"{label}: grasp parameters {'missing' if schema.grasp else 'not allowed'}")
    if schema.release != (params.release is not None):
        raise SchemaViolation(f"{label}: release parameters {'missing' if schema.release else 'not allowed'}")


@dataclass(frozen=True)
class TaskModel:
    task: Task
    params: SkillParams
    interval: tuple[float, float]

    def __post_init__(self):
        t0, t1 = _vec(self.interval, 2, "interval")
        if t0 > t1:
            raise SchemaViolation(f"interval start {t0} after end {t1}")
        _set(self, "interval", (t0, t1))
        check_params(self.task, self.params)


@dataclass(frozen=True)
class GmrOperation:
    models: tuple[TaskModel, ...] = field(default_factory=tuple)

    def __post_init__(self):
        models = tuple(self.models)
        _set(self, "models", models)
        validate_chain([m.task for m in models])

    @property
    def tasks(self) -> list[Task]:
        return [m.task for m in self.models]


# --------------------------------------------------------------------------
# documents

def _position_to_json(p: PositionParams) -> dict:
    if isinstance(p, Waypoints):
        return {"type": "waypoints", "points": [list(x) for x in p.points]}
    if isinstance(p, PlaneTrajectory):
        return {"type": "plane", "origin": list(p.origin), "normal": list(p.normal),
                "path2d": [list(x) for x in p.path2d]}
    if isinstance(p, LineTrajectory):
        return {"type": "line", "origin": list(p.origin), "direction": list(p.direction),
                "displacements": list(p.displacements)}
    return {"type": "circle", "center": list(p.center), "axis": list(p.axis), "radius": p.radius,
            "startAngle": p.start_angle, "endAngle": p.end_angle}


def _params_to_json(sp: SkillParams) -> dict:
    out: dict[str, Any] = {}
    if sp.position is not None:
        out["position"] = _position_to_json(sp.position)
    if sp.force is not None:
        f = {"role": sp.force.role.value, "axis": list(sp.force.axis), "magnitude": sp.force.magnitude}
        if sp.force.secondary_axis is not None:
            f["secondaryAxis"] = list(sp.force.secondary_axis)
        out["force"] = f
    if sp.grasp is not None:
        g = sp.grasp
        out["grasp"] = {"objectName": g.object_name, "objectAttribute": g.object_attribute,
                        "graspType": g.grasp_type, "hand": g.hand.value, "graspLocation": g.grasp_location}
    if sp.release is not None:
        out["release"] = {"releaseLocation": sp.release.release_location}
    out["postures"] = [
        {"t": f.timestamp, "dirs": None if f.dirs is None else list(f.dirs), "valid": f.valid}
        for f in sp.postures
    ]
    return out


def operation_to_json(op: GmrOperation) -> dict:
    return {"tasks": [
        {"task": m.task.label, "interval": list(m.interval), "params": _params_to_json(m.params)}
        for m in op.models
    ]}


def dumps_document(ops: Iterable[GmrOperation]) -> str:
    doc = {"operations": [operation_to_json(op) for op in ops]}
    return json.dumps(doc, indent=1, ensure_ascii=False, allow_nan=False) + "\n"


def serialize_operation(op: GmrOperation) -> str:
    return dumps_document([op])


def _obj(d: Any, what: str, required: Sequence[str], optional: Sequence[str] = ()) -> dict:
    if not isinstance(d, dict):
        raise SchemaViolation(f"{what} must be an object")
    missing = [k for k in required if k not in d]
    if missing:
        raise SchemaViolation(f"{what} missing {', '.join(missing)}")
    extra = set(d) - set(required) - set(optional)
    if extra:
        raise SchemaViolation(f"{what} has unknown keys {sorted(extra)}")
    return d


def _str(x: Any, what: str) -> str:
    if not isinstance(x, str):
        raise SchemaViolation(f"{what} must be a string")
    return x


def _list(x: Any, what: str) -> list:
    if not isinstance(x, list):
        raise SchemaViolation(f"{what} must be a list")
    return x


def _position_from_json(d: Any) -> PositionParams:
    if not isinstance(d, dict) or "type" not in d:
        raise SchemaViolation("position parameters need a type")
    kind = d["type"]
    if kind == "waypoints":
        _obj(d, "waypoints", ["type", "points"])
        return Waypoints(tuple(_list(d["points"], "points")))
    if kind == "plane":
        _obj(d, "plane trajectory", ["type", "origin", "normal", "path2d"])
        return PlaneTrajectory(d["origin"], d["normal"], tuple(_list(d["path2d"], "path2d")))
    if kind == "line":
        _obj(d, "line trajectory", ["type", "origin", "direction", "displacements"])
        return LineTrajectory(d["origin"], d["direction"], tuple(_list(d["displacements"], "displacements")))
    if kind == "circle":
        _obj(d, "circle trajectory", ["type", "center", "axis", "radius", "startAngle", "endAngle"])
        return CircleTrajectory(d["center"], d["axis"], d["radius"], d["startAngle"], d["endAngle"])
    raise SchemaViolation(f"unknown position type {kind!r}")


def _params_from_json(d: Any) -> SkillParams:
    _obj(d, "params", ["postures"], ["position", "force", "grasp", "release"])
    position = _position_from_json(d["position"]) if "position" in d else None
    force = None
    if "force" in d:
        f = _obj(d["force"], "force", ["role", "axis", "magnitude"], ["secondaryAxis"])
        try:
            role = ForceRole(f["role"])
        except ValueError:
            raise SchemaViolation(f"unknown force role {f['role']!r}") from None
        force = ForceParams(f["axis"], f["magnitude"], role, f.get("secondaryAxis"))
    grasp = None
    if "grasp" in d:
        g = _obj(d["grasp"], "grasp", ["objectName", "objectAttribute", "graspType", "hand", "graspLocation"])
        try:
            hand = Hand(g["hand"])
        except ValueError:
            raise SchemaViolation(f"unknown hand {g['hand']!r}") from None
        grasp = GraspParams(_str(g["objectName"], "objectName"), _str(g["objectAttribute"], "objectAttribute"),
                            _str(g["graspType"], "graspType"), hand, _str(g["graspLocation"], "graspLocation"))
    release = None
    if "release" in d:
        r = _obj(d["release"], "release", ["releaseLocation"])
        release = ReleaseParams(_str(r["releaseLocation"], "releaseLocation"))
    postures = []
    for p in _list(d["postures"], "postures"):
        p = _obj(p, "posture", ["t", "dirs", "valid"])
        if not isinstance(p["valid"], bool):
            raise SchemaViolation("posture valid flag must be boolean")
        dirs = p["dirs"]
        if dirs is not None:
            dirs = tuple(_list(dirs, "posture dirs"))
        postures.append(ArmPostureFrame(p["t"], dirs, p["valid"]))
    return SkillParams(position, force, grasp, release, tuple(postures))


def operation_from_json(d: Any) -> GmrOperation:
    _obj(d, "operation", ["tasks"])
    models = []
    for i, m in enumerate(_list(d["tasks"], "tasks")):
        _obj(m, f"task model {i}", ["task", "interval", "params"])
        try:
            task = parse_task_label(_str(m["task"], "task label"))
        except (MalformedLabel, NonCanonicalTask) as exc:
            raise SchemaViolation(f"task model {i}: {exc}") from None
        try:
            models.append(TaskModel(task, _params_from_json(m["params"]), tuple(_list(m["interval"], "interval"))))
        except SchemaViolation as exc:
            raise SchemaViolation(f"task model {i} ({task.label}): {exc}") from None
    if not models:
        raise SchemaViolation("operation has no tasks")
    return GmrOperation(tuple(models))


def loads_document(text: str) -> list[GmrOperation]:
    """Parse a task-model document; raises SchemaViolation or ValidationError."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"not valid JSON: {exc}") from None
    _obj(doc, "document", ["operations"])
    return [operation_from_json(op) for op in _list(doc["operations"], "operations")]


def deserialize_operation(text: str) -> GmrOperation:
    ops = loads_document(text)
    if len(ops) != 1:
        raise SchemaViolation(f"expected one operation, found {len(ops)}")
    return ops[0]
