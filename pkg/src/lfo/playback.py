"""Environment model, contact-state inference, kinematic replay and demo synthesis."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    GRASP, RELEASE, CircleTrajectory, ContactState, ControlClass, ForceParams, ForceRole, GmrOperation, GraspParams,
    Hand, LineTrajectory, PlaneTrajectory, ReleaseParams, SkillParams, Task, TaskModel, Waypoints, classify_control,
)
from .errors import InitialStateMismatch, InvalidScenarioParams, SchemaViolation, StateMismatch
from .geomfit import DEFAULT_GRASP_TYPES, LocationBox, complement_basis, grasp_type_for, plane_basis, resolve_location
from .segmentation import DemonstrationRecording, Frame, Word

# --------------------------------------------------------------------------
# environment


def _v3(x, what) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise SchemaViolation(f"{what} must be a finite 3-vector")
    return a


def _unit3(x, what) -> np.ndarray:
    a = _v3(x, what)
    n = np.linalg.norm(a)
    if abs(n - 1.0) > 1e-6:
        raise SchemaViolation(f"{what} must be a unit vector")
    return a / n


@dataclass(frozen=True)
class Plane:
    label: str
    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", _v3(self.point, "plane point"))
        object.__setattr__(self, "normal", _unit3(self.normal, "plane normal"))


@dataclass(frozen=True)
class Slider:
    label: str
    origin: np.ndarray
    direction: np.ndarray
    min_limit: float
    max_limit: float

    def __post_init__(self):
        object.__setattr__(self, "origin", _v3(self.origin, "slider origin"))
        object.__setattr__(self, "direction", _unit3(self.direction, "slider direction"))
        if not self.min_limit < self.max_limit:
            raise SchemaViolation(f"slider {self.label!r}: minLimit must be below maxLimit")


@dataclass(frozen=True)
class Hinge:
    """Revolute joint; angle 0 points along ``reference`` from ``center``.

    Angles grow counterclockwise about ``axis``.
    """

    label: str
    center: np.ndarray
    axis: np.ndarray
    reference: np.ndarray
    radius: float
    min_angle: float
    max_angle: float

    def __post_init__(self):
        object.__setattr__(self, "center", _v3(self.center, "hinge center"))
        axis = _unit3(self.axis, "hinge axis")
        ref = _v3(self.reference, "hinge reference")
        ref = ref - np.dot(ref, axis) * axis
        if np.linalg.norm(ref) < 1e-9:
            raise SchemaViolation(f"hinge {self.label!r}: reference is parallel to the axis")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "reference", ref / np.linalg.norm(ref))
        if self.radius <= 0:
            raise SchemaViolation(f"hinge {self.label!r}: radius must be positive")
        if not self.min_angle < self.max_angle:
            raise SchemaViolation(f"hinge {self.label!r}: minAngle must be below maxAngle")

    def point_at(self, angle: float) -> np.ndarray:
        v = np.cross(self.axis, self.reference)
        return self.center + self.radius * (math.cos(angle) * self.reference + math.sin(angle) * v)


ContactPrimitive = Plane | Slider | Hinge


@dataclass(frozen=True)
class Environment:
    boxes: tuple[LocationBox, ...] = ()
    primitives: tuple[ContactPrimitive, ...] = ()

    def primitive(self, label: str) -> ContactPrimitive:
        for p in self.primitives:
            if p.label == label:
                return p
        raise KeyError(label)


def _f(x) -> float:
    return float(x)


def environment_to_json(env: Environment) -> dict:
    prims = []
    for p in env.primitives:
        if isinstance(p, Plane):
            prims.append({"kind": "plane", "label": p.label, "point": p.point.tolist(), "normal": p.normal.tolist()})
        elif isinstance(p, Slider):
            prims.append({"kind": "slider", "label": p.label, "origin": p.origin.tolist(),
                          "direction": p.direction.tolist(), "minLimit": p.min_limit, "maxLimit": p.max_limit})
        else:
            prims.append({"kind": "hinge", "label": p.label, "center": p.center.tolist(), "axis": p.axis.tolist(),
                          "reference": p.reference.tolist(), "radius": p.radius,
                          "minAngle": p.min_angle, "maxAngle": p.max_angle})
    return {
        "locations": [{"label": b.label, "min": list(b.min), "max": list(b.max)} for b in env.boxes],
        "primitives": prims,
    }


def environment_from_json(d) -> Environment:
    if not isinstance(d, dict):
        raise SchemaViolation("environment must be an object")
    try:
        boxes = tuple(LocationBox(str(b["label"]), tuple(map(_f, b["min"])), tuple(map(_f, b["max"])))
                      for b in d.get("locations", []))
        prims = []
        for p in d.get("primitives", []):
            kind = p["kind"]
            if kind == "plane":
                prims.append(Plane(str(p["label"]), p["point"], p["normal"]))
            elif kind == "slider":
                prims.append(Slider(str(p["label"]), p["origin"], p["direction"],
                                    _f(p["minLimit"]), _f(p["maxLimit"])))
            elif kind == "hinge":
                ref = p["reference"] if "reference" in p else complement_basis(_unit3(p["axis"], "hinge axis"))[0]
                prims.append(Hinge(str(p["label"]), p["center"], p["axis"], ref, _f(p["radius"]),
                                   _f(p["minAngle"]), _f(p["maxAngle"])))
            else:
                raise SchemaViolation(f"unknown primitive kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"malformed environment: {exc!r}") from None
    return Environment(boxes, tuple(prims))


def load_environment(path: str | Path) -> Environment:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: not valid JSON: {exc}") from None
    return environment_from_json(data)


def dump_environment(env: Environment) -> str:
    return json.dumps(environment_to_json(env), indent=1) + "\n"


# --------------------------------------------------------------------------
# contact inference

@dataclass(frozen=True)
class Tolerance:
    plane_eps: float = 0.005
    limit_eps: float = 0.01

    def __post_init__(self):
        if self.plane_eps <= 0 or not 0 < self.limit_eps < 0.5:
            raise ValueError("planeEps must be positive and limitEps in (0, 0.5)")


def _hinge_angle(h: Hinge, q: np.ndarray) -> float:
    v = np.cross(h.axis, h.reference)
    theta = math.atan2(float(q @ v), float(q @ h.reference))
    mid = 0.5 * (h.min_angle + h.max_angle)
    # representative closest to the middle of the joint range
    return theta + 2 * math.pi * round((mid - theta) / (2 * math.pi))


def _on_hinge(h: Hinge, p: np.ndarray, tol: Tolerance):
    q = p - h.center
    along = float(q @ h.axis)
    radial = q - along * h.axis
    dist = math.hypot(np.linalg.norm(radial) - h.radius, along)
    if dist > tol.plane_eps:
        return None
    angle = _hinge_angle(h, q)
    margin = tol.limit_eps * (h.max_angle - h.min_angle)
    if angle < h.min_angle - margin or angle > h.max_angle + margin:
        return None
    terminal = angle <= h.min_angle + margin or angle >= h.max_angle - margin
    return ContactState.OR if terminal else ContactState.RV


def _on_slider(s: Slider, p: np.ndarray, tol: Tolerance):
    q = p - s.origin
    x = float(q @ s.direction)
    if np.linalg.norm(q - x * s.direction) > tol.plane_eps:
        return None
    margin = tol.limit_eps * (s.max_limit - s.min_limit)
    if x < s.min_limit - margin or x > s.max_limit + margin:
        return None
    terminal = x <= s.min_limit + margin or x >= s.max_limit - margin
    return ContactState.OP if terminal else ContactState.PR


def infer_contact_state(point, env: Environment, tol: Tolerance = Tolerance()) -> tuple[ContactState, str | None]:
    """Contact state of an object point, with the primitive it is bound to.

    Hinges and sliders win over planes, and terminal states over interior
    ones; remaining ties go to the lexicographically smallest label.
    """
    p = np.asarray(point, dtype=float)
    linkage = []
    planar = []
    for prim in env.primitives:
        if isinstance(prim, Hinge):
            st = _on_hinge(prim, p, tol)
        elif isinstance(prim, Slider):
            st = _on_slider(prim, p, tol)
        else:
            st = ContactState.PC if abs(float((p - prim.point) @ prim.normal)) <= tol.plane_eps else None
        if st is None:
            continue
        (planar if st is ContactState.PC else linkage).append((st, prim.label))
    if linkage:
        terminal = [x for x in linkage if x[0] in (ContactState.OR, ContactState.OP)]
        return min(terminal or linkage, key=lambda x: x[1])
    if planar:
        return min(planar, key=lambda x: x[1])
    return ContactState.NC, None


# --------------------------------------------------------------------------
# replay

@dataclass
class ReplayResult:
    trajectory: list[np.ndarray]
    per_task_end_state: list[ContactState]
    expected: list[ContactState]
    bound: list[str | None] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.per_task_end_state == self.expected

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "perTaskEndState": [s.value for s in self.per_task_end_state],
            "expected": [s.value for s in self.expected],
            "boundPrimitive": self.bound,
            "trajectory": [[float(x) for x in p] for p in self.trajectory],
        }


def _makes_contact(task: Task) -> bool:
    """True when a force task moves the object into a more constrained state."""
    return (task.src.value, task.dst.value) in {("NC", "PC"), ("PR", "OP"), ("RV", "OR")}


def position_path(params) -> list[np.ndarray]:
    """Nominal object path encoded by position parameters."""
    if isinstance(params, Waypoints):
        return [np.array(p) for p in params.points]
    if isinstance(params, PlaneTrajectory):
        u, v = plane_basis(params.normal)
        o = np.array(params.origin)
        return [o + a * u + b * v for a, b in params.path2d]
    if isinstance(params, LineTrajectory):
        o, d = np.array(params.origin), np.array(params.direction)
        return [o + s * d for s in params.displacements]
    u, v = plane_basis(params.axis)
    c = np.array(params.center)
    n = max(2, int(math.ceil(abs(params.end_angle - params.start_angle) / math.radians(2))) + 1)
    return [c + params.radius * (math.cos(a) * u + math.sin(a) * v)
            for a in np.linspace(params.start_angle, params.end_angle, n)]


def default_initial_point(op: GmrOperation) -> np.ndarray:
    """First point of the first task that carries a position path."""
    for m in op.models:
        if m.params.position is not None:
            return position_path(m.params.position)[0]
    raise ValueError("operation has no position parameters to start from")


def replay(op: GmrOperation, env: Environment, initial_point=None, tol: Tolerance = Tolerance()) -> ReplayResult:
    """Drive a point end-effector through the operation and record contact states.

    Position tasks follow their encoded path.  A position task followed by a
    contact-making force task stops ``2*planeEps`` short along that task's
    force axis; force tasks then move ``2*planeEps`` along the axis to make
    contact, or against it to break contact.
    """
    point = default_initial_point(op) if initial_point is None else np.asarray(initial_point, dtype=float)
    manips = [m for m in op.models if m.task.is_manipulation]
    start_state, _ = infer_contact_state(point, env, tol)
    if manips and start_state is not manips[0].task.src:
        raise InitialStateMismatch(
            f"object starts in {start_state.value}, first task {manips[0].task.label} needs {manips[0].task.src.value}")
    step = 2 * tol.plane_eps
    traj = [point.copy()]
    states, bound = [], []
    for k, m in enumerate(manips):
        if classify_control(m.task) is ControlClass.FORCE:
            axis = np.array(m.params.force.axis)
            point = point + (step if _makes_contact(m.task) else -step) * axis
            traj.append(point.copy())
        else:
            path = position_path(m.params.position)
            nxt = manips[k + 1] if k + 1 < len(manips) else None
            if nxt is not None and classify_control(nxt.task) is ControlClass.FORCE and _makes_contact(nxt.task):
                path[-1] = path[-1] - step * np.array(nxt.params.force.axis)
            traj.extend(p.copy() for p in path)
            point = path[-1]
        st, label = infer_contact_state(point, env, tol)
        states.append(st)
        bound.append(label)
    return ReplayResult(traj, states, [m.task.dst for m in manips], bound)


def check_replay(result: ReplayResult, op: GmrOperation) -> None:
    manip_index = [i for i, m in enumerate(op.models) if m.task.is_manipulation]
    for i, (got, want) in enumerate(zip(result.per_task_end_state, result.expected)):
        if got is not want:
            raise StateMismatch(manip_index[i], want, got)


# --------------------------------------------------------------------------
# synthetic demonstrations

SCENARIOS = ("PickPlace", "OpenDoor", "OpenDrawer", "WipeSurface")
RATE = 30.0


def min_jerk(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return 10 * tau ** 3 - 15 * tau ** 4 + 6 * tau ** 5


@dataclass
class Phase:
    duration: float
    path: object  # callable s in [0, 1] -> point
    moves_object: bool = False


@dataclass
class DemoBundle:
    recording: DemonstrationRecording
    truth: GmrOperation
    environment: Environment
    initial_point: np.ndarray
    scenario: str


def _line(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return lambda s: a + (b - a) * s


def _hold(a):
    a = np.asarray(a, float)
    return lambda s: a.copy()


SHOULDER_HALF = 0.2
UPPER_ARM = 0.30
FOREARM = 0.28


def _skeleton(hand_point: np.ndarray, hand: Hand) -> dict[str, np.ndarray]:
    """Standing demonstrator facing +x whose active wrist sits on ``hand_point``.

    The trunk follows the hand so the target stays within reach; the active
    elbow comes from a two-segment reach with the elbow pointing down.
    """
    side = -1.0 if hand is Hand.RIGHT else 1.0
    root = hand_point + np.array([-0.32, -side * SHOULDER_HALF, -0.33 - 0.45])
    up = np.array([0.0, 0.0, 1.0])
    j = {
        "spineBase": root,
        "spineTop": root + 0.5 * up,
        "leftShoulder": root + np.array([0.0, SHOULDER_HALF, 0.45]),
        "rightShoulder": root + np.array([0.0, -SHOULDER_HALF, 0.45]),
    }
    active, passive = ("right", "left") if hand is Hand.RIGHT else ("left", "right")
    sh = j[f"{passive}Shoulder"]
    j[f"{passive}Elbow"] = sh - UPPER_ARM * up
    j[f"{passive}Wrist"] = sh - (UPPER_ARM + FOREARM) * up
    sh = j[f"{active}Shoulder"]
    reach = hand_point - sh
    d = float(np.linalg.norm(reach))
    d = min(max(d, abs(UPPER_ARM - FOREARM) + 1e-6), UPPER_ARM + FOREARM - 1e-6)
    e = reach / np.linalg.norm(reach)
    pole = -up - np.dot(-up, e) * e
    if np.linalg.norm(pole) < 1e-6:
        pole = np.array([0.0, side, 0.0]) - np.dot(np.array([0.0, side, 0.0]), e) * e
    pole /= np.linalg.norm(pole)
    cos_a = (UPPER_ARM ** 2 + d ** 2 - FOREARM ** 2) / (2 * UPPER_ARM * d)
    a = math.acos(max(-1.0, min(1.0, cos_a)))
    j[f"{active}Elbow"] = sh + UPPER_ARM * (math.cos(a) * e + math.sin(a) * pole)
    j[f"{active}Wrist"] = hand_point.copy()
    return j


def _tokens(sentence: str) -> list[str]:
    words = sentence.rstrip(".").split()
    return words + ["."]


def _transcript(sentence: str, start: float = 0.2, step: float = 0.25) -> tuple[Word, ...]:
    out = []
    for i, w in enumerate(_tokens(sentence)):
        t0 = start + i * step
        out.append(Word(w, round(t0, 6), round(t0 + step * 0.8, 6)))
    return tuple(out)


def _room_boxes(extra: Sequence[LocationBox]) -> tuple[LocationBox, ...]:
    return tuple(extra) + (LocationBox("room", (-3.0, -3.0, -0.5), (3.0, 3.0, 3.0)),)


def _scenario_geometry(scenario: str, params: dict) -> dict:
    """Phases, environment and ground-truth parameters for one scenario."""
    p = dict(params)
    if scenario == "PickPlace":
        start = np.array(p.get("start", (0.45, -0.15, 0.7)), float)
        end = np.array(p.get("end", (0.55, 0.25, 1.2)), float)
        lift = float(p.get("lift", 0.1))
        if lift <= 0.02 or np.linalg.norm(end[:2] - start[:2]) < 0.05:
            raise InvalidScenarioParams("pick-place needs a lift above 2 cm and distinct start/end spots")
        a, b = start + [0, 0, lift], end + [0, 0, lift]
        up = np.array([0.0, 0.0, 1.0])
        manip = [Phase(0.6, _line(start, a), True), Phase(1.5, _line(a, b), True), Phase(0.6, _line(b, end), True)]
        env = Environment(
            _room_boxes([
                LocationBox("on-the-table area", tuple(start + [-0.3, -0.3, -0.05]), tuple(start + [0.3, 0.3, 0.4])),
                LocationBox("above-a-shelf area", tuple(end + [-0.3, -0.3, -0.05]), tuple(end + [0.3, 0.3, 0.4])),
            ]),
            (Plane("shelf", end, up), Plane("table", start, up)),
        )
        return dict(sentence="Pick up a red cup and place it on the shelf.", object="cup", attribute="red",
                    start=start, approach=-up, retreat=up, manip=manip, env=env,
                    tasks=["PC-NC", "NC-NC", "NC-PC"], lift=lift, end=end, a=a, b=b)
    if scenario == "OpenDoor":
        radius = float(p.get("radius", 0.5))
        sweep = float(p.get("sweep", math.pi / 2))
        if radius <= 0 or not 0 < sweep < 1.9 * math.pi:
            raise InvalidScenarioParams("door needs radius > 0 and a sweep in (0, 1.9*pi)")
        center = np.array(p.get("center", (0.75, 0.5, 1.0)), float)
        axis = np.array([0.0, 0.0, -1.0])
        ref = np.array([0.0, -1.0, 0.0])
        max_angle = float(p.get("max_angle", sweep + math.radians(10)))
        hinge = Hinge("fridge-door", center, axis, ref, radius, 0.0, max_angle)
        handle = hinge.point_at(0.0)
        tangent0 = np.cross(axis, ref)
        end = hinge.point_at(sweep)
        radial_end = (end - center) / radius
        manip = [Phase(2.0, lambda s: hinge.point_at(sweep * s), True)]
        env = Environment(
            _room_boxes([
                LocationBox("fridge-door area", tuple(center + [-0.8, -0.8, -0.4]), tuple(center + [0.3, 0.3, 0.4])),
            ]),
            (hinge,),
        )
        return dict(sentence="Open the fridge.", object="fridge", attribute="", start=handle,
                    approach=-tangent0, retreat=radial_end, manip=manip, env=env,
                    tasks=["OR-RV", "RV-RV"], hinge=hinge, sweep=sweep)
    if scenario == "OpenDrawer":
        length = float(p.get("length", 0.3))
        if length <= 0.02:
            raise InvalidScenarioParams("drawer pull must exceed 2 cm")
        origin = np.array(p.get("origin", (0.6, 0.0, 0.8)), float)
        pull = np.array(p.get("direction", (-1.0, 0.0, 0.0)), float)
        pull /= np.linalg.norm(pull)
        slider = Slider("drawer", origin, pull, 0.0, float(p.get("max_limit", length + 0.2)))
        end = origin + length * pull
        manip = [Phase(1.5, _line(origin, end), True)]
        env = Environment(
            _room_boxes([
                LocationBox("drawer area", tuple(origin + [-0.6, -0.3, -0.3]), tuple(origin + [0.2, 0.3, 0.3])),
            ]),
            (slider,),
        )
        return dict(sentence="Open the drawer.", object="drawer", attribute="", start=origin,
                    approach=-pull, retreat=np.array([0.0, 0.0, 1.0]), manip=manip, env=env,
                    tasks=["OP-PR", "PR-PR"], slider=slider, length=length)
    if scenario == "WipeSurface":
        center = np.array(p.get("center", (0.5, 0.0, 0.7)), float)
        span = float(p.get("span", 0.2))
        amp = float(p.get("amplitude", 0.08))
        if span <= 0.02 or amp <= 0.005:
            raise InvalidScenarioParams("wipe needs a span above 2 cm and a sideways amplitude above 5 mm")
        up = np.array([0.0, 0.0, 1.0])

        def wipe(s):
            return center + np.array([span * (s - 0.5), amp * math.sin(2 * math.pi * s), 0.0])

        start = wipe(0.0)
        manip = [Phase(2.5, wipe, True)]
        env = Environment(
            _room_boxes([
                LocationBox("on-the-table area", tuple(center + [-0.4, -0.4, -0.05]), tuple(center + [0.4, 0.4, 0.4])),
            ]),
            (Plane("table", center, up),),
        )
        return dict(sentence="Wipe the table with the sponge.", object="sponge", attribute="", start=start,
                    approach=-up, retreat=up, manip=manip, env=env, tasks=["PC-PC"], wipe=wipe, plane=center)
    raise InvalidScenarioParams(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")


def generate_demo(scenario: str, params: dict | None = None, noise_sigma: float = 0.0, seed: int = 0,
                  hand: Hand = Hand.RIGHT, default_force: float = 5.0) -> DemoBundle:
    """Synthesize a 30 Hz demonstration with skeleton, object track and transcript.

    Timeline: idle, approach, dwell, manipulation (object attached to the
    wrist), dwell, retreat, idle.  Noise is isotropic Gaussian on every
    recorded position, drawn from ``numpy.random.default_rng(seed)``.
    """
    if noise_sigma < 0:
        raise InvalidScenarioParams("noise sigma must be non-negative")
    g = _scenario_geometry(scenario, params or {})
    start = g["start"]
    pre = start - 0.25 * g["approach"]
    manip = g["manip"]
    obj_end = manip[-1].path(1.0)
    post = obj_end + 0.25 * g["retreat"]
    phases = ([Phase(0.5, _hold(pre)), Phase(1.0, _line(pre, start)), Phase(0.5, _hold(start))]
              + manip + [Phase(0.5, _hold(obj_end)), Phase(1.0, _line(obj_end, post)), Phase(0.5, _hold(post))])

    hand_pts, obj_pts, times = [], [], []
    obj = start.copy()
    n_total = int(round(sum(ph.duration for ph in phases) * RATE)) + 1
    bounds = np.cumsum([0.0] + [ph.duration for ph in phases])
    for i in range(n_total):
        t = i / RATE
        k = min(int(np.searchsorted(bounds, t, side="right")) - 1, len(phases) - 1)
        ph = phases[k]
        tau = (t - bounds[k]) / ph.duration
        h = ph.path(float(min_jerk(tau)))
        if ph.moves_object:
            obj = h.copy()
        hand_pts.append(h)
        obj_pts.append(obj.copy())
        times.append(round(t, 9))
    first_manip = 3
    marks = (bounds[first_manip - 1], bounds[first_manip], bounds[first_manip + len(manip)],
             bounds[first_manip + len(manip) + 1])

    rng = np.random.default_rng(seed)
    frames = []
    obj_name = g["object"]
    for t, h, o in zip(times, hand_pts, obj_pts):
        joints = _skeleton(h, hand)
        if noise_sigma > 0:
            joints = {k: v + rng.normal(0.0, noise_sigma, 3) for k, v in joints.items()}
            o = o + rng.normal(0.0, noise_sigma, 3)
        frames.append(Frame(t, {k: tuple(float(x) for x in v) for k, v in joints.items()},
                            {obj_name: tuple(float(x) for x in o)}))
    recording = DemonstrationRecording(tuple(frames), _transcript(g["sentence"]))
    truth = _ground_truth(scenario, g, marks, hand, default_force)
    return DemoBundle(recording, truth, g["env"], start.copy(), scenario)


def _ground_truth(scenario: str, g: dict, marks, hand: Hand, force: float) -> GmrOperation:
    t_touch, t_on, t_off, t_leave = (float(x) for x in marks)
    env = g["env"]
    start = g["start"]
    end = g["manip"][-1].path(1.0)
    grasp = TaskModel(GRASP, SkillParams(grasp=GraspParams(
        g["object"], g["attribute"], grasp_type_for(g["object"], DEFAULT_GRASP_TYPES), hand,
        resolve_location(start, env.boxes))), (t_touch, t_touch))
    release = TaskModel(RELEASE, SkillParams(release=ReleaseParams(resolve_location(end, env.boxes))),
                        (t_leave, t_leave))

    def tup(v):
        return tuple(float(x) for x in v)

    models = [grasp]
    if scenario == "PickPlace":
        down = (0.0, 0.0, -1.0)
        pts = [start, g["a"], g["b"], end]
        models += [
            TaskModel(Task.manip("PC", "NC"), SkillParams(force=ForceParams(down, force, ForceRole.ATTACHING)),
                      (t_touch, t_on)),
            TaskModel(Task.manip("NC", "NC"), SkillParams(position=Waypoints(tuple(tup(p) for p in pts))),
                      (t_on, t_off)),
            TaskModel(Task.manip("NC", "PC"), SkillParams(force=ForceParams(down, force, ForceRole.DETACHING)),
                      (t_off, t_leave)),
        ]
    elif scenario == "OpenDoor":
        h = g["hinge"]
        tangent = np.cross(h.axis, h.reference)
        arc = CircleTrajectory(tup(h.center), tup(h.axis), h.radius, 0.0, g["sweep"])
        # re-express angles in the canonical basis of the axis
        u, v = plane_basis(h.axis)
        a0 = math.atan2(float(h.reference @ v), float(h.reference @ u))
        arc = CircleTrajectory(arc.center, arc.axis, arc.radius, a0, a0 + g["sweep"])
        mid = h.point_at(0.5 * g["sweep"])
        radial = (h.center - mid) / h.radius
        models += [
            TaskModel(Task.manip("OR", "RV"), SkillParams(force=ForceParams(tup(-tangent), force, ForceRole.DETACHING)),
                      (t_touch, t_on)),
            TaskModel(Task.manip("RV", "RV"), SkillParams(position=arc, force=ForceParams(
                tup(radial), force, ForceRole.RADIAL)), (t_on, t_leave)),
        ]
    elif scenario == "OpenDrawer":
        s = g["slider"]
        e1, e2 = complement_basis(s.direction)
        models += [
            TaskModel(Task.manip("OP", "PR"), SkillParams(force=ForceParams(tup(-s.direction), force,
                                                                            ForceRole.DETACHING)), (t_touch, t_on)),
            TaskModel(Task.manip("PR", "PR"), SkillParams(
                position=LineTrajectory(tup(s.origin), tup(s.direction), (0.0, g["length"])),
                force=ForceParams(tup(e1), force, ForceRole.ORTHOGONAL_PLANE, tup(e2))), (t_on, t_leave)),
        ]
    else:
        n = (0.0, 0.0, 1.0)
        u, v = plane_basis(n)
        c = g["plane"]
        path = tuple((float((g["wipe"](s) - c) @ u), float((g["wipe"](s) - c) @ v)) for s in np.linspace(0, 1, 21))
        models += [
            TaskModel(Task.manip("PC", "PC"), SkillParams(
                position=PlaneTrajectory(tup(c), n, path),
                force=ForceParams((0.0, 0.0, -1.0), force, ForceRole.SURFACE_NORMAL)), (t_touch, t_leave)),
        ]
    models.append(release)
    return GmrOperation(tuple(models))
