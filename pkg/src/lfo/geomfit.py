"""Skill-parameter extraction from the segmented hand trajectory."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .core import (
    GRASP, RELEASE, CircleTrajectory, ControlClass, ForceParams, ForceRole, GmrOperation,
    GraspParams, LineTrajectory, PlaneTrajectory, ReleaseParams, SkillParams, Task, TaskModel, Waypoints,
    classify_control, required_params, validate_chain,
)
from .errors import (
    DegenerateCircle, DegenerateLine, DegeneratePlane, DegenerateTrajectory, InsufficientSamples, KindMismatch,
    LocationUnknown, NoContactSignature, SchemaViolation,
)
from .segmentation import Instruction, Segment, moving_average

DOWN = np.array([0.0, 0.0, -1.0])


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def complement_basis(d) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal pair spanning the plane orthogonal to unit vector ``d``.

    The first vector is the world axis least aligned with ``d`` (lowest index
    on ties) made orthogonal to ``d``; the second is ``d x first``.  For
    d = +x this gives (+y, +z); for d = +z it gives (+x, +y).
    """
    d = _unit(d)
    a = np.zeros(3)
    a[int(np.argmin(np.abs(d)))] = 1.0
    e1 = _unit(a - np.dot(a, d) * d)
    e2 = np.cross(d, e1)
    return e1, e2 / np.linalg.norm(e2)


plane_basis = complement_basis


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip so the largest-magnitude component is positive."""
    return v if v[int(np.argmax(np.abs(v)))] >= 0 else -v


# --------------------------------------------------------------------------
# fit results

@dataclass(frozen=True)
class PlaneFit:
    origin: np.ndarray
    normal: np.ndarray
    rms: float
    support: int


@dataclass(frozen=True)
class LineFit:
    origin: np.ndarray
    direction: np.ndarray
    rms: float
    support: int


@dataclass(frozen=True)
class CircleFit:
    center: np.ndarray
    axis: np.ndarray
    radius: float
    start_angle: float
    end_angle: float
    rms: float
    support: int

    def point_at(self, angle: float) -> np.ndarray:
        u, v = plane_basis(self.axis)
        return self.center + self.radius * (math.cos(angle) * u + math.sin(angle) * v)


FitResult = PlaneFit | LineFit | CircleFit


def _moments(points) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    p = np.asarray(points, dtype=float)
    c = p.mean(axis=0)
    q = p - c
    w, v = np.linalg.eigh(q.T @ q / len(p))
    return p, c, w, v


def fit_plane(points) -> PlaneFit:
    p = np.asarray(points, dtype=float)
    if len(p) < 3:
        raise DegeneratePlane("plane fit needs at least 3 points")
    p, c, w, v = _moments(p)
    if w[2] <= 0 or (w[0] < 1e-12 * w[2] and w[1] < 1e-12 * w[2]):
        raise DegeneratePlane("points are collinear")
    n = _canonical_sign(v[:, 0])
    rms = float(np.sqrt(np.mean(((p - c) @ n) ** 2)))
    return PlaneFit(c, n, rms, len(p))


def fit_line(points) -> LineFit:
    p = np.asarray(points, dtype=float)
    if len(p) < 2:
        raise DegenerateLine("line fit needs at least 2 points")
    p, c, w, v = _moments(p)
    if np.max(np.linalg.norm(p - c, axis=1)) < 1e-9:
        raise DegenerateLine("points coincide")
    d = v[:, 2]
    s = np.dot(d, p[-1] - p[0])
    if s < 0 or (s == 0 and d[int(np.argmax(np.abs(d)))] < 0):
        d = -d
    q = p - c
    perp = q - np.outer(q @ d, d)
    rms = float(np.sqrt(np.mean(np.sum(perp ** 2, axis=1))))
    return LineFit(c, d, rms, len(p))


def _kasa(xy: np.ndarray) -> tuple[np.ndarray, float]:
    a = np.column_stack([2 * xy, np.ones(len(xy))])
    b = np.sum(xy ** 2, axis=1)
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    center = sol[:2]
    r2 = sol[2] + center @ center
    return center, math.sqrt(max(r2, 0.0))


def _radial_rms(xy, center, r) -> float:
    return float(np.sqrt(np.mean((np.linalg.norm(xy - center, axis=1) - r) ** 2)))


def _gauss_newton(xy: np.ndarray, center: np.ndarray, r: float, max_iter: int = 50, tol: float = 1e-12):
    best = (center, r, _radial_rms(xy, center, r))
    for _ in range(max_iter):
        diff = xy - center
        dist = np.linalg.norm(diff, axis=1)
        if np.any(dist == 0):
            break
        res = dist - r
        jac = np.column_stack([-diff / dist[:, None], -np.ones(len(xy))])
        step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        center = center + step[:2]
        r = r + step[2]
        rms = _radial_rms(xy, center, r)
        if not np.isfinite(rms) or rms > best[2] * (1 + 1e-9) + 1e-15:
            break  # diverging; rounding noise near the optimum is tolerated
        best = (center, r, rms)
        if np.linalg.norm(step) <= tol * max(1.0, abs(r)):
            break
    return best


def fit_circle(points) -> CircleFit:
    p = np.asarray(points, dtype=float)
    if len(p) < 3:
        raise DegenerateCircle("circle fit needs at least 3 points")
    try:
        plane = fit_plane(p)
    except DegeneratePlane:
        raise DegenerateCircle("points are collinear") from None
    u, v = plane_basis(plane.normal)
    q = p - plane.origin
    xy = np.column_stack([q @ u, q @ v])
    c0, r0 = _kasa(xy)
    c2, r, rms = _gauss_newton(xy, c0, r0)
    if not np.isfinite(r) or r <= 0 or r > 1e3:
        raise DegenerateCircle(f"fitted radius {r:.3g} m is not a usable arc")

    theta = np.unwrap(np.arctan2(xy[:, 1] - c2[1], xy[:, 0] - c2[0]))
    axis = plane.normal
    if theta[-1] < theta[0]:
        axis = -axis
    center = plane.origin + c2[0] * u + c2[1] * v
    # angles in the basis of the oriented axis
    ua, va = plane_basis(axis)
    rel = p - center
    ang = np.unwrap(np.arctan2(rel @ va, rel @ ua))
    start = math.atan2(rel[0] @ va, rel[0] @ ua)
    end = start + float(ang[-1] - ang[0])
    return CircleFit(center, axis, float(r), start, end, rms, len(p))


# --------------------------------------------------------------------------
# waypoints and force axes

def _arclength(p: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(p, axis=0), axis=1))])


def resample_waypoints(trajectory, spacing: float) -> np.ndarray:
    p = np.asarray(trajectory, dtype=float)
    if len(p) < 2:
        raise DegenerateTrajectory("need at least two points")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    s = _arclength(p)
    total = s[-1]
    if total <= 0:
        raise DegenerateTrajectory("trajectory has zero length")
    n = int(math.floor(total / spacing + 1e-12))
    targets = [k * spacing for k in range(n + 1)]
    if len(targets) > 1 and total - targets[-1] <= 1e-12:
        targets[-1] = total  # last multiple already sits on the end point
    else:
        targets.append(total)
    out = np.column_stack([np.interp(targets, s, p[:, k]) for k in range(3)])
    out[0], out[-1] = p[0], p[-1]
    return out


def estimate_contact_force_axis(times, points, event_time: float, window: float = 0.25,
                                smoothing: int = 5, min_accel: float = 0.1) -> np.ndarray:
    """Direction of the largest hand acceleration near a contact event."""
    t = np.asarray(times, dtype=float)
    p = np.asarray(points, dtype=float)
    sel = np.nonzero((t >= event_time - window) & (t <= event_time + window))[0]
    if len(sel) < 5:
        raise InsufficientSamples(f"{len(sel)} samples within {window} s of t={event_time}")
    ps = moving_average(p, smoothing)
    vel = np.gradient(ps, t, axis=0)
    acc = np.gradient(vel, t, axis=0)
    mags = np.linalg.norm(acc[sel], axis=1)
    k = int(np.argmax(mags))
    if mags[k] < min_accel:
        raise NoContactSignature(f"peak acceleration {mags[k]:.3g} m/s^2 near t={event_time}")
    return acc[sel[k]] / mags[k]


def hybrid_force_axis(task: Task, fit: FitResult, away_from=None) -> tuple[np.ndarray, ForceRole, np.ndarray | None]:
    """Force axis for a hybrid task: (axis, role, secondary axis or None)."""
    label = task.label
    if label == "PC-PC":
        if not isinstance(fit, PlaneFit):
            raise KindMismatch("PC-PC needs a plane fit")
        n = fit.normal.copy()
        if abs(n[2]) < math.sin(math.radians(10.0)) and away_from is not None:
            # near-vertical surface: push away from the demonstrator
            if np.dot(n, fit.origin - np.asarray(away_from, dtype=float)) < 0:
                n = -n
        elif np.dot(n, DOWN) < 0:
            n = -n
        return n, ForceRole.SURFACE_NORMAL, None
    if label == "PR-PR":
        if not isinstance(fit, LineFit):
            raise KindMismatch("PR-PR needs a line fit")
        e1, e2 = complement_basis(fit.direction)
        return e1, ForceRole.ORTHOGONAL_PLANE, e2
    if label == "RV-RV":
        if not isinstance(fit, CircleFit):
            raise KindMismatch("RV-RV needs a circle fit")
        mid = fit.point_at(0.5 * (fit.start_angle + fit.end_angle))
        return _unit(fit.center - mid), ForceRole.RADIAL, None
    raise KindMismatch(f"{label} is not a hybrid task")


# --------------------------------------------------------------------------
# locations

@dataclass(frozen=True)
class LocationBox:
    label: str
    min: tuple[float, float, float]
    max: tuple[float, float, float]

    def __post_init__(self):
        if not all(a < b for a, b in zip(self.min, self.max)):
            raise SchemaViolation(f"box {self.label!r}: min must be below max componentwise")

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.max, self.min)))

    def contains(self, p) -> bool:
        return all(a <= x <= b for a, x, b in zip(self.min, p, self.max))


def resolve_location(point, boxes: Sequence[LocationBox]) -> str:
    hits = [b for b in boxes if b.contains(point)]
    if not hits:
        raise LocationUnknown(f"no location contains {tuple(round(float(x), 3) for x in point)}")
    return min(hits, key=lambda b: (b.volume, b.label)).label


DEFAULT_GRASP_TYPES = {
    "cup": "medium wrap",
    "mug": "medium wrap",
    "bottle": "medium wrap",
    "can": "medium wrap",
    "glass": "medium wrap",
    "fridge": "fixed hook",
    "door": "fixed hook",
    "drawer": "fixed hook",
    "cabinet": "fixed hook",
    "sponge": "power sphere",
    "cloth": "lateral pinch",
    "towel": "lateral pinch",
    "lid": "power disk",
    "plate": "palmar pinch",
    "book": "lateral pinch",
    "*": "medium wrap",
}


def load_grasp_types(path: str | Path | None = None) -> dict[str, str]:
    if path is None:
        return dict(DEFAULT_GRASP_TYPES)
    table = {str(k).lower(): str(v) for k, v in json.loads(Path(path).read_text()).items()}
    return table


def grasp_type_for(name: str, table: dict[str, str]) -> str:
    key = name.lower()
    if key in table:
        return table[key]
    return table.get("*", "medium wrap")


# --------------------------------------------------------------------------
# skill parameters for a whole operation

@dataclass(frozen=True)
class SkillConfig:
    default_force: float = 5.0
    waypoint_spacing: float = 0.05
    force_window: float = 0.25

    def __post_init__(self):
        if self.default_force <= 0 or self.waypoint_spacing <= 0 or self.force_window <= 0:
            raise ValueError("force, waypoint spacing and force window must be positive")


def _vec(v) -> tuple[float, float, float]:
    return tuple(float(x) for x in v)


class Span(NamedTuple):
    start: float
    end: float
    event: float | None = None  # contact event time, force tasks only
    onset: bool = False  # event breaks a contact at motion onset


def split_intervals(tasks: Sequence[Task], seg: Segment) -> list[Span]:
    """Partition [grasp, release] among the manipulation tasks.

    A leading force task (breaking a contact) ends at motion onset, which is
    its contact event; a trailing one (making a contact) starts at motion
    offset.  The tasks in between share the remaining time in proportion to
    hand path length.  Interior force tasks take their span midpoint as event.
    """
    t_g, t_r = seg.events.grasp_time, seg.events.release_time
    t_on, t_off = seg.motion
    n = len(tasks)
    if n == 0:
        return []
    lead = classify_control(tasks[0]) is ControlClass.FORCE
    trail = n > 1 and classify_control(tasks[-1]) is ControlClass.FORCE
    middle = n - int(lead) - int(trail)
    lo = t_on if lead else t_g
    hi = t_off if trail else t_r
    if middle == 0:
        if lead and trail:
            return [Span(t_g, t_on, t_on, True), Span(t_on, t_r, t_off)]
        return [Span(t_g, t_r, t_on, True)]
    times = seg.times
    s = _arclength(seg.trajectory)
    s_lo, s_hi = np.interp([lo, hi], times, s)
    cuts = [lo]
    for k in range(1, middle):
        if s_hi > s_lo:
            cuts.append(float(np.interp(s_lo + (s_hi - s_lo) * k / middle, s, times)))
        else:
            cuts.append(lo + (hi - lo) * k / middle)
    cuts.append(hi)
    spans = []
    for k in range(middle):
        task = tasks[k + int(lead)]
        event = 0.5 * (cuts[k] + cuts[k + 1]) if classify_control(task) is ControlClass.FORCE else None
        spans.append(Span(cuts[k], cuts[k + 1], event))
    if lead:
        spans.insert(0, Span(t_g, t_on, t_on, True))
    if trail:
        spans.append(Span(t_off, t_r, t_off))
    return spans


def held_path(seg: Segment) -> np.ndarray:
    """Best estimate of the path of the held object over the segment.

    While the object moves it is rigidly held, so wrist and object tracks see
    the same path and are averaged.  Outside the motion interval the object
    rests on the path ends while the hand may still be approaching or leaving.
    """
    if seg.object_track.shape != seg.trajectory.shape or not np.all(np.isfinite(seg.object_track)):
        return seg.trajectory.copy()
    path = seg.object_track.copy()
    moving = (seg.times >= seg.motion[0]) & (seg.times <= seg.motion[1])
    path[moving] = 0.5 * (seg.trajectory[moving] + seg.object_track[moving])
    return path


def _force_direction(seg: Segment, task_index: int, event: float, window: float, onset: bool) -> np.ndarray:
    """Stored force axis for a contact-transition task: the negated impulse direction."""
    try:
        acc = estimate_contact_force_axis(seg.times, seg.trajectory, event, window)
    except (NoContactSignature, InsufficientSamples):
        # fall back to net hand displacement next to the event
        t = seg.times
        if onset:
            a, b = event, event + window
        else:
            a, b = event - window, event
        pa = np.array([np.interp(a, t, seg.trajectory[:, k]) for k in range(3)])
        pb = np.array([np.interp(b, t, seg.trajectory[:, k]) for k in range(3)])
        move = pb - pa
        if np.linalg.norm(move) < 1e-9:
            raise DegenerateTrajectory("no motion next to the contact event", task_index)
        acc = _unit(move) if onset else -_unit(move)
    return -acc


def build_skill_params(tasks: Sequence[Task], seg: Segment, instruction: Instruction,
                       boxes: Sequence[LocationBox], config: SkillConfig = SkillConfig(),
                       grasp_types: dict[str, str] | None = None) -> GmrOperation:
    validate_chain(list(tasks))
    grasp_types = grasp_types if grasp_types is not None else DEFAULT_GRASP_TYPES
    manips = list(tasks[1:-1])
    spans = split_intervals(manips, seg)
    t_g, t_r = seg.events.grasp_time, seg.events.release_time
    times = seg.times
    spine = [f.joints["spineBase"] for f in seg.frames if "spineBase" in f.joints]
    spine_base = np.median(np.array(spine), axis=0) if spine else None

    path = held_path(seg)
    grasp_at = seg.trajectory[0]
    release_at = seg.trajectory[-1]
    models = [TaskModel(GRASP, SkillParams(grasp=GraspParams(
        instruction.object_name, instruction.object_attribute,
        grasp_type_for(instruction.object_name, grasp_types), instruction.hand,
        resolve_location(grasp_at, boxes))), (t_g, t_g))]

    for k, (task, (a, b, event, onset)) in enumerate(zip(manips, spans)):
        index = k + 1
        schema = required_params(task)
        cls = classify_control(task)
        position = force = None
        if cls is ControlClass.FORCE:
            axis = _force_direction(seg, index, event, config.force_window, onset)
            force = ForceParams(_vec(axis), config.default_force, schema.force_role)
        else:
            sel = (times >= a - 1e-9) & (times <= b + 1e-9)
            pts = path[sel]
            if len(pts) < 2:
                raise DegenerateTrajectory(f"{task.label} span [{a:.3f}, {b:.3f}] has {len(pts)} point(s)", index)
            try:
                if cls is ControlClass.POSITION:
                    position = Waypoints(tuple(_vec(p) for p in resample_waypoints(pts, config.waypoint_spacing)))
                else:
                    if task.label == "PC-PC":
                        fit = fit_plane(pts)
                        u, v = plane_basis(fit.normal)
                        q = pts - fit.origin
                        position = PlaneTrajectory(_vec(fit.origin), _vec(fit.normal),
                                                   tuple((float(x @ u), float(x @ v)) for x in q))
                    elif task.label == "PR-PR":
                        fit = fit_line(pts)
                        position = LineTrajectory(_vec(fit.origin), _vec(fit.direction),
                                                  tuple(float(x) for x in (pts - fit.origin) @ fit.direction))
                    else:
                        fit = fit_circle(pts)
                        position = CircleTrajectory(_vec(fit.center), _vec(fit.axis), fit.radius,
                                                    fit.start_angle, fit.end_angle)
                    axis, role, second = hybrid_force_axis(task, fit, spine_base)
                    force = ForceParams(_vec(axis), config.default_force, role,
                                        None if second is None else _vec(second))
            except (DegeneratePlane, DegenerateLine, DegenerateCircle) as exc:
                raise DegenerateTrajectory(f"{task.label}: {exc}", index) from None
        models.append(TaskModel(task, SkillParams(position=position, force=force), (a, b)))

    models.append(TaskModel(RELEASE, SkillParams(release=ReleaseParams(resolve_location(release_at, boxes))),
                            (t_r, t_r)))
    return GmrOperation(tuple(models))


def initial_object_point(recording, events) -> np.ndarray:
    """Robust rest position of the object before it is grasped."""
    times = recording.times
    obj = recording.object_track(events.object_name)
    before = obj[times <= events.grasp_time]
    return np.median(before if len(before) else obj[:1], axis=0)
