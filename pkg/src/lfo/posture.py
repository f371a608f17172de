"""Arm posture quantization on the 26-direction sphere.

Directions are expressed in a body-local frame (forward, left, up) built from
the spine and shoulder joints, so the encoding does not depend on where the
demonstrator stands or which way they face.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import ArmPostureFrame, GmrOperation
from .errors import AllFramesInvalid, CoverageGap, DegenerateSkeleton, NotUnit

# Normalized nonzero vectors of {-1,0,1}^3, lexicographic in (forward, left, up).
_RAW = [v for v in itertools.product((-1, 0, 1), repeat=3) if v != (0, 0, 0)]
DIRECTIONS = np.array([np.array(v) / np.linalg.norm(v) for v in _RAW])
DIRECTIONS.setflags(write=False)


def direction_index(v) -> int:
    """Index of the table entry for the integer lattice vector ``v``."""
    return _RAW.index(tuple(int(x) for x in v))


ARM_JOINTS = ("leftShoulder", "leftElbow", "leftWrist", "rightShoulder", "rightElbow", "rightWrist")
FRAME_JOINTS = ("spineBase", "spineTop", "leftShoulder", "rightShoulder")

_MIN_LEN = 1e-3
_MIN_ANGLE = math.radians(1.0)


@dataclass(frozen=True)
class BodyFrame:
    origin: np.ndarray
    forward: np.ndarray
    left: np.ndarray
    up: np.ndarray

    @property
    def rotation(self) -> np.ndarray:
        """Rows are the body axes; ``rotation @ v`` maps world to body coordinates."""
        return np.vstack([self.forward, self.left, self.up])


def _joint(skeleton: Mapping, name: str) -> np.ndarray:
    if name not in skeleton:
        raise DegenerateSkeleton(f"missing joint {name}")
    return np.asarray(skeleton[name], dtype=float)


def build_body_frame(skeleton: Mapping) -> BodyFrame:
    base = _joint(skeleton, "spineBase")
    spine = _joint(skeleton, "spineTop") - base
    shoulders = _joint(skeleton, "leftShoulder") - _joint(skeleton, "rightShoulder")
    ls, lsh = np.linalg.norm(spine), np.linalg.norm(shoulders)
    if ls < _MIN_LEN or lsh < _MIN_LEN:
        raise DegenerateSkeleton("spine or shoulder span shorter than 1 mm")
    up = spine / ls
    left_raw = shoulders / lsh
    cross = np.cross(left_raw, up)
    if np.linalg.norm(cross) < math.sin(_MIN_ANGLE):
        raise DegenerateSkeleton("spine and shoulder axes are parallel")
    forward = cross / np.linalg.norm(cross)
    left = np.cross(up, forward)
    return BodyFrame(base, forward, left, up)


def quantize_direction(d, frame: BodyFrame | None = None) -> int:
    """Nearest of the 26 canonical directions; ties go to the lowest index."""
    d = np.asarray(d, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-6:
        raise NotUnit(f"|d| = {np.linalg.norm(d)}")
    local = d if frame is None else frame.rotation @ d
    return int(np.argmax(DIRECTIONS @ local))


def _segment_dir(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    v = b - a
    n = np.linalg.norm(v)
    if n < _MIN_LEN:
        raise DegenerateSkeleton(f"{what} joints coincide")
    return v / n


def encode_arm_posture(skeleton: Mapping, timestamp: float) -> ArmPostureFrame:
    frame = build_body_frame(skeleton)
    dirs = []
    for side in ("left", "right"):
        s = _joint(skeleton, f"{side}Shoulder")
        e = _joint(skeleton, f"{side}Elbow")
        w = _joint(skeleton, f"{side}Wrist")
        dirs.append(quantize_direction(_segment_dir(s, e, f"{side} shoulder/elbow"), frame))
        dirs.append(quantize_direction(_segment_dir(e, w, f"{side} elbow/wrist"), frame))
    return ArmPostureFrame(float(timestamp), tuple(dirs), True)


def encode_timeline(frames) -> list[ArmPostureFrame]:
    """Encode every recording frame; incomplete skeletons yield frames without dirs."""
    out = []
    for fr in frames:
        try:
            out.append(encode_arm_posture(fr.joints, fr.t))
        except DegenerateSkeleton:
            out.append(ArmPostureFrame(float(fr.t), None, False))
    return out


class ValidityTable:
    """Allowed (upper arm, forearm) index pairs for each side."""

    def __init__(self, left: set[tuple[int, int]], right: set[tuple[int, int]]):
        self.left = frozenset(left)
        self.right = frozenset(right)

    @classmethod
    def default(cls, min_flexion_deg: float = 20.0) -> "ValidityTable":
        # A pair is impossible when the forearm folds back onto the upper arm.
        allowed = set()
        for u, f in itertools.product(range(26), repeat=2):
            cos = float(np.dot(-DIRECTIONS[u], DIRECTIONS[f]))
            angle = math.degrees(math.acos(max(-1.0, min(1.0, cos))))
            if angle >= min_flexion_deg:
                allowed.add((u, f))
        return cls(allowed, allowed)

    @classmethod
    def load(cls, path: str | Path | None) -> "ValidityTable":
        if path is None:
            return cls.default()
        data = json.loads(Path(path).read_text())
        return cls({tuple(p) for p in data["left"]}, {tuple(p) for p in data["right"]})

    def allows(self, dirs: Sequence[int]) -> bool:
        return (dirs[0], dirs[1]) in self.left and (dirs[2], dirs[3]) in self.right


def filter_invalid(timeline: Sequence[ArmPostureFrame], table: ValidityTable | None = None) -> list[ArmPostureFrame]:
    """Repair invalid frames by holding the last valid posture.

    Leading invalid frames take the first valid posture.  Repaired frames keep
    their own timestamp and are flagged ``valid=False``.
    """
    table = table or ValidityTable.default()
    ok = [f.dirs is not None and table.allows(f.dirs) for f in timeline]
    if not any(ok):
        raise AllFramesInvalid("no frame passes the validity table")
    held = timeline[ok.index(True)].dirs
    out = []
    for f, good in zip(timeline, ok):
        if good:
            held = f.dirs
            out.append(f if f.valid else replace(f, valid=True))
        else:
            out.append(ArmPostureFrame(f.timestamp, held, False))
    return out


def attach_postures(op: GmrOperation, timeline: Sequence[ArmPostureFrame]) -> GmrOperation:
    times = np.array([f.timestamp for f in timeline])
    models = []
    for i, m in enumerate(op.models):
        t0, t1 = m.interval
        idx = np.nonzero((times >= t0) & (times <= t1))[0]
        if len(idx) == 0:
            raise CoverageGap(f"task {i} ({m.task.label}) interval [{t0}, {t1}] has no posture frames")
        frames = tuple(timeline[j] for j in idx)
        models.append(replace(m, params=replace(m.params, postures=frames)))
    return GmrOperation(tuple(models))
