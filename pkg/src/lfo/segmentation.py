"""Recording I/O, instruction parsing and grasp/release segmentation."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Hand
from .errors import EmptySegment, NoActionVerb, NoGraspDetected, NoTargetObject, SchemaViolation


@dataclass(frozen=True)
class Frame:
    t: float
    joints: Mapping[str, tuple]
    objects: Mapping[str, tuple]


@dataclass(frozen=True)
class Word:
    word: str
    start: float
    end: float


@dataclass(frozen=True)
class DemonstrationRecording:
    frames: tuple[Frame, ...]
    transcript: tuple[Word, ...]

    def __post_init__(self):
        ts = [f.t for f in self.frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise SchemaViolation("frame timestamps must be strictly increasing")
        for w in self.transcript:
            if w.start > w.end:
                raise SchemaViolation(f"word {w.word!r} ends before it starts")

    @property
    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.frames])

    def joint_track(self, name: str) -> np.ndarray:
        return _track(self.frames, "joints", name)

    def object_track(self, name: str) -> np.ndarray:
        return _track(self.frames, "objects", name)

    def object_names(self) -> list[str]:
        names: dict[str, None] = {}
        for f in self.frames:
            names.update(dict.fromkeys(f.objects))
        return list(names)


def _track(frames, kind: str, name: str) -> np.ndarray:
    try:
        return np.array([getattr(f, kind)[name] for f in frames], dtype=float)
    except KeyError:
        missing = next(f.t for f in frames if name not in getattr(f, kind))
        raise SchemaViolation(f"{kind[:-1]} {name!r} missing at t={missing}") from None


def recording_to_json(rec: DemonstrationRecording) -> dict:
    return {
        "frames": [
            {"t": f.t,
             "joints": {k: list(v) for k, v in f.joints.items()},
             "objects": {k: list(v) for k, v in f.objects.items()}}
            for f in rec.frames
        ],
        "transcript": [{"word": w.word, "start": w.start, "end": w.end} for w in rec.transcript],
    }


def _point(v, what):
    if not isinstance(v, list) or len(v) != 3 or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise SchemaViolation(f"{what} must be a 3-vector")
    return tuple(float(x) for x in v)


def recording_from_json(d) -> DemonstrationRecording:
    if not isinstance(d, dict) or "frames" not in d or "transcript" not in d:
        raise SchemaViolation("recording needs 'frames' and 'transcript'")
    frames = []
    for i, f in enumerate(d["frames"]):
        try:
            frames.append(Frame(
                float(f["t"]),
                {k: _point(v, f"frame {i} joint {k}") for k, v in f.get("joints", {}).items()},
                {k: _point(v, f"frame {i} object {k}") for k, v in f.get("objects", {}).items()},
            ))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise SchemaViolation(f"frame {i} is malformed: {exc}") from None
    words = []
    for i, w in enumerate(d["transcript"]):
        try:
            words.append(Word(str(w["word"]), float(w["start"]), float(w["end"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"transcript word {i} is malformed: {exc}") from None
    return DemonstrationRecording(tuple(frames), tuple(words))


def load_recording(path: str | Path) -> DemonstrationRecording:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: not valid JSON: {exc}") from None
    return recording_from_json(data)


def dump_recording(rec: DemonstrationRecording) -> str:
    return json.dumps(recording_to_json(rec), separators=(",", ":")) + "\n"


# --------------------------------------------------------------------------
# instruction

@dataclass(frozen=True)
class Instruction:
    verbs: tuple[str, ...]
    object_name: str
    object_attribute: str
    hand: Hand


DEFAULT_ATTRIBUTES = frozenset({
    "red", "green", "blue", "yellow", "black", "white", "pink", "purple", "orange", "gray", "grey",
    "brown", "big", "small", "large", "little", "tall", "short", "empty", "full", "wet", "dry",
    "clean", "dirty", "hot", "cold", "top", "bottom", "upper", "lower",
})

_TOKEN = re.compile(r"[a-z0-9']+")


def _tokens(transcript: Iterable[Word]) -> list[str]:
    out = []
    for w in transcript:
        out.extend(_TOKEN.findall(w.word.lower()))
    return out


def split_sentences(transcript: Sequence[Word]) -> list[list[Word]]:
    """Split on period tokens; one GMR operation is taught per sentence."""
    sentences, cur = [], []
    for w in transcript:
        stripped = w.word.strip()
        cur.append(w)
        if stripped.endswith((".", "!", "?")):
            sentences.append(cur)
            cur = []
    if any(_TOKEN.search(w.word.lower()) for w in cur):
        sentences.append(cur)
    return [s for s in sentences if _tokens(s)]


def parse_instruction(transcript: Sequence[Word], verb_lexicon: Iterable[str],
                      attribute_lexicon: Iterable[str] | None = None,
                      object_names: Iterable[str] = ()) -> Instruction:
    if not transcript:
        raise ValueError("empty transcript")
    verbs_lex = {v.lower() for v in verb_lexicon}
    attrs = {a.lower() for a in (DEFAULT_ATTRIBUTES if attribute_lexicon is None else attribute_lexicon)}
    names = {n.lower(): n for n in object_names}
    tokens = _tokens(transcript)

    verbs: list[str] = []
    for tok in tokens:
        if tok in verbs_lex and (not verbs or verbs[-1] != tok):
            verbs.append(tok)
    if not verbs:
        raise NoActionVerb(f"no known action verb in {' '.join(tokens)!r}")

    target = next((i for i, tok in enumerate(tokens) if tok in names), None)
    if target is None:
        raise NoTargetObject(f"no word names a tracked object in {' '.join(tokens)!r}")
    attribute = next((tokens[i] for i in range(target - 1, -1, -1) if tokens[i] in attrs), "")
    hand = Hand.LEFT if "left" in tokens else Hand.RIGHT
    return Instruction(tuple(verbs), names[tokens[target]], attribute, hand)


# --------------------------------------------------------------------------
# grasp / release detection

@dataclass(frozen=True)
class DetectConfig:
    grasp_threshold: float = 0.05
    release_threshold: float = 0.08
    smoothing_window: int = 5
    min_hold_frames: int = 3

    def __post_init__(self):
        if not 0 < self.grasp_threshold < self.release_threshold:
            raise ValueError("need 0 < grasp threshold < release threshold")
        if self.smoothing_window < 1 or self.min_hold_frames < 1:
            raise ValueError("smoothing window and hold frames must be >= 1")


@dataclass(frozen=True)
class SegmentEvents:
    grasp_time: float
    release_time: float
    object_name: str = ""
    hand: Hand = Hand.RIGHT


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average along axis 0; the window shrinks at the ends."""
    x = np.asarray(x, dtype=float)
    if window <= 1 or len(x) == 0:
        return x.copy()
    half = window // 2
    n = len(x)
    csum = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)])
    lo = np.clip(np.arange(n) - half, 0, n)
    hi = np.clip(np.arange(n) + (window - half), 0, n)
    counts = (hi - lo).reshape((-1,) + (1,) * (x.ndim - 1))
    return (csum[hi] - csum[lo]) / counts


def hysteresis_events(distance: Sequence[float], config: DetectConfig = DetectConfig()) -> list[tuple[str, int]]:
    """All alternating ("grasp"|"release", frame index) events of a distance trace.

    A grasp fires at the first frame of a run of ``min_hold_frames`` frames below
    the grasp threshold; a release at the first frame of such a run above the
    release threshold.  Events always alternate and start with a grasp.
    """
    d = np.asarray(distance, dtype=float)
    hold = config.min_hold_frames
    events = []
    holding = False
    run = 0
    for i, v in enumerate(d):
        hit = v > config.release_threshold if holding else v < config.grasp_threshold
        run = run + 1 if hit else 0
        if run >= hold:
            events.append(("release" if holding else "grasp", i - hold + 1))
            holding = not holding
            run = 0
    return events


def hand_joint(hand: Hand) -> str:
    return "leftWrist" if hand is Hand.LEFT else "rightWrist"


def detect_grasp_release(recording: DemonstrationRecording, object_name: str, hand: Hand,
                         config: DetectConfig = DetectConfig(), after: float | None = None) -> SegmentEvents:
    """Grasp and release times from the wrist-object distance.

    ``after`` restricts the search to frames later than that time, for
    recordings holding several operations.
    """
    times = recording.times
    wrist = recording.joint_track(hand_joint(hand))
    obj = recording.object_track(object_name)
    dist = moving_average(np.linalg.norm(wrist - obj, axis=1), config.smoothing_window)
    offset = 0
    if after is not None:
        offset = int(np.searchsorted(times, after, side="right"))
    events = hysteresis_events(dist[offset:], config)
    if not events:
        raise NoGraspDetected(f"hand never came within {config.grasp_threshold} m of {object_name}")
    gi = events[0][1] + offset
    ri = events[1][1] + offset if len(events) > 1 else len(times) - 1
    if ri <= gi:
        raise NoGraspDetected(f"grasp of {object_name} at the last frame")
    return SegmentEvents(float(times[gi]), float(times[ri]), object_name, hand)


@dataclass(frozen=True)
class Segment:
    frames: tuple[Frame, ...]
    times: np.ndarray
    trajectory: np.ndarray  # manipulating wrist, one row per frame
    object_track: np.ndarray
    events: SegmentEvents
    motion: tuple[float, float] = field(default=(0.0, 0.0))


def detect_motion_interval(recording: DemonstrationRecording, events: SegmentEvents,
                           noise_factor: float = 6.0, smoothing: int = 5) -> tuple[float, float]:
    """Time span in which the grasped object actually moves.

    The object is at rest before the grasp and after the release.  Jitter of
    the smoothed track in those rest periods sets the displacement threshold,
    so noiseless recordings are cut within a few frames of motion onset and
    offset.
    """
    times = recording.times
    obj = moving_average(recording.object_track(events.object_name), smoothing)
    inside = (times >= events.grasp_time) & (times <= events.release_time)
    idx = np.nonzero(inside)[0]
    before = obj[times <= events.grasp_time]
    after = obj[times >= events.release_time]
    rest_start = np.median(before, axis=0)
    rest_end = np.median(after, axis=0)

    def jitter(block):
        if len(block) < 3:
            return 0.0
        mad = np.median(np.abs(block - np.median(block, axis=0)), axis=0)
        return float(np.max(1.4826 * mad))

    eps = max(1e-6, noise_factor * max(jitter(before), jitter(after)))
    moved_from_start = np.linalg.norm(obj[idx] - rest_start, axis=1) > eps
    moved_from_end = np.linalg.norm(obj[idx] - rest_end, axis=1) > eps
    if not moved_from_start.any() or not moved_from_end.any():
        return float(times[idx[0]]), float(times[idx[-1]])
    # one frame of margin keeps the rest pose at each end of the motion
    on = max(int(np.argmax(moved_from_start)) - 1, 0)
    off = min(len(idx) - 1 - int(np.argmax(moved_from_end[::-1])) + 1, len(idx) - 1)
    if off <= on:
        return float(times[idx[0]]), float(times[idx[-1]])
    return float(times[idx[on]]), float(times[idx[off]])


def segment(recording: DemonstrationRecording, events: SegmentEvents) -> Segment:
    times = recording.times
    idx = np.nonzero((times >= events.grasp_time) & (times <= events.release_time))[0]
    if len(idx) < 2:
        raise EmptySegment(f"only {len(idx)} frame(s) between grasp and release")
    frames = tuple(recording.frames[i] for i in idx)
    traj = np.array([f.joints[hand_joint(events.hand)] for f in frames], dtype=float)
    objs = (np.array([f.objects[events.object_name] for f in frames], dtype=float)
            if events.object_name else np.empty((len(frames), 3)))
    motion = detect_motion_interval(recording, events) if events.object_name else (
        float(times[idx[0]]), float(times[idx[-1]]))
    return Segment(frames, times[idx], traj, objs, events, motion)
