"""Verb knowledge base and task-sequence detection."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import GRASP, RELEASE, ContactState, Task, parse_task_label, validate_chain
from .errors import (
    AmbiguityUnresolved, ChainConflict, DegenerateCircle, DegenerateLine, DegenerateTrajectory, DuplicateVerb,
    InitialStateMismatch, KbChainError, MalformedLabel, NonCanonicalTask, UnknownVerb,
)
from .geomfit import fit_circle, fit_line
from .segmentation import Instruction, moving_average

Candidate = tuple[Task, ...]

_PRISMATIC = {ContactState.PR, ContactState.OP}
_REVOLUTE = {ContactState.RV, ContactState.OR}


def _is_marker(cand: Candidate) -> bool:
    return len(cand) == 1 and not cand[0].is_manipulation


def _parse_candidate(verb: str, raw) -> Candidate:
    if isinstance(raw, str):
        raw = [raw]
    if not isinstance(raw, list) or not raw:
        raise KbChainError(f"{verb}: candidate must be a non-empty list of task labels")
    tasks: list[Task] = []
    for label in raw:
        if not isinstance(label, str):
            raise KbChainError(f"{verb}: task label {label!r} is not a string")
        parts = label.split("-")
        try:
            if len(parts) > 2:
                # chain shorthand: "PC-NC-NC" is PC-NC then NC-NC
                tasks.extend(parse_task_label(f"{a}-{b}") for a, b in zip(parts, parts[1:]))
            else:
                tasks.append(parse_task_label(label))
        except (MalformedLabel, NonCanonicalTask) as exc:
            raise KbChainError(f"{verb}: {exc}") from None
    cand = tuple(tasks)
    if any(not t.is_manipulation for t in cand) and not _is_marker(cand):
        raise KbChainError(f"{verb}: grasp/release markers must stand alone")
    for i in range(1, len(cand)):
        if cand[i - 1].dst != cand[i].src:
            raise KbChainError(f"{verb}: {cand[i - 1].label} does not chain into {cand[i].label}")
    return cand


class VerbKnowledgeBase:
    """Immutable mapping from lowercase verbs to candidate task sequences."""

    def __init__(self, entries: Mapping[str, Sequence[Candidate]]):
        self._entries = {k: tuple(v) for k, v in entries.items()}

    @classmethod
    def from_mapping(cls, pairs) -> "VerbKnowledgeBase":
        entries: dict[str, tuple[Candidate, ...]] = {}
        items = pairs.items() if isinstance(pairs, Mapping) else pairs
        for verb, raw in items:
            key = str(verb).strip().lower()
            if key in entries:
                raise DuplicateVerb(f"verb {key!r} listed twice")
            if isinstance(raw, list) and raw and all(isinstance(c, list) for c in raw):
                cands = tuple(_parse_candidate(key, c) for c in raw)
            else:
                cands = (_parse_candidate(key, raw),)
            if not cands:
                raise KbChainError(f"{key}: no candidates")
            entries[key] = cands
        return cls(entries)

    def __len__(self):
        return len(self._entries)

    def __contains__(self, verb):
        return str(verb).lower() in self._entries

    @property
    def verbs(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def groups(self) -> list[tuple[list[str], tuple[Candidate, ...]]]:
        """Verbs sharing identical candidate lists, in order of first appearance."""
        out: dict[tuple, list[str]] = {}
        for verb, cands in self._entries.items():
            out.setdefault(cands, []).append(verb)
        return [(verbs, cands) for cands, verbs in out.items()]

    def to_json(self) -> str:
        lines = [f"  {json.dumps(v)}: {json.dumps([[t.label for t in c] for c in cands])}"
                 for v, cands in self._entries.items()]
        return "{\n" + ",\n".join(lines) + "\n}\n"


class _Pairs(list):
    pass


def _reject_duplicates(pairs):
    seen = set()
    for k, _ in pairs:
        if k.lower() in seen:
            raise DuplicateVerb(f"verb {k.lower()!r} listed twice")
        seen.add(k.lower())
    return _Pairs(pairs)


def load_kb(document: str | Path | None = None) -> VerbKnowledgeBase:
    """Load a KB file, or the bundled default when ``document`` is None."""
    if document is None:
        text = resources.files("lfo").joinpath("data/verb_kb.json").read_text()
    else:
        text = Path(document).read_text()
    pairs = json.loads(text, object_pairs_hook=_reject_duplicates)
    if not isinstance(pairs, _Pairs):
        raise KbChainError("KB document must be a JSON object")
    return VerbKnowledgeBase.from_mapping(pairs)


def lookup(kb: VerbKnowledgeBase, verb: str) -> tuple[Candidate, ...]:
    try:
        return kb._entries[verb.lower()]
    except KeyError:
        raise UnknownVerb(f"{verb!r} is not in the knowledge base") from None


@dataclass(frozen=True)
class TrajectoryShape:
    line_rms: float
    arc_rms: float
    arc_radius: float
    arc_angle: float


def trajectory_shape(points, smoothing: int = 1) -> TrajectoryShape:
    p = np.asarray(points, dtype=float)
    if len(p) < 3:
        raise DegenerateTrajectory("shape analysis needs at least 3 points")
    if smoothing > 1:
        p = moving_average(p, smoothing)
    try:
        line = fit_line(p)
    except DegenerateLine:
        raise DegenerateTrajectory("hand did not move") from None
    try:
        arc = fit_circle(p)
        return TrajectoryShape(line.rms, arc.rms, arc.radius, arc.end_angle - arc.start_angle)
    except DegenerateCircle:
        return TrajectoryShape(line.rms, math.inf, math.inf, 0.0)


@dataclass(frozen=True)
class DisambiguationConfig:
    max_radius: float = 2.0
    smoothing: int = 5

    def __post_init__(self):
        if self.max_radius <= 0 or self.smoothing < 1:
            raise ValueError("max radius must be positive and smoothing >= 1")


def disambiguate(candidates: Sequence[Candidate], trajectory,
                 config: DisambiguationConfig = DisambiguationConfig()) -> Candidate:
    """Pick between a prismatic and a revolute reading of a verb.

    Straight hand paths (line fits at least as well as an arc, or the arc is
    flatter than ``max_radius``) select the prismatic candidate.
    """
    if not candidates:
        raise ValueError("no candidates")
    if len(candidates) == 1:
        return candidates[0]
    prismatic = [c for c in candidates if any({t.src, t.dst} & _PRISMATIC for t in c if t.is_manipulation)]
    revolute = [c for c in candidates if any({t.src, t.dst} & _REVOLUTE for t in c if t.is_manipulation)]
    if not prismatic or not revolute or set(prismatic) & set(revolute):
        raise AmbiguityUnresolved("candidates are not split into prismatic and revolute readings")
    shape = trajectory_shape(trajectory, config.smoothing)
    if shape.line_rms <= shape.arc_rms or shape.arc_radius > config.max_radius:
        return prismatic[0]
    return revolute[0]


def _zero_progress(t: Task) -> bool:
    return t.is_manipulation and t.src == t.dst


def serialize_tasks(instruction: Instruction, kb: VerbKnowledgeBase, trajectory,
                    initial_state: ContactState | None,
                    config: DisambiguationConfig = DisambiguationConfig()) -> list[Task]:
    """Full grasp ... release task list for an instruction, verbs in spoken order."""
    if not instruction.verbs:
        raise ValueError("instruction has no verbs")
    chain: list[Task] = []
    for verb in instruction.verbs:
        cands = lookup(kb, verb)
        if all(_is_marker(c) for c in cands):
            continue  # grasp/release verbs add no manipulation
        chosen = disambiguate(cands, trajectory, config)
        for task in chosen:
            if chain and chain[-1] == task and _zero_progress(task):
                continue  # one carry leg, not two
            if chain and chain[-1].dst != task.src:
                raise ChainConflict(f"{verb!r} starts with {task.label} after {chain[-1].label}")
            chain.append(task)
    if chain and initial_state is not None and chain[0].src != initial_state:
        raise InitialStateMismatch(
            f"first task {chain[0].label} starts in {chain[0].src.value}, object is {initial_state.value}")
    seq = [GRASP, *chain, RELEASE]
    validate_chain(seq)
    return seq
