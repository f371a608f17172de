"""Demonstration-to-task-model encoding, stage by stage."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .core import GmrOperation
from .errors import LfoError
from .geomfit import DEFAULT_GRASP_TYPES, SkillConfig, build_skill_params, held_path, initial_object_point
from .playback import Environment, Tolerance, infer_contact_state
from .posture import ValidityTable, attach_postures, encode_timeline, filter_invalid
from .segmentation import (
    DemonstrationRecording, DetectConfig, detect_grasp_release, parse_instruction, segment, split_sentences,
)
from .taskdetect import DisambiguationConfig, VerbKnowledgeBase, load_kb, serialize_tasks


@dataclass(frozen=True)
class EncodeConfig:
    detect: DetectConfig = DetectConfig()
    disambiguation: DisambiguationConfig = DisambiguationConfig()
    skill: SkillConfig = SkillConfig()
    tolerance: Tolerance = Tolerance()


class StageError(Exception):
    """A pipeline error tagged with the stage that raised it."""

    def __init__(self, stage: str, error: LfoError, operation: int):
        super().__init__(f"{stage}: {error}")
        self.stage = stage
        self.error = error
        self.operation = operation


@dataclass
class Diagnostics:
    records: list[dict] = field(default_factory=list)
    sink: Callable[[dict], None] | None = None

    def emit(self, **record) -> None:
        self.records.append(record)
        if self.sink is not None:
            self.sink(record)


def _run(diag: Diagnostics, stage: str, op_index: int, fn, *args, **kwargs):
    try:
        out = fn(*args, **kwargs)
    except LfoError as exc:
        rec = {"stage": stage, "operation": op_index, "status": "error", "error": type(exc).__name__,
               "message": str(exc)}
        for attr in ("index", "task_index"):
            if getattr(exc, attr, None) is not None:
                rec["index"] = getattr(exc, attr)
        diag.emit(**rec)
        raise StageError(stage, exc, op_index) from exc
    diag.emit(stage=stage, operation=op_index, status="ok")
    return out


def encode(recording: DemonstrationRecording, env: Environment, kb: VerbKnowledgeBase | None = None,
           config: EncodeConfig = EncodeConfig(), validity: ValidityTable | None = None,
           grasp_types: dict[str, str] | None = None, diagnostics: Diagnostics | None = None) -> list[GmrOperation]:
    """Encode every instructed operation in a recording, one per sentence."""
    kb = kb or load_kb()
    diag = diagnostics or Diagnostics()
    grasp_types = grasp_types if grasp_types is not None else DEFAULT_GRASP_TYPES
    sentences = split_sentences(recording.transcript) or [list(recording.transcript)]
    timeline = None
    ops = []
    after = None
    for k, words in enumerate(sentences):
        instr = _run(diag, "parse_instruction", k, parse_instruction, words, kb.verbs,
                     object_names=recording.object_names())
        events = _run(diag, "detect_grasp_release", k, detect_grasp_release, recording, instr.object_name,
                      instr.hand, config.detect, after)
        seg = _run(diag, "segment", k, segment, recording, events)
        rest = initial_object_point(recording, events)
        initial = None
        if env.primitives:
            initial, _ = infer_contact_state(rest, env, config.tolerance)
        tasks = _run(diag, "serialize_tasks", k, serialize_tasks, instr, kb, held_path(seg), initial,
                     config.disambiguation)
        op = _run(diag, "build_skill_params", k, build_skill_params, tasks, seg, instr, env.boxes, config.skill,
                  grasp_types)
        if timeline is None:
            timeline = _run(diag, "encode_postures", k,
                            lambda: filter_invalid(encode_timeline(recording.frames), validity))
        op = _run(diag, "attach_postures", k, attach_postures, op, timeline)
        ops.append(op)
        after = events.release_time
    return ops
