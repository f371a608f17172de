"""Command-line front end: encode, validate, replay, gen-demo, analyze-corpus, kb."""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Sequence

from .core import dumps_document, loads_document
from .corpus import analyze, load_corpus, manipulation_verbs
from .errors import InvalidScenarioParams, LfoError, SchemaViolation, StateMismatch, ValidationError
from .geomfit import SkillConfig, load_grasp_types
from .pipeline import Diagnostics, EncodeConfig, StageError, encode
from .playback import SCENARIOS, Tolerance, check_replay, dump_environment, generate_demo, load_environment, replay
from .posture import ValidityTable
from .segmentation import DetectConfig, dump_recording, load_recording
from .taskdetect import DisambiguationConfig, load_kb

EXIT_OK, EXIT_INVALID, EXIT_INPUT, EXIT_PIPELINE = 0, 1, 2, 3

KB_GROUP_SIZES = [5, 10, 13, 10, 4, 5, 1, 3]


class InputError(Exception):
    pass


@dataclass(frozen=True)
class CliConfig:
    grasp_threshold: float = 0.05
    release_threshold: float = 0.08
    smoothing_window: int = 5
    min_hold_frames: int = 3
    max_radius: float = 2.0
    waypoint_spacing: float = 0.05
    default_force: float = 5.0
    plane_eps: float = 0.005
    limit_eps: float = 0.01
    noise_sigma: float = 0.0
    seed: int = 0

    def encode_config(self) -> EncodeConfig:
        return EncodeConfig(
            detect=DetectConfig(self.grasp_threshold, self.release_threshold, self.smoothing_window,
                                self.min_hold_frames),
            disambiguation=DisambiguationConfig(self.max_radius),
            skill=SkillConfig(self.default_force, self.waypoint_spacing),
            tolerance=self.tolerance(),
        )

    def tolerance(self) -> Tolerance:
        return Tolerance(self.plane_eps, self.limit_eps)

    def check(self) -> None:
        """Fail early on values the modules would reject."""
        self.encode_config()
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")


def _camel(name: str) -> str:
    head, *rest = name.split("_")
    return head + "".join(p.title() for p in rest)


_CONFIG_KEYS = {_camel(f.name): f for f in fields(CliConfig)}


def load_config(path: str | None, overrides: dict) -> CliConfig:
    """Defaults, then the config file, then command-line flags."""
    cfg = CliConfig()
    if path:
        data = _read_json(path)
        if not isinstance(data, dict):
            raise InputError(f"{path}: config must be a JSON object")
        unknown = sorted(set(data) - set(_CONFIG_KEYS))
        if unknown:
            raise InputError(f"{path}: unknown config keys {unknown}")
        cfg = replace(cfg, **{_CONFIG_KEYS[k].name: _coerce(_CONFIG_KEYS[k], v) for k, v in data.items()})
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    try:
        cfg.check()
    except ValueError as exc:
        raise InputError(f"bad configuration: {exc}") from None
    return cfg


def _coerce(f, value):
    kind = int if f.type in (int, "int") else float
    if isinstance(value, bool) or not isinstance(value, (int, float)) or (kind is int and isinstance(value, float)):
        raise InputError(f"config key {_camel(f.name)} must be {kind.__name__}")
    return kind(value)


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON: {exc}") from None


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def write_atomic(path: str, text: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _diag(record: dict) -> None:
    sys.stderr.write(json.dumps(record) + "\n")


# --------------------------------------------------------------------------
# subcommands

def cmd_encode(args, cfg: CliConfig) -> int:
    try:
        recording = load_recording(args.recording)
        env = load_environment(args.env)
        kb = load_kb(args.kb)
        validity = ValidityTable.load(args.validity)
        grasp_types = load_grasp_types(args.grasp_types)
    except OSError as exc:
        raise InputError(str(exc)) from None
    try:
        ops = encode(recording, env, kb, cfg.encode_config(), validity, grasp_types, Diagnostics(sink=_diag))
    except StageError as exc:
        _diag({"stage": exc.stage, "status": "failed", "error": type(exc.error).__name__})
        return EXIT_PIPELINE
    text = dumps_document(ops)
    _diag({"stage": "serialize", "status": "ok", "operations": len(ops)})
    _emit(text, args.out)
    return EXIT_OK


def _load_document(path: str):
    text = _read_text(path)
    try:
        json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON: {exc}") from None
    return loads_document(text)


def cmd_validate(args, cfg: CliConfig) -> int:
    try:
        ops = _load_document(args.document)
    except ValidationError as exc:
        _diag({"stage": "validate", "status": "error", "error": exc.reason, "index": exc.index,
               "message": str(exc)})
        return EXIT_INVALID
    except SchemaViolation as exc:
        _diag({"stage": "validate", "status": "error", "error": "SchemaViolation", "message": str(exc)})
        return EXIT_INVALID
    _diag({"stage": "validate", "status": "ok", "operations": len(ops),
           "tasks": [[t.label for t in op.tasks] for op in ops]})
    return EXIT_OK


def cmd_replay(args, cfg: CliConfig) -> int:
    try:
        ops = _load_document(args.document)
    except (ValidationError, SchemaViolation) as exc:
        raise InputError(f"{args.document}: {exc}") from None
    env = load_environment(args.env)
    if not 0 <= args.operation < len(ops):
        raise InputError(f"document has {len(ops)} operation(s)")
    op = ops[args.operation]
    try:
        result = replay(op, env, args.initial_point, cfg.tolerance())
    except LfoError as exc:
        _diag({"stage": "replay", "status": "error", "error": type(exc).__name__, "message": str(exc)})
        return EXIT_INVALID
    _emit(json.dumps(result.to_json(), indent=1) + "\n", args.out)
    try:
        check_replay(result, op)
    except StateMismatch as exc:
        _diag({"stage": "replay", "status": "error", "error": "StateMismatch", "index": exc.task_index,
               "message": str(exc)})
        return EXIT_INVALID
    _diag({"stage": "replay", "status": "ok", "perTaskEndState": [s.value for s in result.per_task_end_state]})
    return EXIT_OK


def _scenario_params(pairs: Sequence[str]) -> dict:
    params = {}
    for item in pairs or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise InputError(f"--param expects key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            raise InputError(f"--param {key}: value {raw!r} is not a number or JSON list") from None
        params[key] = value
    return params


def cmd_gen_demo(args, cfg: CliConfig) -> int:
    bundle = generate_demo(args.scenario, _scenario_params(args.param), cfg.noise_sigma, cfg.seed)
    _emit(dump_recording(bundle.recording), args.out)
    if args.env_out:
        write_atomic(args.env_out, dump_environment(bundle.environment))
    if args.truth_out:
        write_atomic(args.truth_out, dumps_document([bundle.truth]))
    _diag({"stage": "gen-demo", "status": "ok", "scenario": args.scenario, "frames": len(bundle.recording.frames)})
    return EXIT_OK


def cmd_analyze_corpus(args, cfg: CliConfig) -> int:
    kb = load_kb(args.kb)
    exclusions = None
    if args.exclusions:
        exclusions = {ln.strip().lower() for ln in _read_text(args.exclusions).splitlines()
                      if ln.strip() and not ln.startswith("#")}
    docs = load_corpus(args.corpus, lexicon=set(kb.verbs) | (exclusions or set()))
    if not docs:
        raise InputError(f"no corpus documents in {args.corpus}")
    if args.top_k < 1:
        raise InputError("--top-k must be at least 1")
    report = analyze(docs, kb, args.top_k, exclusions)
    _emit(report.dumps(), args.out)
    _diag({"stage": "analyze-corpus", "status": "ok", "documents": len(docs),
           "analyzedVerbs": len(report.analyzed), "unmapped": len(report.unmapped)})
    return EXIT_OK


def cmd_kb(args, cfg: CliConfig) -> int:
    kb = load_kb(args.kb)
    if args.action == "show":
        _emit(kb.to_json(), args.out)
        return EXIT_OK
    problems = []
    if args.kb is None:
        if len(kb) != 51:
            problems.append(f"expected 51 verbs, found {len(kb)}")
        sizes = [len(v) for v, _ in kb.groups()]
        if sizes != KB_GROUP_SIZES:
            problems.append(f"group sizes {sizes} differ from {KB_GROUP_SIZES}")
        missing = [v for v in manipulation_verbs() if v not in kb]
        if missing:
            problems.append(f"unmapped verbs {missing}")
    if problems:
        _diag({"stage": "kb", "status": "error", "message": "; ".join(problems)})
        return EXIT_INVALID
    _diag({"stage": "kb", "status": "ok", "message": f"{len(kb)} verbs", "groups": len(kb.groups())})
    sys.stdout.write(f"{len(kb)} verbs in {len(kb.groups())} groups\n")
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lfo", description="Compile demonstrations into GMR task-model documents.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file (camelCase keys)")
        sp.add_argument("--out", help="write the result here instead of stdout")
        for f in fields(CliConfig):
            sp.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None,
                            type=int if f.type in (int, "int") else float)
        return sp

    sp = common(sub.add_parser("encode", help="encode a recording into a task-model document"))
    sp.add_argument("recording")
    sp.add_argument("--env", required=True, help="environment file (locations and contact primitives)")
    sp.add_argument("--kb", help="verb knowledge base (default: bundled)")
    sp.add_argument("--validity", help="posture validity table")
    sp.add_argument("--grasp-types", help="object name to grasp type table")
    sp.set_defaults(func=cmd_encode)

    sp = common(sub.add_parser("validate", help="check grammar and schema of a document"))
    sp.add_argument("document")
    sp.set_defaults(func=cmd_validate)

    sp = common(sub.add_parser("replay", help="replay a document against an environment"))
    sp.add_argument("document")
    sp.add_argument("--env", required=True)
    sp.add_argument("--operation", type=int, default=0, help="index of the operation to replay")
    sp.add_argument("--initial-point", type=float, nargs=3, metavar=("X", "Y", "Z"))
    sp.set_defaults(func=cmd_replay)

    sp = common(sub.add_parser("gen-demo", help="synthesize a demonstration recording"))
    sp.add_argument("scenario", choices=SCENARIOS)
    sp.add_argument("--param", action="append", metavar="KEY=VALUE", help="scenario parameter, repeatable")
    sp.add_argument("--env-out", help="also write the scenario environment")
    sp.add_argument("--truth-out", help="also write the ground-truth document")
    sp.set_defaults(func=cmd_gen_demo)

    sp = common(sub.add_parser("analyze-corpus", help="verb coverage report for a corpus directory"))
    sp.add_argument("corpus")
    sp.add_argument("--kb")
    sp.add_argument("--top-k", type=int, default=100)
    sp.add_argument("--exclusions", help="non-manipulation verb list, one per line")
    sp.set_defaults(func=cmd_analyze_corpus)

    sp = common(sub.add_parser("kb", help="show or check a verb knowledge base"))
    sp.add_argument("action", choices=("show", "check"))
    sp.add_argument("--kb")
    sp.set_defaults(func=cmd_kb)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {f.name: getattr(args, f.name) for f in fields(CliConfig)}
    try:
        cfg = load_config(args.config, overrides)
        return args.func(args, cfg)
    except InputError as exc:
        _diag({"stage": args.command, "status": "error", "error": "InputError", "message": str(exc)})
    except (SchemaViolation, InvalidScenarioParams) as exc:
        _diag({"stage": args.command, "status": "error", "error": type(exc).__name__, "message": str(exc)})
    except LfoError as exc:
        # malformed knowledge base, validity table or recording contents
        _diag({"stage": args.command, "status": "error", "error": type(exc).__name__, "message": str(exc)})
    except (OSError, KeyError, ValueError) as exc:
        _diag({"stage": args.command, "status": "error", "error": type(exc).__name__, "message": str(exc)})
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
