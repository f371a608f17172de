"""End-to-end gate: one test per acceptance criterion, each reported as PASS/FAIL."""
import contextlib
import itertools
import math
import time
from importlib import resources
from pathlib import Path

import numpy as np
from hypothesis import given, settings

from conftest import ACCEPTANCE
from corpus_oracle import reference_report
from lfo.core import GRASP, RELEASE, canonical_task_set, deserialize_operation, serialize_operation, validate_chain
from lfo.corpus import analyze, coverage, default_exclusions, load_corpus, manipulation_verbs
from lfo.errors import ValidationError
from lfo.geomfit import fit_circle, fit_line, fit_plane
from lfo.pipeline import encode
from lfo.playback import SCENARIOS, generate_demo, replay
from lfo.posture import DIRECTIONS, build_body_frame, encode_arm_posture, quantize_direction
from lfo.taskdetect import load_kb
from mutations import mutated_documents
import oracles
from strategies import operations

SIGMA = 0.005
SEEDS = range(100)


@contextlib.contextmanager
def criterion(n, name):
    detail = {"text": ""}
    try:
        yield detail
    except BaseException:
        ACCEPTANCE[n] = (name, False, detail["text"] or "see failure above")
        raise
    ACCEPTANCE[n] = (name, True, detail["text"])


def labels(op):
    return [t.label for t in op.tasks]


def end_states(op, demo):
    return [s.value for s in replay(op, demo.environment, demo.initial_point).per_task_end_state]


def test_1_pick_carry_place_round_trip():
    with criterion(1, "pick-carry-place round trip") as info:
        t0 = time.perf_counter()
        demo = generate_demo("PickPlace")
        (op,) = encode(demo.recording, demo.environment)
        states = end_states(op, demo)
        elapsed = time.perf_counter() - t0
        info["text"] = f"{labels(op)}, end states {states}, {elapsed:.3f} s"
        assert labels(op) == ["grasp", "PC-NC", "NC-NC", "NC-PC", "release"]
        assert states == ["NC", "NC", "PC"]
        assert elapsed < 1.0


def test_2_open_fridge_and_drawer_round_trip():
    with criterion(2, "open-fridge and open-drawer round trip") as info:
        door = generate_demo("OpenDoor", {"radius": 0.5, "sweep": math.pi / 2})
        (op,) = encode(door.recording, door.environment)
        radius = op.models[2].params.position.radius
        states = end_states(op, door)
        drawer = generate_demo("OpenDrawer")
        (dop,) = encode(drawer.recording, drawer.environment)
        info["text"] = f"radius error {abs(radius - 0.5):.2e}, door states {states}, drawer {labels(dop)}"
        assert labels(op) == ["grasp", "OR-RV", "RV-RV", "release"]
        assert abs(radius - 0.5) <= 1e-6
        assert states == ["RV", "RV"]
        assert labels(dop) == ["grasp", "OP-PR", "PR-PR", "release"]
        assert end_states(dop, drawer) == ["PR", "PR"]


_NOISY: dict[str, list] = {}


def noisy_runs(scenario):
    """(seed, encoded task labels or error name, fitted door radius) for every seed; cached."""
    if scenario not in _NOISY:
        runs = []
        for seed in SEEDS:
            demo = generate_demo(scenario, noise_sigma=SIGMA, seed=seed)
            try:
                (op,) = encode(demo.recording, demo.environment)
            except Exception as exc:  # any failure is a miss for this seed
                runs.append((seed, type(exc).__name__, None, labels(demo.truth)))
                continue
            radius = op.models[2].params.position.radius if scenario == "OpenDoor" and \
                labels(op) == labels(demo.truth) else None
            runs.append((seed, labels(op), radius, labels(demo.truth)))
        _NOISY[scenario] = runs
    return _NOISY[scenario]


def test_3_noise_robustness():
    with criterion(3, "noise robustness, 5 mm, 100 seeds per scenario") as info:
        parts, ok_all = [], True
        worst_radius = 0.0
        for scenario in SCENARIOS:
            runs = noisy_runs(scenario)
            hits = sum(got == truth for _, got, _, truth in runs)
            parts.append(f"{scenario} {hits}/100")
            ok_all &= hits >= 95
            for _, got, radius, truth in runs:
                if radius is not None:
                    worst_radius = max(worst_radius, abs(radius - 0.5))
        info["text"] = ", ".join(parts) + f", worst door radius error {worst_radius:.4f} m"
        assert ok_all
        assert worst_radius <= 0.01


def test_4_grammar_oracle_exhaustive():
    with criterion(4, "grammar agrees with exhaustive checker up to length 5") as info:
        alphabet = sorted(canonical_task_set(), key=lambda t: t.label)
        assert len(alphabet) == 12
        names = [t.label for t in alphabet]
        t0 = time.perf_counter()
        count = disagreements = 0
        for n in range(1, 6):
            for idx in itertools.product(range(12), repeat=n):
                word = [alphabet[i] for i in idx]
                try:
                    validate_chain(word)
                    got = None
                except ValidationError as exc:
                    got = (exc.index, exc.reason)
                if got != oracles.grammar_verdict([names[i] for i in idx]):
                    disagreements += 1
                count += 1
        elapsed = time.perf_counter() - t0
        info["text"] = f"{count} sequences, {disagreements} disagreements, {elapsed:.2f} s"
        assert count == sum(12 ** n for n in range(1, 6))
        assert disagreements == 0
        assert elapsed < 10.0


def _skeleton(rng):
    base = {
        "spineBase": (0.0, 0.0, 1.0), "spineTop": (0.0, 0.0, 1.5),
        "leftShoulder": (0.0, 0.2, 1.45), "rightShoulder": (0.0, -0.2, 1.45),
    }
    sk = {k: np.array(v) for k, v in base.items()}
    for side in ("left", "right"):
        upper = rng.normal(size=3)
        fore = rng.normal(size=3)
        sk[f"{side}Elbow"] = sk[f"{side}Shoulder"] + 0.30 * upper / np.linalg.norm(upper)
        sk[f"{side}Wrist"] = sk[f"{side}Elbow"] + 0.28 * fore / np.linalg.norm(fore)
    return sk


def test_5_quantizer():
    with criterion(5, "direction quantizer") as info:
        table = oracles.lattice_directions()
        fixed = sum(quantize_direction(d) == i for i, d in enumerate(DIRECTIONS))

        rng = np.random.default_rng(5)
        v = rng.normal(size=(100_000, 3))
        v /= np.linalg.norm(v, axis=1)[:, None]
        agree = ties = 0
        for x in v:
            want, tie = oracles.nearest_direction(x, table)
            if tie:
                ties += 1
                continue
            agree += quantize_direction(x) == want

        equivariant = 0
        for _ in range(50):
            sk = _skeleton(rng)
            r = oracles.random_rotation(rng)
            shift = rng.normal(size=3)
            moved = {k: r @ p + shift for k, p in sk.items()}
            same = encode_arm_posture(sk, 0.0).dirs == encode_arm_posture(moved, 0.0).dirs
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            same &= quantize_direction(d, build_body_frame(sk)) == quantize_direction(r @ d, build_body_frame(moved))
            equivariant += bool(same)
        info["text"] = f"fixed points {fixed}/26, Voronoi {agree}/{100_000 - ties} ({ties} ties), " \
                       f"rotations {equivariant}/50"
        assert fixed == 26 and agree == 100_000 - ties and equivariant == 50


def test_6_fitters():
    with criterion(6, "plane, line and circle fitters") as info:
        rng = np.random.default_rng(6)
        worst_exact = 0.0
        for _ in range(20):
            r, t = oracles.random_rotation(rng), rng.uniform(-1, 1, 3)
            n_true = r @ np.array([0.0, 0.0, 1.0])
            pts = np.column_stack([rng.uniform(-1, 1, (30, 2)), np.zeros(30)]) @ r.T + t
            fit = fit_plane(pts)
            worst_exact = max(worst_exact, 1 - abs(fit.normal @ n_true), abs((fit.origin - t) @ n_true), fit.rms)

            d_true = r @ np.array([1.0, 0.0, 0.0])
            s = np.sort(rng.uniform(-1, 1, 30))
            fit = fit_line(np.outer(s, d_true) + t)
            worst_exact = max(worst_exact, np.linalg.norm(fit.direction - d_true),
                              np.linalg.norm(np.cross(fit.origin - t, d_true)), fit.rms)

            radius, sweep = rng.uniform(0.1, 2.0), rng.uniform(0.5, 6.0)
            a = np.linspace(0.0, sweep, 25)
            pts = np.column_stack([radius * np.cos(a), radius * np.sin(a), np.zeros(25)]) @ r.T + t
            fit = fit_circle(pts)
            worst_exact = max(worst_exact, abs(fit.radius - radius), np.linalg.norm(fit.center - t),
                              np.linalg.norm(fit.axis - n_true), abs(fit.end_angle - fit.start_angle - sweep),
                              np.linalg.norm(fit.point_at(fit.start_angle) - pts[0]), fit.rms)

        worst_rel = -1.0
        for kind, fitter, oracle in (("plane", fit_plane, oracles.plane_rms_oracle),
                                     ("line", fit_line, oracles.line_rms_oracle),
                                     ("circle", fit_circle, oracles.circle_rms_oracle)):
            for _ in range(20):
                r, t = oracles.random_rotation(rng), rng.uniform(-1, 1, 3)
                n = int(rng.integers(20, 201))
                if kind == "plane":
                    base = np.column_stack([rng.uniform(-0.5, 0.5, (n, 2)), np.zeros(n)])
                elif kind == "line":
                    base = np.column_stack([rng.uniform(-0.5, 0.5, n), np.zeros((n, 2))])
                else:
                    a = np.linspace(0.0, rng.uniform(1.0, 5.0), n)
                    rad = rng.uniform(0.2, 1.0)
                    base = np.column_stack([rad * np.cos(a), rad * np.sin(a), np.zeros(n)])
                pts = base @ r.T + t + rng.normal(0, 0.004, (n, 3))
                ours, best = fitter(pts).rms, oracle(pts)[0]
                worst_rel = max(worst_rel, (ours - best) / best)
        info["text"] = f"worst exact-recovery error {worst_exact:.1e}, worst rms excess over oracle {worst_rel:.1e}"
        assert worst_exact <= 1e-9
        assert worst_rel <= 1e-6


def test_7_knowledge_base():
    with criterion(7, "verb knowledge base") as info:
        kb = load_kb()
        sizes = [len(v) for v, _ in kb.groups()]
        chained = total = 0
        for _, cands in kb.items():
            for cand in cands:
                total += 1
                if not cand[0].is_manipulation:
                    chained += 1  # bare grasp or release marker
                    continue
                try:
                    validate_chain([GRASP, *cand, RELEASE])
                    chained += 1
                except ValidationError:
                    pass
        straight = sum(got == ["grasp", "OP-PR", "PR-PR", "release"] for _, got, _, _ in noisy_runs("OpenDrawer"))
        arcs = sum(got == ["grasp", "OR-RV", "RV-RV", "release"] for _, got, _, _ in noisy_runs("OpenDoor"))
        info["text"] = f"{len(kb)} verbs, groups {sizes}, {chained}/{total} candidates chain, " \
                       f"open: straight {straight}/100, arc {arcs}/100"
        assert len(kb) == 51 and sizes == [5, 10, 13, 10, 4, 5, 1, 3]
        assert chained == total
        assert straight >= 95 and arcs >= 95


def test_8_corpus():
    with criterion(8, "corpus methodology") as info:
        data = Path(str(resources.files("lfo").joinpath("data")))
        kb = load_kb()
        docs = load_corpus(data / "minicorpus", set(kb.verbs) | default_exclusions())
        report = analyze(docs, kb, k=8).dumps()
        committed = (data / "minicorpus_reference_k8.json").read_text()
        independent = reference_report(data / "minicorpus", data / "verb_kb.json", data / "exclusion_verbs.txt", 8)
        table = coverage(manipulation_verbs(), {}, kb)
        info["text"] = f"{len(docs)} documents, {len({d.category for d in docs})} categories, " \
                       f"reference match {report == committed == independent}, " \
                       f"mapped {len(table.mapped)}/{len(table.analyzed)}"
        assert report == committed == independent
        assert len(table.mapped) == len(table.analyzed) == 51


_ROUND_TRIPS = {"count": 0, "exact": 0}


@settings(max_examples=1000, derandomize=True, database=None)
@given(operations())
def _round_trip(op):
    text = serialize_operation(op)
    back = deserialize_operation(text)
    _ROUND_TRIPS["count"] += 1
    _ROUND_TRIPS["exact"] += back == op and serialize_operation(back) == text
    assert back == op and serialize_operation(back) == text


def test_9_serialization():
    with criterion(9, "serialization round trip and mutation rejection") as info:
        _ROUND_TRIPS.update(count=0, exact=0)
        _round_trip()
        base = [serialize_operation(generate_demo(s).truth) for s in SCENARIOS]
        rejected = total = 0
        for text, expected, _ in mutated_documents(base, 100, seed=7):
            total += 1
            try:
                deserialize_operation(text)
            except Exception as exc:
                rejected += type(exc) is expected
        info["text"] = f"{_ROUND_TRIPS['exact']}/{_ROUND_TRIPS['count']} exact round trips, " \
                       f"{rejected}/{total} mutations rejected with the right class"
        assert _ROUND_TRIPS["count"] >= 1000 and _ROUND_TRIPS["exact"] == _ROUND_TRIPS["count"]
        assert total == 100 and rejected == 100
