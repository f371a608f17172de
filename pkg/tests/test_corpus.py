from collections import Counter
from importlib import resources
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from lfo.corpus import (
    TaggedTranscript, Token, analyze, count_verbs, coverage, default_exclusions, load_corpus, manipulation_verbs,
    top_k, transcript_from_json, unify_and_filter,
)
from lfo.errors import SchemaViolation
from lfo.taskdetect import load_kb

from corpus_oracle import reference_report

DATA = Path(str(resources.files("lfo").joinpath("data")))
KB = load_kb()


def doc(category, *tokens):
    """Tokens ending in '/n' are non-verbs."""
    return TaggedTranscript(category, tuple(Token(t[:-2], False) if t.endswith("/n") else Token(t, True)
                                            for t in tokens))


def test_count_verbs():
    counts = count_verbs([doc("floor", "wipe", "wipe", "table/n", "rub"), doc("carpet", "wipe")])
    assert counts == {"floor": Counter(wipe=2, rub=1), "carpet": Counter(wipe=1)}
    assert count_verbs([doc("empty")]) == {"empty": Counter()}


def test_top_k():
    assert top_k({"a": 3, "b": 2, "c": 1}, 2) == ["a", "b"]
    assert top_k({"b": 2, "a": 2}, 1) == ["a"]
    assert top_k({"a": 1, "b": 5}, 10) == ["b", "a"]
    with pytest.raises(ValueError):
        top_k({"a": 1}, 0)


def test_unify_and_filter():
    assert unify_and_filter([["take", "see"], ["see", "put"]], {"see"}) == {"take", "put"}
    assert unify_and_filter([["take"], ["put"]]) == {"take", "put"}


def test_appearance_rate():
    counts = {"floor": Counter(wipe=9, see=1)}
    rep = coverage(["wipe"], counts, KB)
    assert rep.categories["floor"].appearance_rate == pytest.approx(0.9)


def test_table_verbs_all_mapped():
    verbs = manipulation_verbs()
    assert len(verbs) == len(set(verbs)) == 51
    rep = coverage(verbs, {}, KB)
    assert len(rep.mapped) == 51 and rep.unmapped == ()


def test_three_document_fixture_by_hand():
    docs = [doc("floor", "wipe", "wipe", "see", "mop", "floor/n"),
            doc("floor", "wipe", "go"),
            doc("cooking", "cut", "stir", "stir", "see", "pour")]
    rep = analyze(docs, KB, k=2, exclusions={"see", "go"}).to_json()
    # floor counts: wipe 3, see 1, mop 1, go 1 -> top2 [wipe, go]
    # cooking counts: stir 2, cut 1, pour 1, see 1 -> top2 [stir, cut]
    assert rep["global"] == {"unionUniqueVerbs": 4, "analyzedVerbs": 3,
                             "mappedVerbs": ["cut", "stir", "wipe"], "unmappedVerbs": []}
    assert rep["categories"]["floor"] == {"totalVerbTokens": 6, "analyzedVerbTokens": 3, "uniqueVerbs": 4,
                                          "analyzedUniqueVerbs": 1, "appearanceRate": 0.5}
    assert rep["categories"]["cooking"] == {"totalVerbTokens": 5, "analyzedVerbTokens": 3, "uniqueVerbs": 4,
                                            "analyzedUniqueVerbs": 2, "appearanceRate": 0.6}
    assert rep["mapping"]["wipe"] == ["PC-PC"]


def _mini():
    lexicon = set(KB.verbs) | default_exclusions()
    return load_corpus(DATA / "minicorpus", lexicon)


def test_minicorpus_shape():
    docs = _mini()
    assert 25 <= len(docs) <= 35
    assert sorted({d.category for d in docs}) == ["carpet", "cooking", "floor", "furniture"]


def test_minicorpus_matches_independent_count():
    text = analyze(_mini(), KB, k=8).dumps()
    oracle = reference_report(DATA / "minicorpus", DATA / "verb_kb.json", DATA / "exclusion_verbs.txt", 8)
    assert text == oracle
    assert text == (DATA / "minicorpus_reference_k8.json").read_text()


def test_report_invariants():
    rep = analyze(_mini(), KB, k=8)
    for c in rep.categories.values():
        assert 0 <= c.appearance_rate <= 1
        assert c.analyzed_verb_tokens <= c.total_verb_tokens
        assert c.analyzed_unique_verbs <= c.unique_verbs


@given(st.randoms(use_true_random=False))
def test_document_order_is_irrelevant(rnd):
    docs = _mini()
    shuffled = list(docs)
    rnd.shuffle(shuffled)
    assert analyze(shuffled, KB, k=8).dumps() == analyze(docs, KB, k=8).dumps()


@given(st.data())
def test_appearance_rate_monotone_in_analyzed_set(data):
    docs = _mini()
    counts = count_verbs(docs)
    pool = sorted(set().union(*counts.values()))
    small = data.draw(st.sets(st.sampled_from(pool)))
    large = small | data.draw(st.sets(st.sampled_from(pool)))
    a, b = coverage(small, counts, KB), coverage(large, counts, KB)
    for name in counts:
        assert a.categories[name].appearance_rate <= b.categories[name].appearance_rate


def test_transcript_parsing():
    t = transcript_from_json({"category": "floor", "tokens": ["Wipe", "table", {"lemma": "Rub", "isVerb": True}]},
                             lexicon={"wipe"})
    assert t.tokens == (Token("wipe", True), Token("table", False), Token("rub", True))
    with pytest.raises(SchemaViolation):
        transcript_from_json({"category": "floor", "tokens": ["wipe"]})
    with pytest.raises(SchemaViolation):
        transcript_from_json({"tokens": []})
    with pytest.raises(SchemaViolation):
        transcript_from_json({"category": "x", "tokens": [{"lemma": "a"}]})
