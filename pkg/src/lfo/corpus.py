"""Verb coverage analysis over tagged instruction transcripts."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import SchemaViolation
from .taskdetect import VerbKnowledgeBase


@dataclass(frozen=True)
class Token:
    lemma: str
    is_verb: bool


@dataclass(frozen=True)
class TaggedTranscript:
    category: str
    tokens: tuple[Token, ...]


def _read_lines(name: str) -> list[str]:
    text = resources.files("lfo").joinpath(f"data/{name}").read_text()
    return [ln.strip().lower() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def default_exclusions() -> frozenset[str]:
    """Frequent verbs that name no manipulation (seeing, going, talking...)."""
    return frozenset(_read_lines("exclusion_verbs.txt"))


def manipulation_verbs() -> list[str]:
    """The representative manipulation verb list, one verb per line."""
    return _read_lines("manipulation_verbs.txt")


def transcript_from_json(d, lexicon: Iterable[str] | None = None) -> TaggedTranscript:
    """Parse a document; bare string tokens are verbs iff they are in ``lexicon``."""
    if not isinstance(d, dict) or not isinstance(d.get("category"), str) or not isinstance(d.get("tokens"), list):
        raise SchemaViolation("corpus document needs a string 'category' and a 'tokens' list")
    lex = None if lexicon is None else {w.lower() for w in lexicon}
    tokens = []
    for t in d["tokens"]:
        if isinstance(t, str):
            if lex is None:
                raise SchemaViolation("untagged token without a verb lexicon")
            tokens.append(Token(t.lower(), t.lower() in lex))
        elif isinstance(t, dict) and isinstance(t.get("lemma"), str) and isinstance(t.get("isVerb"), bool):
            tokens.append(Token(t["lemma"].lower(), t["isVerb"]))
        else:
            raise SchemaViolation(f"bad token {t!r}")
    return TaggedTranscript(d["category"], tuple(tokens))


def load_corpus(directory: str | Path, lexicon: Iterable[str] | None = None) -> list[TaggedTranscript]:
    """Every ``*.json`` document in a directory, in file-name order."""
    docs = []
    for path in sorted(Path(directory).glob("*.json")):
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"{path.name}: {exc}") from None
        if isinstance(data, dict) and "category" not in data:
            continue  # not a document, e.g. a stored report
        docs.append(transcript_from_json(data, lexicon))
    return docs


def count_verbs(transcripts: Iterable[TaggedTranscript]) -> dict[str, Counter]:
    counts: dict[str, Counter] = {}
    for doc in transcripts:
        c = counts.setdefault(doc.category, Counter())
        c.update(t.lemma for t in doc.tokens if t.is_verb)
    return counts


def top_k(counts: Mapping[str, int], k: int = 100) -> list[str]:
    if k < 1:
        raise ValueError("k must be at least 1")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [lemma for lemma, _ in ranked[:k]]


def unify_and_filter(per_category: Iterable[Sequence[str]], exclusions: Iterable[str] = ()) -> set[str]:
    union = set().union(*map(set, per_category))
    return union - set(exclusions)


@dataclass(frozen=True)
class CategoryCoverage:
    total_verb_tokens: int
    analyzed_verb_tokens: int
    unique_verbs: int
    analyzed_unique_verbs: int

    @property
    def appearance_rate(self) -> float:
        return self.analyzed_verb_tokens / self.total_verb_tokens if self.total_verb_tokens else 0.0


@dataclass(frozen=True)
class CoverageReport:
    categories: dict[str, CategoryCoverage]
    union_unique_verbs: int
    analyzed: tuple[str, ...]
    mapped: tuple[str, ...]
    unmapped: tuple[str, ...]
    mapping: dict[str, list[str]]

    def to_json(self) -> dict:
        return {
            "categories": {
                name: {
                    "totalVerbTokens": c.total_verb_tokens,
                    "analyzedVerbTokens": c.analyzed_verb_tokens,
                    "uniqueVerbs": c.unique_verbs,
                    "analyzedUniqueVerbs": c.analyzed_unique_verbs,
                    "appearanceRate": c.appearance_rate,
                }
                for name, c in sorted(self.categories.items())
            },
            "global": {
                "unionUniqueVerbs": self.union_unique_verbs,
                "analyzedVerbs": len(self.analyzed),
                "mappedVerbs": list(self.mapped),
                "unmappedVerbs": list(self.unmapped),
            },
            "mapping": self.mapping,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"


def _candidate_label(cand) -> str:
    """Chain shorthand: (PC-NC, NC-NC) reads "PC-NC-NC"."""
    if len(cand) == 1 and not cand[0].is_manipulation:
        return cand[0].label
    return "-".join([cand[0].src.value] + [t.dst.value for t in cand])


def coverage(analyzed: Iterable[str], counts: Mapping[str, Mapping[str, int]], kb: VerbKnowledgeBase,
             union_unique_verbs: int | None = None) -> CoverageReport:
    verbs = tuple(sorted(set(analyzed)))
    cats = {}
    for name, c in counts.items():
        present = [v for v in verbs if c.get(v, 0) > 0]
        cats[name] = CategoryCoverage(
            total_verb_tokens=sum(c.values()),
            analyzed_verb_tokens=sum(c[v] for v in present),
            unique_verbs=sum(1 for n in c.values() if n > 0),
            analyzed_unique_verbs=len(present),
        )
    entries = dict(kb.items())
    mapped = tuple(v for v in verbs if v in entries)
    unmapped = tuple(v for v in verbs if v not in entries)
    mapping = {v: [_candidate_label(c) for c in entries[v]] for v in mapped}
    return CoverageReport(cats, len(verbs) if union_unique_verbs is None else union_unique_verbs,
                          verbs, mapped, unmapped, mapping)


def analyze(transcripts: Iterable[TaggedTranscript], kb: VerbKnowledgeBase, k: int = 100,
            exclusions: Iterable[str] | None = None) -> CoverageReport:
    """Count, rank per category, unify, drop non-manipulation verbs, and map."""
    counts = count_verbs(transcripts)
    ranked = [top_k(c, k) for _, c in sorted(counts.items()) if c]
    union = unify_and_filter(ranked)
    excl = default_exclusions() if exclusions is None else exclusions
    analyzed = unify_and_filter(ranked, excl)
    return coverage(analyzed, counts, kb, len(union))
