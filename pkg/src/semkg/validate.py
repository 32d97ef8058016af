"""Reconstruction validation: re-extract triples from a statement and require an exact normalized match."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import BackendError, RetryExhausted
from .kg import Subgraph, Triple
from .llm import ChatBackend, RetryPolicy, chat_with_retry, extract_json_object
from .prompts import render_entity_prompt, render_kg_prompt
from .stopwords import STOPWORDS

log = logging.getLogger(__name__)

_TOKEN = re.compile(r"[^\W_]+")
_VOWELS = set("aeiou")


class Lemmatizer(Protocol):
    def lemmatize(self, token: str) -> str: ...


class RuleLemmatizer:
    """Deterministic English suffix stripper.

    By default only plural forms are reduced (entity names are nouns). With
    ``verbs=True`` it also strips -ing/-ed, undoubling a final consonant
    (running -> run). Rules are applied until the token stops changing, so
    ``lemmatize`` is idempotent.
    """

    EXCEPTIONS = {
        "children": "child", "men": "man", "women": "woman", "people": "person", "mice": "mouse",
        "geese": "goose", "feet": "foot", "teeth": "tooth", "oxen": "ox", "lice": "louse",
        "indices": "index", "matrices": "matrix", "vertices": "vertex", "analyses": "analysis",
        "diagnoses": "diagnosis", "theses": "thesis", "crises": "crisis", "hypotheses": "hypothesis",
        "phenomena": "phenomenon", "criteria": "criterion", "leaves": "leaf", "wolves": "wolf",
        "knives": "knife", "wives": "wife", "lives": "life", "halves": "half", "shelves": "shelf",
        "niches": "niche", "quiches": "quiche", "psyches": "psyche", "moustaches": "moustache",
    }
    INVARIANT = frozenset({
        "species", "series", "news", "means", "physics", "mathematics", "economics", "politics",
        "diabetes", "measles", "herpes", "rabies", "mumps", "aids", "bus", "gas", "yes",
    })

    def __init__(self, verbs: bool = False):
        self.verbs = verbs

    @staticmethod
    def _undouble(stem: str) -> str:
        if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in _VOWELS and stem[-1] not in "lsz":
            return stem[:-1]
        return stem

    def _step(self, w: str) -> str:
        if w in self.EXCEPTIONS:
            return self.EXCEPTIONS[w]
        if len(w) <= 3 or w in self.INVARIANT or not w.isalpha():
            return w
        if w.endswith("ies") and len(w) > 4:
            return w[:-3] + "y"
        if w.endswith("aches") and (len(w) == 5 or w[-6] not in _VOWELS):
            return w[:-1]  # headaches, caches; beaches and coaches fall through
        if w.endswith(("sses", "shes", "ches", "xes", "zzes")):
            return w[:-2]
        if w.endswith(("ss", "us", "is")):
            return w
        if w.endswith("s"):
            return w[:-1]
        if self.verbs:
            if w.endswith("ing") and len(w) >= 6:
                return self._undouble(w[:-3])
            if w.endswith("ied") and len(w) > 4:
                return w[:-3] + "y"
            if w.endswith("ed") and len(w) >= 5 and not w.endswith("eed"):
                return self._undouble(w[:-2])
        return w

    def lemmatize(self, token: str) -> str:
        for _ in range(16):
            nxt = self._step(token)
            if nxt == token:
                break
            token = nxt
        return token


DEFAULT_LEMMATIZER = RuleLemmatizer()


def _normalize_once(text: str, lemmatizer: Lemmatizer) -> str:
    tokens = _TOKEN.findall(text.lower())
    return "".join(lemmatizer.lemmatize(t) for t in tokens if t not in STOPWORDS)


def normalize_entity(text: str, lemmatizer: Lemmatizer = DEFAULT_LEMMATIZER) -> str:
    """Lowercase, tokenize, drop stopwords, lemmatize, and join without separators.

    Iterated to a fixed point so the result is itself normalized even when
    the joined tokens happen to form a stopword or a new inflection.
    """
    for _ in range(8):
        nxt = _normalize_once(text, lemmatizer)
        if nxt == text:
            break
        text = nxt
    return text


def normalize_relation(relation: str) -> str:
    return "".join(relation.lower().split())


@dataclass(frozen=True, order=True)
class NormalizedTriple:
    source_key: str
    relation_key: str
    target_key: str


def normalize_triple(t: Triple, lemmatizer: Lemmatizer = DEFAULT_LEMMATIZER) -> NormalizedTriple:
    return NormalizedTriple(normalize_entity(t.source.name, lemmatizer), normalize_relation(t.relation),
                            normalize_entity(t.target.name, lemmatizer))


@dataclass(frozen=True)
class TripleDiff:
    missing: tuple[Triple, ...] = ()
    extra: tuple[Triple, ...] = ()

    def __bool__(self):
        return bool(self.missing or self.extra)


def triples_match(original: Iterable[Triple], reconstructed: Iterable[Triple],
                  lemmatizer: Lemmatizer = DEFAULT_LEMMATIZER) -> tuple[bool, TripleDiff]:
    """Direction-sensitive set equality after normalization, with the difference both ways."""
    original, reconstructed = list(original), list(reconstructed)
    okeys = {normalize_triple(t, lemmatizer) for t in original}
    rkeys = {normalize_triple(t, lemmatizer) for t in reconstructed}
    missing = tuple(dict.fromkeys(t for t in original if normalize_triple(t, lemmatizer) not in rkeys))
    extra = tuple(dict.fromkeys(t for t in reconstructed if normalize_triple(t, lemmatizer) not in okeys))
    diff = TripleDiff(missing, extra)
    return not diff, diff


@dataclass
class ValidationOutcome:
    statement_id: str
    passed: bool
    extracted_entities: list[str] = field(default_factory=list)
    reconstructed: list[Triple] = field(default_factory=list)
    diff: TripleDiff = field(default_factory=TripleDiff)
    failure: str | None = None  # None, "parse" or "transport"
    n_triples: int = 0

    @property
    def parse_failure(self) -> bool:
        return self.failure == "parse"

    def to_dict(self) -> dict:
        return {
            "statement_id": self.statement_id,
            "passed": self.passed,
            "parse_failure": self.parse_failure,
            "failure": self.failure,
            "n_triples": self.n_triples,
            "extracted_entities": self.extracted_entities,
            "reconstructed": [t.to_record(with_types=False) for t in self.reconstructed],
            "diff": {
                "missing": [t.to_record(with_types=False) for t in self.diff.missing],
                "extra": [t.to_record(with_types=False) for t in self.diff.extra],
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationOutcome":
        return cls(
            statement_id=d["statement_id"], passed=bool(d["passed"]),
            extracted_entities=list(d.get("extracted_entities", [])),
            reconstructed=[Triple.from_record(r) for r in d.get("reconstructed", [])],
            diff=TripleDiff(tuple(Triple.from_record(r) for r in d.get("diff", {}).get("missing", [])),
                            tuple(Triple.from_record(r) for r in d.get("diff", {}).get("extra", []))),
            failure=d.get("failure"), n_triples=int(d.get("n_triples", 0)),
        )


class _ParseFailure(Exception):
    pass


def _parse_entities(text: str) -> list[str]:
    try:
        obj = extract_json_object(text)
    except ValueError as e:
        raise _ParseFailure(str(e)) from None
    ents = obj.get("entities")
    if not isinstance(ents, list):
        raise _ParseFailure("missing 'entities' array")
    return [str(e).strip() for e in ents if str(e).strip()]


def _parse_triples(text: str) -> list[Triple]:
    try:
        obj = extract_json_object(text)
    except ValueError as e:
        raise _ParseFailure(str(e)) from None
    recs = obj.get("triples")
    if not isinstance(recs, list):
        raise _ParseFailure("missing 'triples' array")
    try:
        return [Triple.from_record(r) for r in recs]
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise _ParseFailure(f"bad triple record: {e}") from None


def _ask(backend, request, parser, policy, attempts):
    last = None
    for _ in range(attempts):
        text = chat_with_retry(backend, request, policy)
        try:
            return parser(text)
        except _ParseFailure as e:
            last = e
    raise last


def validate_statement(backend: ChatBackend, statement: str, subgraph: Subgraph, entity_types: Sequence[str],
                       relations: Sequence[str], dataset_id: str = "codex", statement_id: str = "",
                       policy: RetryPolicy | None = None, parse_attempts: int = 3,
                       lemmatizer: Lemmatizer = DEFAULT_LEMMATIZER) -> ValidationOutcome:
    """Entity extraction, then triple extraction, then exact normalized comparison with ``subgraph``."""
    if not entity_types or not relations:
        raise ValueError("entity type and relation vocabularies must be non-empty")
    outcome = ValidationOutcome(statement_id, False, n_triples=len(subgraph.triples))
    try:
        entities = _ask(backend, render_entity_prompt(dataset_id, statement, entity_types),
                        _parse_entities, policy, parse_attempts)
        outcome.extracted_entities = entities
        reconstructed = []
        if entities:
            reconstructed = _ask(backend, render_kg_prompt(dataset_id, statement, entities, relations),
                                 _parse_triples, policy, parse_attempts)
    except _ParseFailure as e:
        log.info("statement %s: unparseable completion (%s)", statement_id, e)
        outcome.failure = "parse"
        outcome.diff = TripleDiff(tuple(subgraph.triples), ())
        return outcome
    except (RetryExhausted, BackendError) as e:
        log.warning("statement %s: backend failure (%s)", statement_id, e)
        outcome.failure = "transport"
        outcome.diff = TripleDiff(tuple(subgraph.triples), ())
        return outcome
    outcome.reconstructed = reconstructed
    outcome.passed, outcome.diff = triples_match(subgraph.triples, reconstructed, lemmatizer)
    return outcome


def reconstruction_rate(outcomes_by_size: Mapping[int, Iterable]) -> dict[int, float]:
    """Fraction passed per subgraph-size bucket. Items may be outcomes or booleans."""
    if not outcomes_by_size:
        raise ValueError("no outcomes")
    rates = {}
    for size in sorted(outcomes_by_size):
        flags = [o.passed if isinstance(o, ValidationOutcome) else bool(o) for o in outcomes_by_size[size]]
        if not flags:
            raise ValueError(f"bucket {size} is empty")
        rates[size] = sum(flags) / len(flags)
    return rates


def group_by_size(outcomes: Iterable[ValidationOutcome]) -> dict[int, list[ValidationOutcome]]:
    out: dict[int, list[ValidationOutcome]] = {}
    for o in outcomes:
        out.setdefault(o.n_triples, []).append(o)
    return out


def vocabularies(subgraphs: Iterable[Subgraph]) -> tuple[list[str], list[str]]:
    """Sorted entity-type and relation vocabularies of a collection of subgraphs."""
    types, rels = set(), set()
    for s in subgraphs:
        for n in s.nodes:
            types.add(n.type_label or "entity")
        for t in s.triples:
            rels.add(t.relation)
    return sorted(types), sorted(rels)

