"""Render generation, extraction and judge prompts from the template assets.

Assets live under ``templates/<dataset_id>/{generation,entity,kg}.txt`` and
``templates/judge.txt``; they are ``str.format`` templates. A directory with
the same layout can be registered to add datasets.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .kg import Triple
from .llm import ChatRequest

GENERATION_TEMPERATURE = 1.0
EXTRACTION_TEMPERATURE = 1.0
JUDGE_TEMPERATURE = 0.0

ENTITY_SCHEMA = {
    "type": "object",
    "properties": {"entities": {"type": "array", "items": {"type": "string"}}},
    "required": ["entities"],
    "additionalProperties": False,
    "strict": True,
}

_NAME = {"type": "object", "properties": {"name": {"type": "string"}}, "required": ["name"],
         "additionalProperties": False}
TRIPLE_SCHEMA = {
    "type": "object",
    "properties": {
        "triples": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"source_node": _NAME, "relation": _NAME, "target_node": _NAME},
                "required": ["source_node", "relation", "target_node"],
                "additionalProperties": False,
            },
        }
    },
    "required": ["triples"],
    "additionalProperties": False,
    "strict": True,
}

STAGES = ("generation", "entity", "kg")
_extra_dirs: list[Path] = []


def register_template_dir(path) -> None:
    """Make datasets under ``path`` available to the render functions."""
    p = Path(path)
    if p not in _extra_dirs:
        _extra_dirs.insert(0, p)


def _read(relpath: str) -> str | None:
    for base in _extra_dirs:
        f = base / relpath
        if f.is_file():
            return f.read_text(encoding="utf-8")
    ref = resources.files("semkg") / "templates" / relpath
    return ref.read_text(encoding="utf-8") if ref.is_file() else None


def registered_datasets() -> list[str]:
    found = set()
    roots = [resources.files("semkg") / "templates", *_extra_dirs]
    for root in roots:
        if not root.is_dir():
            continue
        for d in root.iterdir():
            if d.is_dir() and all((d / f"{s}.txt").is_file() for s in STAGES):
                found.add(d.name)
    return sorted(found)


def load_template(dataset_id: str, stage: str) -> str:
    text = _read(f"{dataset_id}/{stage}.txt")
    if text is None:
        raise KeyError(f"no {stage} template for dataset {dataset_id!r}; registered: {', '.join(registered_datasets())}")
    return text


def serialize_triples(triples: Iterable[Triple]) -> str:
    """Triple list in the record shape the few-shot examples use."""
    rows = [f"    {t.to_record(with_types=False)!r}," for t in triples]
    return "[\n" + "\n".join(rows) + "\n]"


def render_generation_prompt(dataset_id: str, triples: Sequence[Triple]) -> ChatRequest:
    if not triples:
        raise ValueError("need at least one triple to verbalize")
    body = load_template(dataset_id, "generation").format(triples=serialize_triples(triples))
    return ChatRequest.user(body, temperature=GENERATION_TEMPERATURE)


def render_entity_prompt(dataset_id: str, statement: str, entity_types: Sequence[str]) -> ChatRequest:
    if not entity_types:
        raise ValueError("entity type list is empty")
    body = load_template(dataset_id, "entity").format(
        entity_types=repr(list(entity_types)), schema=repr(ENTITY_SCHEMA), statement=statement)
    return ChatRequest.user(body, temperature=EXTRACTION_TEMPERATURE)


def render_kg_prompt(dataset_id: str, statement: str, entities: Sequence[str],
                     relations: Sequence[str]) -> ChatRequest:
    if not entities:
        raise ValueError("entity list is empty")
    if not relations:
        raise ValueError("relation list is empty")
    body = load_template(dataset_id, "kg").format(
        relations=repr(list(relations)), schema=repr(TRIPLE_SCHEMA),
        entities=repr(list(entities)), statement=statement)
    return ChatRequest.user(body, temperature=EXTRACTION_TEMPERATURE)


def render_judge_prompt(statement_1: str, statement_2: str) -> ChatRequest:
    if not statement_1 or not statement_1.strip() or not statement_2 or not statement_2.strip():
        raise ValueError("both statements must be non-empty")
    template = _read("judge.txt")
    body = template.format(statement_1=statement_1, statement_2=statement_2)
    return ChatRequest.user(body, temperature=JUDGE_TEMPERATURE)
