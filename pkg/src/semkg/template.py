"""Deterministic verbalization grammar and an offline chat backend built on it.

Each triple becomes one sentence ``source relation target.``. A field that
contains whitespace, ``.``, guillemets or a backslash is wrapped in ``«...»``
with ``\\`` escapes, which keeps the grammar invertible for arbitrary names.
"""

from __future__ import annotations

import ast
import json
import math
import re
import threading
from collections import Counter
from typing import Sequence

from .errors import BackendError
from .kg import Node, Triple
from .llm import ChatRequest

_BARE = re.compile(r"[^\s.«»\\]+")


class TemplateParseError(ValueError):
    def __init__(self, sentence: int, message: str):
        self.sentence = sentence
        super().__init__(f"sentence {sentence}: {message}")


def _field(text: str) -> str:
    if _BARE.fullmatch(text):
        return text
    return "«" + re.sub(r"([\\«»])", r"\\\1", text) + "»"


def _nth_permutation(n: int, index: int) -> list[int]:
    """``index``-th permutation of range(n) in lexicographic order (mod n!)."""
    index %= math.factorial(n)
    pool = list(range(n))
    out = []
    for i in range(n, 0, -1):
        f = math.factorial(i - 1)
        q, index = divmod(index, f)
        out.append(pool.pop(q))
    return out


def template_generate(triples: Sequence[Triple], variant: int = 0) -> str:
    """Verbalize triples one sentence each; ``variant`` picks the sentence order."""
    if not triples:
        raise ValueError("need at least one triple")
    if variant < 0:
        raise ValueError("variant must be >= 0")
    sentences = [f"{_field(t.source.name)} {_field(t.relation)} {_field(t.target.name)}." for t in triples]
    return " ".join(sentences[i] for i in _nth_permutation(len(sentences), variant))


def template_extract(text: str) -> list[Triple]:
    """Parse text in the :func:`template_generate` grammar back into triples."""
    pos, n = 0, len(text)
    out: list[Triple] = []
    sentence = 0

    def skip_ws(p):
        while p < n and text[p].isspace():
            p += 1
        return p

    def read_field(p):
        if p >= n:
            raise TemplateParseError(sentence, "unexpected end of text")
        if text[p] == "«":
            buf, p = [], p + 1
            while p < n and text[p] != "»":
                if text[p] == "\\" and p + 1 < n:
                    p += 1
                buf.append(text[p])
                p += 1
            if p >= n:
                raise TemplateParseError(sentence, "unterminated «")
            return "".join(buf), p + 1
        m = _BARE.match(text, p)
        if not m:
            raise TemplateParseError(sentence, f"expected a field at offset {p}")
        return m.group(), m.end()

    pos = skip_ws(pos)
    while pos < n:
        sentence += 1
        parts = []
        for i in range(3):
            if i:
                if pos >= n or not text[pos].isspace():
                    raise TemplateParseError(sentence, "expected source, relation and target")
                pos = skip_ws(pos)
            value, pos = read_field(pos)
            parts.append(value)
        if pos >= n or text[pos] != ".":
            raise TemplateParseError(sentence, "missing terminating '.'")
        pos = skip_ws(pos + 1)
        try:
            out.append(Triple(Node(parts[0]), parts[1], Node(parts[2])))
        except ValueError as e:
            raise TemplateParseError(sentence, str(e)) from None
    if not out:
        raise TemplateParseError(1, "no sentences")
    return out


def _section(prompt: str, start: str, end: str | None = None) -> str | None:
    i = prompt.find(start)
    if i < 0:
        return None
    i += len(start)
    if end is None:
        return prompt[i:]
    j = prompt.find(end, i)
    return None if j < 0 else prompt[i:j]


class TemplateBackend:
    """Offline :class:`ChatBackend` answering the package's own prompts.

    Generation prompts are verbalized with :func:`template_generate`; the
    n-th request for an identical prompt uses variant n, so repeated calls
    yield different sentence orders. Extraction prompts are answered with
    :func:`template_extract`. Judge prompts answer "Yes" when both statements
    reconstruct to the same normalized triple set.
    """

    def __init__(self):
        self._calls: Counter[str] = Counter()
        self._lock = threading.Lock()
        self.log: list[ChatRequest] = []

    def reset(self) -> None:
        with self._lock:
            self._calls.clear()
            self.log.clear()

    def complete(self, request: ChatRequest) -> str:
        prompt = request.prompt
        with self._lock:
            self.log.append(request)
        if prompt.endswith("Your answer:") and "\nStatement 1: " in prompt:
            return self._judge(prompt)
        statement = _section(prompt, "\n\n\nPassage: ")
        if statement is not None:
            return self._entities(statement)
        statement = _section(prompt, "\nText: ")
        if statement is not None and _section(prompt, "\n\n\nEntities: ") is not None:
            return self._triples(statement)
        block = _section(prompt, "\n\nTriples: ")
        if block is not None:
            return self._generate(request, block)
        raise BackendError("template backend does not recognise this prompt")

    def _generate(self, request: ChatRequest, block: str) -> str:
        try:
            records = ast.literal_eval(block.strip())
            triples = [Triple.from_record(r) for r in records]
        except (ValueError, SyntaxError, KeyError, TypeError) as e:
            raise BackendError(f"cannot read triples from generation prompt: {e}") from None
        key = request.cache_key()
        with self._lock:
            variant = self._calls[key]
            self._calls[key] += 1
        return template_generate(triples, variant)

    @staticmethod
    def _entities(statement: str) -> str:
        try:
            triples = template_extract(statement)
        except TemplateParseError:
            return json.dumps({"entities": []})
        names = dict.fromkeys(n for t in triples for n in (t.source.name, t.target.name))
        return json.dumps({"entities": list(names)}, ensure_ascii=False)

    @staticmethod
    def _triples(statement: str) -> str:
        try:
            triples = template_extract(statement)
        except TemplateParseError:
            return json.dumps({"triples": []})
        return json.dumps({"triples": [t.to_record(with_types=False) for t in triples]}, ensure_ascii=False)

    @staticmethod
    def _judge(prompt: str) -> str:
        from .validate import normalize_triple

        s1 = _section(prompt, "\nStatement 1: ", "\nStatement 2: ")
        s2 = _section(prompt, "\nStatement 2: ", "\n\nYour answer:")
        if s1 is None or s2 is None:
            raise BackendError("malformed judge prompt")
        try:
            same = ({normalize_triple(t) for t in template_extract(s1)}
                    == {normalize_triple(t) for t in template_extract(s2)})
        except TemplateParseError:
            same = s1.strip().lower() == s2.strip().lower()
        return "Yes" if same else "No"
