import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semkg.kg import Node, Triple
from semkg.prompts import render_entity_prompt, render_generation_prompt, render_judge_prompt, render_kg_prompt
from semkg.template import TemplateBackend, TemplateParseError, template_extract, template_generate

names = st.text(st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=12).filter(
    lambda s: s.strip() == s and s)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(names, names, names), min_size=1, max_size=6), st.integers(0, 1000))
def test_generate_extract_roundtrip(rows, variant):
    triples = [Triple(Node(s), r, Node(t)) for s, r, t in rows if s != t]
    if not triples:
        return
    text = template_generate(triples, variant)
    assert sorted(template_extract(text), key=str) == sorted(triples, key=str)


def test_variants_permute_sentences():
    ts = [Triple(Node("a"), "r", Node("b")), Triple(Node("b"), "r", Node("c")), Triple(Node("c"), "r", Node("d"))]
    texts = {template_generate(ts, v) for v in range(6)}
    assert len(texts) == 6
    assert template_generate(ts, 6) == template_generate(ts, 0)


def test_quoting():
    t = Triple(Node("St. Louis"), "is part of", Node("«odd»"))
    text = template_generate([t])
    assert text == "«St. Louis» «is part of» «\\«odd\\»»."
    assert template_extract(text) == [t]


@pytest.mark.parametrize("bad", ["just words without a stop", "a b.", "«open a b."])
def test_extract_rejects_bad_text(bad):
    with pytest.raises(TemplateParseError):
        template_extract(bad)


def test_backend_full_cycle():
    b = TemplateBackend()
    ts = [Triple(Node("Aspirin", "drug"), "treats", Node("bad headache", "disease"))]
    s1 = b.complete(render_generation_prompt("codex", ts))
    ents = json.loads(b.complete(render_entity_prompt("codex", s1, ["drug", "disease"])))["entities"]
    assert ents == ["Aspirin", "bad headache"]
    trip = json.loads(b.complete(render_kg_prompt("codex", s1, ents, ["treats"])))["triples"]
    assert [Triple.from_record(r) for r in trip] == [Triple(Node("Aspirin"), "treats", Node("bad headache"))]
    assert b.complete(render_judge_prompt(s1, s1)) == "Yes"
    other = template_generate([Triple(Node("Aspirin"), "causes", Node("bad headache"))])
    assert b.complete(render_judge_prompt(s1, other)) == "No"


def test_backend_counter_gives_new_variant():
    b = TemplateBackend()
    ts = [Triple(Node("a"), "r", Node("b")), Triple(Node("b"), "r", Node("c"))]
    req = render_generation_prompt("codex", ts)
    assert b.complete(req) != b.complete(req)
    b.reset()
    assert b.complete(req) == template_generate(ts, 0)
