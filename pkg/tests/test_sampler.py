from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semkg.errors import SamplingError
from semkg.kg import KnowledgeGraph, Node, Triple
from semkg.sampler import SamplerConfig, densify, sample_subgraph


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lo=st.integers(1, 10), extra=st.integers(0, 15))
def test_subgraph_is_connected_tree_within_budget(big_kg, seed, lo, extra):
    cfg = SamplerConfig(lo, lo + extra, 0.5, seed)
    sub = sample_subgraph(big_kg, cfg)
    sub.check()
    assert sub.is_tree()
    assert 2 <= len(sub.nodes) <= lo + extra + 1
    assert all(t in big_kg for t in sub.triples)


def test_same_seed_same_subgraph(big_kg):
    cfg = SamplerConfig(rng_seed=42)
    assert sample_subgraph(big_kg, cfg) == sample_subgraph(big_kg, cfg)


def test_star_graph_reaches_budget():
    hub = Node("hub", "h")
    kg = KnowledgeGraph([Triple(hub, "r", Node(f"leaf{i}", "l")) for i in range(30)])
    sub = sample_subgraph(kg, SamplerConfig(10, 10, 0.5, 3))
    assert len(sub.nodes) == 11


def test_type_decay_favours_rare_types():
    # the hub has 10 neighbours of type A and 10 of type B; after the first A pick,
    # with decay 0.01 the next pick should almost always be B
    hub = Node("hub", "H")
    ts = [Triple(hub, "r", Node(f"a{i}", "A")) for i in range(10)]
    ts += [Triple(hub, "r", Node(f"b{i}", "B")) for i in range(10)]
    kg = KnowledgeGraph(ts)
    rng = np.random.default_rng(0)
    mixed = 0
    trials = 300
    for _ in range(trials):
        from semkg.sampler import _bfs
        nodes, _ = _bfs(kg, hub, 2, 0.01, rng)
        types = Counter(n.type_label for n in nodes[1:])
        mixed += types["A"] == 1 and types["B"] == 1
    # P(mixed) = 1 - 0.01/1.01 ~ 0.990
    assert mixed / trials > 0.95


def test_uniform_decay_frequencies_match_counts():
    # with decay 1 and a budget of 1, the first pick is uniform over the hub's neighbours
    hub = Node("hub", "H")
    ts = [Triple(hub, "r", Node(f"a{i}", "A")) for i in range(3)] + [Triple(hub, "r", Node("b", "B"))]
    kg = KnowledgeGraph(ts)
    from semkg.sampler import _bfs
    rng = np.random.default_rng(1)
    n = 4000
    hits = sum(_bfs(kg, hub, 1, 1.0, rng)[0][1].type_label == "B" for _ in range(n))
    assert abs(hits / n - 0.25) < 0.02


def test_decay_weighting_monte_carlo():
    # seed type H counts as visited once, so the H neighbour weighs 0.5 and the two A and
    # one B neighbours weigh 1 each: P(B) = 1 / 3.5, P(H) = 0.5 / 3.5
    hub = Node("hub", "H")
    ts = [Triple(hub, "r", Node("a0", "A")), Triple(hub, "r", Node("a1", "A")),
          Triple(hub, "r", Node("h1", "H")), Triple(hub, "r", Node("b", "B"))]
    kg = KnowledgeGraph(ts)
    from semkg.sampler import _bfs
    rng = np.random.default_rng(2)
    n = 5000
    first = Counter(_bfs(kg, hub, 1, 0.5, rng)[0][1].name for _ in range(n))
    assert abs(first["b"] / n - 1 / 3.5) < 0.02
    assert abs(first["h1"] / n - 0.5 / 3.5) < 0.02


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(5, 4)
    with pytest.raises(ValueError):
        SamplerConfig(type_decay=0)


def test_single_edge_graph_samples_pair():
    kg = KnowledgeGraph([Triple(Node("a"), "r", Node("b"))])
    sub = sample_subgraph(kg, SamplerConfig(5, 20))
    assert len(sub.nodes) == 2


def test_empty_graph_errors():
    kg = KnowledgeGraph([], extra_nodes=[Node("a"), Node("b")])
    with pytest.raises(SamplingError):
        sample_subgraph(kg, SamplerConfig())


def test_densify_adds_closure_edges():
    a, b, c = Node("a"), Node("b"), Node("c")
    kg = KnowledgeGraph([Triple(a, "r", b), Triple(b, "r", c), Triple(a, "s", c)])
    from semkg.kg import Subgraph
    sub = Subgraph((a, b, c), (Triple(a, "r", b), Triple(b, "r", c)))
    dense = densify(sub, kg)
    assert dense.triple_set == set(kg.triples)
