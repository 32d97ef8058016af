"""Seeded synthetic typed knowledge graphs for tests, demos and benchmarks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kg import EdgeReplacementMap, KnowledgeGraph, Node, Triple

DEFAULT_TYPES = ("drug", "protein", "disease", "gene", "pathway")
DEFAULT_RELATIONS = ("increases", "decreases", "binds to", "treats", "causes", "regulates",
                     "inhibits", "is part of")


@dataclass(frozen=True)
class SyntheticSpec:
    n_nodes: int = 500
    extra_edge_ratio: float = 0.6
    types: tuple[str, ...] = DEFAULT_TYPES
    relations: tuple[str, ...] = DEFAULT_RELATIONS
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("need at least 2 nodes")
        if len(self.relations) < 2:
            raise ValueError("need at least 2 relations for an edge map")


def synthetic_kg(spec: SyntheticSpec = SyntheticSpec(), graph_id: str = "synthetic") -> KnowledgeGraph:
    """A connected typed graph: a random recursive tree plus extra random edges."""
    rng = np.random.default_rng(spec.seed)
    types = rng.integers(len(spec.types), size=spec.n_nodes)
    nodes = [Node(f"{spec.types[t]} {i}", spec.types[t]) for i, t in enumerate(types)]
    triples = []

    def link(a, b):
        rel = spec.relations[rng.integers(len(spec.relations))]
        src, tgt = (nodes[a], nodes[b]) if rng.random() < 0.5 else (nodes[b], nodes[a])
        triples.append(Triple(src, rel, tgt))

    for i in range(1, spec.n_nodes):
        link(i, int(rng.integers(i)))
    for _ in range(int(spec.extra_edge_ratio * spec.n_nodes)):
        a, b = rng.choice(spec.n_nodes, size=2, replace=False)
        link(int(a), int(b))
    return KnowledgeGraph(triples, graph_id)


def synthetic_edge_map(relations=DEFAULT_RELATIONS) -> EdgeReplacementMap:
    """Every relation may be swapped for any other."""
    return EdgeReplacementMap({r: tuple(x for x in relations if x != r) for r in relations})
