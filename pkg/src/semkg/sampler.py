"""Budgeted breadth-first subgraph sampling with type-diversity down-weighting."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass

import numpy as np

from .errors import SamplingError
from .kg import KnowledgeGraph, Node, Subgraph, Triple

RESEED_ATTEMPTS = 32


@dataclass(frozen=True)
class SamplerConfig:
    min_budget: int = 5
    max_budget: int = 20
    type_decay: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if not 1 <= self.min_budget <= self.max_budget:
            raise ValueError(f"need 1 <= min_budget <= max_budget, got {self.min_budget}, {self.max_budget}")
        if not 0 < self.type_decay <= 1:
            raise ValueError(f"type_decay must be in (0, 1], got {self.type_decay}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


def pick_seed(kg: KnowledgeGraph, rng: np.random.Generator) -> Node:
    """Uniform draw over nodes with at least one incident triple."""
    candidates = [n for n in kg.nodes if kg.degree(n) > 0]
    if not candidates:
        raise SamplingError("graph has no connected nodes to seed from")
    return candidates[rng.integers(len(candidates))]


def _bfs(kg: KnowledgeGraph, seed: Node, budget: int, decay: float, rng) -> tuple[list[Node], list[Triple]]:
    visited = {seed}
    order = [seed]
    tree: list[Triple] = []
    type_visits = Counter({seed.type_label: 1})
    queue = deque([seed])
    while queue and len(order) < budget + 1:
        node = queue.popleft()
        # one connecting triple per unvisited neighbour; parallel edges drawn uniformly
        links: dict[Node, list[Triple]] = {}
        for other, t in kg.neighbors(node):
            if other not in visited:
                links.setdefault(other, []).append(t)
        frontier = list(links)
        while frontier and len(order) < budget + 1:
            w = np.array([decay ** type_visits[n.type_label] for n in frontier])
            pick = frontier.pop(rng.choice(len(frontier), p=w / w.sum()))
            options = links[pick]
            tree.append(options[rng.integers(len(options))] if len(options) > 1 else options[0])
            visited.add(pick)
            order.append(pick)
            type_visits[pick.type_label] += 1
            queue.append(pick)
    return order, tree


def sample_subgraph(kg: KnowledgeGraph, config: SamplerConfig, rng: np.random.Generator | None = None,
                    id: str = "") -> Subgraph:
    """Sample a connected tree-shaped subgraph.

    A total exploration budget is drawn uniformly from [min_budget, max_budget];
    the traversal picks up to that many new neighbours in BFS order, each pick
    weighted by ``type_decay ** (nodes of that type already visited)``.
    Edge direction is ignored while exploring but kept on the returned triples.
    """
    if len(kg.nodes) < 2 or not kg.triples:
        raise SamplingError("graph needs at least 2 nodes and 1 triple")
    rng = config.rng() if rng is None else rng
    budget = int(rng.integers(config.min_budget, config.max_budget + 1))
    for _ in range(RESEED_ATTEMPTS):
        seed = pick_seed(kg, rng)
        nodes, tree = _bfs(kg, seed, budget, config.type_decay, rng)
        if len(nodes) >= 2:
            return Subgraph(tuple(nodes), tuple(tree), kg.graph_id, id)
    raise SamplingError("graph too sparse")


def densify(sub: Subgraph, kg: KnowledgeGraph) -> Subgraph:
    """Add every graph triple whose endpoints both lie in ``sub``."""
    extra = [t for t in kg.triples_among(sub.nodes) if t not in sub.triple_set]
    return Subgraph(sub.nodes, sub.triples + tuple(extra), sub.origin_graph_id, sub.id)
