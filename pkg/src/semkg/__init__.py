"""Knowledge-graph perturbation benchmarks for semantic-similarity evaluation."""

__version__ = "0.1.0"

from .kg import EdgeReplacementMap, KnowledgeGraph, Node, Subgraph, Triple, load_kg  # noqa: E402
from .perturb import PerturbationKind, PerturbationRecord, perturb  # noqa: E402
from .sampler import SamplerConfig, sample_subgraph  # noqa: E402

__all__ = [
    "EdgeReplacementMap", "KnowledgeGraph", "Node", "Subgraph", "Triple", "load_kg",
    "PerturbationKind", "PerturbationRecord", "perturb", "SamplerConfig", "sample_subgraph",
]
