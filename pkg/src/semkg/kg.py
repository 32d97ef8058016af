"""Knowledge-graph domain types, loaders and the edge-replacement map."""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import InputError

log = logging.getLogger(__name__)

TSV = "tsv"
STRUCTURED = "structured-lines"
FORMATS = (TSV, STRUCTURED)


@dataclass(frozen=True, order=True)
class Node:
    name: str
    type_label: str = ""

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.strip():
            raise ValueError(f"node name must be non-empty, got {self.name!r}")
        # nodes and triples are hashed constantly during eligibility scans
        object.__setattr__(self, "_hash", hash((self.name, self.type_label)))

    def __hash__(self):
        return self._hash

    def __str__(self):
        return self.name


@dataclass(frozen=True, order=True)
class Triple:
    source: Node
    relation: str
    target: Node

    def __post_init__(self):
        if not isinstance(self.relation, str) or not self.relation.strip():
            raise ValueError(f"relation must be non-empty, got {self.relation!r}")
        object.__setattr__(self, "_hash", hash((self.source, self.relation, self.target)))

    def __hash__(self):
        return self._hash

    def with_relation(self, relation: str) -> "Triple":
        return Triple(self.source, relation, self.target)

    def to_record(self, with_types: bool = True) -> dict:
        src = {"name": self.source.name}
        tgt = {"name": self.target.name}
        if with_types:
            src["type"] = self.source.type_label
            tgt["type"] = self.target.type_label
        return {"source_node": src, "relation": {"name": self.relation}, "target_node": tgt}

    @classmethod
    def from_record(cls, rec: Mapping) -> "Triple":
        src, rel, tgt = rec["source_node"], rec["relation"], rec["target_node"]
        return cls(
            Node(str(src["name"]).strip(), str(src.get("type", "")).strip()),
            str(rel["name"]).strip(),
            Node(str(tgt["name"]).strip(), str(tgt.get("type", "")).strip()),
        )

    def __str__(self):
        return f"({self.source.name}, {self.relation}, {self.target.name})"


class KnowledgeGraph:
    """Immutable typed-node, directed-labelled-edge store.

    Nodes and triples keep first-seen order so that every traversal over the
    graph is reproducible across processes.
    """

    def __init__(self, triples: Iterable[Triple], graph_id: str = "kg", extra_nodes: Iterable[Node] = ()):
        self.graph_id = graph_id
        seen: dict[Triple, None] = {}
        self.duplicates_dropped = 0
        for t in triples:
            if t in seen:
                self.duplicates_dropped += 1
                continue
            seen[t] = None
        self.triples: tuple[Triple, ...] = tuple(seen)
        nodes: dict[Node, None] = {}
        for t in self.triples:
            nodes.setdefault(t.source)
            nodes.setdefault(t.target)
        for n in extra_nodes:
            nodes.setdefault(n)
        self.nodes: tuple[Node, ...] = tuple(nodes)
        self._node_set = frozenset(self.nodes)
        self._triple_set = frozenset(self.triples)

        adjacency: dict[Node, list[Triple]] = {n: [] for n in self.nodes}
        type_index: dict[str, list[Node]] = defaultdict(list)
        for t in self.triples:
            adjacency[t.source].append(t)
            if t.target != t.source:
                adjacency[t.target].append(t)
        for n in self.nodes:
            type_index[n.type_label].append(n)
        self.adjacency: dict[Node, tuple[Triple, ...]] = {n: tuple(ts) for n, ts in adjacency.items()}
        self.type_index: dict[str, tuple[Node, ...]] = {k: tuple(v) for k, v in type_index.items()}
        self.relation_vocab: frozenset[str] = frozenset(t.relation for t in self.triples)
        self.entity_type_vocab: frozenset[str] = frozenset(self.type_index)
        self.rejected: list[tuple[int, str]] = []

    def __contains__(self, item) -> bool:
        if isinstance(item, Node):
            return item in self._node_set
        return item in self._triple_set

    def __len__(self):
        return len(self.nodes)

    def degree(self, node: Node) -> int:
        return len(self.adjacency[node])

    def neighbors(self, node: Node) -> Iterator[tuple[Node, Triple]]:
        """Undirected neighbourhood: (other endpoint, connecting triple)."""
        for t in self.adjacency[node]:
            yield (t.target if t.source == node else t.source), t

    def triples_among(self, nodes: Iterable[Node]) -> list[Triple]:
        """All triples with both endpoints in ``nodes``, in graph order."""
        keep = set(nodes)
        out = []
        for n in self.nodes:
            if n not in keep:
                continue
            for t in self.adjacency[n]:
                if t.source == n and t.target in keep:
                    out.append(t)
        return out

    def __eq__(self, other):
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self._node_set == other._node_set and self._triple_set == other._triple_set

    __hash__ = None

    def __repr__(self):
        return f"KnowledgeGraph({self.graph_id!r}, nodes={len(self.nodes)}, triples={len(self.triples)})"


def _detect_format(path: Path) -> str:
    return STRUCTURED if path.suffix.lower() in (".jsonl", ".ndjson", ".json") else TSV


def _iter_tsv(path: Path):
    with open(path, encoding="utf-8", newline="") as f:
        for lineno, row in enumerate(csv.reader(f, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 5:
                raise InputError(f"expected 5 tab-separated columns, got {len(row)}", line=lineno, path=path)
            src, src_t, rel, tgt, tgt_t = (c.strip() for c in row)
            yield lineno, (src, src_t, rel, tgt, tgt_t)


def _iter_structured(path: Path):
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                src, rel, tgt = rec["source_node"], rec["relation"], rec["target_node"]
                fields = (src["name"], src.get("type", ""), rel["name"], tgt["name"], tgt.get("type", ""))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise InputError(f"bad triple record ({e})", line=lineno, path=path) from None
            yield lineno, tuple(str(x).strip() for x in fields)


def read_triples(path, format: str | None = None) -> tuple[list[Triple], list[tuple[int, str]]]:
    """Parse a triple file. Returns (triples, rejected) where rejected lists (line, reason)."""
    path = Path(path)
    if not path.exists():
        raise InputError("file not found", path=path)
    fmt = format or _detect_format(path)
    if fmt not in FORMATS:
        raise InputError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    rows = _iter_tsv(path) if fmt == TSV else _iter_structured(path)
    triples, rejected = [], []
    for lineno, (src, src_t, rel, tgt, tgt_t) in rows:
        if not src or not tgt:
            rejected.append((lineno, "empty node name"))
            continue
        if not rel:
            rejected.append((lineno, "empty relation"))
            continue
        s, t = Node(src, src_t), Node(tgt, tgt_t)
        if s == t:
            rejected.append((lineno, "self-loop"))
            continue
        triples.append(Triple(s, rel, t))
    return triples, rejected


def load_kg(path, format: str | None = None, graph_id: str | None = None) -> KnowledgeGraph:
    """Load a knowledge graph from a 5-column TSV or a structured-lines file.

    Duplicate triples are dropped; lines with an empty node name are rejected.
    Both counts are logged and kept on the returned graph.
    """
    path = Path(path)
    triples, rejected = read_triples(path, format)
    if not triples:
        raise InputError("no triples", path=path)
    kg = KnowledgeGraph(triples, graph_id=graph_id or path.stem)
    kg.rejected = rejected
    if kg.duplicates_dropped:
        log.warning("%s: dropped %d duplicate triple(s)", path, kg.duplicates_dropped)
    for lineno, reason in rejected:
        log.warning("%s:%d: rejected (%s)", path, lineno, reason)
    return kg


def write_triples(triples: Iterable[Triple], path, format: str = STRUCTURED) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for t in triples:
            if format == TSV:
                f.write("\t".join([t.source.name, t.source.type_label, t.relation,
                                   t.target.name, t.target.type_label]) + "\n")
            else:
                f.write(json.dumps(t.to_record(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class Subgraph:
    """A connected set of triples drawn from one graph.

    ``nodes`` and ``triples`` are ordered; compare with :meth:`same_content`
    when order should not matter.
    """

    nodes: tuple[Node, ...]
    triples: tuple[Triple, ...]
    origin_graph_id: str = "kg"
    id: str = ""

    @classmethod
    def from_triples(cls, triples: Iterable[Triple], origin_graph_id: str = "kg", id: str = "") -> "Subgraph":
        triples = tuple(dict.fromkeys(triples))
        nodes: dict[Node, None] = {}
        for t in triples:
            nodes.setdefault(t.source)
            nodes.setdefault(t.target)
        return cls(tuple(nodes), triples, origin_graph_id, id)

    @property
    def node_set(self) -> frozenset[Node]:
        return frozenset(self.nodes)

    @property
    def triple_set(self) -> frozenset[Triple]:
        return frozenset(self.triples)

    def same_content(self, other: "Subgraph") -> bool:
        return self.node_set == other.node_set and self.triple_set == other.triple_set

    def is_tree(self) -> bool:
        return len(self.triples) == len(self.nodes) - 1 and is_connected(self.nodes, self.triples)

    def check(self) -> None:
        """Raise ValueError if the subgraph invariants do not hold."""
        if len(self.nodes) < 2:
            raise ValueError("subgraph needs at least 2 nodes")
        if len(set(self.nodes)) != len(self.nodes) or len(set(self.triples)) != len(self.triples):
            raise ValueError("duplicate nodes or triples")
        ns = self.node_set
        touched = set()
        for t in self.triples:
            if t.source not in ns or t.target not in ns:
                raise ValueError(f"triple {t} has an endpoint outside the subgraph")
            touched.add(t.source)
            touched.add(t.target)
        if touched != ns:
            raise ValueError("isolated node in subgraph")
        if not is_connected(self.nodes, self.triples):
            raise ValueError("subgraph is not weakly connected")

    def relabel(self, id: str) -> "Subgraph":
        return Subgraph(self.nodes, self.triples, self.origin_graph_id, id)


def is_connected(nodes: Sequence[Node], triples: Iterable[Triple]) -> bool:
    """Weak connectivity of the graph induced by ``triples`` over ``nodes``."""
    nodes = list(nodes)
    if not nodes:
        return True
    adj: dict[Node, list[Node]] = {n: [] for n in nodes}
    for t in triples:
        if t.source in adj and t.target in adj:
            adj[t.source].append(t.target)
            adj[t.target].append(t.source)
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        for m in adj[stack.pop()]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return len(seen) == len(adj)


def degree(subgraph: Subgraph, node: Node) -> int:
    """Number of triples in ``subgraph`` incident to ``node``."""
    if node not in subgraph.node_set:
        raise KeyError(f"{node!r} is not in subgraph {subgraph.id!r}")
    return sum(1 for t in subgraph.triples if t.source == node or t.target == node)


def read_subgraph(path, origin_graph_id: str = "kg") -> Subgraph:
    path = Path(path)
    triples, rejected = read_triples(path, STRUCTURED)
    if rejected:
        raise InputError(f"invalid triple ({rejected[0][1]})", line=rejected[0][0], path=path)
    return Subgraph.from_triples(triples, origin_graph_id, id=path.stem)


def write_subgraph(sub: Subgraph, path) -> None:
    write_triples(sub.triples, path, STRUCTURED)


@dataclass(frozen=True)
class EdgeReplacementMap:
    """Relation name -> ordered list of relations that change its meaning."""

    mapping: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key, values in self.mapping.items():
            if isinstance(values, str) or not isinstance(values, Sequence):
                raise ValueError(f"replacements for {key!r} must be a list")
            values = tuple(values)
            if not values:
                raise ValueError(f"empty replacement list for {key!r}")
            if key in values:
                raise ValueError(f"self-replacement: {key!r} lists itself")
            clean[key] = values
        object.__setattr__(self, "mapping", clean)

    def __len__(self):
        return len(self.mapping)

    def __contains__(self, relation) -> bool:
        return relation in self.mapping

    def lookup(self, relation: str) -> tuple[str, ...]:
        """Replacement relations for ``relation``; empty when it is not mapped."""
        return tuple(self.mapping.get(relation, ()))

    def unknown_keys(self, relation_vocab: Iterable[str]) -> list[str]:
        vocab = set(relation_vocab)
        return [k for k in self.mapping if k not in vocab]

    def to_json(self) -> str:
        return json.dumps({k: list(v) for k, v in self.mapping.items()}, indent=4, ensure_ascii=False)


def load_edge_map(path, kg: KnowledgeGraph | None = None) -> EdgeReplacementMap:
    path = Path(path)
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError("file not found", path=path) from None
    except json.JSONDecodeError as e:
        raise InputError(f"invalid JSON ({e.msg})", line=e.lineno, path=path) from None
    if not isinstance(data, dict) or not all(
        isinstance(v, list) and all(isinstance(x, str) for x in v) for v in data.values()
    ):
        raise InputError("edge map must be an object of relation -> list of relations", path=path)
    try:
        emap = EdgeReplacementMap(data)
    except ValueError as e:
        raise InputError(str(e), path=path) from None
    if kg is not None:
        missing = emap.unknown_keys(kg.relation_vocab)
        if missing:
            log.warning("%s: %d key(s) not in graph relations: %s", path, len(missing), ", ".join(missing[:5]))
    return emap


def bundled_edge_map(dataset_id: str) -> EdgeReplacementMap:
    """Edge-replacement map shipped with the package for a known dataset."""
    from importlib import resources

    ref = resources.files("semkg") / "edge_maps" / f"{dataset_id}.json"
    if not ref.is_file():
        raise KeyError(f"no bundled edge map for {dataset_id!r}")
    return EdgeReplacementMap(json.loads(ref.read_text(encoding="utf-8")))
