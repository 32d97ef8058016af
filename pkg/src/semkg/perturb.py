"""The four subgraph perturbation operators and their audit records."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import PerturbationError
from .kg import EdgeReplacementMap, KnowledgeGraph, Node, Subgraph, Triple, is_connected


class PerturbationKind(str, enum.Enum):
    NODE_REMOVAL = "node-removal"
    NODE_REPLACEMENT = "node-replacement"
    EDGE_REMOVAL = "edge-removal"
    EDGE_REPLACEMENT = "edge-replacement"

    @classmethod
    def parse(cls, value) -> "PerturbationKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-").replace(" ", "-")
        key = {"edge-deletion": "edge-removal", "node-deletion": "node-removal",
               "noderemoval": "node-removal", "nodereplacement": "node-replacement",
               "edgeremoval": "edge-removal", "edgereplacement": "edge-replacement"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown perturbation kind {value!r}") from None

    def __str__(self):
        return self.value


class NoEligibleTarget(PerturbationError):
    pass


@dataclass(frozen=True)
class PerturbationRecord:
    kind: PerturbationKind
    removed_node: Node | None = None
    replaced_node: tuple[Node, Node] | None = None
    removed_triple: Triple | None = None
    replaced_relation: tuple[Triple, str, str] | None = None

    _FIELD_FOR = {
        PerturbationKind.NODE_REMOVAL: "removed_node",
        PerturbationKind.NODE_REPLACEMENT: "replaced_node",
        PerturbationKind.EDGE_REMOVAL: "removed_triple",
        PerturbationKind.EDGE_REPLACEMENT: "replaced_relation",
    }

    def __post_init__(self):
        want = self._FIELD_FOR[PerturbationKind(self.kind)]
        for name in self._FIELD_FOR.values():
            if (getattr(self, name) is not None) != (name == want):
                raise ValueError(f"{self.kind} record must set exactly {want!r}")

    def to_dict(self) -> dict:
        def node(n):
            return {"name": n.name, "type": n.type_label}

        out: dict = {"kind": self.kind.value}
        if self.removed_node is not None:
            out["removed_node"] = node(self.removed_node)
        if self.replaced_node is not None:
            out["replaced_node"] = {"old": node(self.replaced_node[0]), "new": node(self.replaced_node[1])}
        if self.removed_triple is not None:
            out["removed_triple"] = self.removed_triple.to_record()
        if self.replaced_relation is not None:
            t, old, new = self.replaced_relation
            out["replaced_relation"] = {"triple": t.to_record(), "old": old, "new": new}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PerturbationRecord":
        def node(x):
            return Node(x["name"], x.get("type", ""))

        kind = PerturbationKind.parse(d["kind"])
        kw = {}
        if "removed_node" in d:
            kw["removed_node"] = node(d["removed_node"])
        if "replaced_node" in d:
            kw["replaced_node"] = (node(d["replaced_node"]["old"]), node(d["replaced_node"]["new"]))
        if "removed_triple" in d:
            kw["removed_triple"] = Triple.from_record(d["removed_triple"])
        if "replaced_relation" in d:
            r = d["replaced_relation"]
            kw["replaced_relation"] = (Triple.from_record(r["triple"]), r["old"], r["new"])
        return cls(kind, **kw)


def sample_perturbation_count(n_nodes: int, rng: np.random.Generator) -> int:
    """Uniform k in [1, max(1, floor(0.7 * n_nodes))]."""
    if n_nodes < 2:
        raise ValueError("need at least 2 nodes")
    upper = max(1, (7 * n_nodes) // 10)
    return int(rng.integers(1, upper + 1))


def apply_record(sub: Subgraph, rec: PerturbationRecord) -> Subgraph:
    """Apply one recorded edit. Used both by the operators and for replay."""
    if rec.kind is PerturbationKind.NODE_REMOVAL:
        n = rec.removed_node
        nodes = tuple(m for m in sub.nodes if m != n)
        triples = tuple(t for t in sub.triples if n not in (t.source, t.target))
    elif rec.kind is PerturbationKind.NODE_REPLACEMENT:
        old, new = rec.replaced_node
        nodes = tuple(new if m == old else m for m in sub.nodes)
        triples = tuple(Triple(new if t.source == old else t.source, t.relation,
                               new if t.target == old else t.target) for t in sub.triples)
    elif rec.kind is PerturbationKind.EDGE_REMOVAL:
        nodes = sub.nodes
        triples = tuple(t for t in sub.triples if t != rec.removed_triple)
    else:
        target, _, new_rel = rec.replaced_relation
        nodes = sub.nodes
        triples = tuple(t.with_relation(new_rel) if t == target else t for t in sub.triples)
    return Subgraph(nodes, triples, sub.origin_graph_id, sub.id)


def replay(sub: Subgraph, records: Iterable[PerturbationRecord]) -> Subgraph:
    for rec in records:
        sub = apply_record(sub, rec)
    return sub


def _degrees(triples) -> dict[Node, int]:
    deg: dict[Node, int] = {}
    for t in triples:
        deg[t.source] = deg.get(t.source, 0) + 1
        deg[t.target] = deg.get(t.target, 0) + 1
    return deg


def removable_nodes(sub: Subgraph) -> list[Node]:
    """Nodes whose removal leaves >= 2 nodes, no isolated node and one component."""
    out = []
    if len(sub.nodes) < 3:
        return out
    for n in sub.nodes:
        rest_nodes = [m for m in sub.nodes if m != n]
        rest = [t for t in sub.triples if n not in (t.source, t.target)]
        deg = _degrees(rest)
        if all(deg.get(m, 0) >= 1 for m in rest_nodes) and is_connected(rest_nodes, rest):
            out.append(n)
    return out


def replacement_candidates(sub: Subgraph, kg: KnowledgeGraph, exclude: Iterable[Node] = (),
                           protected: Iterable[Node] = ()) -> dict[Node, list[Node]]:
    """Same-type graph nodes outside the subgraph, per replaceable subgraph node."""
    banned = set(sub.nodes) | set(exclude)
    protected = set(protected)
    out = {}
    for n in sub.nodes:
        if n in protected:
            continue
        pool = [m for m in kg.type_index.get(n.type_label, ()) if m not in banned]
        if pool:
            out[n] = pool
    return out


def removable_edges(sub: Subgraph) -> list[Triple]:
    """Triples whose endpoints both have degree >= 2 and whose removal keeps one component."""
    deg = _degrees(sub.triples)
    out = []
    for t in sub.triples:
        if deg[t.source] < 2 or deg[t.target] < 2:
            continue
        if is_connected(sub.nodes, [u for u in sub.triples if u != t]):
            out.append(t)
    return out


def replaceable_edges(sub: Subgraph, emap: EdgeReplacementMap,
                      protected: Iterable[Triple] = ()) -> dict[Triple, list[str]]:
    """Mapped triples and the replacement relations that do not collide with an existing triple."""
    protected = set(protected)
    present = sub.triple_set
    out = {}
    for t in sub.triples:
        if t in protected or t.relation not in emap:
            continue
        options = [r for r in emap.lookup(t.relation) if t.with_relation(r) not in present]
        if options:
            out[t] = options
    return out


def _pick(seq, rng):
    return seq[int(rng.integers(len(seq)))]


def remove_node(sub: Subgraph, rng: np.random.Generator) -> tuple[Subgraph, PerturbationRecord]:
    eligible = removable_nodes(sub)
    if not eligible:
        raise NoEligibleTarget("no removable node")
    rec = PerturbationRecord(PerturbationKind.NODE_REMOVAL, removed_node=_pick(eligible, rng))
    return apply_record(sub, rec), rec


def replace_node(sub: Subgraph, kg: KnowledgeGraph, rng: np.random.Generator, exclude: Iterable[Node] = (),
                 protected: Iterable[Node] = ()) -> tuple[Subgraph, PerturbationRecord]:
    """Swap one node for a same-type node from the graph, rewiring its triples."""
    cands = replacement_candidates(sub, kg, exclude, protected)
    if not cands:
        raise NoEligibleTarget("no node has a same-type replacement outside the subgraph")
    old = _pick(list(cands), rng)
    rec = PerturbationRecord(PerturbationKind.NODE_REPLACEMENT, replaced_node=(old, _pick(cands[old], rng)))
    return apply_record(sub, rec), rec


def remove_edge(sub: Subgraph, rng: np.random.Generator) -> tuple[Subgraph, PerturbationRecord]:
    eligible = removable_edges(sub)
    if not eligible:
        raise NoEligibleTarget("no removable edge")
    rec = PerturbationRecord(PerturbationKind.EDGE_REMOVAL, removed_triple=_pick(eligible, rng))
    return apply_record(sub, rec), rec


def replace_edge(sub: Subgraph, emap: EdgeReplacementMap, rng: np.random.Generator,
                 protected: Iterable[Triple] = ()) -> tuple[Subgraph, PerturbationRecord]:
    eligible = replaceable_edges(sub, emap, protected)
    if not eligible:
        raise NoEligibleTarget("no triple with a mapped relation")
    t = _pick(list(eligible), rng)
    new = _pick(eligible[t], rng)
    rec = PerturbationRecord(PerturbationKind.EDGE_REPLACEMENT, replaced_relation=(t, t.relation, new))
    return apply_record(sub, rec), rec


def is_feasible(kind: PerturbationKind, sub: Subgraph, kg: KnowledgeGraph | None = None,
                emap: EdgeReplacementMap | None = None) -> bool:
    kind = PerturbationKind.parse(kind)
    if kind is PerturbationKind.NODE_REMOVAL:
        return bool(removable_nodes(sub))
    if kind is PerturbationKind.NODE_REPLACEMENT:
        return kg is not None and bool(replacement_candidates(sub, kg))
    if kind is PerturbationKind.EDGE_REMOVAL:
        return bool(removable_edges(sub))
    return emap is not None and bool(replaceable_edges(sub, emap))


def perturb(sub: Subgraph, kg: KnowledgeGraph | None, kind, emap: EdgeReplacementMap | None,
            rng: np.random.Generator) -> tuple[Subgraph, list[PerturbationRecord]]:
    """Apply one operator k times, k drawn by :func:`sample_perturbation_count`.

    Eligibility is re-checked before every step and the sequence stops early
    once nothing is eligible. Replaced nodes and relations are never touched
    again, so no step can undo an earlier one.
    """
    kind = PerturbationKind.parse(kind)
    k = sample_perturbation_count(len(sub.nodes), rng)
    original_nodes = set(sub.nodes)
    introduced_nodes: set[Node] = set()
    introduced_triples: set[Triple] = set()
    records: list[PerturbationRecord] = []
    current = sub
    for _ in range(k):
        try:
            if kind is PerturbationKind.NODE_REMOVAL:
                current, rec = remove_node(current, rng)
            elif kind is PerturbationKind.NODE_REPLACEMENT:
                if kg is None:
                    raise ValueError("node replacement needs the source graph")
                current, rec = replace_node(current, kg, rng, exclude=original_nodes, protected=introduced_nodes)
                introduced_nodes.add(rec.replaced_node[1])
            elif kind is PerturbationKind.EDGE_REMOVAL:
                current, rec = remove_edge(current, rng)
            else:
                if emap is None:
                    raise ValueError("edge replacement needs an edge-replacement map")
                current, rec = replace_edge(current, emap, rng, protected=introduced_triples)
                t, _, new = rec.replaced_relation
                introduced_triples.add(t.with_relation(new))
        except NoEligibleTarget:
            break
        records.append(rec)
    if not records:
        raise PerturbationError(f"perturbation infeasible: no eligible target for {kind}")
    return current, records
