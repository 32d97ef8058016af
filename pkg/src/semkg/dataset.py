"""Statements, labelled pairs, splits, corpus statistics and pair-file I/O."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError
from .kg import Subgraph
from .perturb import PerturbationKind, PerturbationRecord

log = logging.getLogger(__name__)

ORIGINAL = "original"
PERTURBED = "perturbed"


@dataclass(frozen=True)
class Statement:
    id: str
    subgraph_id: str
    dataset_name: str
    text: str
    role: str = ORIGINAL
    index: int | None = 0
    kind: PerturbationKind | None = None
    validated: bool = False
    perturbation_count: int | None = None

    def __post_init__(self):
        if self.role not in (ORIGINAL, PERTURBED):
            raise ValueError(f"role must be {ORIGINAL!r} or {PERTURBED!r}")
        if self.role == PERTURBED and self.kind is None:
            raise ValueError("perturbed statements need a perturbation kind")
        if self.kind is not None:
            object.__setattr__(self, "kind", PerturbationKind.parse(self.kind))

    @property
    def word_count(self) -> int:
        return len(self.text.split())

    def to_dict(self) -> dict:
        return {
            "id": self.id, "subgraph_id": self.subgraph_id, "dataset_name": self.dataset_name,
            "role": self.role, "index": self.index, "kind": self.kind.value if self.kind else None,
            "validated": self.validated, "perturbation_count": self.perturbation_count,
            "word_count": self.word_count, "text": self.text,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Statement":
        return cls(d["id"], d["subgraph_id"], d["dataset_name"], d["text"], d.get("role", ORIGINAL),
                   d.get("index"), d.get("kind"), bool(d.get("validated", False)), d.get("perturbation_count"))


@dataclass(frozen=True)
class StatementPair:
    statement_1: str
    statement_2: str
    label: int
    perturbation_kind: PerturbationKind | None = None
    dataset_name: str = ""
    subgraph_id: str = ""
    stratum: PerturbationKind | None = None
    perturbation_count: int | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if self.perturbation_kind is not None:
            object.__setattr__(self, "perturbation_kind", PerturbationKind.parse(self.perturbation_kind))
        if self.label == 1 and self.perturbation_kind is not None:
            raise ValueError("a similar pair (label 1) cannot carry a perturbation kind")
        if self.label == 0 and self.perturbation_kind is None:
            raise ValueError("a dissimilar pair (label 0) needs a perturbation kind")
        stratum = self.stratum if self.stratum is not None else self.perturbation_kind
        object.__setattr__(self, "stratum", PerturbationKind.parse(stratum) if stratum is not None else None)

    @property
    def pair_id(self) -> str:
        blob = json.dumps([self.dataset_name, self.subgraph_id, self.label, self.statement_1, self.statement_2],
                          ensure_ascii=False)
        return hashlib.sha1(blob.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        d = {"dataset_name": self.dataset_name}
        if self.perturbation_kind is not None:
            d["perturbation_type"] = self.perturbation_kind.value
        d.update(statement_1=self.statement_1, statement_2=self.statement_2, label=self.label,
                 subgraph_id=self.subgraph_id)
        if self.stratum is not None:
            d["stratum"] = self.stratum.value
        if self.perturbation_count is not None:
            d["perturbation_count"] = self.perturbation_count
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "StatementPair":
        return cls(
            statement_1=str(d["statement_1"]), statement_2=str(d["statement_2"]), label=int(d["label"]),
            perturbation_kind=d.get("perturbation_type") or None, dataset_name=str(d.get("dataset_name", "")),
            subgraph_id=str(d.get("subgraph_id", "")), stratum=d.get("stratum") or None,
            perturbation_count=d.get("perturbation_count"),
        )


@dataclass
class SubgraphFamily:
    """An original subgraph, its perturbed version and the edits between them."""

    id: str
    dataset_name: str
    kind: PerturbationKind
    original: Subgraph
    perturbed: Subgraph
    records: list[PerturbationRecord] = field(default_factory=list)


def assemble_pairs(groups: Mapping[str, Sequence[Statement]], rng: np.random.Generator) -> list[StatementPair]:
    """One similar and one dissimilar pair per subgraph with enough validated statements.

    The similar pair is the first two validated originals with distinct text;
    the dissimilar pair joins a uniformly chosen validated original with the
    first validated perturbed statement.
    """
    pairs = []
    for sid, statements in groups.items():
        originals = sorted((s for s in statements if s.role == ORIGINAL and s.validated),
                           key=lambda s: (s.index if s.index is not None else 0, s.id))
        distinct = list({s.text: s for s in reversed(originals)}.values())[::-1]
        perturbed = [s for s in statements if s.role == PERTURBED and s.validated]
        if len(distinct) < 2 or not perturbed:
            log.warning("subgraph %s skipped: %d distinct validated original(s), %d validated perturbed",
                        sid, len(distinct), len(perturbed))
            continue
        o1, o2 = distinct[0], distinct[1]
        p = perturbed[0]
        anchor = originals[int(rng.integers(len(originals)))]
        pairs.append(StatementPair(o1.text, o2.text, 1, None, o1.dataset_name, sid, stratum=p.kind))
        pairs.append(StatementPair(anchor.text, p.text, 0, p.kind, p.dataset_name, sid, stratum=p.kind,
                                   perturbation_count=p.perturbation_count))
    return pairs


def group_statements(statements: Iterable[Statement]) -> dict[str, list[Statement]]:
    groups: dict[str, list[Statement]] = {}
    for s in statements:
        groups.setdefault(s.subgraph_id, []).append(s)
    return groups


def _stratum_key(pair: StatementPair) -> tuple:
    return (pair.label, pair.stratum.value if pair.stratum else "", pair.dataset_name)


def split(pairs: Sequence[StatementPair], validation_fraction: float = 0.5,
          seed: int = 0) -> tuple[list[StatementPair], list[StatementPair]]:
    """Stratified validation/test split keyed on pair identity, not position."""
    if not 0 < validation_fraction < 1:
        raise ValueError(f"validation_fraction must be in (0, 1), got {validation_fraction}")
    strata: dict[tuple, list[int]] = defaultdict(list)
    for i, p in enumerate(pairs):
        strata[_stratum_key(p)].append(i)
    ids = [p.pair_id for p in pairs]
    rng = np.random.default_rng(seed)
    in_val: set[str] = set()
    for key in sorted(strata):
        members = sorted(strata[key], key=lambda i: ids[i])
        if len(members) < 2:
            label, kind, ds = key
            raise ValueError(f"stratum (label={label}, kind={kind or '-'}, dataset={ds or '-'}) "
                             f"has {len(members)} pair(s); need at least 2 to split")
        n_val = min(max(int(round(validation_fraction * len(members))), 1), len(members) - 1)
        for j in rng.permutation(len(members))[:n_val]:
            in_val.add(ids[members[j]])
    val = [p for p, i in zip(pairs, ids) if i in in_val]
    test = [p for p, i in zip(pairs, ids) if i not in in_val]
    return val, test


def corpus_stats(statements: Sequence[Statement], families: Mapping[str, SubgraphFamily]) -> list[dict]:
    """Per (dataset, perturbation kind): statement count, mean word count, mean graph sizes."""
    if not statements:
        raise ValueError("no statements")
    by_group: dict[tuple[str, str], list[Statement]] = defaultdict(list)
    for s in statements:
        fam = families.get(s.subgraph_id)
        kind = fam.kind if fam else s.kind
        if kind is None:
            continue
        by_group[(s.dataset_name, PerturbationKind.parse(kind).value)].append(s)
    rows = []
    for (ds, kind), group in sorted(by_group.items()):
        fams = [families[i] for i in dict.fromkeys(s.subgraph_id for s in group) if i in families]
        row = {"dataset": ds, "perturbation_type": kind, "statements": len(group),
               "avg_word_count": fmean(s.word_count for s in group)}
        if fams:
            row.update(
                avg_subgraph_nodes=fmean(len(f.original.nodes) for f in fams),
                avg_subgraph_edges=fmean(len(f.original.triples) for f in fams),
                avg_perturbed_nodes=fmean(len(f.perturbed.nodes) for f in fams),
                avg_perturbed_edges=fmean(len(f.perturbed.triples) for f in fams),
            )
        rows.append(row)
    return rows


def pair_stats(pairs: Sequence[StatementPair]) -> list[dict]:
    """Summary of a pair file per (dataset, stratum): unique statements, mean words, pair counts."""
    if not pairs:
        raise ValueError("no pairs")
    groups: dict[tuple[str, str], list[StatementPair]] = defaultdict(list)
    for p in pairs:
        groups[(p.dataset_name, p.stratum.value if p.stratum else "-")].append(p)
    rows = []
    for (ds, kind), group in sorted(groups.items()):
        texts = list(dict.fromkeys(t for p in group for t in (p.statement_1, p.statement_2)))
        rows.append({
            "dataset": ds, "perturbation_type": kind, "statements": len(texts),
            "avg_word_count": fmean(len(t.split()) for t in texts),
            "pairs": len(group), "positive": sum(p.label for p in group),
        })
    return rows


def write_pairs(pairs: Iterable[StatementPair], path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        for p in pairs:
            f.write(json.dumps(p.to_dict(), ensure_ascii=False) + "\n")
    tmp.replace(path)


def read_pairs(path) -> list[StatementPair]:
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                out.append(StatementPair.from_dict(json.loads(line)))
            except json.JSONDecodeError as e:
                raise InputError(f"malformed record ({e.msg})", line=lineno, path=path) from None
            except (KeyError, TypeError, ValueError) as e:
                raise InputError(f"invalid pair ({e})", line=lineno, path=path) from None
    return out


def write_statements(statements: Iterable[Statement], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for s in statements:
            f.write(json.dumps(s.to_dict(), ensure_ascii=False) + "\n")


def read_statements(path) -> list[Statement]:
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                out.append(Statement.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise InputError(f"invalid statement ({e})", line=lineno, path=path) from None
    return out


def import_pairs(path, column_map: Mapping[str, str] | None = None,
                 kind_map: Mapping[str, str] | None = None) -> list[StatementPair]:
    """Read an external pair table (CSV, TSV or JSON lines) through a column mapping.

    ``column_map`` maps external column names to pair-file field names. A
    perturbation type on a label-1 row is kept as its stratum only.
    """
    path = Path(path)
    column_map = dict(column_map or {})
    kind_map = dict(kind_map or {})
    if path.suffix.lower() in (".csv", ".tsv"):
        with open(path, encoding="utf-8", newline="") as f:
            rows = list(csv.DictReader(f, delimiter="\t" if path.suffix.lower() == ".tsv" else ","))
        start = 2
    else:
        with open(path, encoding="utf-8") as f:
            text = f.read()
        try:
            data = json.loads(text)
            rows = data if isinstance(data, list) else [data]
        except json.JSONDecodeError:
            rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        start = 1
    out = []
    for lineno, row in enumerate(rows, start):
        rec = {column_map.get(k, k): v for k, v in row.items()}
        kind = _kind_cell(rec.get("perturbation_type"), kind_map)
        stratum = _kind_cell(rec.get("stratum"), kind_map) or kind
        try:
            label = int(float(rec["label"]))
            out.append(StatementPair(
                str(rec["statement_1"]), str(rec["statement_2"]), label,
                kind if label == 0 else None, str(rec.get("dataset_name", "")), str(rec.get("subgraph_id", "")),
                stratum=stratum,
            ))
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"cannot map row ({e})", line=lineno, path=path) from None
    return inherit_strata(out)


def _kind_cell(value, kind_map):
    if value in (None, "", "none", "None") or (isinstance(value, float) and value != value):
        return None
    return kind_map.get(str(value), str(value))


def inherit_strata(pairs: list[StatementPair]) -> list[StatementPair]:
    """Give stratum-less positives the kind of the negative from the same subgraph.

    External tables often tag only the dissimilar rows. Pairs without a
    subgraph id, or whose subgraph has no single negative kind, are left alone.
    """
    kinds: dict[tuple[str, str], set] = defaultdict(set)
    for p in pairs:
        if p.label == 0 and p.subgraph_id:
            kinds[(p.dataset_name, p.subgraph_id)].add(p.perturbation_kind)
    out = []
    for p in pairs:
        k = kinds.get((p.dataset_name, p.subgraph_id), set())
        if p.label == 1 and p.stratum is None and len(k) == 1:
            p = dataclasses.replace(p, stratum=next(iter(k)))
        out.append(p)
    return out
