"""Resumable sample -> perturb -> generate -> validate -> assemble runs."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import (ORIGINAL, PERTURBED, Statement, SubgraphFamily, assemble_pairs, corpus_stats,
                      group_statements, read_statements, write_pairs, write_statements)
from .errors import BackendError, ConfigError, PerturbationError, PipelineError, SamplingError
from .kg import (EdgeReplacementMap, KnowledgeGraph, Subgraph, bundled_edge_map, load_edge_map, load_kg,
                 read_subgraph, write_subgraph)
from .llm import ChatBackend, RetryPolicy, chat_with_retry, make_chat_backend, map_bounded
from .perturb import PerturbationKind, PerturbationRecord, is_feasible, perturb
from .prompts import registered_datasets, render_generation_prompt
from .sampler import RESEED_ATTEMPTS, SamplerConfig, densify, sample_subgraph
from .validate import ValidationOutcome, group_by_size, reconstruction_rate, validate_statement

log = logging.getLogger(__name__)

STAGES = ("sample", "perturb", "generate", "validate", "assemble")
LAYOUT = ("subgraphs", "perturbed", "statements", "outcomes", "pairs", "report")
ALL_KINDS = tuple(k.value for k in PerturbationKind)


@dataclass
class RunConfig:
    kg_path: str
    out_dir: str
    dataset_id: str = "codex"
    prompt_set: str | None = None
    edge_map_path: str | None = None
    kinds: tuple[str, ...] = ALL_KINDS
    samples_per_kind: int = 10
    originals_per_subgraph: int = 2
    backend: str = "template"
    model_id: str | None = None
    cache_dir: str | None = None
    seed: int = 0
    min_budget: int = 5
    max_budget: int = 20
    type_decay: float = 0.5
    min_triples: int = 2
    generation_retries: int = 5
    parse_attempts: int = 3
    max_workers: int = 1

    def __post_init__(self):
        self.kinds = tuple(PerturbationKind.parse(k).value for k in self.kinds)
        if not self.kinds:
            raise ConfigError("at least one perturbation kind is required")
        if self.originals_per_subgraph < 2:
            raise ConfigError("originals_per_subgraph must be >= 2")
        if self.samples_per_kind < 1:
            raise ConfigError("samples_per_kind must be >= 1")
        if self.generation_retries < 0 or self.parse_attempts < 1 or self.max_workers < 1:
            raise ConfigError("generation_retries >= 0, parse_attempts >= 1 and max_workers >= 1 required")
        if self.prompts not in registered_datasets():
            raise ConfigError(f"no prompt templates for {self.prompts!r}; "
                              f"set prompt_set to one of {', '.join(registered_datasets())}")
        if self.min_triples < 1:
            raise ConfigError("min_triples must be >= 1")
        try:
            self.sampler()
        except ValueError as e:
            raise ConfigError(str(e)) from None

    @property
    def prompts(self) -> str:
        return self.prompt_set or self.dataset_id

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(self.min_budget, self.max_budget, self.type_decay, self.seed)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["kinds"] = list(self.kinds)
        return d

    def config_hash(self) -> str:
        """Hash of everything that affects outputs (paths to outputs and worker count excluded)."""
        d = self.to_dict()
        for k in ("out_dir", "max_workers", "cache_dir"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d)


@dataclass
class RunManifest:
    config_hash: str
    stages: dict[str, bool] = field(default_factory=lambda: {s: False for s in STAGES})
    counts: dict[str, int] = field(default_factory=dict)
    dropped: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(d["config_hash"], dict(d["stages"]), dict(d.get("counts", {})), dict(d.get("dropped", {})))


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
        f.flush()
        os.fsync(f.fileno())
    tmp.replace(path)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def verbalize(backend: ChatBackend, dataset_id: str, sub: Subgraph, avoid: set[str] = frozenset(),
              retries: int = 5, policy: RetryPolicy | None = None) -> str | None:
    """One statement for ``sub``; regenerated up to ``retries`` times while empty or in ``avoid``."""
    request = render_generation_prompt(dataset_id, sub.triples)
    for _ in range(1 + retries):
        text = chat_with_retry(backend, request, policy).strip()
        if text and text not in avoid:
            return text
    return None


def family_statements(backend: ChatBackend, fam: SubgraphFamily, n_originals: int = 2, retries: int = 5,
                      policy: RetryPolicy | None = None, prompt_set: str | None = None) -> list[Statement] | None:
    """``n_originals`` distinct original statements plus one perturbed statement, or None."""
    ds = fam.dataset_name
    prompts = prompt_set or ds
    statements, texts = [], set()
    for i in range(n_originals):
        text = verbalize(backend, prompts, fam.original, texts, retries, policy)
        if text is None:
            log.warning("subgraph %s: no distinct original statement %d within the retry cap", fam.id, i)
            return None
        texts.add(text)
        statements.append(Statement(f"{fam.id}:o{i}", fam.id, ds, text, ORIGINAL, i))
    text = verbalize(backend, prompts, fam.perturbed, set(), retries, policy)
    if text is None:
        return None
    statements.append(Statement(f"{fam.id}:p", fam.id, ds, text, PERTURBED, None, fam.kind,
                                perturbation_count=len(fam.records)))
    return statements


class Run:
    """One run directory. Stages read their inputs back from disk so a resumed run sees the same data."""

    def __init__(self, config: RunConfig, backend: ChatBackend | None = None, policy: RetryPolicy | None = None):
        self.config = config
        self.root = Path(config.out_dir)
        self.policy = policy
        self._backend = backend
        self._kg: KnowledgeGraph | None = None
        self._emap: EdgeReplacementMap | None = None
        self.manifest_path = self.root / "manifest.json"

    # lazily built so a fully completed run never touches the graph or a backend
    @property
    def kg(self) -> KnowledgeGraph:
        if self._kg is None:
            if not Path(self.config.kg_path).is_file():
                raise ConfigError(f"graph file not found: {self.config.kg_path}")
            self._kg = load_kg(self.config.kg_path, graph_id=self.config.dataset_id)
        return self._kg

    @property
    def emap(self) -> EdgeReplacementMap | None:
        if self._emap is None:
            if self.config.edge_map_path:
                self._emap = load_edge_map(self.config.edge_map_path, self.kg)
            else:
                try:
                    self._emap = bundled_edge_map(self.config.dataset_id)
                except KeyError:
                    return None
        return self._emap

    @property
    def backend(self) -> ChatBackend:
        if self._backend is None:
            self._backend = make_chat_backend(self.config.backend, self.config.model_id, self.config.cache_dir)
        return self._backend

    def load_manifest(self) -> RunManifest:
        h = self.config.config_hash()
        if self.manifest_path.exists():
            m = RunManifest.from_dict(json.loads(self.manifest_path.read_text(encoding="utf-8")))
            if m.config_hash != h:
                raise PipelineError(f"{self.root} holds a run with a different configuration "
                                    f"({m.config_hash} != {h}); use a fresh output directory")
            return m
        return RunManifest(h)

    def save_manifest(self, m: RunManifest) -> None:
        _atomic_write(self.manifest_path, _dump_json(m.to_dict()))

    def run(self) -> RunManifest:
        for d in LAYOUT:
            (self.root / d).mkdir(parents=True, exist_ok=True)
        m = self.load_manifest()
        if not (self.root / "config.json").exists():
            _atomic_write(self.root / "config.json", _dump_json(self.config.to_dict()))
        for stage in STAGES:
            if m.stages.get(stage):
                log.info("stage %s already complete; skipped", stage)
                continue
            log.info("stage %s", stage)
            count, dropped = getattr(self, f"stage_{stage}")()
            m.counts[stage] = count
            m.dropped[stage] = dropped
            if count == 0:
                self.save_manifest(m)
                raise PipelineError(f"stage {stage} produced no survivors ({dropped} dropped); "
                                    f"see logs in {self.root}")
            m.stages[stage] = True
            self.save_manifest(m)
        return m

    # stage: sample

    def _subgraph_ids(self) -> list[tuple[str, PerturbationKind]]:
        return [(f"{kind}-{j:04d}", PerturbationKind.parse(kind))
                for kind in self.config.kinds for j in range(self.config.samples_per_kind)]

    def _rng(self, stage: int, kind: PerturbationKind, j: int) -> np.random.Generator:
        kind_idx = list(PerturbationKind).index(kind)
        return np.random.default_rng([self.config.seed, stage, kind_idx, j])

    def _usable(self, sub: Subgraph, kind: PerturbationKind) -> bool:
        return len(sub.triples) >= self.config.min_triples and is_feasible(kind, sub, self.kg, self.emap)

    def stage_sample(self) -> tuple[int, int]:
        """Draw subgraphs until each is feasible for its kind; edge-removal subgraphs are densified."""
        cfg = self.config.sampler()
        written, dropped = 0, 0
        for j_all, (sid, kind) in enumerate(self._subgraph_ids()):
            j = j_all % self.config.samples_per_kind
            rng = self._rng(0, kind, j)
            sub = None
            for _ in range(RESEED_ATTEMPTS):
                try:
                    cand = sample_subgraph(self.kg, cfg, rng, id=sid)
                except SamplingError:
                    break
                if kind is PerturbationKind.EDGE_REMOVAL:
                    cand = densify(cand, self.kg)
                if self._usable(cand, kind):
                    sub = cand
                    break
            if sub is None:
                log.warning("subgraph %s: no feasible sample for %s after %d attempts", sid, kind, RESEED_ATTEMPTS)
                dropped += 1
                continue
            write_subgraph(sub, self.root / "subgraphs" / f"{sid}.jsonl")
            written += 1
        return written, dropped

    # stage: perturb

    def _originals(self) -> dict[str, tuple[Subgraph, PerturbationKind]]:
        out = {}
        for sid, kind in self._subgraph_ids():
            p = self.root / "subgraphs" / f"{sid}.jsonl"
            if p.exists():
                out[sid] = (read_subgraph(p, self.config.dataset_id), kind)
        return out

    def stage_perturb(self) -> tuple[int, int]:
        written, dropped = 0, 0
        for sid, (sub, kind) in self._originals().items():
            j = int(sid.rsplit("-", 1)[1])
            try:
                new, records = perturb(sub, self.kg, kind, self.emap, self._rng(1, kind, j))
            except PerturbationError as e:
                log.warning("subgraph %s: %s", sid, e)
                dropped += 1
                continue
            write_subgraph(new, self.root / "perturbed" / f"{sid}.jsonl")
            _atomic_write(self.root / "perturbed" / f"{sid}.records.jsonl",
                          "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in records))
            written += 1
        return written, dropped

    def families(self) -> dict[str, SubgraphFamily]:
        out = {}
        for sid, (sub, kind) in self._originals().items():
            p = self.root / "perturbed" / f"{sid}.jsonl"
            if not p.exists():
                continue
            rec_path = self.root / "perturbed" / f"{sid}.records.jsonl"
            records = [PerturbationRecord.from_dict(json.loads(line))
                       for line in rec_path.read_text(encoding="utf-8").splitlines() if line.strip()]
            out[sid] = SubgraphFamily(sid, self.config.dataset_id, kind, sub,
                                      read_subgraph(p, self.config.dataset_id), records)
        return out

    # stage: generate

    def _generate_family(self, fam: SubgraphFamily) -> list[Statement] | None:
        try:
            return family_statements(self.backend, fam, self.config.originals_per_subgraph,
                                     self.config.generation_retries, self.policy, self.config.prompts)
        except BackendError as e:
            log.warning("subgraph %s: generation failed (%s)", fam.id, e)
            return None

    def stage_generate(self) -> tuple[int, int]:
        fams = list(self.families().values())
        results = map_bounded(self._generate_family, fams, self.config.max_workers)
        statements = [s for r in results if r for s in r]
        write_statements(statements, self.root / "statements" / "statements.jsonl")
        return len(statements), sum(1 for r in results if r is None)

    # stage: validate

    def stage_validate(self) -> tuple[int, int]:
        fams = self.families()
        statements = read_statements(self.root / "statements" / "statements.jsonl")
        types = sorted(t or "entity" for t in self.kg.entity_type_vocab)
        relations = sorted(self.kg.relation_vocab)

        def check(s: Statement) -> ValidationOutcome:
            fam = fams[s.subgraph_id]
            ref = fam.original if s.role == ORIGINAL else fam.perturbed
            return validate_statement(self.backend, s.text, ref, types, relations, self.config.prompts,
                                      s.id, self.policy, self.config.parse_attempts)

        outcomes = map_bounded(check, statements, self.config.max_workers)
        _atomic_write(self.root / "outcomes" / "outcomes.jsonl",
                      "".join(json.dumps(o.to_dict(), ensure_ascii=False) + "\n" for o in outcomes))
        passed = sum(o.passed for o in outcomes)
        rates = reconstruction_rate(group_by_size(outcomes))
        _atomic_write(self.root / "report" / "reconstruction_by_size.json",
                      _dump_json({str(k): v for k, v in rates.items()}))
        return passed, len(outcomes) - passed

    # stage: assemble

    def validated_statements(self) -> list[Statement]:
        statements = read_statements(self.root / "statements" / "statements.jsonl")
        passed = {}
        with open(self.root / "outcomes" / "outcomes.jsonl", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    d = json.loads(line)
                    passed[d["statement_id"]] = bool(d["passed"])
        return [dataclasses.replace(s, validated=passed.get(s.id, False)) for s in statements]

    def stage_assemble(self) -> tuple[int, int]:
        statements = self.validated_statements()
        groups = group_statements(statements)
        pairs = assemble_pairs(groups, np.random.default_rng([self.config.seed, 4]))
        write_pairs(pairs, self.root / "pairs" / "pairs.jsonl")
        fams = self.families()
        kept = {p.subgraph_id for p in pairs}
        stats = corpus_stats([s for s in statements if s.subgraph_id in kept and s.validated], fams)
        _atomic_write(self.root / "report" / "corpus_stats.json", _dump_json(stats))
        return len(pairs), len(groups) - len(kept)


def run_pipeline(config: RunConfig, backend: ChatBackend | None = None,
                 policy: RetryPolicy | None = None) -> RunManifest:
    return Run(config, backend, policy).run()
