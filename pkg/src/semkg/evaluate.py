"""Scoring methods, threshold calibration and stratified evaluation with exact F1 intervals."""

from __future__ import annotations

import csv
import json
import logging
import math
import string
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dataset import StatementPair, split
from .errors import BackendError, ConfigError
from .llm import (CachedEmbedding, ChatBackend, HashingEmbedding, RemoteEmbeddingBackend, RetryPolicy,
                  chat_with_retry, map_bounded)
from .metrics import bleu, confusion, cosine, prf_from_counts, rouge_l, rouge_n
from .prompts import render_judge_prompt
from .stats import f1_confidence_interval

log = logging.getLogger(__name__)

CONTINUOUS = "continuous"
BINARY = "binary"
ALL = "all"


@dataclass(frozen=True)
class Scorer:
    name: str
    kind: str
    fn: Callable[[str, str], float | None]

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"scorer kind must be {CONTINUOUS!r} or {BINARY!r}")

    def score(self, statement_1: str, statement_2: str) -> float | None:
        return self.fn(statement_1, statement_2)


def judge_pair(backend: ChatBackend, s1: str, s2: str, model_id: str | None = None,
               policy: RetryPolicy | None = None) -> int | None:
    """1 for "yes", 0 for "no", None for anything else or a transport failure."""
    request = render_judge_prompt(s1, s2)
    if model_id:
        request = request.with_model(model_id)
    try:
        text = chat_with_retry(backend, request, policy)
    except BackendError as e:
        log.warning("judge call failed: %s", e)
        return None
    answer = text.strip().lower().strip(string.punctuation + " \t\n")
    return {"yes": 1, "no": 0}.get(answer)


def _embedder(model: str, cache_dir=None):
    inner = HashingEmbedding() if model in ("hashing", "local") else RemoteEmbeddingBackend(model)
    return CachedEmbedding(inner, cache_dir)


def make_scorer(spec: str, chat_backend: ChatBackend | None = None, embedding_cache=None,
                policy: RetryPolicy | None = None) -> Scorer:
    """Build a scorer from a method name: rouge1, rouge2, rougeL, bleu, cosine:<model>, judge:<model>."""
    name, _, model = spec.partition(":")
    if name == "rouge1":
        return Scorer(spec, CONTINUOUS, lambda a, b: rouge_n(a, b, 1))
    if name == "rouge2":
        return Scorer(spec, CONTINUOUS, lambda a, b: rouge_n(a, b, 2))
    if name == "rougeL":
        return Scorer(spec, CONTINUOUS, rouge_l)
    if name == "bleu":
        return Scorer(spec, CONTINUOUS, bleu)
    if name == "cosine":
        emb = _embedder(model or "hashing", embedding_cache)

        def score(a, b):
            try:
                return cosine(emb.embed(a), emb.embed(b))
            except ValueError:
                return 0.0  # a text with no hashed tokens has a zero vector

        return Scorer(spec, CONTINUOUS, score)
    if name == "judge":
        if chat_backend is None:
            raise ConfigError("judge scorer needs a chat backend")
        return Scorer(spec, BINARY, lambda a, b: judge_pair(chat_backend, a, b, model or None, policy))
    raise ConfigError(f"unknown method {spec!r}")


def select_threshold(scores: Sequence[float], labels: Sequence[int]) -> float:
    """F1-maximizing cutoff over midpoints of distinct scores plus +/-inf; ties go to the smallest."""
    if len(scores) != len(labels):
        raise ValueError(f"length mismatch: {len(scores)} scores, {len(labels)} labels")
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("need at least one positive label to calibrate a threshold")
    distinct = np.unique(s)
    lo, hi = distinct[:-1], distinct[1:]
    mid = lo + (hi - lo) / 2
    # adjacent floats can round the midpoint onto lo, which would merge two cuts
    mid = np.where(mid > lo, mid, hi)
    candidates = np.concatenate([[-np.inf], mid, [np.inf]])
    pos = np.sort(s[y == 1])
    neg = np.sort(s[y == 0])
    # counts of scores >= threshold
    tp = len(pos) - np.searchsorted(pos, candidates, side="left")
    fp = len(neg) - np.searchsorted(neg, candidates, side="left")
    f1 = np.where(tp > 0, 2 * tp / (2 * tp + fp + (n_pos - tp)).clip(min=1), 0.0)
    return float(candidates[int(np.argmax(f1))])


@dataclass
class EvalRow:
    method: str
    dataset: str
    perturbation_kind: str
    precision: float
    recall: float
    f1: float
    ci_low: float
    ci_high: float
    n: int
    threshold: float | None
    invalid_rate: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["threshold"] is not None and not math.isfinite(d["threshold"]):
            d["threshold"] = "inf" if d["threshold"] > 0 else "-inf"
        return d


def score_pairs(pairs: Sequence[StatementPair], scorer: Scorer, max_workers: int = 1) -> list[float | None]:
    return map_bounded(lambda p: scorer.score(p.statement_1, p.statement_2), list(pairs), max_workers)


def _row(method, dataset, kind, preds, labels, n_invalid, threshold, alpha) -> EvalRow:
    tp, fp, fn, tn = confusion(preds, labels)
    p, r, f1 = prf_from_counts(tp, fp, fn)
    if tp + fp >= 1 and tp + fn >= 1:
        lo, hi = f1_confidence_interval(tp, fp, fn, alpha)
    else:
        lo, hi = 0.0, 1.0  # interval undefined without a predicted and an actual positive
    total = len(labels) + n_invalid
    return EvalRow(method, dataset, kind, p, r, f1, lo, hi, len(labels), threshold,
                   n_invalid / total if total else 0.0, tp, fp, fn, tn)


def evaluate_scores(pairs: Sequence[StatementPair], scores: Sequence[float | None], method: str,
                    kind: str = CONTINUOUS, validation_fraction: float = 0.5, seed: int = 0,
                    alpha: float = 0.05) -> tuple[list[EvalRow], list[dict]]:
    """Rows per (dataset, kind) stratum plus pooled rows, and a per-pair record list."""
    if not pairs:
        raise ValueError("no pairs to evaluate")
    if len(scores) != len(pairs):
        raise ValueError("one score per pair required")
    val, test = split(pairs, validation_fraction, seed)
    val_ids = {p.pair_id for p in val}
    score_of = {p.pair_id: s for p, s in zip(pairs, scores)}
    threshold = None
    if kind == CONTINUOUS:
        if not val or not test:
            raise ValueError("continuous scorers need non-empty validation and test splits")
        vs = [(score_of[p.pair_id], p.label) for p in val if score_of[p.pair_id] is not None]
        threshold = select_threshold([s for s, _ in vs], [y for _, y in vs])

    def predict(s):
        if s is None:
            return None
        return int(s >= threshold) if kind == CONTINUOUS else int(s)

    details = []
    for p, s in zip(pairs, scores):
        details.append({
            "pair_id": p.pair_id, "method": method, "split": "validation" if p.pair_id in val_ids else "test",
            "dataset": p.dataset_name, "perturbation_kind": p.stratum.value if p.stratum else "",
            "label": p.label, "score": s, "prediction": predict(s),
        })

    groups: dict[tuple[str, str], list[StatementPair]] = defaultdict(list)
    for p in test:
        kind_name = p.stratum.value if p.stratum else "-"
        for key in ((p.dataset_name, kind_name), (p.dataset_name, ALL), (ALL, kind_name), (ALL, ALL)):
            groups[key].append(p)
    datasets = {p.dataset_name for p in pairs}
    rows = []
    for (ds, kd), group in sorted(groups.items(), key=lambda kv: (kv[0][0] == ALL, kv[0])):
        if ds == ALL and len(datasets) == 1:
            continue  # identical to the single dataset's rows
        preds, labels, invalid = [], [], 0
        for p in group:
            y_hat = predict(score_of[p.pair_id])
            if y_hat is None:
                invalid += 1
            else:
                preds.append(y_hat)
                labels.append(p.label)
        if not labels:
            log.warning("%s: stratum (%s, %s) has no valid test pairs; omitted", method, ds, kd)
            continue
        rows.append(_row(method, ds, kd, preds, labels, invalid, threshold, alpha))
    return rows, details


def evaluate_method(pairs: Sequence[StatementPair], scorer: Scorer, validation_fraction: float = 0.5,
                    seed: int = 0, alpha: float = 0.05, max_workers: int = 1) -> list[EvalRow]:
    """Calibrate on the validation split (continuous scorers only) and report on the test split."""
    scores = score_pairs(pairs, scorer, max_workers)
    rows, _ = evaluate_scores(pairs, scores, scorer.name, scorer.kind, validation_fraction, seed, alpha)
    return rows


def stratified_report(rows: Sequence[EvalRow], by: str = "kind") -> str:
    """Plain-text table of "F1 ± half-width" cells, methods by perturbation kind (or by dataset)."""
    if not rows:
        raise ValueError("no rows to report")
    if by not in ("kind", "dataset"):
        raise ValueError("by must be 'kind' or 'dataset'")
    datasets = {r.dataset for r in rows if r.dataset != ALL}
    pooled = ALL if len(datasets) > 1 else next(iter(datasets))
    if by == "kind":
        sel = [r for r in rows if r.dataset == pooled and r.perturbation_kind != ALL]
        col = lambda r: r.perturbation_kind  # noqa: E731
    else:
        sel = [r for r in rows if r.perturbation_kind == ALL and r.dataset != ALL]
        col = lambda r: r.dataset  # noqa: E731
    methods = list(dict.fromkeys(r.method for r in rows))
    columns = sorted({col(r) for r in sel})
    cells = {(r.method, col(r)): f"{r.f1:.3f} ± {r.half_width:.3f}" for r in sel}
    header = ["method"] + columns
    body = [[m] + [cells.get((m, c), "") for c in columns] for m in methods]
    widths = [max(len(str(x)) for x in colvals) for colvals in zip(header, *body)]
    fmt = lambda vals: " | ".join(str(v).ljust(w) for v, w in zip(vals, widths)).rstrip()  # noqa: E731
    lines = [fmt(header), "-+-".join("-" * w for w in widths)] + [fmt(b) for b in body]
    return "\n".join(lines) + "\n"


def write_rows(rows: Sequence[EvalRow], out_dir) -> None:
    """rows.jsonl, rows.csv and the two rendered tables."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dicts = [r.to_dict() for r in rows]
    with open(out_dir / "rows.jsonl", "w", encoding="utf-8", newline="\n") as f:
        for d in dicts:
            f.write(json.dumps(d, ensure_ascii=False) + "\n")
    with open(out_dir / "rows.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(dicts[0]))
        w.writeheader()
        w.writerows(dicts)
    (out_dir / "table_by_kind.txt").write_text(stratified_report(rows, "kind"), encoding="utf-8")
    (out_dir / "table_by_dataset.txt").write_text(stratified_report(rows, "dataset"), encoding="utf-8")


def read_rows(path) -> list[EvalRow]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                d = json.loads(line)
                if isinstance(d.get("threshold"), str):
                    d["threshold"] = float(d["threshold"])
                out.append(EvalRow(**d))
    return out


def write_pair_scores(details: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for d in details:
            f.write(json.dumps(d, ensure_ascii=False) + "\n")
