"""Token-overlap metrics (ROUGE-N, ROUGE-L, BLEU), cosine similarity and P/R/F1."""

from __future__ import annotations

import math
import string
from collections import Counter
from typing import Sequence

import numpy as np

_PUNCT = string.punctuation + "“”‘’«»—–…"


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip leading/trailing punctuation, drop empties."""
    out = []
    for tok in text.lower().split():
        tok = tok.strip(_PUNCT)
        if tok:
            out.append(tok)
    return out


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _f1(overlap: float, n_cand: int, n_ref: int) -> float:
    if not n_cand or not n_ref or not overlap:
        return 0.0
    p, r = overlap / n_cand, overlap / n_ref
    return 2 * p * r / (p + r)


def rouge_n(candidate: str, reference: str, n: int = 1) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    c, r = ngrams(tokenize(candidate), n), ngrams(tokenize(reference), n)
    overlap = sum((c & r).values())
    return _f1(overlap, sum(c.values()), sum(r.values()))


def lcs_length(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> float:
    c, r = tokenize(candidate), tokenize(reference)
    return _f1(lcs_length(c, r), len(c), len(r))


def bleu(candidate: str, reference: str, max_n: int = 4) -> float:
    """Sentence BLEU with clipped precisions and add-one smoothing for zero higher-order matches."""
    c, r = tokenize(candidate), tokenize(reference)
    if not c or not r:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cn, rn = ngrams(c, n), ngrams(r, n)
        matched, total = sum((cn & rn).values()), sum(cn.values())
        if n == 1 and matched == 0:
            return 0.0
        if n > 1 and matched == 0:
            matched, total = matched + 1, total + 1
        log_sum += math.log(matched / total)
    bp = 1.0 if len(c) >= len(r) else math.exp(1 - len(r) / len(c))
    return bp * math.exp(log_sum / max_n)


def cosine(u, v) -> float:
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine is undefined for a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def confusion(predictions: Sequence[int], labels: Sequence[int]) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) with positive class 1."""
    if len(predictions) != len(labels):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(labels)} labels")
    tp = fp = fn = tn = 0
    for p, y in zip(predictions, labels):
        if p and y:
            tp += 1
        elif p:
            fp += 1
        elif y:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def f1_from_pr(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def prf_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return p, r, f1_from_pr(p, r)


def precision_recall_f1(predictions: Sequence[int], labels: Sequence[int]) -> tuple[float, float, float]:
    if not len(labels):
        raise ValueError("empty input")
    tp, fp, fn, _ = confusion(predictions, labels)
    return prf_from_counts(tp, fp, fn)
