"""One PASS/FAIL line per acceptance criterion, printed in the terminal summary."""
import json
import math
import os
import random
import string
import time

import numpy as np
import pytest
from scipy import special

from oracles import exhaustive_best, f1_at, oracle_lcs, oracle_rouge_l, oracle_rouge_n
from semkg.errors import PerturbationError
from semkg.kg import is_connected
from semkg.metrics import lcs_length, prf_from_counts, rouge_l, rouge_n
from semkg.perturb import PerturbationKind, is_feasible, perturb
from semkg.readability import readability
from semkg.sampler import SamplerConfig, densify, sample_subgraph
from semkg.stats import clopper_pearson, f1_confidence_interval
from semkg.template import TemplateBackend, template_generate
from semkg.validate import normalize_entity, validate_statement

KINDS = list(PerturbationKind)


def invariant_violations(orig, pert, records, kind, emap):
    out = []
    touched = {x for t in pert.triples for x in (t.source, t.target)}
    if set(pert.nodes) != touched:
        out.append("isolated node")
    if not is_connected(pert.nodes, pert.triples):
        out.append("not weakly connected")
    upper = max(1, math.floor(0.7 * len(orig.nodes)))
    if not 1 <= len(records) <= upper:
        out.append(f"count {len(records)} outside [1, {upper}]")
    for r in records:
        if kind is PerturbationKind.NODE_REPLACEMENT:
            old, new = r.replaced_node
            if old.type_label != new.type_label:
                out.append("type changed")
        if kind is PerturbationKind.EDGE_REPLACEMENT:
            _, old, new = r.replaced_relation
            if new not in emap.lookup(old):
                out.append("relation not from edge map")
    return out


def test_c1_perturbation_invariants(big_kg, emap, criterion):
    cfg = SamplerConfig()
    start = time.perf_counter()
    n_subgraphs, n_perturbed, violations = 0, 0, []
    for i in range(1000):
        rng = np.random.default_rng([11, i])
        sub = densify(sample_subgraph(big_kg, cfg, rng), big_kg)
        n_subgraphs += 1
        for kind in KINDS:
            if not is_feasible(kind, sub, big_kg, emap):
                continue
            try:
                pert, records = perturb(sub, big_kg, kind, emap, rng)
            except PerturbationError:
                continue
            n_perturbed += 1
            violations += invariant_violations(sub, pert, records, kind, emap)
    elapsed = time.perf_counter() - start
    ok = not violations and elapsed < 10 and n_subgraphs >= 1000
    criterion(1, ok, f"{n_subgraphs} subgraphs, {n_perturbed} perturbations, "
                     f"{len(violations)} violations, {elapsed:.2f}s (< 10s)")
    assert not violations, violations[:5]
    assert elapsed < 10


def test_c2_template_round_trip(big_kg, emap, criterion):
    backend = TemplateBackend()
    types, rels = big_kg.entity_type_vocab, big_kg.relation_vocab
    start = time.perf_counter()
    n, orig_pass, pert_fail = 0, 0, 0
    for i in range(500):
        rng = np.random.default_rng([22, i])
        sub = densify(sample_subgraph(big_kg, SamplerConfig(), rng), big_kg)
        kind = KINDS[i % 4]
        if not is_feasible(kind, sub, big_kg, emap):
            kind = next(k for k in KINDS if is_feasible(k, sub, big_kg, emap))
        pert, _ = perturb(sub, big_kg, kind, emap, rng)
        n += 1
        o = validate_statement(backend, template_generate(sub.triples, i), sub, types, rels)
        p = validate_statement(backend, template_generate(pert.triples, i), sub, types, rels)
        orig_pass += o.passed
        pert_fail += not p.passed
    elapsed = time.perf_counter() - start
    ok = orig_pass == n and pert_fail == n and elapsed < 30
    criterion(2, ok, f"{n} subgraphs, originals pass {orig_pass}/{n}, perturbed fail {pert_fail}/{n}, "
                     f"{elapsed:.2f}s (< 30s)")
    assert ok


def test_c3_normalization(criterion):
    rnd = random.Random(3)
    pieces = ["the", "The", "of", "A", "Leaves", "drugs", "headaches", "-", "  ", "\t", "United", "Kingdom",
              "studies", "boxes", "é", "ß"] + list(string.ascii_letters + string.punctuation + string.digits)
    bad = []
    for _ in range(10_000):
        s = "".join(rnd.choice(pieces) + rnd.choice(["", " "]) for _ in range(rnd.randint(0, 12)))
        once = normalize_entity(s)
        if normalize_entity(once) != once:
            bad.append(s)
    equal = normalize_entity("The United Kingdom") == normalize_entity("United Kingdom")
    criterion(3, equal and not bad, f"example equal={equal}, idempotence failures {len(bad)}/10000")
    assert equal and not bad, bad[:5]


def test_c4_metric_oracles(criterion):
    rng = np.random.default_rng(4)
    words = ["the", "cat", "sat", "on", "mat", "dog", "a", "lay", "big"]
    worst = 0.0
    for _ in range(200):
        a = list(rng.choice(words, size=rng.integers(1, 11)))
        b = list(rng.choice(words, size=rng.integers(1, 11)))
        ca, cb = " ".join(a), " ".join(b)
        worst = max(worst,
                    abs(rouge_n(ca, cb, 1) - oracle_rouge_n(a, b, 1)),
                    abs(rouge_n(ca, cb, 2) - oracle_rouge_n(a, b, 2)),
                    abs(rouge_l(ca, cb) - oracle_rouge_l(a, b)),
                    abs(lcs_length(a, b) - oracle_lcs(a, b)))
    c, r = "the cat sat on the mat", "the cat lay on the mat"
    r1, rl = rouge_n(c, r, 1), rouge_l(c, r)
    worked = abs(r1 - 5 / 6) <= 1e-9 and abs(rl - 5 / 6) <= 1e-9
    ok = worst <= 1e-9 and worked
    criterion(4, ok, f"max oracle deviation {worst:.1e} over 200 pairs, worked example R1={r1:.9f} RL={rl:.9f}")
    assert ok


def test_c5_clopper_pearson(criterion):
    closed = clopper_pearson(0, 10, 0.05) == (0.0, 1 - 0.025 ** 0.1) \
        and clopper_pearson(10, 10, 0.05) == (0.025 ** 0.1, 1.0)
    lo, hi = clopper_pearson(5, 10, 0.05)
    dev = max(abs(lo - special.betaincinv(5, 6, 0.025)), abs(hi - special.betaincinv(6, 5, 0.975)))
    rng = np.random.default_rng(5)
    draws, misses = 0, 0
    while draws < 1000:
        tp, fp, fn = (int(x) for x in rng.integers(0, 40, size=3))
        if tp + fp < 1 or tp + fn < 1:
            continue
        draws += 1
        f1 = prf_from_counts(tp, fp, fn)[2]
        lo_f, hi_f = f1_confidence_interval(tp, fp, fn)
        misses += not (lo_f - 1e-12 <= f1 <= hi_f + 1e-12)
    ok = closed and dev <= 1e-6 and misses == 0
    criterion(5, ok, f"closed forms exact={closed}, k=5 n=10 deviation {dev:.1e}, "
                     f"F1 outside interval {misses}/{draws}")
    assert ok


def test_c6_threshold(criterion):
    from semkg.evaluate import select_threshold
    rng = np.random.default_rng(6)
    done, wrong = 0, 0
    while done < 100:
        n = int(rng.integers(1, 51))
        labels = [int(x) for x in rng.integers(0, 2, size=n)]
        if not any(labels):
            continue
        # coarse grid forces ties on some instances
        scores = list(rng.random(n)) if done % 2 else [round(float(x), 1) for x in rng.random(n)]
        done += 1
        t = select_threshold(scores, labels)
        wrong += abs(f1_at(scores, labels, t) - exhaustive_best(scores, labels)) > 1e-12
    criterion(6, wrong == 0, f"{done - wrong}/{done} instances match the exhaustive optimum")
    assert wrong == 0


def test_c7_dataset_construction(toy_files, tmp_path, criterion):
    from semkg.dataset import read_pairs
    from semkg.pipeline import RunConfig, run_pipeline

    def cfg(out):
        return RunConfig(kg_path=str(toy_files / "kg.jsonl"), out_dir=str(out), dataset_id="toy",
                         prompt_set="codex", edge_map_path=str(toy_files / "edge_map.json"))

    run_pipeline(cfg(tmp_path / "a"))
    run_pipeline(cfg(tmp_path / "b"))
    a = (tmp_path / "a/pairs/pairs.jsonl").read_bytes()
    b = (tmp_path / "b/pairs/pairs.jsonl").read_bytes()
    pairs = read_pairs(tmp_path / "a/pairs/pairs.jsonl")
    share = sum(p.label for p in pairs) / len(pairs)
    per_sub = {}
    for p in pairs:
        per_sub.setdefault(p.subgraph_id, []).append(p.label)
    one_each = all(sorted(v) == [0, 1] for v in per_sub.values())
    ok = share == 0.5 and one_each and a == b
    criterion(7, ok, f"{len(pairs)} pairs, positive share {share:.3f}, one of each label per subgraph={one_each}, "
                     f"byte-identical rerun={a == b}")
    assert ok


def test_c8_readability(criterion):
    from test_readability import HAND
    worst = max(abs(readability(text)[k] - v) for text, vals in HAND.items() for k, v in vals.items())
    criterion(8, worst <= 0.1, f"max deviation from hand values {worst:.4f} (<= 0.1)")
    assert worst <= 0.1


def test_c9_published_replication(criterion):
    path = os.environ.get("SEMKG_PUBLISHED_PAIRS")
    if not path:
        criterion(9, None, "non-gating; set SEMKG_PUBLISHED_PAIRS to the downloaded pair table")
        pytest.skip("published dataset not available")
    from semkg.dataset import import_pairs
    from semkg.evaluate import evaluate_method, make_scorer
    columns = json.loads(os.environ.get("SEMKG_PUBLISHED_COLUMNS", "{}"))
    pairs = [p for p in import_pairs(path, columns) if p.dataset_name.lower() == "codex"]
    scorer = make_scorer("rouge1")
    f1s = []
    for seed in range(5):
        rows = evaluate_method(pairs, scorer, 0.5, seed=seed)
        f1s.append(next(r.f1 for r in rows if r.perturbation_kind == "node-removal"))
    mean = float(np.mean(f1s))
    ok = abs(mean - 0.935) <= 0.05
    criterion(9, ok, f"ROUGE-1 F1 on codex node-removal {mean:.3f} over 5 seeds (target 0.935 +/- 0.05, non-gating)")
    if not ok:
        pytest.xfail("published-dataset replication is a soft check")
