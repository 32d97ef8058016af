#!/usr/bin/env python3
"""Score a downloaded copy of a published pair table with the lexical metrics.

The released files use their own column names, so pass a JSON column map,
e.g. --columns '{"sentence1": "statement_1", "sentence2": "statement_2"}'.
F1 is averaged over several split seeds because the original split is not
available.
"""
import argparse
import json
from collections import defaultdict

import numpy as np

from semkg.dataset import import_pairs
from semkg.evaluate import evaluate_method, make_scorer


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("pairs", help="csv, tsv, json or jsonl file")
    ap.add_argument("--columns", default="{}", help="JSON map from file columns to pair fields")
    ap.add_argument("--kinds", default="{}", help="JSON map from file perturbation names to kinds")
    ap.add_argument("--methods", default="rouge1,rouge2,rougeL,bleu")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--fraction", type=float, default=0.5, help="validation share of each stratum")
    args = ap.parse_args()

    pairs = import_pairs(args.pairs, json.loads(args.columns), json.loads(args.kinds))
    print(f"{len(pairs)} pairs, {sum(p.label for p in pairs)} positive")
    for method in args.methods.split(","):
        scorer = make_scorer(method)
        f1 = defaultdict(list)
        for seed in range(args.seeds):
            for r in evaluate_method(pairs, scorer, args.fraction, seed=seed):
                f1[(r.dataset, r.perturbation_kind)].append(r.f1)
        for (ds, kind), vals in sorted(f1.items()):
            print(f"{method:8s} {ds:10s} {kind:18s} F1 {np.mean(vals):.3f} (sd {np.std(vals):.3f}, {len(vals)} seeds)")


if __name__ == "__main__":
    main()
