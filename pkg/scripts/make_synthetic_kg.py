#!/usr/bin/env python3
"""Write a synthetic typed KG and a matching edge-replacement map to disk."""
import argparse
from pathlib import Path

from semkg.kg import write_triples
from semkg.synthetic import SyntheticSpec, synthetic_edge_map, synthetic_kg


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=500)
    ap.add_argument("--extra-edges", type=float, default=0.6, help="extra edges per node on top of the tree")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, required=True, help="output directory")
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    kg = synthetic_kg(SyntheticSpec(n_nodes=args.nodes, extra_edge_ratio=args.extra_edges, seed=args.seed))
    write_triples(kg.triples, args.out / "kg.jsonl")
    (args.out / "edge_map.json").write_text(synthetic_edge_map().to_json())
    print(f"{len(kg.nodes)} nodes, {len(kg.triples)} triples -> {args.out}")


if __name__ == "__main__":
    main()
