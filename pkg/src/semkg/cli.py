"""Command-line entry point: ``semkg <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InputError, SemkgError

log = logging.getLogger("semkg")


def _subgraph_files(d) -> list[Path]:
    d = Path(d)
    if not d.is_dir():
        raise InputError("not a directory", path=d)
    return sorted(p for p in d.glob("*.jsonl") if not p.name.endswith(".records.jsonl"))


def _write_json(obj, path=None) -> None:
    text = json.dumps(obj, indent=2, ensure_ascii=False)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _table(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(dict.fromkeys(k for r in rows for k in r))

    def fmt(v):
        return f"{v:.2f}" if isinstance(v, float) else str(v)

    body = [[fmt(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(cols)]
    line = lambda vals: "  ".join(v.ljust(w) for v, w in zip(vals, widths)).rstrip()  # noqa: E731
    return "\n".join([line(cols), line(["-" * w for w in widths])] + [line(b) for b in body])


# subcommands

def cmd_sample(args) -> int:
    from .kg import load_kg, write_subgraph
    from .sampler import SamplerConfig, densify, sample_subgraph

    kg = load_kg(args.kg)
    try:
        cfg = SamplerConfig(args.min_budget, args.max_budget, args.type_decay, args.seed)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = cfg.rng()
    for i in range(args.count):
        sid = f"sub-{i:04d}"
        sub = sample_subgraph(kg, cfg, rng, id=sid)
        if args.densify:
            sub = densify(sub, kg)
        write_subgraph(sub, out / f"{sid}.jsonl")
    print(f"wrote {args.count} subgraph(s) to {out}")
    return 0


def cmd_perturb(args) -> int:
    from .errors import PerturbationError
    from .kg import bundled_edge_map, load_edge_map, load_kg, read_subgraph, write_subgraph
    from .perturb import PerturbationKind, perturb

    kg = load_kg(args.kg)
    kind = PerturbationKind.parse(args.kind)
    emap = None
    if args.edge_map:
        emap = load_edge_map(args.edge_map, kg)
    elif kind is PerturbationKind.EDGE_REPLACEMENT:
        try:
            emap = bundled_edge_map(args.dataset)
        except KeyError as e:
            raise ConfigError(f"{e.args[0]}; pass --edge-map") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ok = failed = 0
    for j, path in enumerate(_subgraph_files(args.subgraphs)):
        sub = read_subgraph(path, kg.graph_id)
        try:
            new, records = perturb(sub, kg, kind, emap, np.random.default_rng([args.seed, j]))
        except PerturbationError as e:
            log.warning("%s: %s", path.name, e)
            failed += 1
            continue
        write_subgraph(new, out / path.name)
        with open(out / f"{path.stem}.records.jsonl", "w", encoding="utf-8") as f:
            for r in records:
                f.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
        ok += 1
    print(f"perturbed {ok} subgraph(s), {failed} infeasible")
    return 0 if ok else 4


def _backend(args):
    from .llm import make_chat_backend

    return make_chat_backend(args.backend, args.model, args.cache_dir)


def _families(args):
    from .dataset import SubgraphFamily
    from .kg import read_subgraph
    from .perturb import PerturbationKind, PerturbationRecord

    fams = []
    pert_dir = Path(args.perturbed) if args.perturbed else None
    for path in _subgraph_files(args.subgraphs):
        orig = read_subgraph(path, args.dataset)
        pert, records = orig, []
        if pert_dir is not None:
            pp = pert_dir / path.name
            if not pp.exists():
                continue
            pert = read_subgraph(pp, args.dataset)
            rp = pert_dir / f"{path.stem}.records.jsonl"
            if rp.exists():
                records = [PerturbationRecord.from_dict(json.loads(line))
                           for line in rp.read_text(encoding="utf-8").splitlines() if line.strip()]
        kind = records[0].kind if records else PerturbationKind.parse(args.kind or "node-removal")
        fams.append(SubgraphFamily(path.stem, args.dataset, kind, orig, pert, records))
    return fams


def cmd_generate(args) -> int:
    from .dataset import write_statements
    from .pipeline import family_statements

    if not args.perturbed:
        raise ConfigError("generate needs --perturbed to produce the perturbed statement of each family")
    backend = _backend(args)
    statements, dropped = [], 0
    for fam in _families(args):
        got = family_statements(backend, fam, args.originals, args.retries, prompt_set=args.prompt_set)
        if got is None:
            dropped += 1
        else:
            statements.extend(got)
    write_statements(statements, args.out)
    print(f"wrote {len(statements)} statement(s); {dropped} subgraph(s) dropped")
    return 0 if statements else 6


def cmd_validate(args) -> int:
    from .dataset import ORIGINAL, read_statements
    from .kg import load_kg
    from .validate import validate_statement, vocabularies

    fams = {f.id: f for f in _families(args)}
    if args.kg:
        kg = load_kg(args.kg)
        types = sorted(t or "entity" for t in kg.entity_type_vocab)
        relations = sorted(kg.relation_vocab)
    else:
        types, relations = vocabularies([s for f in fams.values() for s in (f.original, f.perturbed)])
    backend = _backend(args)
    passed = total = 0
    with open(args.out, "w", encoding="utf-8", newline="\n") as out:
        for s in read_statements(args.statements):
            fam = fams.get(s.subgraph_id)
            if fam is None:
                raise InputError(f"statement {s.id}: no subgraph {s.subgraph_id!r}")
            ref = fam.original if s.role == ORIGINAL else fam.perturbed
            o = validate_statement(backend, s.text, ref, types, relations, args.prompt_set or args.dataset, s.id,
                                   parse_attempts=args.parse_attempts)
            out.write(json.dumps(o.to_dict(), ensure_ascii=False) + "\n")
            passed += o.passed
            total += 1
    print(f"{passed}/{total} statement(s) reconstructed")
    return 0


def cmd_assemble(args) -> int:
    import dataclasses

    from .dataset import assemble_pairs, group_statements, read_statements, write_pairs

    passed = {}
    with open(args.outcomes, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if line.strip():
                try:
                    d = json.loads(line)
                    passed[d["statement_id"]] = bool(d["passed"])
                except (json.JSONDecodeError, KeyError) as e:
                    raise InputError(f"bad outcome record ({e})", line=lineno, path=args.outcomes) from None
    statements = [dataclasses.replace(s, validated=passed.get(s.id, False))
                  for s in read_statements(args.statements)]
    pairs = assemble_pairs(group_statements(statements), np.random.default_rng(args.seed))
    write_pairs(pairs, args.out)
    print(f"wrote {len(pairs)} pair(s)")
    return 0 if pairs else 6


def cmd_split(args) -> int:
    from .dataset import read_pairs, split, write_pairs

    val, test = split(read_pairs(args.pairs), args.fraction, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pairs(val, out / "validation.jsonl")
    write_pairs(test, out / "test.jsonl")
    print(f"validation {len(val)}, test {len(test)}")
    return 0


def cmd_evaluate(args) -> int:
    from .dataset import read_pairs
    from .evaluate import evaluate_scores, make_scorer, score_pairs, stratified_report, write_pair_scores, write_rows

    pairs = read_pairs(args.pairs)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    chat = _backend(args) if any(m.startswith("judge") for m in methods) else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, details = [], []
    for m in methods:
        scorer = make_scorer(m, chat, args.embedding_cache)
        scores = score_pairs(pairs, scorer, args.workers)
        r, d = evaluate_scores(pairs, scores, scorer.name, scorer.kind, args.fraction, args.seed, args.alpha)
        rows.extend(r)
        details.extend(d)
    write_rows(rows, out)
    write_pair_scores(details, out / "pair_scores.jsonl")
    print(stratified_report(rows), end="")
    return 0


def cmd_report(args) -> int:
    from .evaluate import read_rows, stratified_report

    print(stratified_report(read_rows(args.rows), args.by), end="")
    return 0


def cmd_stats(args) -> int:
    from .dataset import pair_stats, read_pairs

    if args.pairs:
        rows = pair_stats(read_pairs(args.pairs))
    else:
        from .dataset import corpus_stats
        from .pipeline import Run, RunConfig

        run = Run(RunConfig.from_file(Path(args.run) / "config.json"))
        rows = corpus_stats([s for s in run.validated_statements() if s.validated], run.families())
    print(json.dumps(rows, indent=2) if args.json else _table(rows))
    return 0


def cmd_readability(args) -> int:
    from .readability import readability

    text = Path(args.file).read_text(encoding="utf-8") if args.file else sys.stdin.read()
    _write_json(readability(text))
    return 0


def cmd_import(args) -> int:
    from .dataset import import_pairs, write_pairs

    cmap = json.loads(args.columns) if args.columns else {}
    kmap = json.loads(args.kinds) if args.kinds else {}
    pairs = import_pairs(args.input, cmap, kmap)
    write_pairs(pairs, args.out)
    print(f"imported {len(pairs)} pair(s)")
    return 0


def cmd_run(args) -> int:
    from .pipeline import RunConfig, run_pipeline

    overrides = {"out_dir": args.out, "seed": args.seed, "backend": args.backend,
                 "samples_per_kind": args.samples_per_kind, "max_workers": args.workers}
    cfg = RunConfig.from_file(args.config, **overrides)
    manifest = run_pipeline(cfg)
    _write_json(manifest.to_dict())
    return 0


def _add_backend(p) -> None:
    p.add_argument("--backend", choices=["api", "template", "replay"], default="template")
    p.add_argument("--model", default=None, help="model id passed to the API backend")
    p.add_argument("--cache-dir", default=None, help="replay cache directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semkg", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--print-stopwords", action="store_true", help="print the normalization stopword list")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("sample", help="sample BFS subgraphs from a graph")
    p.add_argument("--kg", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-budget", type=int, default=5)
    p.add_argument("--max-budget", type=int, default=20)
    p.add_argument("--type-decay", type=float, default=0.5)
    p.add_argument("--densify", action="store_true", help="add all graph triples among sampled nodes")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("perturb", help="perturb sampled subgraphs")
    p.add_argument("--subgraphs", required=True)
    p.add_argument("--kg", required=True)
    p.add_argument("--kind", required=True,
                   choices=["node-removal", "node-replacement", "edge-removal", "edge-replacement"])
    p.add_argument("--edge-map", default=None)
    p.add_argument("--dataset", default="codex", help="bundled edge map to use without --edge-map")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_perturb)

    for name, func, helptext in (("generate", cmd_generate, "verbalize subgraph families"),
                                 ("validate", cmd_validate, "reconstruction-validate statements")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--subgraphs", required=True)
        p.add_argument("--perturbed", default=None)
        p.add_argument("--kind", default=None, help="kind for families without a record log")
        p.add_argument("--dataset", default="codex")
        p.add_argument("--prompt-set", default=None, help="template set if it differs from --dataset")
        _add_backend(p)
        if name == "generate":
            p.add_argument("--originals", type=int, default=2)
            p.add_argument("--retries", type=int, default=5)
        else:
            p.add_argument("--statements", required=True)
            p.add_argument("--kg", default=None, help="take type/relation vocabularies from this graph")
            p.add_argument("--parse-attempts", type=int, default=3)
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("assemble", help="build labelled pairs from validated statements")
    p.add_argument("--statements", required=True)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("split", help="stratified validation/test split")
    p.add_argument("--pairs", required=True)
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("evaluate", help="score pairs and report F1 with exact intervals")
    p.add_argument("--pairs", required=True)
    p.add_argument("--methods", default="rouge1,rouge2,rougeL,bleu")
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--embedding-cache", default=None)
    _add_backend(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render a stored evaluation")
    p.add_argument("--rows", required=True, help="rows.jsonl written by evaluate")
    p.add_argument("--by", choices=["kind", "dataset"], default="kind")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("stats", help="corpus statistics")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--pairs")
    g.add_argument("--run", help="run directory")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("readability", help="readability scores of a text file (stdin if omitted)")
    p.add_argument("file", nargs="?")
    p.set_defaults(func=cmd_readability)

    p = sub.add_parser("import", help="convert an external pair table through a column mapping")
    p.add_argument("--input", required=True)
    p.add_argument("--columns", default=None, help='JSON object, e.g. {"sentence1": "statement_1"}')
    p.add_argument("--kinds", default=None, help="JSON object mapping external perturbation names")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("run", help="run the whole pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--backend", choices=["api", "template", "replay"], default=None)
    p.add_argument("--samples-per-kind", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_stopwords:
        from .stopwords import STOPWORDS

        print("\n".join(sorted(STOPWORDS)))
        return 0
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except SemkgError as e:
        print(f"semkg: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print(f"semkg: InputError: {e}", file=sys.stderr)
        return InputError.exit_code
    except ValueError as e:
        print(f"semkg: ValueError: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
