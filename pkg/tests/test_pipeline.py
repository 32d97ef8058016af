import json
from collections import Counter

import pytest

from semkg.dataset import read_pairs
from semkg.errors import ConfigError, PipelineError
from semkg.pipeline import STAGES, RunConfig, run_pipeline


def toy_config(toy_files, out, **kw):
    return RunConfig(kg_path=str(toy_files / "kg.jsonl"), out_dir=str(out), dataset_id="toy", prompt_set="codex",
                     edge_map_path=str(toy_files / "edge_map.json"), **kw)


@pytest.fixture(scope="module")
def toy_run(toy_files, tmp_path_factory):
    cfg = toy_config(toy_files, tmp_path_factory.mktemp("run"))
    return cfg, run_pipeline(cfg)


def test_counts(toy_run):
    cfg, m = toy_run
    assert all(m.stages[s] for s in STAGES)
    assert m.counts["sample"] == 40
    statements = [json.loads(l) for l in open(f"{cfg.out_dir}/statements/statements.jsonl")]
    outcomes = {json.loads(l)["statement_id"]: json.loads(l)["passed"] for l in open(f"{cfg.out_dir}/outcomes/outcomes.jsonl")}
    originals = [s for s in statements if s["role"] == "original" and outcomes[s["id"]]]
    assert len(originals) >= 80
    pairs = read_pairs(f"{cfg.out_dir}/pairs/pairs.jsonl")
    assert len(pairs) == 80
    assert sum(p.label for p in pairs) == 40


def test_one_pair_per_label_per_subgraph(toy_run):
    cfg, _ = toy_run
    pairs = read_pairs(f"{cfg.out_dir}/pairs/pairs.jsonl")
    by_sub = Counter((p.subgraph_id, p.label) for p in pairs)
    assert set(by_sub.values()) == {1}
    subs = {p.subgraph_id for p in pairs}
    assert all((s, 0) in by_sub and (s, 1) in by_sub for s in subs)


def test_negatives_carry_kind(toy_run):
    cfg, _ = toy_run
    for line in open(f"{cfg.out_dir}/pairs/pairs.jsonl"):
        d = json.loads(line)
        assert ("perturbation_type" in d) == (d["label"] == 0)


def test_rerun_skips(toy_run, caplog):
    cfg, m = toy_run
    before = (open(f"{cfg.out_dir}/manifest.json").read(), open(f"{cfg.out_dir}/pairs/pairs.jsonl", "rb").read())
    caplog.set_level("INFO")
    m2 = run_pipeline(cfg)
    assert m2.to_dict() == m.to_dict()
    assert caplog.text.count("already complete") == len(STAGES)
    assert (open(f"{cfg.out_dir}/manifest.json").read(), open(f"{cfg.out_dir}/pairs/pairs.jsonl", "rb").read()) == before


def test_byte_identical_fresh_directory(toy_run, toy_files, tmp_path):
    cfg, _ = toy_run
    run_pipeline(toy_config(toy_files, tmp_path, max_workers=3))
    assert (tmp_path / "pairs/pairs.jsonl").read_bytes() == open(f"{cfg.out_dir}/pairs/pairs.jsonl", "rb").read()


def test_seed_changes_output(toy_run, toy_files, tmp_path):
    cfg, _ = toy_run
    run_pipeline(toy_config(toy_files, tmp_path, seed=1))
    assert (tmp_path / "pairs/pairs.jsonl").read_bytes() != open(f"{cfg.out_dir}/pairs/pairs.jsonl", "rb").read()


def test_hash_mismatch(toy_run, toy_files):
    cfg, _ = toy_run
    with pytest.raises(PipelineError, match="different configuration"):
        run_pipeline(toy_config(toy_files, cfg.out_dir, seed=9))


def test_hash_ignores_runtime_knobs(toy_files):
    a = toy_config(toy_files, "/x")
    b = toy_config(toy_files, "/y", max_workers=4)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != toy_config(toy_files, "/x", samples_per_kind=3).config_hash()


def test_config_errors(toy_files, tmp_path):
    with pytest.raises(ConfigError):
        toy_config(toy_files, tmp_path, originals_per_subgraph=1)
    with pytest.raises(ConfigError):
        RunConfig(kg_path="k", out_dir="o", dataset_id="nowhere")
    with pytest.raises(ConfigError, match="bogus"):
        RunConfig.from_dict({"kg_path": "k", "out_dir": "o", "bogus": 1})
    with pytest.raises(ConfigError):
        toy_config(toy_files, tmp_path, kinds=())


def test_config_file_roundtrip(toy_files, tmp_path):
    cfg = toy_config(toy_files, tmp_path, samples_per_kind=3)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert RunConfig.from_file(p) == cfg
    assert RunConfig.from_file(p, seed=4).seed == 4


def test_subset_of_kinds(toy_files, tmp_path):
    m = run_pipeline(toy_config(toy_files, tmp_path, kinds=("node-removal",), samples_per_kind=4))
    pairs = read_pairs(tmp_path / "pairs/pairs.jsonl")
    assert m.counts["sample"] == 4
    assert {p.stratum.value for p in pairs} == {"node-removal"}
