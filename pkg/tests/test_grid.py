from __future__ import annotations

import json
from pathlib import Path

import pytest

from presearch.adaptation import RuleBasedReformulator, adapt_marco, save_samples
from presearch.corpus import save_collection
from presearch.grid import (
    RQ1_PAIRS,
    RQ2_PAIRS,
    compare_cells,
    config_hash,
    grid_table,
    load_experiment_config,
    load_manifest,
    rq_comparisons,
    run_grid,
)
from presearch.lexical import build_index
from presearch.synthetic import make_synthetic_collection


@pytest.fixture(scope="module")
def dataset(tmp_path_factory) -> Path:
    """Small adapted dataset + passages on disk for grid runs."""
    root = tmp_path_factory.mktemp("grid-data")
    corpus = make_synthetic_collection(n_passages=80, n_queries=40, seed=5)
    save_collection(corpus, root / "passages.tsv", root / "queries.tsv", root / "qrels.txt")
    result = adapt_marco(corpus, build_index(corpus), RuleBasedReformulator(), seed=5)
    assert len(result.samples) == 40
    save_samples(result.samples, root / "samples.jsonl")
    return root


def write_config(dataset: Path, out_dir: Path, body: str = "") -> Path:
    config_path = out_dir / "exp.toml"
    config_path.write_text(
        f'samples = "{dataset / "samples.jsonl"}"\n'
        f'passages = "{dataset / "passages.tsv"}"\n'
        f'output_dir = "{out_dir / "runs"}"\n'
        "seed = 7\ncutoff = 10\n" + body,
        encoding="utf-8",
    )
    return config_path


RETRIEVAL_2V = """
tasks = ["retrieval"]
variants = ["context_intent", "context"]

[providers.fallback]

[pipelines.lexical]
first = "lexical"
"""


def test_grid_counts_two_variants_one_pipeline(dataset, tmp_path):
    config = load_experiment_config(write_config(dataset, tmp_path, RETRIEVAL_2V))
    manifest = run_grid(config)
    done = [c for c in manifest["cells"] if c["status"] == "done"]
    assert len(done) == 2
    out = tmp_path / "runs"
    run_files = sorted(out.glob("cells/*/run.trec"))
    reports = sorted(out.glob("cells/*/report.json"))
    assert len(run_files) == 2 and len(reports) == 2
    assert (out / "manifest.json").exists()


def test_grid_rerun_is_byte_identical(dataset, tmp_path):
    config_path = write_config(dataset, tmp_path, RETRIEVAL_2V)
    config = load_experiment_config(config_path)
    run_grid(config)
    out = tmp_path / "runs"
    before = {p: p.read_bytes() for p in out.rglob("*") if p.is_file()}
    run_grid(load_experiment_config(config_path))
    after = {p: p.read_bytes() for p in out.rglob("*") if p.is_file()}
    assert before == after


def test_grid_fresh_output_dirs_match(dataset, tmp_path):
    manifests = []
    for name in ("one", "two"):
        subdir = tmp_path / name
        subdir.mkdir()
        config = load_experiment_config(write_config(dataset, subdir, RETRIEVAL_2V))
        run_grid(config)
        manifests.append((subdir / "runs" / "manifest.json").read_bytes())
    assert manifests[0] == manifests[1]


def test_generation_question_cell_marked_skipped(dataset, tmp_path):
    body = """
tasks = ["generation"]
variants = ["question", "context"]

[providers.fallback]
"""
    config = load_experiment_config(write_config(dataset, tmp_path, body))
    manifest = run_grid(config)
    by_variant = {c["variant"]: c for c in manifest["cells"]}
    assert by_variant["question"]["status"] == "skipped"
    assert "retrieval-only" in by_variant["question"]["reason"]
    assert by_variant["context"]["status"] == "done"


def test_grid_resume_regenerates_only_deleted_cell(dataset, tmp_path):
    config_path = write_config(dataset, tmp_path, RETRIEVAL_2V)
    run_grid(load_experiment_config(config_path))
    out = tmp_path / "runs"
    kept = out / "cells" / "retrieval__context__lexical" / "report.json"
    removed_dir = out / "cells" / "retrieval__context_intent__lexical"
    kept_mtime = kept.stat().st_mtime_ns
    for p in sorted(removed_dir.rglob("*"), reverse=True):
        p.unlink()
    removed_dir.rmdir()
    run_grid(load_experiment_config(config_path))
    assert (removed_dir / "report.json").exists()
    assert kept.stat().st_mtime_ns == kept_mtime  # untouched cell not recomputed


def test_manifest_completeness(dataset, tmp_path):
    import hashlib

    config = load_experiment_config(write_config(dataset, tmp_path, RETRIEVAL_2V))
    manifest = run_grid(config)
    out = tmp_path / "runs"
    for cell in manifest["cells"]:
        for meta in cell.get("artifacts", {}).values():
            path = out / meta["path"]
            assert path.exists()
            assert hashlib.sha256(path.read_bytes()).hexdigest() == meta["sha256"]


FULL_GRID = """
tasks = ["generation", "retrieval"]
variants = ["question", "context_intent", "source_intent", "context", "source"]
eval_split = "validation"

[providers.fallback]

[pipelines.lexical]
first = "lexical"
"""


def test_compare_cells_self_is_p_one(dataset, tmp_path):
    config = load_experiment_config(write_config(dataset, tmp_path, FULL_GRID))
    run_grid(config)
    rows = compare_cells(tmp_path / "runs", "retrieval/context/lexical", "retrieval/context/lexical")
    assert rows and all(row.p == pytest.approx(1.0, abs=1e-9) for row in rows)
    with pytest.raises(KeyError):
        compare_cells(tmp_path / "runs", "retrieval/context/lexical", "retrieval/context/nope")


def test_rq_comparisons_emit_exact_pairs(dataset, tmp_path):
    config = load_experiment_config(write_config(dataset, tmp_path, FULL_GRID))
    run_grid(config)
    out = tmp_path / "runs"
    rq1 = rq_comparisons(out, 1)
    rq2 = rq_comparisons(out, 2)
    pairs1 = {(r["task"], r["variant_a"], r["variant_b"]) for r in rq1}
    pairs2 = {(r["task"], r["variant_a"], r["variant_b"]) for r in rq2}
    for task in ("generation", "retrieval"):
        assert (task, "context_intent", "source_intent") in pairs1
        assert (task, "context", "source") in pairs1
        assert (task, "context_intent", "context") in pairs2
        assert (task, "source_intent", "source") in pairs2
    assert {(a.value, b.value) for a, b in RQ1_PAIRS} == {("context_intent", "source_intent"), ("context", "source")}
    assert {(a.value, b.value) for a, b in RQ2_PAIRS} == {("context_intent", "context"), ("source_intent", "source")}
    assert len(pairs1) == 4 and len(pairs2) == 4


def test_grid_table_layout_and_outputs(dataset, tmp_path):
    config = load_experiment_config(write_config(dataset, tmp_path, FULL_GRID))
    run_grid(config)
    out = tmp_path / "runs"
    text = grid_table(out, "retrieval")
    lines = [l for l in text.splitlines() if l and not l.startswith("-")]
    variants_in_order = [line.split()[1] for line in lines[1:]]
    assert variants_in_order == ["question", "context_intent", "source_intent", "context", "source"]
    assert (out / "tables" / "retrieval.txt").exists()
    assert (out / "tables" / "retrieval.tsv").exists()
    figures = list((out / "tables" / "figures").glob("retrieval_*.png"))
    assert figures, "expected rendered figures next to the delimited output"


def test_config_hash_stable_under_output_dir(dataset, tmp_path):
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    a_dir.mkdir(), b_dir.mkdir()
    config_a = load_experiment_config(write_config(dataset, a_dir, RETRIEVAL_2V))
    config_b = load_experiment_config(write_config(dataset, b_dir, RETRIEVAL_2V))
    assert config_hash(config_a) == config_hash(config_b)


def test_invalid_config_rejected(dataset, tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(
        f'samples = "{dataset / "samples.jsonl"}"\ntasks = ["retrieval"]\n', encoding="utf-8"
    )
    with pytest.raises(ValueError, match="passages"):
        load_experiment_config(path)
    path2 = tmp_path / "bad2.toml"
    path2.write_text(f'samples = "{dataset / "samples.jsonl"}"\ntasks = []\n', encoding="utf-8")
    with pytest.raises(ValueError, match="at least one task"):
        load_experiment_config(path2)
