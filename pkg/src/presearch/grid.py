"""Experiment grid driver: run every (task, variant, model) cell, persist
predictions and reports content-addressed by config hash, and render
result tables and research-question comparisons."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .adaptation import Sample, load_samples
from .configfiles import load_structured
from .corpus import load_passages
from .prediction import (
    VARIANT_ORDER,
    VariantKind,
    build_candidate_pool,
    build_variant,
    generate_question,
    make_pipeline,
    retrieve,
)
from .providers import ProviderConfig, make_provider
from .ranking import RankedList, read_trec_run, write_trec_run
from .report import (
    GENERATION_SIGNIFICANCE,
    MetricReport,
    GenerationEvalRecord,
    SignificanceRow,
    compare_reports,
    evaluate_generation,
    evaluate_retrieval,
    format_table,
    load_report,
    render_figures,
    retrieval_metrics,
    save_report,
    write_aggregate_tsv,
)

log = logging.getLogger(__name__)

TASKS = ("generation", "retrieval")

RQ1_PAIRS = (
    (VariantKind.CONTEXT_INTENT, VariantKind.SOURCE_INTENT),
    (VariantKind.CONTEXT, VariantKind.SOURCE),
)
RQ2_PAIRS = (
    (VariantKind.CONTEXT_INTENT, VariantKind.CONTEXT),
    (VariantKind.SOURCE_INTENT, VariantKind.SOURCE),
)


@dataclass
class ExperimentConfig:
    samples_path: Path
    output_dir: Path
    tasks: tuple[str, ...] = TASKS
    variants: tuple[VariantKind, ...] = VARIANT_ORDER
    passages_path: Path | None = None
    provider_configs: dict[str, ProviderConfig] = field(default_factory=dict)
    pipeline_specs: dict[str, dict] = field(default_factory=dict)
    generation_providers: tuple[str, ...] = ()
    retrieval_pipelines: tuple[str, ...] = ()
    cutoff: int = 10
    seed: int = 0
    separator: str = "|"
    eval_split: str = "validation"  # "*" evaluates over every split
    pool_splits: tuple[str, ...] = ("train", "validation")
    smoothing: bool = False
    max_tokens: int = 64
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self.tasks:
            raise ValueError("config needs at least one task")
        if not self.variants:
            raise ValueError("config needs at least one variant")
        for task in self.tasks:
            if task not in TASKS:
                raise ValueError(f"unknown task {task!r}")
        if "retrieval" in self.tasks and self.passages_path is None:
            raise ValueError("retrieval tasks require a passages path")


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    data = load_structured(path)
    base = path.parent

    def resolve(p: str | None) -> Path | None:
        return (base / p).resolve() if p else None

    providers = {
        name: ProviderConfig(name=name, **{
            k: v for k, v in raw.items() if k != "name" and k in ProviderConfig.__dataclass_fields__
        })
        for name, raw in data.get("providers", {"fallback": {}}).items()
    }
    pipelines = dict(data.get("pipelines", {"lexical": {"first": "lexical"}}))
    generation = data.get("generation", {})
    retrieval = data.get("retrieval", {})
    config = ExperimentConfig(
        samples_path=resolve(data["samples"]),
        output_dir=(base / data.get("output_dir", "runs")).resolve(),
        tasks=tuple(data.get("tasks", list(TASKS))),
        variants=tuple(VariantKind(v) for v in data.get("variants", [k.value for k in VARIANT_ORDER])),
        passages_path=resolve(data.get("passages")),
        provider_configs=providers,
        pipeline_specs=pipelines,
        generation_providers=tuple(generation.get("providers", sorted(providers))),
        retrieval_pipelines=tuple(retrieval.get("pipelines", sorted(pipelines))),
        cutoff=int(data.get("cutoff", 10)),
        seed=int(data.get("seed", 0)),
        separator=data.get("separator", "|"),
        eval_split=data.get("eval_split", "validation"),
        pool_splits=tuple(data.get("pool_splits", ["train", "validation"])),
        smoothing=bool(data.get("smoothing", False)),
        max_tokens=int(data.get("max_tokens", 64)),
        raw=data,
    )
    return config


def config_hash(config: ExperimentConfig) -> str:
    """Content hash over everything that affects cell outputs."""
    hashable = {k: v for k, v in config.raw.items() if k != "output_dir"}
    canonical = json.dumps(hashable, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def cell_name(task: str, variant: VariantKind, model: str) -> str:
    return f"{task}__{variant.value}__{model}"


def cell_id(task: str, variant: VariantKind, model: str) -> str:
    return f"{task}/{variant.value}/{model}"


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _eval_samples(samples: list[Sample], eval_split: str) -> list[Sample]:
    if eval_split == "*":
        chosen = list(samples)
    else:
        chosen = [s for s in samples if s.split == eval_split]
    return sorted(chosen, key=lambda s: s.sample_id)


def _eligible(samples: Iterable[Sample], variant: VariantKind, separator: str):
    out = []
    for s in samples:
        try:
            out.append((s, build_variant(s, variant, separator)))
        except ValueError:
            continue
    return out


def run_grid(config: ExperimentConfig) -> dict:
    """Execute every cell, reusing cells already computed under the same
    config hash; returns (and persists) the manifest."""
    out_dir = config.output_dir
    cells_dir = out_dir / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)
    digest = config_hash(config)

    samples = load_samples(config.samples_path)
    eval_samples = _eval_samples(samples, config.eval_split)
    providers = {name: make_provider(cfg) for name, cfg in config.provider_configs.items()}

    pool_docs = None
    if "retrieval" in config.tasks:
        documents = load_passages(config.passages_path)
        pool_ids = build_candidate_pool(samples, config.pool_splits)
        missing = sorted(pid for pid in pool_ids if pid not in documents)
        if missing:
            raise ValueError(f"candidate pool references unknown passages: {missing[:10]}")
        pool_docs = {pid: documents[pid] for pid in sorted(pool_ids)}

    cells = []
    for task in config.tasks:
        models = config.generation_providers if task == "generation" else config.retrieval_pipelines
        for variant in config.variants:
            for model in models:
                cells.append(_run_cell(
                    config, digest, cells_dir, task, variant, model,
                    eval_samples, providers, pool_docs,
                ))
    cells.sort(key=lambda c: (c["task"], _variant_rank(c["variant"]), c["model"]))
    manifest = {"config_hash": digest, "cutoff": config.cutoff, "cells": cells}
    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, sort_keys=True, indent=2, ensure_ascii=False)
        f.write("\n")
    return manifest


def _variant_rank(value: str) -> int:
    return [k.value for k in VARIANT_ORDER].index(value)


def _run_cell(
    config: ExperimentConfig,
    digest: str,
    cells_dir: Path,
    task: str,
    variant: VariantKind,
    model: str,
    eval_samples: list[Sample],
    providers: Mapping[str, object],
    pool_docs: dict | None,
) -> dict:
    entry = {"task": task, "variant": variant.value, "model": model}
    if task == "generation" and variant is VariantKind.QUESTION:
        entry.update(status="skipped", reason="question variant is retrieval-only")
        return entry

    directory = cells_dir / cell_name(task, variant, model)
    marker = directory / "cell.json"
    if marker.exists():
        state = json.loads(marker.read_text(encoding="utf-8"))
        if state.get("config_hash") == digest and all(
            (directory / name).exists()
            and _sha256_file(directory / name) == meta["sha256"]
            for name, meta in state.get("artifacts", {}).items()
        ):
            log.info("cell %s up to date, skipping recompute", directory.name)
            entry.update(status="done", n_samples=state.get("n_samples", 0),
                         artifacts=_relative_artifacts(state["artifacts"], directory, config.output_dir))
            return entry

    directory.mkdir(parents=True, exist_ok=True)
    eligible = _eligible(eval_samples, variant, config.separator)
    if task == "retrieval":
        eligible = [(s, v) for s, v in eligible if s.target_doc_id]
    if not eligible:
        entry.update(status="skipped", reason="no eligible samples")
        return entry

    artifacts: dict[str, dict] = {}
    tag = cell_id(task, variant, model)
    if task == "generation":
        provider = providers[model]
        rows = []
        records = []
        for sample, built in eligible:
            question = generate_question(
                built, provider, max_tokens=config.max_tokens, temperature=0.0
            )
            rows.append({
                "sample_id": sample.sample_id,
                "variant": variant.value,
                "generated_question": question,
            })
            records.append(GenerationEvalRecord(sample.sample_id, question, sample.question))
        predictions = directory / "generations.jsonl"
        with open(predictions, "w", encoding="utf-8", newline="\n") as f:
            for row in rows:
                f.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
        report = evaluate_generation(records, tag, smoothing=config.smoothing)
        artifacts["generations.jsonl"] = {}
    else:
        pipeline = make_pipeline(pool_docs, config.pipeline_specs[model], providers)
        runs: dict[str, RankedList] = {}
        targets: dict[str, str] = {}
        for sample, built in eligible:
            runs[sample.sample_id] = retrieve(built, pipeline, config.cutoff)
            targets[sample.sample_id] = sample.target_doc_id
        predictions = directory / "run.trec"
        write_trec_run(
            (runs[sid] for sid in sorted(runs)), predictions,
            run_tag=cell_name(task, variant, model),
        )
        report = evaluate_retrieval(runs, targets, tag, cutoff=config.cutoff)
        artifacts["run.trec"] = {}

    report_path = directory / "report.json"
    save_report(report, report_path)
    artifacts["report.json"] = {}
    for name in artifacts:
        artifacts[name] = {"sha256": _sha256_file(directory / name)}
    marker_payload = {
        "config_hash": digest,
        "n_samples": len(eligible),
        "artifacts": artifacts,
    }
    with open(marker, "w", encoding="utf-8", newline="\n") as f:
        json.dump(marker_payload, f, sort_keys=True, indent=2)
        f.write("\n")
    entry.update(status="done", n_samples=len(eligible),
                 artifacts=_relative_artifacts(artifacts, directory, config.output_dir))
    return entry


def _relative_artifacts(artifacts: dict, directory: Path, output_dir: Path) -> dict:
    return {
        name: {"path": str((directory / name).relative_to(output_dir)), "sha256": meta["sha256"]}
        for name, meta in artifacts.items()
    }


def load_manifest(output_dir: str | Path) -> dict:
    path = Path(output_dir) / "manifest.json"
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _find_cell(manifest: dict, identifier: str) -> dict:
    for cell in manifest["cells"]:
        if cell_id(cell["task"], VariantKind(cell["variant"]), cell["model"]) == identifier:
            return cell
    raise KeyError(f"no cell '{identifier}' in manifest")


def _cell_report(output_dir: Path, cell: dict) -> MetricReport:
    if cell.get("status") != "done":
        raise ValueError(f"cell {cell['task']}/{cell['variant']}/{cell['model']} has no report "
                         f"(status={cell.get('status')}, reason={cell.get('reason')})")
    return load_report(output_dir / cell["artifacts"]["report.json"]["path"])


def significance_metrics_for(task: str, cutoff: int) -> tuple[str, ...]:
    if task == "generation":
        return GENERATION_SIGNIFICANCE
    return (retrieval_metrics(cutoff)[1],)


def compare_cells(output_dir: str | Path, cell_a: str, cell_b: str) -> list[SignificanceRow]:
    """t and p per significance metric between two done cells of one task."""
    output_dir = Path(output_dir)
    manifest = load_manifest(output_dir)
    a = _find_cell(manifest, cell_a)
    b = _find_cell(manifest, cell_b)
    if a["task"] != b["task"]:
        raise ValueError(f"cells {cell_a} and {cell_b} belong to different tasks")
    metrics = significance_metrics_for(a["task"], manifest.get("cutoff", 10))
    return compare_reports(_cell_report(output_dir, a), _cell_report(output_dir, b), metrics)


def rq_comparisons(output_dir: str | Path, rq: int) -> list[dict]:
    """The research-question comparisons: RQ1 pairs (context+intent vs
    source+intent, context vs source); RQ2 pairs (context+intent vs
    context, source+intent vs source) for every (task, model)."""
    if rq not in (1, 2):
        raise ValueError("rq must be 1 or 2")
    pairs = RQ1_PAIRS if rq == 1 else RQ2_PAIRS
    output_dir = Path(output_dir)
    manifest = load_manifest(output_dir)
    done = {
        (c["task"], c["variant"], c["model"]): c
        for c in manifest["cells"]
        if c.get("status") == "done"
    }
    rows: list[dict] = []
    for task in TASKS:
        models = sorted({m for (t, _, m) in done if t == task})
        for model in models:
            for left, right in pairs:
                key_a = (task, left.value, model)
                key_b = (task, right.value, model)
                if key_a not in done or key_b not in done:
                    continue
                metrics = significance_metrics_for(task, manifest.get("cutoff", 10))
                sig = compare_reports(
                    _cell_report(output_dir, done[key_a]),
                    _cell_report(output_dir, done[key_b]),
                    metrics,
                )
                for row in sig:
                    rows.append({
                        "task": task,
                        "model": model,
                        "variant_a": left.value,
                        "variant_b": right.value,
                        "metric": row.metric,
                        "t": row.t,
                        "p": row.p,
                    })
    return rows


def grid_table(
    output_dir: str | Path,
    task: str,
    figures: bool = True,
    table_dir: str | Path | None = None,
) -> str:
    """Render the per-task table (variant-major, model-minor rows) and
    write table.txt, metrics.tsv, and figures next to it."""
    output_dir = Path(output_dir)
    manifest = load_manifest(output_dir)
    cells = [
        c for c in manifest["cells"]
        if c["task"] == task and c.get("status") == "done"
    ]
    if not cells:
        raise ValueError(f"no completed cells for task '{task}'")
    cells.sort(key=lambda c: (_variant_rank(c["variant"]), c["model"]))
    reports = [(c, _cell_report(output_dir, c)) for c in cells]
    metrics: list[str] = []
    for _, report in reports:
        for m in report.aggregate:
            if m not in metrics:
                metrics.append(m)
    headers = ["model", "input"] + metrics
    rows = [
        [c["model"], c["variant"]] + [f"{r.aggregate.get(m, float('nan')):.4f}" for m in metrics]
        for c, r in reports
    ]
    text = format_table(headers, rows)

    table_dir = Path(table_dir) if table_dir else output_dir / "tables"
    table_dir.mkdir(parents=True, exist_ok=True)
    (table_dir / f"{task}.txt").write_text(text, encoding="utf-8")
    labeled = []
    for c, r in reports:
        r.run_tag = f"{c['model']}:{c['variant']}"
        labeled.append(r)
    write_aggregate_tsv(labeled, table_dir / f"{task}.tsv", metrics)
    if figures:
        render_figures(labeled, table_dir / "figures", metrics, prefix=f"{task}_")
    return text
