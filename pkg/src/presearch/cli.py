"""Command-line interface for the prediction engine and workbench."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import adaptation, grid as grid_mod, lexical, prediction, report as report_mod, scorers
from .configfiles import load_structured
from .corpus import (
    Corpus,
    load_collection,
    load_passages,
)
from .providers import OfflineProvider, ProviderConfig, load_provider_configs, make_provider
from .ranking import read_trec_run, write_trec_run
from .synthetic import write_synthetic_collection


@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Interactive information-need prediction engine and workbench."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _provider_from_options(config_path: str | None, name: str | None):
    if config_path:
        configs = load_provider_configs(config_path)
        if name is None:
            if len(configs) == 1:
                name = next(iter(configs))
            else:
                raise click.UsageError(
                    f"--provider must pick one of: {', '.join(sorted(configs))}"
                )
        if name not in configs:
            raise click.UsageError(f"provider '{name}' not in {config_path}")
        return make_provider(configs[name])
    return OfflineProvider(ProviderConfig(name=name or "fallback"))


def _reformulator_from_options(kind: str, provider_config: str | None, provider: str | None):
    if kind == "rule":
        return adaptation.RuleBasedReformulator()
    return adaptation.ProviderReformulator(_provider_from_options(provider_config, provider))


# ---------------------------------------------------------------- index

@main.group()
def index() -> None:
    """Build and query BM25 indexes."""


@index.command("build")
@click.option("--passages", required=True, type=click.Path(exists=True))
@click.option("--k1", default=lexical.DEFAULT_K1, show_default=True)
@click.option("--b", default=lexical.DEFAULT_B, show_default=True)
@click.option("--out", required=True, type=click.Path())
def index_build(passages: str, k1: float, b: float, out: str) -> None:
    documents = load_passages(passages)
    idx = lexical.build_index(documents, k1=k1, b=b)
    lexical.save_index(idx, out)
    click.echo(f"indexed {idx.doc_count} docs, avg length {idx.avg_doc_length:.2f} -> {out}")


@index.command("search")
@click.option("--idx", required=True, type=click.Path(exists=True))
@click.option("--query", required=True)
@click.option("--k", default=10, show_default=True)
def index_search(idx: str, query: str, k: int) -> None:
    ranked = lexical.search(lexical.load_index(idx), query, k)
    for rank, (doc_id, score) in enumerate(ranked.entries, start=1):
        click.echo(f"{rank}\t{doc_id}\t{score:.6f}")


# ---------------------------------------------------------------- adapt

@main.group()
def adapt() -> None:
    """Build 5-field silver samples from raw collections."""


@adapt.command("marco")
@click.option("--passages", required=True, type=click.Path(exists=True))
@click.option("--queries", required=True, type=click.Path(exists=True))
@click.option("--qrels", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--audit", "audit_path", type=click.Path(), default=None,
              help="Where to write flagged reformulations (default: OUT.audit.jsonl).")
@click.option("--reformulator", "reformulator_kind", type=click.Choice(["rule", "provider"]),
              default="rule", show_default=True)
@click.option("--provider-config", type=click.Path(exists=True), default=None)
@click.option("--provider", default=None)
@click.option("--ratios", default="0.8,0.1,0.1", show_default=True,
              help="train,validation,test fractions.")
@click.option("--seed", default=0, show_default=True)
@click.option("--source-depth", default=20, show_default=True,
              help="BM25 candidate depth for source simulation.")
@click.option("--max-queries", default=None, type=int,
              help="Sample this many judged queries before adaptation.")
@click.option("--k1", default=lexical.DEFAULT_K1, show_default=True)
@click.option("--b", default=lexical.DEFAULT_B, show_default=True)
def adapt_marco_cmd(passages, queries, qrels, out, audit_path, reformulator_kind,
                    provider_config, provider, ratios, seed, source_depth,
                    max_queries, k1, b) -> None:
    corpus = load_collection(passages, queries, qrels)
    idx = lexical.build_index(corpus, k1=k1, b=b)
    reformulator = _reformulator_from_options(reformulator_kind, provider_config, provider)
    parts = tuple(float(x) for x in ratios.split(","))
    if len(parts) != 3:
        raise click.UsageError("--ratios needs three comma-separated fractions")
    result = adaptation.adapt_marco(
        corpus, idx, reformulator, ratios=parts, seed=seed,
        source_depth=source_depth, max_queries=max_queries,
    )
    n = adaptation.save_samples(result.samples, out)
    audit_path = audit_path or f"{out}.audit.jsonl"
    adaptation.save_audit(result.audit, audit_path)
    click.echo(
        f"wrote {n} samples -> {out} ({len(result.audit)} flagged -> {audit_path}, "
        f"{len(result.skipped)} queries skipped)"
    )


@adapt.command("inquisitive")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--audit", "audit_path", type=click.Path(), default=None)
@click.option("--reformulator", "reformulator_kind", type=click.Choice(["rule", "provider"]),
              default="rule", show_default=True)
@click.option("--provider-config", type=click.Path(exists=True), default=None)
@click.option("--provider", default=None)
def adapt_inquisitive_cmd(in_path, out, audit_path, reformulator_kind,
                          provider_config, provider) -> None:
    records = adaptation.read_inquisitive_records(in_path)
    reformulator = _reformulator_from_options(reformulator_kind, provider_config, provider)
    result = adaptation.adapt_inquisitive(records, reformulator)
    n = adaptation.save_samples(result.samples, out)
    audit_path = audit_path or f"{out}.audit.jsonl"
    adaptation.save_audit(result.audit, audit_path)
    click.echo(f"wrote {n} samples -> {out} ({len(result.audit)} flagged -> {audit_path})")


# ---------------------------------------------------------------- pairs

@main.group()
def pairs() -> None:
    """Positive/negative training pairs for external trainers."""


@pairs.command("build")
@click.option("--samples", required=True, type=click.Path(exists=True))
@click.option("--passages", required=True, type=click.Path(exists=True),
              help="Passage TSV used to resolve target texts.")
@click.option("--negatives", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--variant", default="question", show_default=True,
              type=click.Choice([k.value for k in prediction.VARIANT_ORDER]),
              help="How the input text of each pair is rendered.")
@click.option("--separator", default=prediction.DEFAULT_SEPARATOR, show_default=True)
@click.option("--out", required=True, type=click.Path())
def pairs_build(samples, passages, negatives, seed, variant, separator, out) -> None:
    sample_list = adaptation.load_samples(samples)
    documents = load_passages(passages)
    kind = prediction.VariantKind(variant)
    built = adaptation.assemble_pairs(
        sample_list, negatives, seed,
        render=lambda s: prediction.build_variant(s, kind, separator).rendered_text,
    )
    n = scorers.export_training_pairs(built, documents, out)
    click.echo(f"wrote {n} training pairs -> {out}")


# ---------------------------------------------------------------- predict

@main.group()
def predict() -> None:
    """Run the two prediction paths over sample files."""


@predict.command("generate")
@click.option("--samples", required=True, type=click.Path(exists=True))
@click.option("--variant", required=True,
              type=click.Choice([k.value for k in prediction.GENERATION_KINDS]))
@click.option("--provider-config", type=click.Path(exists=True), default=None)
@click.option("--provider", default=None)
@click.option("--template", type=click.Path(exists=True), default=None,
              help="Prompt template file with {source}/{context}/{intent} placeholders.")
@click.option("--split", default="*", show_default=True)
@click.option("--separator", default=prediction.DEFAULT_SEPARATOR, show_default=True)
@click.option("--max-tokens", default=64, show_default=True)
@click.option("--out", required=True, type=click.Path())
def predict_generate(samples, variant, provider_config, provider, template, split,
                     separator, max_tokens, out) -> None:
    sample_list = _filter_split(adaptation.load_samples(samples), split)
    kind = prediction.VariantKind(variant)
    gen_provider = _provider_from_options(provider_config, provider)
    template_text = Path(template).read_text(encoding="utf-8") if template else None
    rows = []
    skipped = 0
    for sample in sorted(sample_list, key=lambda s: s.sample_id):
        try:
            built = prediction.build_variant(sample, kind, separator)
        except ValueError:
            skipped += 1
            continue
        question = prediction.generate_question(
            built, gen_provider, prompt_template=template_text, max_tokens=max_tokens
        )
        rows.append({
            "sample_id": sample.sample_id,
            "variant": kind.value,
            "generated_question": question,
        })
    n = prediction.write_generations(rows, out)
    click.echo(f"wrote {n} generations -> {out} ({skipped} samples lacked fields)")


@predict.command("retrieve")
@click.option("--samples", required=True, type=click.Path(exists=True))
@click.option("--passages", required=True, type=click.Path(exists=True))
@click.option("--variant", required=True,
              type=click.Choice([k.value for k in prediction.VARIANT_ORDER]))
@click.option("--pipeline", "pipeline_path", type=click.Path(exists=True), default=None,
              help="Pipeline config (JSON/TOML); defaults to lexical-only.")
@click.option("--provider-config", type=click.Path(exists=True), default=None)
@click.option("--k", default=10, show_default=True)
@click.option("--split", default="*", show_default=True)
@click.option("--pool-splits", default="train,validation", show_default=True)
@click.option("--separator", default=prediction.DEFAULT_SEPARATOR, show_default=True)
@click.option("--run-tag", default="presearch", show_default=True)
@click.option("--out", required=True, type=click.Path())
def predict_retrieve(samples, passages, variant, pipeline_path, provider_config, k,
                     split, pool_splits, separator, run_tag, out) -> None:
    sample_list = adaptation.load_samples(samples)
    documents = load_passages(passages)
    kind = prediction.VariantKind(variant)
    pool_ids = prediction.build_candidate_pool(sample_list, pool_splits.split(","))
    missing = sorted(pid for pid in pool_ids if pid not in documents)
    if missing:
        raise click.ClickException(f"candidate pool references unknown passages: {missing[:10]}")
    pool_docs = {pid: documents[pid] for pid in sorted(pool_ids)}
    providers = {}
    if provider_config:
        providers = {
            name: make_provider(cfg)
            for name, cfg in load_provider_configs(provider_config).items()
        }
    providers.setdefault("fallback", OfflineProvider())
    spec = load_structured(pipeline_path) if pipeline_path else None
    pipe = prediction.make_pipeline(pool_docs, spec, providers)
    runs = []
    skipped = 0
    for sample in sorted(_filter_split(sample_list, split), key=lambda s: s.sample_id):
        if not sample.target_doc_id:
            skipped += 1
            continue
        try:
            built = prediction.build_variant(sample, kind, separator)
        except ValueError:
            skipped += 1
            continue
        runs.append(prediction.retrieve(built, pipe, k))
    n = write_trec_run(runs, out, run_tag)
    click.echo(f"wrote {n} run lines for {len(runs)} queries -> {out} ({skipped} skipped)")


def _filter_split(samples, split: str):
    if split == "*":
        return list(samples)
    return [s for s in samples if s.split == split]


# ---------------------------------------------------------------- eval

@main.group(name="eval")
def eval_group() -> None:
    """Score predictions and compare runs."""


def _write_report_outputs(rep, out: str, figures: str | None) -> None:
    report_mod.save_report(rep, out)
    table = report_mod.aggregate_table([rep])
    txt_path = Path(out).with_suffix(".txt")
    txt_path.write_text(table, encoding="utf-8")
    tsv_path = Path(out).with_suffix(".tsv")
    report_mod.write_aggregate_tsv([rep], tsv_path)
    if figures:
        report_mod.render_figures([rep], figures)
    click.echo(table.rstrip("\n"))


@eval_group.command("gen")
@click.option("--hyp", required=True, type=click.Path(exists=True),
              help="JSONL with sample_id + generated_question/hypothesis.")
@click.option("--ref", required=True, type=click.Path(exists=True),
              help="Samples JSONL (question field) or JSONL with sample_id + reference.")
@click.option("--run-tag", default="generation", show_default=True)
@click.option("--smoothing", is_flag=True, help="Add-epsilon BLEU smoothing.")
@click.option("--rouge-mode", default="f1", type=click.Choice(["f1", "recall"]), show_default=True)
@click.option("--figures", type=click.Path(), default=None, help="Directory for metric figures.")
@click.option("--out", required=True, type=click.Path())
def eval_gen(hyp, ref, run_tag, smoothing, rouge_mode, figures, out) -> None:
    hypotheses = {}
    for row in _read_jsonl(hyp):
        text = row.get("generated_question") or row.get("hypothesis") or ""
        hypotheses[str(row["sample_id"])] = text
    references = {}
    for row in _read_jsonl(ref):
        text = row.get("reference") or row.get("question") or row.get("text") or ""
        references[str(row["sample_id"])] = text
    missing = sorted(set(hypotheses) - set(references))
    if missing:
        raise click.ClickException(f"no reference for sample(s): {missing[:10]}")
    records = [
        report_mod.GenerationEvalRecord(sid, hypotheses[sid], references[sid])
        for sid in sorted(hypotheses)
    ]
    rep = report_mod.evaluate_generation(records, run_tag, smoothing=smoothing,
                                         rouge_mode=rouge_mode)
    _write_report_outputs(rep, out, figures)


@eval_group.command("ret")
@click.option("--run", required=True, type=click.Path(exists=True), help="TREC run file.")
@click.option("--qrels", required=True, type=click.Path(exists=True))
@click.option("--cutoff", default=10, show_default=True)
@click.option("--run-tag", default=None, help="Defaults to the run filename.")
@click.option("--figures", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
def eval_ret(run, qrels, cutoff, run_tag, figures, out) -> None:
    runs = read_trec_run(run)
    relevant = _read_qrels_sets(qrels)
    unjudged = sorted(set(runs) - set(relevant))
    if unjudged:
        raise click.ClickException(f"run contains unjudged queries: {unjudged[:10]}")
    rep = report_mod.evaluate_retrieval_sets(
        runs, {qid: relevant[qid] for qid in runs},
        run_tag or Path(run).stem, cutoff=cutoff,
    )
    _write_report_outputs(rep, out, figures)


@eval_group.command("compare")
@click.option("--a", "path_a", required=True, type=click.Path(exists=True))
@click.option("--b", "path_b", required=True, type=click.Path(exists=True))
@click.option("--metric", "metrics", multiple=True,
              help="Defaults to the reports' significance metrics.")
def eval_compare(path_a, path_b, metrics) -> None:
    rep_a = report_mod.load_report(path_a)
    rep_b = report_mod.load_report(path_b)
    chosen = list(metrics) if metrics else (
        rep_a.settings.get("significance_metrics", "").split(",")
    )
    chosen = [m for m in chosen if m]
    if not chosen:
        raise click.ClickException("no metrics to compare; pass --metric")
    rows = report_mod.compare_reports(rep_a, rep_b, chosen)
    for row in rows:
        click.echo(f"{row.metric}\tt={row.t:.6f}\tp={row.p:.6g}"
                   + ("\t(degenerate variance)" if row.degenerate else ""))


def _read_jsonl(path: str) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _read_qrels_sets(path: str) -> dict[str, set[str]]:
    relevant: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 4:
                raise click.ClickException(f"{path}:{lineno}: expected 4 fields")
            query_id, _, doc_id, grade = fields
            relevant.setdefault(query_id, set())
            if int(grade) >= 1:
                relevant[query_id].add(doc_id)
    return relevant


# ---------------------------------------------------------------- grid

@main.group()
def grid() -> None:
    """Drive the full experiment grid."""


@grid.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def grid_run(config_path) -> None:
    config = grid_mod.load_experiment_config(config_path)
    manifest = grid_mod.run_grid(config)
    done = sum(1 for c in manifest["cells"] if c["status"] == "done")
    skipped = len(manifest["cells"]) - done
    click.echo(f"{done} cells done, {skipped} skipped -> {config.output_dir / 'manifest.json'}")


@grid.command("table")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--task", required=True, type=click.Choice(list(grid_mod.TASKS)))
@click.option("--figures/--no-figures", default=True, show_default=True)
def grid_table_cmd(manifest_path, task, figures) -> None:
    output_dir = Path(manifest_path).parent
    click.echo(grid_mod.grid_table(output_dir, task, figures=figures).rstrip("\n"))


@grid.command("compare")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--rq1", "rq", flag_value=1, type=int)
@click.option("--rq2", "rq", flag_value=2, type=int)
@click.option("--cells", nargs=2, default=None,
              help="Two cell ids like retrieval/context_intent/lexical.")
def grid_compare(manifest_path, rq, cells) -> None:
    output_dir = Path(manifest_path).parent
    if cells:
        rows = grid_mod.compare_cells(output_dir, cells[0], cells[1])
        for row in rows:
            click.echo(f"{row.metric}\tt={row.t:.6f}\tp={row.p:.6g}")
        return
    if not rq:
        raise click.UsageError("pass --rq1, --rq2, or --cells A B")
    for row in grid_mod.rq_comparisons(output_dir, rq):
        click.echo(
            f"{row['task']}\t{row['model']}\t{row['variant_a']} vs {row['variant_b']}\t"
            f"{row['metric']}\tt={row['t']:.6f}\tp={row['p']:.6g}"
        )


# ---------------------------------------------------------------- serve / synth

@main.command()
@click.option("--passages", required=True, type=click.Path(exists=True))
@click.option("--queries", type=click.Path(exists=True), default=None)
@click.option("--qrels", type=click.Path(exists=True), default=None)
@click.option("--provider-config", type=click.Path(exists=True), default=None)
@click.option("--provider", default=None)
@click.option("--pipeline", "pipeline_path", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--origin", "origins", multiple=True, default=("*",), show_default=True)
def serve(passages, queries, qrels, provider_config, provider, pipeline_path,
          host, port, origins) -> None:
    """Serve the interactive prediction API over a passage collection."""
    import uvicorn

    from .service import create_app

    if queries:
        corpus = load_collection(passages, queries, qrels)
    else:
        corpus = Corpus(documents=load_passages(passages))
    providers = {}
    if provider_config:
        providers = {
            name: make_provider(cfg)
            for name, cfg in load_provider_configs(provider_config).items()
        }
    providers.setdefault("fallback", OfflineProvider())
    gen_provider = providers[provider] if provider else providers["fallback"]
    spec = load_structured(pipeline_path) if pipeline_path else None
    pipe = prediction.make_pipeline(corpus.documents, spec, providers)
    app = create_app(corpus, gen_provider, pipe, allow_origins=tuple(origins))
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--passages", "n_passages", default=1000, show_default=True)
@click.option("--queries", "n_queries", default=100, show_default=True)
@click.option("--seed", default=7, show_default=True)
def synth(out_dir, n_passages, n_queries, seed) -> None:
    """Write a synthetic collection for smoke tests and demos."""
    paths = write_synthetic_collection(out_dir, n_passages, n_queries, seed)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


if __name__ == "__main__":
    sys.exit(main())
