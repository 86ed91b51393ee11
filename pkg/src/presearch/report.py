"""Per-run metric reports: build, compare, persist, and render as JSON,
aligned text tables, TSV, and figures."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .lexical import tokenize
from .metrics import (
    bleu_n,
    first_relevant_rank,
    mrr,
    recall_at_k,
    rouge_l,
    rouge_n,
    t_test_independent,
)
from .ranking import RankedList

GENERATION_METRICS = ("bleu-1", "bleu-2", "bleu-3", "bleu-4", "rouge-1", "rouge-2", "rouge-l")
GENERATION_SIGNIFICANCE = ("rouge-1", "rouge-2", "rouge-l")


def retrieval_metrics(cutoff: int) -> tuple[str, str]:
    return (f"r@{cutoff}", f"mrr@{cutoff}")


@dataclass(frozen=True)
class GenerationEvalRecord:
    sample_id: str
    hypothesis: str
    reference: str

    def __post_init__(self) -> None:
        if not self.reference.strip():
            raise ValueError(f"sample '{self.sample_id}': reference must be nonempty")


@dataclass(frozen=True)
class SignificanceRow:
    metric: str
    other_run_tag: str
    t: float
    p: float
    degenerate: bool = False


@dataclass
class MetricReport:
    run_tag: str
    task: str  # "generation" | "retrieval"
    per_sample: dict[str, dict[str, float]]
    aggregate: dict[str, float]
    significance: list[SignificanceRow] = field(default_factory=list)
    settings: dict[str, str] = field(default_factory=dict)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _require_same_samples(a_ids: Iterable[str], b_ids: Iterable[str], what: str) -> None:
    a_set, b_set = set(a_ids), set(b_ids)
    if a_set != b_set:
        only_a = sorted(a_set - b_set)[:10]
        only_b = sorted(b_set - a_set)[:10]
        raise ValueError(
            f"sample sets differ for {what}: only in first={only_a}, only in second={only_b}"
        )


def evaluate_generation(
    records: Sequence[GenerationEvalRecord],
    run_tag: str,
    baselines: Sequence[MetricReport] = (),
    smoothing: bool = False,
    rouge_mode: str = "f1",
) -> MetricReport:
    """Sentence BLEU-{1..4} and ROUGE-{1,2,L} per sample, macro-averaged;
    significance against each baseline on the ROUGE metrics."""
    if not records:
        raise ValueError("no generation records to evaluate")
    per_sample: dict[str, dict[str, float]] = {}
    for record in records:
        hyp = tokenize(record.hypothesis)
        ref = tokenize(record.reference)
        row = {f"bleu-{n}": bleu_n(hyp, ref, n, smoothing=smoothing) for n in (1, 2, 3, 4)}
        row["rouge-1"] = rouge_n(hyp, ref, 1, mode=rouge_mode)
        row["rouge-2"] = rouge_n(hyp, ref, 2, mode=rouge_mode)
        row["rouge-l"] = rouge_l(hyp, ref, mode=rouge_mode)
        per_sample[record.sample_id] = row
    report = MetricReport(
        run_tag=run_tag,
        task="generation",
        per_sample=per_sample,
        aggregate={
            m: _mean([row[m] for row in per_sample.values()]) for m in GENERATION_METRICS
        },
        settings={
            "bleu": "sentence," + ("add-eps" if smoothing else "unsmoothed"),
            "rouge_mode": rouge_mode,
            "tokenizer": "lowercase alphanumeric",
            "significance_metrics": ",".join(GENERATION_SIGNIFICANCE),
        },
    )
    for baseline in baselines:
        report.significance.extend(
            compare_reports(report, baseline, GENERATION_SIGNIFICANCE)
        )
    return report


def evaluate_retrieval(
    runs: Mapping[str, RankedList],
    targets: Mapping[str, str],
    run_tag: str,
    cutoff: int = 10,
    baselines: Sequence[MetricReport] = (),
) -> MetricReport:
    """R@cutoff and reciprocal rank per query, macro-averaged;
    significance against each baseline on MRR."""
    if not runs:
        raise ValueError("no ranked lists to evaluate")
    _require_same_samples(runs.keys(), targets.keys(), "runs vs targets")
    r_name, mrr_name = retrieval_metrics(cutoff)
    per_sample = {
        sample_id: {
            r_name: recall_at_k(ranked, targets[sample_id], cutoff),
            mrr_name: mrr(ranked, targets[sample_id], cutoff),
        }
        for sample_id, ranked in runs.items()
    }
    report = MetricReport(
        run_tag=run_tag,
        task="retrieval",
        per_sample=per_sample,
        aggregate={
            m: _mean([row[m] for row in per_sample.values()]) for m in (r_name, mrr_name)
        },
        settings={"cutoff": str(cutoff), "significance_metrics": mrr_name},
    )
    for baseline in baselines:
        report.significance.extend(compare_reports(report, baseline, (mrr_name,)))
    return report


def evaluate_retrieval_sets(
    runs: Mapping[str, RankedList],
    relevant: Mapping[str, set[str]],
    run_tag: str,
    cutoff: int = 10,
    baselines: Sequence[MetricReport] = (),
) -> MetricReport:
    """Qrels-style evaluation: a query scores on its first relevant doc."""
    if not runs:
        raise ValueError("no ranked lists to evaluate")
    _require_same_samples(runs.keys(), relevant.keys(), "runs vs qrels")
    r_name, mrr_name = retrieval_metrics(cutoff)
    per_sample: dict[str, dict[str, float]] = {}
    for sample_id, ranked in runs.items():
        rank = first_relevant_rank(ranked, relevant[sample_id])
        hit = rank is not None and rank <= cutoff
        per_sample[sample_id] = {
            r_name: 1.0 if hit else 0.0,
            mrr_name: 1.0 / rank if hit else 0.0,
        }
    report = MetricReport(
        run_tag=run_tag,
        task="retrieval",
        per_sample=per_sample,
        aggregate={
            m: _mean([row[m] for row in per_sample.values()]) for m in (r_name, mrr_name)
        },
        settings={"cutoff": str(cutoff), "significance_metrics": mrr_name},
    )
    for baseline in baselines:
        report.significance.extend(compare_reports(report, baseline, (mrr_name,)))
    return report


def compare_reports(
    a: MetricReport, b: MetricReport, metrics: Sequence[str]
) -> list[SignificanceRow]:
    """Independent t-test per metric over the shared per-sample values."""
    _require_same_samples(a.per_sample.keys(), b.per_sample.keys(), f"{a.run_tag} vs {b.run_tag}")
    ids = sorted(a.per_sample)
    rows = []
    for metric in metrics:
        result = t_test_independent(
            [a.per_sample[i][metric] for i in ids],
            [b.per_sample[i][metric] for i in ids],
        )
        rows.append(
            SignificanceRow(
                metric=metric,
                other_run_tag=b.run_tag,
                t=result.t,
                p=result.p,
                degenerate=result.degenerate,
            )
        )
    return rows


def report_to_dict(report: MetricReport) -> dict:
    return {
        "run_tag": report.run_tag,
        "task": report.task,
        "settings": report.settings,
        "aggregate": report.aggregate,
        "per_sample": report.per_sample,
        "significance": [
            {
                "metric": row.metric,
                "other_run_tag": row.other_run_tag,
                "t": row.t,
                "p": row.p,
                "degenerate": row.degenerate,
            }
            for row in report.significance
        ],
    }


def save_report(report: MetricReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(report_to_dict(report), f, sort_keys=True, indent=2, ensure_ascii=False)
        f.write("\n")


def load_report(path: str | Path) -> MetricReport:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    return MetricReport(
        run_tag=data["run_tag"],
        task=data["task"],
        per_sample=data["per_sample"],
        aggregate=data["aggregate"],
        significance=[SignificanceRow(**row) for row in data.get("significance", [])],
        settings=data.get("settings", {}),
    )


def format_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Aligned-column plain-text table."""
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * widths[i] for i in range(len(headers))),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"


def aggregate_table(reports: Sequence[MetricReport], metrics: Sequence[str] | None = None) -> str:
    metrics = list(metrics or _shared_metrics(reports))
    rows = [[r.run_tag] + [f"{r.aggregate.get(m, float('nan')):.4f}" for m in metrics] for r in reports]
    return format_table(["run"] + metrics, rows)


def write_aggregate_tsv(
    reports: Sequence[MetricReport], path: str | Path, metrics: Sequence[str] | None = None
) -> None:
    metrics = list(metrics or _shared_metrics(reports))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(["run"] + metrics) + "\n")
        for r in reports:
            f.write("\t".join([r.run_tag] + [repr(r.aggregate.get(m)) for m in metrics]) + "\n")


def _shared_metrics(reports: Sequence[MetricReport]) -> list[str]:
    if not reports:
        return []
    names: list[str] = []
    for r in reports:
        for m in r.aggregate:
            if m not in names:
                names.append(m)
    return names


def _safe_filename(name: str) -> str:
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in name)


def render_figures(
    reports: Sequence[MetricReport],
    out_dir: str | Path,
    metrics: Sequence[str] | None = None,
    prefix: str = "",
) -> list[Path]:
    """One bar chart per metric comparing runs; returns written paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = list(metrics or _shared_metrics(reports))
    written: list[Path] = []
    for metric in metrics:
        tags = [r.run_tag for r in reports if metric in r.aggregate]
        values = [r.aggregate[metric] for r in reports if metric in r.aggregate]
        if not tags:
            continue
        fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(tags)), 3.2))
        ax.bar(range(len(tags)), values, color="#4878d0")
        ax.set_xticks(range(len(tags)))
        ax.set_xticklabels(tags, rotation=30, ha="right", fontsize=8)
        ax.set_ylim(0.0, 1.05)
        ax.set_ylabel(metric)
        ax.set_title(metric)
        fig.tight_layout()
        path = out_dir / f"{prefix}{_safe_filename(metric)}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
