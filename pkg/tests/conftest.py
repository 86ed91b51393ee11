from __future__ import annotations

import pytest

from presearch.corpus import Corpus, Document, Judgment, Query
from presearch.synthetic import make_synthetic_collection

_ACCEPTANCE_DOCS: dict[str, str] = {}


@pytest.fixture
def robin_corpus() -> Corpus:
    """Two-doc corpus used by the hand-computed BM25 fixtures."""
    docs = {
        "d1": Document("d1", "robin eggs hatch"),
        "d2": Document("d2", "fire stone route"),
    }
    queries = {"q1": Query("q1", "when do robin eggs hatch")}
    judgments = [Judgment("q1", "d1", 1)]
    return Corpus(documents=docs, queries=queries, judgments=judgments)


@pytest.fixture(scope="session")
def synth_corpus() -> Corpus:
    """The 1,000-passage / 100-query collection the verification suite runs on."""
    return make_synthetic_collection(n_passages=1000, n_queries=100, seed=7)


def pytest_collection_modifyitems(items) -> None:
    for item in items:
        if "test_acceptance" in item.nodeid and item.function.__doc__:
            _ACCEPTANCE_DOCS[item.nodeid] = item.function.__doc__.strip().splitlines()[0]


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    rows = []
    for outcome in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" not in rep.nodeid:
                continue
            if getattr(rep, "when", "call") != "call" and outcome != "skipped":
                continue
            label = _ACCEPTANCE_DOCS.get(rep.nodeid, rep.nodeid.split("::")[-1])
            rows.append((rep.nodeid, outcome.upper(), label))
    if not rows:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for _, outcome, label in sorted(set(rows)):
        word = {"PASSED": "PASS", "FAILED": "FAIL", "ERROR": "FAIL", "SKIPPED": "SKIP"}[outcome]
        terminalreporter.write_line(f"[{word}] {label}")
