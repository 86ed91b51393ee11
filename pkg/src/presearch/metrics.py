"""Text-overlap and ranking metrics plus the independent two-sample t-test.

All metric values are bounded in [0, 1].  Token inputs are plain lists
produced by the shared tokenizer.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import NamedTuple, Sequence

from .ranking import RankedList

SMOOTHING_EPS = 1e-9


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_n(
    hypothesis: Sequence[str],
    reference: Sequence[str],
    n: int,
    smoothing: bool = False,
) -> float:
    """Sentence BLEU-n against a single reference.

    Geometric mean of clipped modified i-gram precisions for i = 1..n,
    times the brevity penalty min(1, exp(1 - r/c)).  Unsmoothed, any zero
    precision yields 0; the add-epsilon mode smooths each precision.
    """
    if not 1 <= n <= 4:
        raise ValueError(f"n must be in 1..4, got {n}")
    if not reference:
        raise ValueError("reference must be nonempty")
    if not hypothesis:
        return 0.0
    log_sum = 0.0
    for order in range(1, n + 1):
        hyp_grams = _ngram_counts(hypothesis, order)
        ref_grams = _ngram_counts(reference, order)
        matched = sum(min(count, ref_grams[gram]) for gram, count in hyp_grams.items())
        total = sum(hyp_grams.values())
        if smoothing:
            precision = (matched + SMOOTHING_EPS) / (total + SMOOTHING_EPS)
        else:
            if matched == 0 or total == 0:
                return 0.0
            precision = matched / total
        log_sum += math.log(precision)
    brevity = min(1.0, math.exp(1.0 - len(reference) / len(hypothesis)))
    return brevity * math.exp(log_sum / n)


def rouge_n(
    hypothesis: Sequence[str],
    reference: Sequence[str],
    n: int,
    mode: str = "f1",
) -> float:
    """N-gram overlap F1 (or recall with mode="recall")."""
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")
    hyp_grams = _ngram_counts(hypothesis, n)
    ref_grams = _ngram_counts(reference, n)
    matched = sum(min(count, ref_grams[gram]) for gram, count in hyp_grams.items())
    n_hyp = sum(hyp_grams.values())
    n_ref = sum(ref_grams.values())
    precision = matched / n_hyp if n_hyp else 0.0
    recall = matched / n_ref if n_ref else 0.0
    if mode == "recall":
        return recall
    if mode != "f1":
        raise ValueError(f"mode must be 'f1' or 'recall', got {mode!r}")
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # Rolling one-row DP over token sequences.
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        current = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                current[j] = previous[j - 1] + 1
            else:
                current[j] = max(previous[j], current[j - 1])
        previous = current
    return previous[len(b)]


def rouge_l(hypothesis: Sequence[str], reference: Sequence[str], mode: str = "f1") -> float:
    """Longest-common-subsequence F1 (or recall with mode="recall")."""
    if not hypothesis or not reference:
        return 0.0
    lcs = _lcs_length(hypothesis, reference)
    precision = lcs / len(hypothesis)
    recall = lcs / len(reference)
    if mode == "recall":
        return recall
    if mode != "f1":
        raise ValueError(f"mode must be 'f1' or 'recall', got {mode!r}")
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def recall_at_k(ranked: RankedList, target: str, k: int) -> float:
    """1.0 iff the target appears in the first k entries."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return 1.0 if target in [doc_id for doc_id, _ in ranked.entries[:k]] else 0.0


def mrr(ranked: RankedList, target: str, cutoff: int) -> float:
    """Reciprocal rank of the target within the cutoff, else 0."""
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    rank = ranked.rank_of(target)
    if rank is None or rank > cutoff:
        return 0.0
    return 1.0 / rank


def first_relevant_rank(ranked: RankedList, relevant: set[str]) -> int | None:
    """1-based rank of the first relevant doc, for qrels-style evaluation."""
    for rank, (doc_id, _) in enumerate(ranked.entries, start=1):
        if doc_id in relevant:
            return rank
    return None


class TTestResult(NamedTuple):
    t: float
    p: float
    degenerate: bool = False


def t_test_independent(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Equal-variance two-sample t statistic and two-sided p value.

    p comes from the Student CDF evaluated via the regularized incomplete
    beta function.  Zero pooled variance with unequal means degenerates
    to p = 0 (flagged); with equal means, t = 0 and p = 1.
    """
    n_a, n_b = len(a), len(b)
    if n_a < 2 or n_b < 2:
        raise ValueError("each sample needs at least two observations")
    mean_a = sum(a) / n_a
    mean_b = sum(b) / n_b
    var_a = sum((x - mean_a) ** 2 for x in a) / (n_a - 1)
    var_b = sum((x - mean_b) ** 2 for x in b) / (n_b - 1)
    df = n_a + n_b - 2
    pooled = ((n_a - 1) * var_a + (n_b - 1) * var_b) / df
    if pooled <= 0.0:
        if mean_a == mean_b:
            return TTestResult(0.0, 1.0, degenerate=True)
        return TTestResult(math.copysign(math.inf, mean_a - mean_b), 0.0, degenerate=True)
    t = (mean_a - mean_b) / math.sqrt(pooled * (1.0 / n_a + 1.0 / n_b))
    p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return TTestResult(t, p, degenerate=False)


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by the standard continued-fraction expansion."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    # The continued fraction converges fast for x < (a+1)/(a+b+2).
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    max_iterations = 300
    tiny = 1e-300
    eps = 1e-15
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iterations + 1):
        m2 = 2 * m
        numerator = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        numerator = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")
