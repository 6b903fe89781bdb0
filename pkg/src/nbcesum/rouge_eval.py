"""ROUGE-L precision/recall/F1 from token-level longest common subsequence."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "RougeScore",
    "BatchReport",
    "lcs_length",
    "rouge_l",
    "batch_evaluate",
    "HIST_EDGES",
]

# 20 bins of width 0.05 over [0, 1]; 1.0 falls into the last bin
HIST_EDGES = np.linspace(0.0, 1.0, 21)


def lcs_length(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Length of the longest common subsequence.

    Two-row dynamic program over the shorter sequence, so memory is
    ``O(min(len(a), len(b)))``.
    """
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return 0
    prev = [0] * (len(b) + 1)
    cur = [0] * (len(b) + 1)
    for x in a:
        for j, y in enumerate(b, 1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = cur[j - 1] if cur[j - 1] > prev[j] else prev[j]
        prev, cur = cur, prev
    return prev[len(b)]


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float
    lcs_len: int
    gen_len: int
    ref_len: int


def rouge_l(generated: Sequence[Hashable], reference: Sequence[Hashable]) -> RougeScore:
    """Precision is LCS over generated length, recall LCS over reference length."""
    lcs = lcs_length(generated, reference)
    p = lcs / len(generated) if generated else 0.0
    r = lcs / len(reference) if reference else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return RougeScore(p, r, f1, lcs, len(generated), len(reference))


@dataclass
class BatchReport:
    per_sample: list[RougeScore]
    mean_precision: float
    mean_recall: float
    mean_f1: float

    def histogram(self, metric: str) -> list[tuple[float, int]]:
        """``(bin_lower, count)`` over fixed 0.05-wide bins on [0, 1]."""
        if metric not in ("precision", "recall", "f1"):
            raise InputError(f"unknown metric {metric!r}")
        values = [getattr(s, metric) for s in self.per_sample]
        counts, _ = np.histogram(values, bins=HIST_EDGES)
        return [(round(float(lo), 2), int(c)) for lo, c in zip(HIST_EDGES[:-1], counts)]


def batch_evaluate(
    pairs: Sequence[tuple[Sequence[Hashable], Sequence[Hashable]]],
) -> BatchReport:
    """Score ``(generated, reference)`` pairs in order and average the fields."""
    if not pairs:
        raise InputError("batch_evaluate needs at least one pair")
    scores = [rouge_l(g, r) for g, r in pairs]
    n = len(scores)
    return BatchReport(
        scores,
        sum(s.precision for s in scores) / n,
        sum(s.recall for s in scores) / n,
        sum(s.f1 for s in scores) / n,
    )
