"""TF-IDF note/summary similarity ranking and corpus length statistics.

Notes and summaries are turned into sparse TF-IDF vectors, scored by
cosine similarity and sorted, so that weakly aligned note/summary pairs
can be dropped from a training corpus by keeping only the top-k.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np
from scipy import sparse

from .errors import InputError

__all__ = [
    "SparseVector",
    "TfidfModel",
    "RankedPair",
    "CorpusStats",
    "fit_tfidf",
    "tf",
    "tfidf_vector",
    "cosine_similarity",
    "rank_pairs",
    "select_top_k",
    "corpus_stats",
    "length_histogram",
    "write_ranking",
]

SparseVector = dict[int, float]
Term = Hashable


@dataclass(frozen=True)
class TfidfModel:
    term_index: dict[Term, int]
    doc_count: int
    doc_freq: tuple[int, ...]
    smoothing: float = 1.0

    def idf(self, term: Term) -> float:
        """``ln(|D| / (df + smoothing))`` clamped at 0; 0 for unknown terms."""
        tid = self.term_index.get(term)
        if tid is None:
            return 0.0
        denom = self.doc_freq[tid] + self.smoothing
        if denom <= 0:
            return 0.0
        return max(0.0, math.log(self.doc_count / denom))


def fit_tfidf(documents: Sequence[Sequence[Term]], smoothing: float = 1.0) -> TfidfModel:
    if not documents:
        raise InputError("cannot fit TF-IDF on an empty document list")
    if smoothing < 0:
        raise InputError(f"smoothing must be >= 0, got {smoothing}")
    term_index: dict[Term, int] = {}
    df: list[int] = []
    for doc in documents:
        for term in set(doc):
            tid = term_index.get(term)
            if tid is None:
                term_index[term] = len(df)
                df.append(1)
            else:
                df[tid] += 1
    return TfidfModel(term_index, len(documents), tuple(df), float(smoothing))


def tf(doc: Sequence[Term], term: Term) -> float:
    """Occurrences of ``term`` divided by the document length."""
    if not doc:
        raise InputError("term frequency is undefined for an empty document")
    return sum(1 for t in doc if t == term) / len(doc)


def tfidf_vector(model: TfidfModel, doc: Sequence[Term]) -> SparseVector:
    if not doc:
        return {}
    n = len(doc)
    vec: SparseVector = {}
    for term, count in Counter(doc).items():
        weight = count / n * model.idf(term)
        if weight > 0:
            vec[model.term_index[term]] = weight
    return vec


def cosine_similarity(u: SparseVector, v: SparseVector) -> float:
    nu = math.sqrt(sum(w * w for w in u.values()))
    nv = math.sqrt(sum(w * w for w in v.values()))
    if nu == 0 or nv == 0:
        return 0.0
    if len(u) > len(v):
        u, v = v, u
    dot = sum(w * v.get(t, 0.0) for t, w in u.items())
    return min(1.0, max(0.0, dot / (nu * nv)))


@dataclass(frozen=True)
class RankedPair:
    note_id: Hashable
    summary_id: Hashable
    similarity: float
    note_pos: int
    summary_pos: int


def _normalized_rows(vectors: Sequence[SparseVector], width: int) -> sparse.csr_matrix:
    rows, cols, vals = [], [], []
    for r, vec in enumerate(vectors):
        norm = math.sqrt(sum(w * w for w in vec.values()))
        if norm == 0:
            continue
        for tid, w in vec.items():
            rows.append(r)
            cols.append(tid)
            vals.append(w / norm)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(len(vectors), width))


def rank_pairs(
    model: TfidfModel,
    notes: Sequence[Sequence[Term]],
    summaries: Sequence[Sequence[Term]],
    pairing: str = "aligned",
    note_ids: Sequence[Hashable] | None = None,
    summary_ids: Sequence[Hashable] | None = None,
) -> list[RankedPair]:
    """Score note/summary pairs and sort by descending similarity.

    ``aligned`` scores ``(note_i, summary_i)`` only; ``cross`` scores every
    note against every summary. Ties keep input order (note position, then
    summary position). Ids default to positions.
    """
    if pairing not in ("aligned", "cross"):
        raise InputError(f"pairing must be 'aligned' or 'cross', got {pairing!r}")
    if pairing == "aligned" and len(notes) != len(summaries):
        raise InputError(
            f"aligned pairing needs equal counts, got {len(notes)} notes "
            f"and {len(summaries)} summaries"
        )
    note_ids = list(range(len(notes))) if note_ids is None else list(note_ids)
    summary_ids = list(range(len(summaries))) if summary_ids is None else list(summary_ids)
    width = len(model.term_index)
    N = _normalized_rows([tfidf_vector(model, d) for d in notes], width)
    S = _normalized_rows([tfidf_vector(model, d) for d in summaries], width)

    if pairing == "aligned":
        sims = np.asarray(N.multiply(S).sum(axis=1)).ravel()
        pos = [(i, i) for i in range(len(notes))]
    else:
        sims = (N @ S.T).toarray().ravel()
        m = len(summaries)
        pos = [(i, j) for i in range(len(notes)) for j in range(m)]
    sims = np.clip(sims, 0.0, 1.0)
    # stable sort on -similarity keeps the input (note, summary) order for ties
    order = np.argsort(-sims, kind="stable")
    return [
        RankedPair(note_ids[pos[k][0]], summary_ids[pos[k][1]], float(sims[k]), *pos[k])
        for k in order
    ]


def select_top_k(ranking: Sequence[RankedPair], k: int) -> list[Hashable]:
    """First ``k`` distinct note ids in ranking order."""
    if k < 0:
        raise InputError(f"k must be >= 0, got {k}")
    seen: dict[Hashable, None] = {}
    for pair in ranking:
        if len(seen) >= k:
            break
        seen.setdefault(pair.note_id, None)
    return list(seen)


@dataclass(frozen=True)
class CorpusStats:
    count: int
    mean: float
    variance: float
    std: float

    def display(self) -> dict[str, int]:
        return {
            "Samples": self.count,
            "Variance": round(self.variance),
            "Mean": round(self.mean),
            "Standard Deviation": round(self.std),
        }


def corpus_stats(lengths: Sequence[int]) -> CorpusStats:
    """Count, mean, population variance and standard deviation."""
    if len(lengths) == 0:
        raise InputError("corpus_stats needs at least one length")
    x = np.asarray(lengths, dtype=np.float64)
    mean = float(x.mean())
    var = float(((x - mean) ** 2).mean())
    return CorpusStats(len(x), mean, var, math.sqrt(var))


def length_histogram(lengths: Sequence[int], bins: int = 20) -> list[tuple[float, int]]:
    """Equal-width histogram as ``(bin_lower, count)`` rows."""
    if len(lengths) == 0:
        raise InputError("histogram needs at least one length")
    counts, edges = np.histogram(np.asarray(lengths, dtype=np.float64), bins=bins)
    return [(float(lo), int(c)) for lo, c in zip(edges[:-1], counts)]


def write_ranking(ranking: Sequence[RankedPair], fh) -> None:
    for pair in ranking:
        fh.write(f"{pair.note_id}\t{pair.summary_id}\t{pair.similarity:.12f}\n")
