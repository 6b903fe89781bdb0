"""Tokenizer, vocabulary and the next-token language-model interface.

The tokenizer is intentionally simple: lowercase, split on whitespace and
detach punctuation. Token ids are dense, with ``<eos>`` at 0 and ``<unk>``
at 1. The reference language model is a smoothed n-gram model
(:class:`NgramLm`) with an optional in-context cache component.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import InputError, VocabularyError

__all__ = [
    "EOS",
    "UNK",
    "Vocabulary",
    "LanguageModel",
    "NgramLm",
    "words",
    "tokenize",
    "detokenize",
    "train_ngram",
    "next_distribution",
    "check_distribution",
]

EOS = "<eos>"
UNK = "<unk>"

# special markers first so "<unk>" survives a detokenize/tokenize round trip
_TOKEN_RE = re.compile(r"<eos>|<unk>|\w+|[^\w\s]")


class Vocabulary:
    """Bidirectional token-string <-> token-id mapping.

    Ids are dense in ``[0, len(vocab))``. The first two entries are always
    the reserved end-of-sequence and unknown markers.
    """

    eos_id = 0
    unk_id = 1

    def __init__(self, tokens: Iterable[str] = ()):
        self.tokens: list[str] = [EOS, UNK]
        self.index: dict[str, int] = {EOS: 0, UNK: 1}
        for tok in tokens:
            self.add(tok)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)})"

    def add(self, token: str) -> int:
        tid = self.index.get(token)
        if tid is None:
            tid = len(self.tokens)
            self.tokens.append(token)
            self.index[token] = tid
        return tid

    def lookup(self, token: str) -> int:
        """Id of ``token``, or ``unk_id`` when it is out of vocabulary."""
        return self.index.get(token, self.unk_id)

    def token(self, tid: int) -> str:
        if not 0 <= tid < len(self.tokens):
            raise VocabularyError(
                f"token id {tid} outside vocabulary of size {len(self.tokens)}"
            )
        return self.tokens[tid]

    def copy(self) -> "Vocabulary":
        return Vocabulary(self.tokens[2:])

    def save(self, path: str | Path) -> None:
        """One token per line; line number (0-based) is the token id."""
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if lines[:2] != [EOS, UNK]:
            raise VocabularyError(
                f"{path}: first two lines must be {EOS!r} and {UNK!r}"
            )
        if len(set(lines)) != len(lines):
            raise VocabularyError(f"{path}: duplicate tokens")
        return cls(lines[2:])


def words(text: str) -> list[str]:
    """Split ``text`` into lowercase word and punctuation tokens."""
    return _TOKEN_RE.findall(text.lower())


def tokenize(text: str, vocab: Vocabulary, mode: str = "open") -> list[int]:
    """Tokenize ``text`` into ids.

    In ``"open"`` mode unseen tokens are appended to ``vocab``; in
    ``"closed"`` mode they map to ``vocab.unk_id`` and ``vocab`` is left
    untouched.
    """
    if mode == "open":
        return [vocab.add(w) for w in words(text)]
    if mode == "closed":
        return [vocab.lookup(w) for w in words(text)]
    raise InputError(f"unknown vocab mode {mode!r} (expected 'open' or 'closed')")


def detokenize(seq: Sequence[int], vocab: Vocabulary) -> str:
    return " ".join(vocab.token(int(t)) for t in seq)


def check_distribution(probs: np.ndarray, atol: float = 1e-9) -> None:
    """Raise ``ValueError`` unless ``probs`` is a valid probability vector."""
    if probs.ndim != 1 or probs.size == 0:
        raise ValueError("distribution must be a non-empty 1-D array")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ValueError("distribution has negative or non-finite entries")
    total = float(probs.sum())
    if abs(total - 1.0) > atol:
        raise ValueError(f"distribution sums to {total!r}, not 1")


@runtime_checkable
class LanguageModel(Protocol):
    """Anything that maps a context to a next-token distribution.

    Implementations must be deterministic and safe to call concurrently
    once constructed.
    """

    def next_distribution(self, context: Sequence[int]) -> np.ndarray: ...

    def vocabulary(self) -> Vocabulary: ...


def next_distribution(lm: LanguageModel, context: Sequence[int]) -> np.ndarray:
    return lm.next_distribution(context)


class NgramLm:
    """Smoothed n-gram model with optional in-context cache.

    Unigram probabilities are add-``alpha`` (Laplace) estimates over the
    full vocabulary. Each higher order interpolates toward the next-lower
    order with ``alpha`` pseudo-counts::

        p(w | h) = (c(h, w) + alpha * p_lower(w)) / (c(h) + alpha)

    and backs off entirely to the lower order when ``h`` was never seen.
    Every token therefore keeps nonzero probability, and as ``alpha``
    grows the distribution tends to uniform.

    With ``cache_weight > 0`` the model also looks inside the context it is
    given: if the last ``order - 1`` tokens occurred earlier in the context,
    the tokens that followed them there form a cache distribution that is
    mixed in with weight ``cache_weight``. This is what lets the model
    "read" a reference chunk placed in front of the prompt, which a plain
    trigram cannot do beyond its two-token history.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        ngram_counts: dict[tuple[int, ...], int],
        order: int = 3,
        alpha: float = 1.0,
        cache_weight: float = 0.0,
    ):
        if order < 1:
            raise InputError(f"order must be >= 1, got {order}")
        if not alpha > 0:
            raise InputError(f"alpha must be > 0, got {alpha}")
        if not 0.0 <= cache_weight < 1.0:
            raise InputError(f"cache_weight must be in [0, 1), got {cache_weight}")
        self.vocab = vocab
        self.order = order
        self.alpha = float(alpha)
        self.cache_weight = float(cache_weight)
        self.ngram_counts = dict(ngram_counts)
        self._build_tables()

    def _build_tables(self) -> None:
        size = len(self.vocab)
        unigram = np.zeros(size)
        grouped: list[dict[tuple[int, ...], dict[int, int]]] = [
            defaultdict(dict) for _ in range(self.order)
        ]
        for gram, count in self.ngram_counts.items():
            if not 1 <= len(gram) <= self.order:
                raise InputError(f"n-gram {gram} longer than model order {self.order}")
            if any(not 0 <= t < size for t in gram):
                raise VocabularyError(f"n-gram {gram} has ids outside the vocabulary")
            if len(gram) == 1:
                unigram[gram[0]] += count
            else:
                grouped[len(gram) - 1][gram[:-1]][gram[-1]] = count
        total = unigram.sum()
        self._unigram = (unigram + self.alpha) / (total + self.alpha * size)
        self._tables: list[dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]]] = [{}]
        for k in range(1, self.order):
            table = {}
            for hist, followers in grouped[k].items():
                ids = np.fromiter(followers.keys(), dtype=np.int64, count=len(followers))
                cnt = np.fromiter(followers.values(), dtype=np.float64, count=len(followers))
                table[hist] = (ids, cnt)
            self._tables.append(table)

    def vocabulary(self) -> Vocabulary:
        return self.vocab

    def ngram_distribution(self, context: Sequence[int]) -> np.ndarray:
        """Smoothed n-gram estimate, ignoring the cache component."""
        probs = self._unigram.copy()
        ctx = tuple(int(t) for t in context[-(self.order - 1):]) if self.order > 1 else ()
        for k in range(1, self.order):
            if len(ctx) < k:
                break
            entry = self._tables[k].get(ctx[len(ctx) - k:])
            if entry is None:
                break
            ids, cnt = entry
            denom = cnt.sum() + self.alpha
            probs *= self.alpha / denom
            probs[ids] += cnt / denom
        return probs

    def cache_followers(self, context: np.ndarray) -> np.ndarray:
        """Tokens that followed earlier occurrences of the current history."""
        m = self.order - 1
        n = context.size
        if n <= m:
            return context[:0]
        if m == 0:
            return context
        mask = np.ones(n - m, dtype=bool)
        for j in range(m):
            mask &= context[j:n - m + j] == context[n - m + j]
        return context[m:][mask]

    def next_distribution(self, context: Sequence[int]) -> np.ndarray:
        ctx = np.asarray(context, dtype=np.int64)
        if ctx.size and (ctx.min() < 0 or ctx.max() >= len(self.vocab)):
            raise VocabularyError("context contains ids outside the model vocabulary")
        probs = self.ngram_distribution(ctx.tolist())
        if self.cache_weight > 0.0:
            followers = self.cache_followers(ctx)
            if followers.size:
                cache = np.bincount(followers, minlength=len(self.vocab)) / followers.size
                probs = (1.0 - self.cache_weight) * probs + self.cache_weight * cache
        return probs

    # serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "nbcesum-ngram",
            "version": 1,
            "order": self.order,
            "alpha": self.alpha,
            "cache_weight": self.cache_weight,
            "tokens": self.vocab.tokens,
            "ngrams": [[*gram, count] for gram, count in sorted(self.ngram_counts.items())],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NgramLm":
        if data.get("format") != "nbcesum-ngram" or data.get("version") != 1:
            raise InputError("not an nbcesum n-gram model file (format/version mismatch)")
        tokens = data["tokens"]
        if tokens[:2] != [EOS, UNK]:
            raise VocabularyError("model vocabulary must start with <eos>, <unk>")
        vocab = Vocabulary(tokens[2:])
        counts = {tuple(row[:-1]): int(row[-1]) for row in data["ngrams"]}
        return cls(
            vocab,
            counts,
            order=int(data["order"]),
            alpha=float(data["alpha"]),
            cache_weight=float(data.get("cache_weight", 0.0)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "NgramLm":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read language model {path}: {exc}") from exc
        return cls.from_dict(data)


def train_ngram(
    corpus: Sequence[Sequence[int]],
    vocab: Vocabulary,
    order: int = 3,
    alpha: float = 1.0,
    cache_weight: float = 0.0,
) -> NgramLm:
    """Count n-grams up to ``order`` over ``corpus`` and build an :class:`NgramLm`.

    EOS is appended to every sequence. The vocabulary is copied so later
    open-mode tokenization cannot change the model's distribution size.
    """
    if not corpus:
        raise InputError("cannot train an n-gram model on an empty corpus")
    if order < 1:
        raise InputError(f"order must be >= 1, got {order}")
    counts: dict[tuple[int, ...], int] = defaultdict(int)
    eos = vocab.eos_id
    for seq in corpus:
        toks = [int(t) for t in seq] + [eos]
        for i in range(len(toks)):
            for k in range(min(order, i + 1)):
                counts[tuple(toks[i - k:i + 1])] += 1
    return NgramLm(vocab.copy(), counts, order=order, alpha=alpha, cache_weight=cache_weight)
