"""Min-entropy parallel-context decoding over record chunks.

A long record is split into one chunk per entry, a length-stratified
sample of chunks is kept, and generation proceeds one token at a time:
every chunk is scored independently as ``chunk ++ prompt ++ generated``,
the chunk whose next-token distribution has the lowest Shannon entropy
wins the step, and the greedy token from that distribution is appended to
the continuation shared by all chunks.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import ContextWindowError, InputError, InvariantError
from .tokenizer_lm import LanguageModel, Vocabulary, tokenize

__all__ = [
    "ContextChunk",
    "DecoderConfig",
    "StepTrace",
    "split_into_chunks",
    "length_strata",
    "sample_chunks",
    "shannon_entropy",
    "decode_step",
    "decode_chunks",
    "decode",
    "write_trace",
]

PROMPT_ONLY_INDEX = -1


@dataclass(frozen=True)
class ContextChunk:
    source_index: int
    tokens: tuple[int, ...]
    entry_index: int = 0

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class DecoderConfig:
    context_window: int = 2048
    max_new_tokens: int = 256
    sampling_rate: float = 0.15
    num_strata: int = 4
    seed: int = 0
    include_prompt_only_context: bool = False
    selection: str = "min_entropy"

    def __post_init__(self):
        if not 0.0 < self.sampling_rate <= 1.0:
            raise InputError(f"sampling_rate must be in (0, 1], got {self.sampling_rate}")
        if self.max_new_tokens < 1:
            raise InputError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")
        if self.context_window < 16:
            raise InputError(f"context_window must be >= 16, got {self.context_window}")
        if self.num_strata < 1:
            raise InputError(f"num_strata must be >= 1, got {self.num_strata}")
        if self.selection != "min_entropy":
            raise InputError(f"unsupported selection strategy {self.selection!r}")

    def chunk_budget(self, prompt_len: int) -> int:
        return self.context_window - prompt_len - self.max_new_tokens


@dataclass
class StepTrace:
    """What happened at one generation step.

    ``entropies`` and ``context_lengths`` are aligned with ``source_indices``
    (the chunks in the order they were scored).
    """

    step: int
    source_indices: list[int]
    entropies: list[float]
    selected_chunk: int
    emitted_token: int
    context_lengths: list[int] = field(default_factory=list)

    def to_record(self, vocab: Vocabulary | None = None) -> dict:
        token = vocab.token(self.emitted_token) if vocab is not None else self.emitted_token
        return {
            "step": self.step,
            "selected_chunk": self.selected_chunk,
            "entropies": self.entropies,
            "token": token,
        }


def split_into_chunks(
    record: Sequence[str],
    vocab: Vocabulary,
    config: DecoderConfig,
    prompt: Sequence[int] = (),
    mode: str = "closed",
) -> list[ContextChunk]:
    """Tokenize record entries into chunks that fit the context budget.

    Each non-empty entry becomes one chunk. An entry longer than
    ``context_window - len(prompt) - max_new_tokens`` is cut into
    consecutive budget-sized pieces. Source indices follow entry order;
    empty entries are skipped but still consume their index, and every
    extra piece of a split entry takes one more index, so indices stay
    unique and ordered.
    """
    if not record:
        raise InputError("record has no entries")
    budget = config.chunk_budget(len(prompt))
    if budget < 1:
        raise ContextWindowError(
            f"prompt ({len(prompt)} tokens) plus max_new_tokens ({config.max_new_tokens}) "
            f"leaves no room in a {config.context_window}-token context window"
        )
    chunks: list[ContextChunk] = []
    next_index = 0
    for entry_index, entry in enumerate(record):
        ids = tokenize(entry, vocab, mode)
        if not ids:
            next_index += 1
            continue
        for start in range(0, len(ids), budget):
            chunks.append(ContextChunk(next_index, tuple(ids[start:start + budget]), entry_index))
            next_index += 1
    if not chunks:
        raise InputError("every entry in the record is empty")
    return chunks


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def length_strata(chunks: Sequence[ContextChunk], num_strata: int) -> list[list[ContextChunk]]:
    """Partition chunks into ``num_strata`` quantile bins of token length.

    Chunks are ranked by (length, source_index); rank ``r`` of ``n`` goes to
    bin ``floor(r * num_strata / n)``. Bins may be empty when there are
    fewer chunks than strata.
    """
    ranked = sorted(chunks, key=lambda c: (len(c.tokens), c.source_index))
    n = len(ranked)
    bins: list[list[ContextChunk]] = [[] for _ in range(num_strata)]
    for r, chunk in enumerate(ranked):
        bins[r * num_strata // n].append(chunk)
    return bins


def sample_chunks(chunks: Sequence[ContextChunk], config: DecoderConfig) -> list[ContextChunk]:
    """Length-stratified sampling without replacement.

    From each non-empty bin, ``round(sampling_rate * bin_size)`` chunks
    (half rounds up, at least one) are drawn uniformly. The result is
    ordered by source index and depends only on ``config.seed``.
    """
    if not chunks:
        raise InputError("no chunks to sample")
    if config.sampling_rate >= 1.0:
        return sorted(chunks, key=lambda c: c.source_index)
    rng = np.random.default_rng(config.seed & 0xFFFF_FFFF_FFFF_FFFF)
    picked: list[ContextChunk] = []
    for bin_ in length_strata(chunks, config.num_strata):
        if not bin_:
            continue
        k = min(len(bin_), max(1, _round_half_up(config.sampling_rate * len(bin_))))
        for i in rng.choice(len(bin_), size=k, replace=False):
            picked.append(bin_[int(i)])
    return sorted(picked, key=lambda c: c.source_index)


def shannon_entropy(probs: np.ndarray) -> float:
    """Entropy in nats, with 0 * log 0 taken as 0."""
    p = np.asarray(probs, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum()) + 0.0


def _scoring_contexts(chunks, prompt, generated, include_prompt_only):
    tail = list(prompt) + list(generated)
    contexts = [(c.source_index, list(c.tokens) + tail) for c in chunks]
    if include_prompt_only:
        contexts.insert(0, (PROMPT_ONLY_INDEX, tail))
    return contexts


def decode_step(
    lm: LanguageModel,
    prompt: Sequence[int],
    generated: Sequence[int],
    chunks: Sequence[ContextChunk],
    *,
    step: int = 0,
    context_window: int | None = None,
    include_prompt_only_context: bool = False,
    executor: Executor | None = None,
) -> StepTrace:
    """Score every chunk once and emit one token.

    Ties in entropy go to the lowest source index; the emitted token is the
    argmax (lowest id on ties) of the selected chunk's distribution.
    """
    if not chunks and not include_prompt_only_context:
        raise InputError("decode_step needs at least one chunk")
    contexts = _scoring_contexts(chunks, prompt, generated, include_prompt_only_context)
    if context_window is not None:
        for source_index, ctx in contexts:
            if len(ctx) > context_window:
                raise ContextWindowError(
                    f"chunk {source_index}: context of {len(ctx)} tokens exceeds "
                    f"the {context_window}-token window",
                    source_index,
                )
    if executor is not None:
        dists = list(executor.map(lm.next_distribution, [ctx for _, ctx in contexts]))
    else:
        dists = [lm.next_distribution(ctx) for _, ctx in contexts]
    entropies = [shannon_entropy(d) for d in dists]

    best = None
    for pos, (source_index, _) in enumerate(contexts):
        key = (entropies[pos], source_index)
        if best is None or key < best[0]:
            best = (key, pos)
    chosen = best[1]
    return StepTrace(
        step=step,
        source_indices=[s for s, _ in contexts],
        entropies=entropies,
        selected_chunk=contexts[chosen][0],
        emitted_token=int(np.argmax(dists[chosen])),
        context_lengths=[len(ctx) for _, ctx in contexts],
    )


def decode_chunks(
    lm: LanguageModel,
    prompt: Sequence[int],
    chunks: Sequence[ContextChunk],
    config: DecoderConfig,
    executor: Executor | None = None,
) -> tuple[list[int], list[StepTrace]]:
    """Run the step loop over already prepared chunks (no splitting or sampling)."""
    if not chunks:
        raise InputError("no chunks to decode from")
    if len({c.source_index for c in chunks}) != len(chunks):
        raise InputError("chunk source indices must be unique")
    eos = lm.vocabulary().eos_id
    for c in chunks:
        need = len(c.tokens) + len(prompt) + config.max_new_tokens
        if need > config.context_window:
            raise ContextWindowError(
                f"chunk {c.source_index}: {len(c.tokens)} chunk + {len(prompt)} prompt + "
                f"{config.max_new_tokens} new tokens exceeds the "
                f"{config.context_window}-token window",
                c.source_index,
            )
    generated: list[int] = []
    traces: list[StepTrace] = []
    for step in range(config.max_new_tokens):
        trace = decode_step(
            lm,
            prompt,
            generated,
            chunks,
            step=step,
            context_window=config.context_window,
            include_prompt_only_context=config.include_prompt_only_context,
            executor=executor,
        )
        selected = trace.entropies[trace.source_indices.index(trace.selected_chunk)]
        if selected > min(trace.entropies):
            raise InvariantError(f"step {step}: selected chunk is not the entropy minimum")
        traces.append(trace)
        if trace.emitted_token == eos:
            break
        generated.append(trace.emitted_token)
    return generated, traces


def decode(
    lm: LanguageModel,
    prompt: Sequence[int],
    record: Sequence[str],
    config: DecoderConfig,
    executor: Executor | None = None,
) -> tuple[list[int], list[StepTrace]]:
    """Split ``record``, sample chunks and decode.

    Returns the generated ids (EOS excluded) and one trace per step.
    """
    chunks = split_into_chunks(record, lm.vocabulary(), config, prompt)
    return decode_chunks(lm, prompt, sample_chunks(chunks, config), config, executor)


def write_trace(
    traces: Iterable[StepTrace],
    out: str | Path | IO[str],
    vocab: Vocabulary | None = None,
    extra: dict | None = None,
) -> None:
    """Write one JSON object per step (``step``, ``selected_chunk``, ``entropies``, ``token``)."""
    lines = []
    for t in traces:
        rec = t.to_record(vocab)
        if extra:
            rec = {**extra, **rec}
        lines.append(json.dumps(rec) + "\n")
    if isinstance(out, (str, Path)):
        with open(out, "w", encoding="utf-8") as fh:
            fh.writelines(lines)
    else:
        out.writelines(lines)
