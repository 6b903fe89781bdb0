"""Dataset and run-configuration I/O, plus a seeded synthetic record generator.

Dataset files hold one JSON object per line::

    {"schema": 1, "id": "p0001", "entries": ["...", "..."], "summary": "..."}

``summary`` is optional (inference-only data). ``meta`` is an optional
free-form object carried through unchanged; the synthetic generator uses it
to record the planted note/summary overlap.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import DatasetError, InputError
from .nbce_decoder import DecoderConfig

__all__ = [
    "SCHEMA_VERSION",
    "SECTIONS",
    "PatientRecord",
    "RunConfig",
    "LengthParams",
    "load_dataset",
    "save_dataset",
    "load_run_config",
    "save_run_config",
    "sample_lengths",
    "generate_synthetic_dataset",
    "section_vocabulary",
    "filler_vocabulary",
]

SCHEMA_VERSION = 1


@dataclass
class PatientRecord:
    id: str
    entries: list[str]
    summary: str | None = None
    meta: dict[str, Any] | None = None

    def to_json(self) -> str:
        obj: dict[str, Any] = {"schema": SCHEMA_VERSION, "id": self.id, "entries": self.entries}
        if self.summary is not None:
            obj["summary"] = self.summary
        if self.meta is not None:
            obj["meta"] = self.meta
        return json.dumps(obj, ensure_ascii=False)


def _parse_record(line: str, lineno: int) -> PatientRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"invalid JSON ({exc.msg})", lineno) from None
    if not isinstance(obj, dict):
        raise DatasetError("record must be a JSON object", lineno)
    if obj.get("schema") != SCHEMA_VERSION:
        raise DatasetError(f"schema must be {SCHEMA_VERSION}, got {obj.get('schema')!r}", lineno)
    rid = obj.get("id")
    if not isinstance(rid, str) or not rid:
        raise DatasetError("id must be a non-empty string", lineno)
    entries = obj.get("entries")
    if not isinstance(entries, list) or not all(isinstance(e, str) for e in entries):
        raise DatasetError("entries must be a list of strings", lineno)
    summary = obj.get("summary")
    if "summary" in obj and not isinstance(summary, str):
        raise DatasetError("summary must be a string when present", lineno)
    meta = obj.get("meta")
    if "meta" in obj and not isinstance(meta, dict):
        raise DatasetError("meta must be an object when present", lineno)
    return PatientRecord(rid, entries, summary, meta)


def load_dataset(path: str | Path) -> list[PatientRecord]:
    """Read and validate a dataset file; errors cite 1-based line numbers."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc.strerror}") from exc
    lines = text.splitlines()
    if not lines:
        raise DatasetError(f"dataset {path} is empty")
    records: list[PatientRecord] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(lines, 1):
        rec = _parse_record(line, lineno)
        if rec.id in seen:
            raise DatasetError(
                f"duplicate id {rec.id!r} (first seen on line {seen[rec.id]})", lineno
            )
        seen[rec.id] = lineno
        records.append(rec)
    return records


def save_dataset(records: Iterable[PatientRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


# run configuration ---------------------------------------------------------


@dataclass
class RunConfig:
    context_window: int = 2048
    max_new_tokens: int = 256
    sampling_rate: float = 0.15
    num_strata: int = 4
    seed: int = 0
    include_prompt_only_context: bool = False
    selection: str = "min_entropy"
    dataset: str | None = None
    vocabulary: str | None = None
    output: str | None = None
    trace: str | None = None
    order: int = 3
    alpha: float = 1.0
    cache_weight: float = 0.4
    prompt: str = "summary :"

    def __post_init__(self):
        self.to_decoder_config()
        if self.order < 1:
            raise InputError(f"order must be >= 1, got {self.order}")
        if not self.alpha > 0:
            raise InputError(f"alpha must be > 0, got {self.alpha}")
        if not 0.0 <= self.cache_weight < 1.0:
            raise InputError(f"cache_weight must be in [0, 1), got {self.cache_weight}")

    def to_decoder_config(self) -> DecoderConfig:
        names = {f.name for f in dataclasses.fields(DecoderConfig)}
        return DecoderConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def validate_paths(self) -> None:
        for name in ("dataset", "vocabulary"):
            value = getattr(self, name)
            if value is not None and not Path(value).is_file():
                raise InputError(f"{name} file not found: {value}")
        for name in ("output", "trace"):
            value = getattr(self, name)
            if value is not None and not Path(value).resolve().parent.is_dir():
                raise InputError(f"{name} directory does not exist: {value}")


def _coerce(name: str, raw: str, default: Any) -> Any:
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise InputError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise InputError(f"{name}: cannot parse {raw!r}") from None
    return raw


def load_run_config(path: str | Path, validate_paths: bool = True) -> RunConfig:
    """Parse a flat ``key=value`` file whose keys are RunConfig field names."""
    defaults = RunConfig()
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values: dict[str, Any] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise InputError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw, getattr(defaults, key))
    cfg = RunConfig(**values)
    if validate_paths:
        cfg.validate_paths()
    return cfg


def save_run_config(cfg: RunConfig, path: str | Path) -> None:
    lines = [
        f"{k}={'' if v is None else str(v).lower() if isinstance(v, bool) else v}"
        for k, v in dataclasses.asdict(cfg).items()
        if v is not None
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# synthetic data --------------------------------------------------------------

SECTIONS = ("subjective", "objective", "history", "assessment", "medication", "plan")

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class LengthParams:
    """Target mean/std of entry token lengths (log-normal, floored at ``minimum``)."""

    mean: float = 40.0
    std: float = 30.0
    minimum: int = 1


def sample_lengths(rng: np.random.Generator, params: LengthParams, n: int) -> np.ndarray:
    """Integer lengths from a log-normal matched to ``params`` mean and std."""
    if params.mean <= 0 or params.std < 0:
        raise InputError("length mean must be > 0 and std >= 0")
    sigma2 = math.log1p((params.std / params.mean) ** 2)
    mu = math.log(params.mean) - sigma2 / 2
    raw = rng.lognormal(mu, math.sqrt(sigma2), size=n)
    return np.maximum(np.rint(raw).astype(np.int64), params.minimum)


def section_vocabulary(section: str, size: int = 40) -> list[str]:
    return [f"{section[:3]}{i:02d}" for i in range(size)]


def filler_vocabulary(size: int = 400) -> list[str]:
    out = []
    for c1 in _CONSONANTS:
        for v1 in _VOWELS:
            for c2 in _CONSONANTS:
                for v2 in _VOWELS:
                    out.append(c1 + v1 + c2 + v2)
                    if len(out) == size:
                        return out
    return out


def generate_synthetic_dataset(
    seed: int,
    n_patients: int,
    entry_length_params: LengthParams = LengthParams(),
    *,
    sections: Sequence[str] = SECTIONS,
    fact_len: int = 3,
    overlap_levels: Sequence[float] = (1.0, 0.25, 0.0),
    overlap_weights: Sequence[float] | None = None,
    sentence_len: int = 8,
) -> list[PatientRecord]:
    """Seeded synthetic records with planted note/summary overlap.

    Each record has one entry per section. An entry is filler sentences
    followed by ``"<section> : <fact words> ."``, where the fact words come
    from a section-specific vocabulary. The summary lists every section's
    fact in order. A record's planted overlap level ``q`` (stored in
    ``meta["overlap"]``) keeps that fraction of summary fact words; the
    rest are replaced by record-unique noise words that appear nowhere in
    the notes, so lower ``q`` means lower TF-IDF similarity.

    ``entry_length_params`` sets the total token length of each entry
    (the fact sentence always fits; filler absorbs the rest).
    """
    if n_patients < 1:
        raise InputError(f"n_patients must be >= 1, got {n_patients}")
    if fact_len < 1:
        raise InputError(f"fact_len must be >= 1, got {fact_len}")
    if overlap_weights is None:
        overlap_weights = [1.0 / len(overlap_levels)] * len(overlap_levels)
    weights = np.asarray(overlap_weights, dtype=np.float64)
    weights = weights / weights.sum()

    rng = np.random.default_rng(seed & 0xFFFF_FFFF_FFFF_FFFF)
    filler = filler_vocabulary()
    vocab_by_section = {s: section_vocabulary(s) for s in sections}
    fact_sentence_len = fact_len + 3  # header, ":", facts, "."
    width = len(str(n_patients - 1))

    records = []
    for p in range(n_patients):
        lengths = sample_lengths(rng, entry_length_params, len(sections))
        entries = []
        facts = []
        for section, length in zip(sections, lengths):
            fact = list(rng.choice(vocab_by_section[section], size=fact_len, replace=False))
            facts.append((section, fact))
            n_filler = max(0, int(length) - fact_sentence_len)
            words = list(rng.choice(filler, size=n_filler))
            sentences = [
                " ".join(words[i:i + sentence_len]) + " ."
                for i in range(0, len(words), sentence_len)
            ]
            entries.append(" ".join(sentences + [f"{section} : {' '.join(fact)} ."]))

        q = float(overlap_levels[rng.choice(len(overlap_levels), p=weights)])
        n_fact_words = fact_len * len(sections)
        n_noise = n_fact_words - int(math.floor(q * n_fact_words + 0.5))
        noisy = set(rng.choice(n_fact_words, size=n_noise, replace=False).tolist())
        parts = []
        k = 0
        for section, fact in facts:
            out = []
            for w in fact:
                out.append(f"noise{p}x{k}" if k in noisy else w)
                k += 1
            parts.append(f"{section} : {' '.join(out)} .")
        records.append(
            PatientRecord(
                id=f"p{p:0{width}d}",
                entries=entries,
                summary=" ".join(parts),
                meta={"overlap": q},
            )
        )
    return records
