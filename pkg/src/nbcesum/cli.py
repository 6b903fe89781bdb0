"""Command-line driver: denoise -> summarize -> evaluate, plus helpers.

Exit codes: 0 success, 1 invalid input, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import hashlib
import sys
from pathlib import Path
from typing import IO, Iterator, Sequence

from . import corpus_denoiser as cd
from .errors import InputError, InvariantError
from .nbce_decoder import decode, write_trace
from .record_io import (
    LengthParams,
    PatientRecord,
    RunConfig,
    generate_synthetic_dataset,
    load_dataset,
    load_run_config,
    save_dataset,
)
from .rouge_eval import batch_evaluate
from .tokenizer_lm import NgramLm, Vocabulary, detokenize, tokenize, train_ngram, words

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2


@contextlib.contextmanager
def _open_out(path: str | None) -> Iterator[IO[str]]:
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def record_seed(seed: int, record_id: str) -> int:
    """Stable per-record seed so records get independent chunk samples."""
    digest = hashlib.blake2b(f"{seed}:{record_id}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _note_text(rec: PatientRecord) -> str:
    return " ".join(rec.entries)


# denoise -------------------------------------------------------------------


def cmd_denoise(args: argparse.Namespace) -> int:
    records = load_dataset(args.dataset)
    missing = [r.id for r in records if r.summary is None]
    if missing:
        raise InputError(f"denoise needs summaries; record {missing[0]!r} has none")
    notes = [words(_note_text(r)) for r in records]
    summaries = [words(r.summary) for r in records]
    model = cd.fit_tfidf(notes + summaries, smoothing=args.smoothing)
    ids = [r.id for r in records]
    ranking = cd.rank_pairs(model, notes, summaries, args.pairing, ids, ids)

    top_k = len(records) if args.top_k is None else args.top_k
    selected = cd.select_top_k(ranking, top_k)
    by_id = {r.id: r for r in records}
    save_dataset([by_id[i] for i in selected], args.out)
    ranking_path = args.ranking or f"{args.out}.ranking.tsv"
    with open(ranking_path, "w", encoding="utf-8") as fh:
        cd.write_ranking(ranking, fh)
    print(f"ranked {len(ranking)} pairs, kept {len(selected)} of {len(records)} records",
          file=sys.stderr)
    return EXIT_OK


# stats ---------------------------------------------------------------------


def cmd_stats(args: argparse.Namespace) -> int:
    records = load_dataset(args.dataset)
    lengths = [len(words(e)) for r in records for e in r.entries]
    if not lengths:
        raise InputError("dataset has no entries")
    stats = cd.corpus_stats(lengths)
    print(f"count\t{stats.count}")
    print(f"mean\t{stats.mean:.6f}")
    print(f"variance\t{stats.variance:.6f}")
    print(f"std\t{stats.std:.6f}")
    for label, value in stats.display().items():
        print(f"# {label}\t{value:,}")
    print("bin_lower\tcount")
    for lower, count in cd.length_histogram(lengths, bins=20):
        print(f"{lower:.2f}\t{count}")
    return EXIT_OK


# train-lm ------------------------------------------------------------------


def build_lm_corpus(
    records: Sequence[PatientRecord], vocab: Vocabulary, source: str, prompt: str
) -> list[list[int]]:
    corpus: list[list[int]] = []
    if source in ("notes", "both"):
        corpus += [tokenize(e, vocab) for r in records for e in r.entries if e.strip()]
    if source in ("summaries", "both"):
        corpus += [tokenize(f"{prompt} {r.summary}", vocab) for r in records if r.summary]
    corpus = [seq for seq in corpus if seq]
    if not corpus:
        raise InputError(f"no training text found for source {source!r}")
    return corpus


def cmd_train_lm(args: argparse.Namespace) -> int:
    records = load_dataset(args.dataset)
    vocab = Vocabulary()
    corpus = build_lm_corpus(records, vocab, args.source, args.prompt)
    lm = train_ngram(corpus, vocab, args.order, args.alpha, args.cache_weight)
    lm.save(args.out)
    print(f"trained order-{lm.order} model on {len(corpus)} sequences, "
          f"vocabulary {len(lm.vocab)}", file=sys.stderr)
    return EXIT_OK


# summarize -----------------------------------------------------------------


def _run_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    overrides = {
        "prompt": args.prompt,
        "seed": args.seed,
        "sampling_rate": args.rate,
        "max_new_tokens": args.max_new_tokens,
        "trace": args.trace,
    }
    return dataclasses.replace(cfg, **{k: v for k, v in overrides.items() if v is not None})


def cmd_summarize(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    records = load_dataset(args.dataset)
    if args.lm:
        lm = NgramLm.load(args.lm)
    else:
        vocab = Vocabulary()
        corpus = build_lm_corpus(records, vocab, "notes", cfg.prompt)
        lm = train_ngram(corpus, vocab, cfg.order, cfg.alpha, cfg.cache_weight)
    vocab = lm.vocabulary()
    prompt = tokenize(cfg.prompt, vocab, "closed")
    base = cfg.to_decoder_config()

    trace_fh = open(cfg.trace, "w", encoding="utf-8") if cfg.trace else None
    try:
        with _open_out(args.out) as out:
            for rec in records:
                config = dataclasses.replace(base, seed=record_seed(cfg.seed, rec.id))
                try:
                    ids, traces = decode(lm, prompt, rec.entries, config)
                except InputError as exc:
                    msg = " ".join(str(exc).split())
                    out.write(f"{rec.id}\terror\t{msg}\n")
                    continue
                out.write(f"{rec.id}\tok\t{detokenize(ids, vocab)}\n")
                if trace_fh is not None:
                    write_trace(traces, trace_fh, vocab, extra={"id": rec.id})
    finally:
        if trace_fh is not None:
            trace_fh.close()
    return EXIT_OK


# evaluate ------------------------------------------------------------------


def read_generated(path: str | Path) -> list[tuple[str, str, str]]:
    rows = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read generated file {path}: {exc.strerror}") from exc
    for lineno, line in enumerate(lines, 1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) == 2:
            parts.append("")
        if len(parts) != 3:
            raise InputError(f"{path}:{lineno}: expected 'id<TAB>status<TAB>summary_text'")
        rows.append((parts[0], parts[1], parts[2]))
    if not rows:
        raise InputError(f"generated file {path} is empty")
    return rows


def cmd_evaluate(args: argparse.Namespace) -> int:
    generated = read_generated(args.generated)
    refs = {r.id: r.summary for r in load_dataset(args.dataset)}
    pairs = []
    for rid, status, text in generated:
        if rid not in refs:
            raise InputError(f"generated id {rid!r} not found in dataset")
        if refs[rid] is None:
            raise InputError(f"record {rid!r} has no reference summary")
        gen = words(text) if status == "ok" else []
        pairs.append((gen, words(refs[rid])))
    report = batch_evaluate(pairs)

    with _open_out(args.out) as out:
        out.write("id\tprecision\trecall\tf1\n")
        for (rid, _, _), s in zip(generated, report.per_sample):
            out.write(f"{rid}\t{s.precision:.6f}\t{s.recall:.6f}\t{s.f1:.6f}\n")
        out.write(f"MEAN\t{report.mean_precision:.6f}\t{report.mean_recall:.6f}"
                  f"\t{report.mean_f1:.6f}\n")
    if args.hist:
        for metric in ("precision", "recall", "f1"):
            with open(f"{args.hist}.{metric}.tsv", "w", encoding="utf-8") as fh:
                fh.write("bin_lower\tcount\n")
                for lower, count in report.histogram(metric):
                    fh.write(f"{lower:.2f}\t{count}\n")
    return EXIT_OK


# generate ------------------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    records = generate_synthetic_dataset(
        args.seed, args.n, LengthParams(args.mean, args.std)
    )
    save_dataset(records, args.out)
    return EXIT_OK


# entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nbcesum",
        description="Min-entropy parallel-context summarization of multi-entry records.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="rank note/summary pairs by TF-IDF cosine and keep the top-k")
    p.add_argument("dataset")
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--pairing", choices=("aligned", "cross"), default="aligned")
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--out", required=True, help="dataset file for the selected records")
    p.add_argument("--ranking", help="ranking TSV path (default: <out>.ranking.tsv)")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("stats", help="entry length statistics and histogram")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("summarize", help="generate one summary per record")
    p.add_argument("dataset")
    p.add_argument("--prompt")
    p.add_argument("--seed", type=int)
    p.add_argument("--rate", type=float)
    p.add_argument("--max-new-tokens", type=int)
    p.add_argument("--trace", help="write per-step JSON lines here")
    p.add_argument("--lm", help="saved n-gram model (default: train on the dataset's notes)")
    p.add_argument("--config", help="key=value run configuration file")
    p.add_argument("--out", help="output TSV (default: stdout)")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("evaluate", help="ROUGE-L of generated summaries against references")
    p.add_argument("generated")
    p.add_argument("dataset")
    p.add_argument("--hist", help="write <hist>.<metric>.tsv histograms")
    p.add_argument("--out", help="report TSV (default: stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train-lm", help="train and save the reference n-gram model")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--cache-weight", type=float, default=0.4)
    p.add_argument("--source", choices=("notes", "summaries", "both"), default="summaries")
    p.add_argument("--prompt", default=RunConfig.prompt)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("generate", help="write a seeded synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--mean", type=float, default=LengthParams.mean)
    p.add_argument("--std", type=float, default=LengthParams.std)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 means an internal failure
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvariantError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
