"""Min-entropy parallel-context summarization of long multi-entry records."""

from .corpus_denoiser import (
    cosine_similarity,
    corpus_stats,
    fit_tfidf,
    rank_pairs,
    select_top_k,
    tf,
    tfidf_vector,
)
from .nbce_decoder import (
    ContextChunk,
    DecoderConfig,
    StepTrace,
    decode,
    decode_chunks,
    decode_step,
    sample_chunks,
    shannon_entropy,
    split_into_chunks,
)
from .record_io import PatientRecord, RunConfig, generate_synthetic_dataset, load_dataset, save_dataset
from .rouge_eval import BatchReport, RougeScore, batch_evaluate, lcs_length, rouge_l
from .tokenizer_lm import (
    LanguageModel,
    NgramLm,
    Vocabulary,
    detokenize,
    next_distribution,
    tokenize,
    train_ngram,
    words,
)

__version__ = "0.1.0"
