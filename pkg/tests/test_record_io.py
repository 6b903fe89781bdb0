import json

import numpy as np
import pytest

from nbcesum.corpus_denoiser import fit_tfidf, rank_pairs
from nbcesum.errors import DatasetError, InputError
from nbcesum.nbce_decoder import DecoderConfig
from nbcesum.record_io import (
    SECTIONS,
    LengthParams,
    PatientRecord,
    RunConfig,
    generate_synthetic_dataset,
    load_dataset,
    load_run_config,
    sample_lengths,
    save_dataset,
    save_run_config,
    section_vocabulary,
)
from nbcesum.tokenizer_lm import words


def _line(rid, **extra):
    return json.dumps({"schema": 1, "id": rid, "entries": ["x"], "summary": "s", **extra})


def _write(tmp_path, lines):
    path = tmp_path / "data.jsonl"
    path.write_text("\n".join(lines) + "\n")
    return path


class TestLoadDataset:
    def test_three_records_in_order(self, tmp_path):
        recs = load_dataset(_write(tmp_path, [_line("a"), _line("b"), _line("c")]))
        assert [r.id for r in recs] == ["a", "b", "c"]

    def test_duplicate_cites_line(self, tmp_path):
        lines = [_line(f"r{i}") for i in range(6)] + [_line("r2")]
        with pytest.raises(DatasetError) as err:
            load_dataset(_write(tmp_path, lines))
        assert err.value.line == 7
        assert "line 7" in str(err.value) and "'r2'" in str(err.value)

    @pytest.mark.parametrize("bad", [
        "{not json",
        "[1, 2]",
        json.dumps({"schema": 2, "id": "a", "entries": []}),
        json.dumps({"schema": 1, "id": "", "entries": []}),
        json.dumps({"schema": 1, "id": "a", "entries": "text"}),
        json.dumps({"schema": 1, "id": "a", "entries": [1]}),
        json.dumps({"schema": 1, "id": "a", "entries": [], "summary": 3}),
        json.dumps({"schema": 1, "id": "a", "entries": [], "meta": []}),
    ])
    def test_malformed_line_number(self, tmp_path, bad):
        with pytest.raises(DatasetError) as err:
            load_dataset(_write(tmp_path, [_line("ok"), bad]))
        assert err.value.line == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(DatasetError):
            load_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_dataset(tmp_path / "nope.jsonl")

    def test_missing_summary_is_valid(self, tmp_path):
        line = json.dumps({"schema": 1, "id": "a", "entries": ["e"]})
        (rec,) = load_dataset(_write(tmp_path, [line]))
        assert rec.summary is None

    def test_roundtrip(self, tmp_path):
        recs = generate_synthetic_dataset(4, 12) + [PatientRecord("extra", ["ü ñ", ""], None)]
        path = tmp_path / "rt.jsonl"
        save_dataset(recs, path)
        assert load_dataset(path) == recs


class TestRunConfig:
    def test_parse(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\nseed = 7\nsampling_rate=0.5\ninclude_prompt_only_context=true\n"
                        "prompt=brief :\n")
        cfg = load_run_config(path)
        assert (cfg.seed, cfg.sampling_rate, cfg.include_prompt_only_context, cfg.prompt) == (
            7, 0.5, True, "brief :")
        assert cfg.to_decoder_config() == DecoderConfig(seed=7, sampling_rate=0.5,
                                                        include_prompt_only_context=True)

    @pytest.mark.parametrize("text", ["bogus=1", "seed", "seed=abc", "include_prompt_only_context=maybe",
                                      "max_new_tokens=0", "sampling_rate=2", "order=0", "cache_weight=1"])
    def test_rejects(self, tmp_path, text):
        path = tmp_path / "run.cfg"
        path.write_text(text + "\n")
        with pytest.raises(InputError):
            load_run_config(path)

    def test_paths_validated(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(f"dataset={tmp_path / 'missing.jsonl'}\n")
        with pytest.raises(InputError):
            load_run_config(path)
        assert load_run_config(path, validate_paths=False).dataset.endswith("missing.jsonl")

    def test_save_load_roundtrip(self, tmp_path):
        cfg = RunConfig(seed=3, max_new_tokens=40, include_prompt_only_context=True, alpha=0.5)
        path = tmp_path / "run.cfg"
        save_run_config(cfg, path)
        assert load_run_config(path) == cfg


class TestGenerator:
    def test_deterministic(self):
        a = generate_synthetic_dataset(5, 30)
        b = generate_synthetic_dataset(5, 30)
        assert [r.to_json() for r in a] == [r.to_json() for r in b]
        assert a != generate_synthetic_dataset(6, 30)

    def test_shape(self):
        recs = generate_synthetic_dataset(0, 10)
        assert len({r.id for r in recs}) == 10
        for r in recs:
            assert len(r.entries) == 6
            assert r.meta["overlap"] in (1.0, 0.25, 0.0)
            assert len(words(r.summary)) == 6 * 6

    def test_overlap_levels(self):
        facts = {w for sec in SECTIONS for w in section_vocabulary(sec)}
        for r in generate_synthetic_dataset(1, 30):
            note = set(words(" ".join(r.entries)))
            summary_facts = [w for w in words(r.summary) if w in facts]
            assert set(summary_facts) <= note
            assert len(summary_facts) == int(r.meta["overlap"] * 18 + 0.5)  # half up

    def test_length_moments(self):
        rng = np.random.default_rng(0)
        x = sample_lengths(rng, LengthParams(1427, 1684), 10_000)
        assert x.min() >= 1
        assert abs(x.mean() - 1427) / 1427 < 0.10
        assert abs(x.std() - 1684) / 1684 < 0.10

    def test_bad_args(self):
        with pytest.raises(InputError):
            generate_synthetic_dataset(0, 0)
        with pytest.raises(InputError):
            sample_lengths(np.random.default_rng(0), LengthParams(0, 1), 3)

    def test_planted_tiers_recovered(self):
        recs = generate_synthetic_dataset(12, 60)
        notes = [words(" ".join(r.entries)) for r in recs]
        summaries = [words(r.summary) for r in recs]
        ranking = rank_pairs(fit_tfidf(notes + summaries), notes, summaries)
        levels = [recs[p.note_pos].meta["overlap"] for p in ranking]
        assert len(set(levels)) == 3
        assert levels == sorted(levels, reverse=True)
