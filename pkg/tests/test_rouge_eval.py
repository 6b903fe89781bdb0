import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nbcesum.errors import InputError
from nbcesum.rouge_eval import batch_evaluate, lcs_length, rouge_l

from oracles import brute_force_lcs

seqs = st.lists(st.sampled_from("abcdefg"), max_size=200)


class TestLcs:
    def test_classic_example(self):
        a, b = list("ABCBDAB"), list("BDCABA")
        assert lcs_length(a, b) == brute_force_lcs(a, b) == 4

    def test_identical_and_disjoint(self):
        assert lcs_length(list("hello"), list("hello")) == 5
        assert lcs_length(list("abc"), list("xyz")) == 0
        assert lcs_length([], list("abc")) == 0

    def test_brute_force_small(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a = list(rng.choice(list("wxyz"), size=int(rng.integers(0, 9))))
            b = list(rng.choice(list("wxyz"), size=int(rng.integers(0, 9))))
            assert lcs_length(a, b) == brute_force_lcs(a, b)

    @given(seqs, seqs)
    def test_symmetric(self, a, b):
        assert lcs_length(a, b) == lcs_length(b, a)

    @given(seqs, seqs, st.sampled_from("abcdefgz"))
    def test_shared_suffix_adds_one(self, a, b, x):
        assert lcs_length(a + [x], b + [x]) == lcs_length(a, b) + 1


class TestRougeL:
    def test_cat_example(self):
        s = rouge_l("the cat sat".split(), "the cat sat on the mat".split())
        assert s.lcs_len == 3
        assert s.precision == 1.0 and s.recall == 0.5
        assert s.f1 == pytest.approx(0.6667, abs=1e-4)

    def test_identical(self):
        s = rouge_l(["a", "b"], ["a", "b"])
        assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)

    def test_empty(self):
        for gen, ref in (([], ["a"]), (["a"], []), ([], [])):
            s = rouge_l(gen, ref)
            assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)

    @given(seqs, seqs)
    def test_invariants(self, g, r):
        s = rouge_l(g, r)
        assert s.lcs_len <= min(s.gen_len, s.ref_len)
        assert 0 <= s.f1 <= 1
        if s.precision + s.recall > 0:
            assert s.f1 * (s.precision + s.recall) == pytest.approx(2 * s.precision * s.recall, abs=1e-12)


class TestBatch:
    def test_single_pair(self):
        rep = batch_evaluate([(["a", "b"], ["a", "c"])])
        s = rep.per_sample[0]
        assert (rep.mean_precision, rep.mean_recall, rep.mean_f1) == (s.precision, s.recall, s.f1)

    def test_zero_and_one(self):
        rep = batch_evaluate([(["a"], ["b"]), (["c"], ["c"])])
        assert rep.mean_f1 == 0.5

    def test_reaggregation_oracle(self):
        rng = np.random.default_rng(9)
        pairs = [(list(rng.choice(list("abcde"), size=int(rng.integers(0, 15)))),
                  list(rng.choice(list("abcde"), size=int(rng.integers(1, 15))))) for _ in range(20)]
        rep = batch_evaluate(pairs)
        for metric in ("precision", "recall", "f1"):
            values = [getattr(s, metric) for s in rep.per_sample]
            total = 0.0
            for v in values:
                total += v
            assert getattr(rep, f"mean_{metric}") == pytest.approx(total / len(values), abs=1e-12)

    def test_empty(self):
        with pytest.raises(InputError):
            batch_evaluate([])

    def test_histogram(self):
        rep = batch_evaluate([(["a"], ["a"]), (["a"], ["b"]), (["a", "b"], ["a", "c"])])
        h = rep.histogram("f1")
        assert len(h) == 20
        assert h[0] == (0.0, 1) and h[10] == (0.5, 1) and h[19] == (0.95, 1)
        assert sum(c for _, c in h) == 3
        with pytest.raises(InputError):
            rep.histogram("bleu")
