import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import oracle_lcs, oracle_rouge_n
from semkg.metrics import (bleu, confusion, cosine, lcs_length, precision_recall_f1, rouge_l, rouge_n,
                           tokenize)

WORDS = ["the", "cat", "sat", "on", "mat", "dog", "a", "lay"]


def test_worked_example():
    c, r = "the cat sat on the mat", "the cat lay on the mat"
    assert rouge_n(c, r, 1) == pytest.approx(5 / 6, abs=1e-9)
    assert rouge_l(c, r) == pytest.approx(5 / 6, abs=1e-9)
    assert lcs_length(tokenize(c), tokenize(r)) == 5


@given(st.lists(st.sampled_from(WORDS), max_size=9), st.lists(st.sampled_from(WORDS), max_size=9))
def test_rouge_matches_oracles(a, b):
    ca, cb = " ".join(a), " ".join(b)
    for n in (1, 2):
        assert rouge_n(ca, cb, n) == pytest.approx(oracle_rouge_n(a, b, n), abs=1e-9)
    assert lcs_length(a, b) == oracle_lcs(a, b)


def test_identity_and_disjoint():
    assert rouge_n("a b c", "a b c", 2) == 1.0
    assert rouge_l("a b c", "a b c") == 1.0
    assert bleu("the quick brown fox jumps", "the quick brown fox jumps") == pytest.approx(1.0)
    assert rouge_n("a b", "c d", 1) == 0.0
    assert rouge_l("", "a b") == 0.0
    assert bleu("", "a b") == 0.0


def test_tokenize_strips_punctuation():
    assert tokenize("Hello, World! (yes) --") == ["hello", "world", "yes"]


def test_bleu_half_truncation():
    ref = "a b c d e f g h"
    cand = "a b c d"
    # precisions are all 1 for a prefix; only the brevity penalty applies
    assert bleu(cand, ref) == pytest.approx(math.exp(1 - 2), abs=1e-12)


def test_bleu_smoothing_hand_count():
    # cand "a b x y" vs ref "a b c d": p1 = 2/4, p2 = 1/3, p3 = 0 -> (0+1)/(2+1), p4 = 0 -> (0+1)/(1+1)
    expected = math.exp((math.log(2 / 4) + math.log(1 / 3) + math.log(1 / 3) + math.log(1 / 2)) / 4)
    assert bleu("a b x y", "a b c d") == pytest.approx(expected, abs=1e-12)


@given(st.lists(st.sampled_from(WORDS), max_size=10), st.lists(st.sampled_from(WORDS), max_size=10))
def test_metric_ranges(a, b):
    for v in (rouge_n(" ".join(a), " ".join(b), 1), rouge_l(" ".join(a), " ".join(b)),
              bleu(" ".join(a), " ".join(b))):
        assert 0.0 <= v <= 1.0 + 1e-12


def test_cosine():
    assert cosine([1, 0], [1, 1]) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)
    assert cosine([0, 1], [1, 0]) == 0.0
    assert cosine([2, 3], [2, 3]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        cosine([0, 0], [1, 1])
    with pytest.raises(ValueError):
        cosine([1, 0], [1, 0, 0])


def test_prf():
    assert precision_recall_f1([1, 1, 0], [1, 1, 0]) == (1.0, 1.0, 1.0)
    # tp=2, fp=1, fn=1
    p, r, f = precision_recall_f1([1, 1, 1, 0, 0], [1, 1, 0, 1, 0])
    assert (p, r, f) == pytest.approx((2 / 3, 2 / 3, 2 / 3))
    assert precision_recall_f1([0, 0, 0], [1, 0, 1]) == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        precision_recall_f1([1], [1, 0])
    assert confusion([1, 0, 1, 0], [1, 1, 0, 0]) == (1, 1, 1, 1)


def test_rouge_n_rejects_zero():
    with pytest.raises(ValueError):
        rouge_n("a", "a", 0)


def test_cosine_numpy_input():
    rng = np.random.default_rng(0)
    u = rng.normal(size=16)
    assert cosine(u, 3 * u) == pytest.approx(1.0)
