import math

import numpy as np
import pytest
from scipy import special

import oracles
from corpora import random_corpus, random_samples
from proxyreg.errors import DataError, DomainError
from proxyreg.metrics import (
    bleu, betainc, cider, cider_per_n, clipped_counts, evaluate, lcs_length, rouge_l, student_t_cdf, t_test,
)
from proxyreg.metrics.report import MetricReport

THE_CASE = ("the the the the the the the".split(),
            ["the cat is on the mat".split(), "there is a cat on the mat".split()])


# -- BLEU ---------------------------------------------------------------------

def test_bleu_identity():
    cands = [["a", "dog", "barks", "loudly", "now"], ["rain", "falls", "on", "the", "roof"]]
    assert bleu(cands, [[c] for c in cands]) == [1.0, 1.0, 1.0, 1.0]


def test_bleu_clipped_unigram():
    cand, refs = THE_CASE
    assert clipped_counts(cand, refs, 1) == (2, 7)
    assert bleu([cand], [refs], n_max=1, with_brevity=False)[0] == pytest.approx(2 / 7, abs=1e-15)


def test_bleu_zero_precision_gives_zero():
    assert bleu([["a", "b"]], [[["a", "c"]]])[1:] == [0.0, 0.0, 0.0]


def test_bleu_errors():
    with pytest.raises(DomainError):
        bleu([], [])
    with pytest.raises(DomainError):
        bleu([["a"]], [[["a"]]], n_max=5)


@pytest.mark.parametrize("seed", range(10))
def test_bleu_matches_brute_force(seed):
    cands, refs = random_corpus(np.random.default_rng(seed))
    np.testing.assert_allclose(bleu(cands, refs), oracles.bleu_brute(cands, refs), rtol=0, atol=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_bleu_non_increasing_without_brevity(seed):
    cands, refs = random_corpus(np.random.default_rng(seed))
    b = bleu(cands, refs, with_brevity=False)
    assert all(x >= y - 1e-15 for x, y in zip(b, b[1:]))


# -- ROUGE-L ----------------------------------------------------------------------

def test_rouge_examples():
    assert rouge_l([["a", "b", "c"]], [[["a", "b", "c"]]]) == pytest.approx(1.0, abs=1e-15)
    assert rouge_l([["a", "b"]], [[["c", "d"]]]) == 0.0
    assert rouge_l([["a", "b", "c", "d"]], [[["a", "c", "d", "e"]]]) == pytest.approx(0.75, abs=1e-15)
    assert rouge_l([[]], [[["a"]]]) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_rouge_matches_brute_force(seed):
    cands, refs = random_corpus(np.random.default_rng(seed))
    assert rouge_l(cands, refs) == pytest.approx(oracles.rouge_brute(cands, refs), abs=1e-9)
    for c, rs in zip(cands, refs):
        assert lcs_length(c, rs[0]) == lcs_length(rs[0], c) == oracles.lcs_brute(tuple(c), tuple(rs[0]))


# -- CIDEr ---------------------------------------------------------------------

def test_cider_identity_per_n():
    cands = [["a", "dog", "barks", "loudly"], ["rain", "falls", "on", "roofs"], ["cars", "pass", "by", "fast"]]
    for row in cider_per_n(cands, [[c] for c in cands]):
        np.testing.assert_allclose(row, [1.0] * 4, atol=1e-12)


def test_cider_disjoint_is_zero():
    assert cider([["x", "y"], ["z"]], [[["a", "b"]], [["c"]]]) == 0.0


def test_cider_needs_two_items():
    with pytest.raises(DomainError):
        cider([["a"]], [[["a"]]])


@pytest.mark.parametrize("seed", range(10))
def test_cider_matches_brute_force(seed):
    cands, refs = random_corpus(np.random.default_rng(seed), items=3)
    got = cider_per_n(cands, refs)
    want = oracles.cider_brute(cands, refs)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-9)
    assert all(-1e-12 <= v <= 1 + 1e-12 for row in got for v in row)
    assert cider(cands, refs, scaled=True) == pytest.approx(10 * cider(cands, refs), abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_metrics_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    cands, refs = random_corpus(rng)
    perm = rng.permutation(len(cands))
    pc = [cands[i] for i in perm]
    pr = [list(reversed(refs[i])) for i in perm]
    np.testing.assert_allclose(bleu(pc, pr), bleu(cands, refs), atol=1e-12)
    assert rouge_l(pc, pr) == pytest.approx(rouge_l(cands, refs), abs=1e-12)
    assert cider(pc, pr) == pytest.approx(cider(cands, refs), abs=1e-12)


# -- report ------------------------------------------------------------------

def test_evaluate_perfect_and_csv():
    refs = {"b": [["rain", "falls", "on", "the", "roof"]], "a": [["a", "dog", "barks", "at", "night"]]}
    preds = {k: v[0] for k, v in refs.items()}
    rep = evaluate(preds, refs)
    assert rep == MetricReport(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    assert rep.to_csv().splitlines()[0] == "metric,value"
    assert rep.to_csv().splitlines()[1:] == [f"{k},1.000000" for k in
                                             ("bleu1", "bleu2", "bleu3", "bleu4", "rougeL", "cider")]
    assert evaluate(preds, refs) == rep


def test_evaluate_golden_five_items():
    cands, refs = random_corpus(np.random.default_rng(123))
    ids = [f"id{i}" for i in range(5)]
    rep = evaluate(dict(zip(ids, cands)), dict(zip(ids, refs)))
    want_bleu = oracles.bleu_brute(cands, refs)
    want_cider = sum(sum(r) / 4 for r in oracles.cider_brute(cands, refs)) / 5
    np.testing.assert_allclose([rep.bleu1, rep.bleu2, rep.bleu3, rep.bleu4], want_bleu, atol=1e-9)
    assert rep.rougeL == pytest.approx(oracles.rouge_brute(cands, refs), abs=1e-9)
    assert rep.cider == pytest.approx(want_cider, abs=1e-9)


def test_evaluate_id_mismatch_lists_offenders():
    with pytest.raises(DataError, match="no prediction for b"):
        evaluate({"a": ["x"]}, {"a": [["x"]], "b": [["y"]]})


# -- t-test --------------------------------------------------------------------

def test_betainc_against_scipy():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b, x = rng.uniform(0.1, 30), rng.uniform(0.1, 30), rng.uniform()
        assert betainc(a, b, x) == pytest.approx(float(special.betainc(a, b, x)), abs=1e-12)
    assert betainc(2.0, 3.0, 0.0) == 0.0 and betainc(2.0, 3.0, 1.0) == 1.0


def test_cdf_at_zero():
    for df in (1, 2, 3.5, 10, 100, 1e4):
        assert student_t_cdf(0.0, df) == pytest.approx(0.5, abs=1e-12)


def test_identical_samples():
    r = t_test([1.0, 2.0, 4.0], [1.0, 2.0, 4.0])
    assert r.t == 0.0 and r.p == 1.0


def test_reference_pair():
    r = t_test([1, 2, 3, 4], [2, 3, 4, 5])
    t, df = oracles.pooled_t([1, 2, 3, 4], [2, 3, 4, 5])
    assert r.t == pytest.approx(t, abs=1e-12) and r.df == df == 6
    assert r.t == pytest.approx(-math.sqrt(1.2), abs=1e-12)
    assert r.p == pytest.approx(oracles.two_sided_p_quad(t, df), abs=1e-9)


@pytest.mark.parametrize("kind", ["pooled", "welch"])
def test_t_test_matches_quadrature(kind):
    rng = np.random.default_rng(11)
    ref_stat = oracles.pooled_t if kind == "pooled" else oracles.welch_t
    for _ in range(25):
        a, b = random_samples(rng)
        r = t_test(a, b, kind)
        t, df = ref_stat(a, b)
        assert r.t == pytest.approx(t, rel=1e-10)
        assert r.df == pytest.approx(df, rel=1e-10)
        assert abs(r.p - oracles.two_sided_p_quad(t, df)) < 1e-6
        swapped = t_test(b, a, kind)
        assert swapped.t == pytest.approx(-r.t, abs=1e-12) and swapped.p == pytest.approx(r.p, abs=1e-15)


def test_t_test_errors():
    with pytest.raises(DomainError):
        t_test([1.0, 1.0], [2.0, 2.0])
    with pytest.raises(DomainError):
        t_test([1.0], [2.0, 3.0])
    with pytest.raises(DomainError):
        t_test([1.0, 2.0], [2.0, 3.0], kind="paired")
