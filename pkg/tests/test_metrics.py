import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from bept.metrics import (
    DepthPair,
    MetricsError,
    MissingProvenance,
    UndefinedF1,
    ZeroVariance,
    consistency,
    f1,
    igl,
    info_gain,
    perplexity,
    reconstruct,
    report_csv,
    score,
)


def test_identical_vectors_correlate_fully():
    assert consistency(xs=[1, 2, 2, 3], ys=[1, 2, 2, 3]) == pytest.approx(1.0)


def test_reversed_vectors():
    assert consistency(xs=[1, 2, 3], ys=[3, 2, 1]) == pytest.approx(-1.0)


def test_uncorrelated_vectors():
    assert consistency(xs=[1, 1, 2, 2], ys=[1, 2, 1, 2]) == pytest.approx(0.0)


def test_consistency_from_pairs():
    pairs = [DepthPair("a", 1, 1), DepthPair("b", 2, 2), DepthPair("c", 1, 1)]
    assert consistency(pairs) == pytest.approx(1.0)


def test_constant_and_equal_is_one():
    assert consistency(xs=[1, 1], ys=[1, 1]) == 1.0


def test_zero_variance():
    with pytest.raises(ZeroVariance):
        consistency(xs=[1, 1, 1], ys=[1, 2, 3])


def test_length_mismatch():
    with pytest.raises(MetricsError):
        consistency(xs=[1, 2], ys=[1])
    with pytest.raises(MetricsError):
        consistency(xs=[1], ys=[1])


def test_info_gain_examples():
    assert info_gain(2, 1) == pytest.approx(2 * math.e**2, abs=1e-9)
    assert info_gain(1, 5) == 5.0
    assert info_gain(3, 0) == 0.0
    assert info_gain(["a", "b", "b"], ["x"]) == info_gain(2, 1)


def test_perplexity_examples():
    assert perplexity([2, 2]) == 4.0
    assert perplexity([4]) == 2.0
    assert perplexity([]) == 0.0
    assert [p.gain for p in igl([1, 2])] == [0.0, 1.0, 3.0]


def test_negative_gain():
    with pytest.raises(MetricsError):
        perplexity([1, -1])


def test_f1_examples():
    assert f1(0.5, 1) == pytest.approx(2 / 3)
    assert f1(1, 1) == 1.0
    with pytest.raises(UndefinedF1):
        f1(0, 0)
    with pytest.raises(MetricsError):
        f1(1.5, 0.5)


def test_score():
    assert score(set(), set()).f1 == 1.0
    s = score({1, 2}, {1, 3, 4, 5})
    assert (s.precision, s.recall) == (0.25, 0.5)
    bad = score({1}, {2})
    assert bad.undefined and bad.f1 == 0.0


def test_reconstruct_needs_provenance():
    with pytest.raises(MissingProvenance):
        reconstruct({"paths": []})


def test_report_csv():
    rows = [("m", {"consistency": 1.0, "perplexity": 0.0, "f1": {"tars": {"f1": 1.0}}})]
    assert report_csv(rows) == "model,consistency,perplexity,f1_tars\nm,1.0,0.0,1.0\n"


_depths = st.lists(st.integers(0, 6), min_size=2, max_size=12)


@given(_depths, _depths, st.integers(1, 5), st.integers(-3, 3))
def test_consistency_is_invariant_under_positive_scaling(xs, ys, a, b):
    n = min(len(xs), len(ys))
    xs, ys = xs[:n], ys[:n]
    assume(len(set(xs)) > 1 and len(set(ys)) > 1)
    r = consistency(xs=xs, ys=ys)
    assert -1.0 <= r <= 1.0
    assert consistency(xs=[a * x + b for x in xs], ys=ys) == pytest.approx(r, abs=1e-9)


@given(st.lists(st.floats(0, 100), max_size=8), st.floats(0, 100))
def test_perplexity_grows_with_more_gain(gains, extra):
    assert perplexity(gains + [extra]) >= perplexity(gains)


@given(st.floats(0, 1), st.floats(0, 1))
def test_f1_is_symmetric_and_bounded(p, r):
    assume(p > 0 or r > 0)
    v = f1(p, r)
    assert v == pytest.approx(f1(r, p))
    assert min(p, r) - 1e-12 <= v <= max(p, r) + 1e-12
