import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from monig.errors import LengthMismatch, SingleClass
from monig.metrics import auroc, mae, rmse, ueir


def auroc_by_pairs(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def ueir_by_pairs(err, unc):
    pairs = list(itertools.combinations(range(len(err)), 2))
    bad = sum((err[i] - err[j]) * (unc[i] - unc[j]) < 0 for i, j in pairs)
    return 100.0 * bad / len(pairs)


small = st.lists(st.integers(-5, 5).map(float), min_size=2, max_size=30)


def test_rmse_mae_examples():
    assert rmse([1, 2], [1, 2]) == 0
    assert rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5))
    assert mae([0, 0], [3, 4]) == 3.5
    with pytest.raises(LengthMismatch):
        rmse([1, 2], [1])
    with pytest.raises(LengthMismatch):
        mae([], [])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40), st.data())
def test_rmse_at_least_mae(pred, data):
    target = data.draw(st.lists(st.floats(-1e3, 1e3), min_size=len(pred), max_size=len(pred)))
    assert rmse(pred, target) >= mae(pred, target) * (1 - 1e-12) >= 0


def test_auroc_examples():
    assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auroc([3, 3, 3, 3], [0, 1, 0, 1]) == 0.5
    assert auroc([0.9, 0.8, 0.7, 0.1], [1, 0, 1, 0]) == 0.75
    with pytest.raises(SingleClass):
        auroc([1, 2], [1, 1])
    with pytest.raises(LengthMismatch):
        auroc([1, 2, 3], [1, 0])


@given(small, st.data())
def test_auroc_matches_pair_enumeration(scores, data):
    labels = data.draw(st.lists(st.integers(0, 1), min_size=len(scores), max_size=len(scores)))
    assume(0 < sum(labels) < len(labels))
    assert auroc(scores, labels) == pytest.approx(auroc_by_pairs(scores, labels), abs=1e-12)


@given(st.lists(st.integers(-1000, 1000), min_size=2, max_size=30, unique=True).map(lambda v: [x / 10 for x in v]), st.data())
def test_auroc_label_flip_and_monotone_invariance(scores, data):
    labels = np.array(data.draw(st.lists(st.integers(0, 1), min_size=len(scores), max_size=len(scores))))
    assume(0 < labels.sum() < len(labels))
    a = auroc(scores, labels)
    assert a + auroc(scores, 1 - labels) == pytest.approx(1.0, abs=1e-12)
    assert auroc(np.arctan(np.asarray(scores) / 10) * 3 + 7, labels) == pytest.approx(a, abs=1e-12)


def test_ueir_examples():
    assert ueir([1, 2, 3], [0.1, 0.5, 2.0]) == 0.0
    assert ueir([1, 2, 3], [3, 1, 2]) == pytest.approx(200 / 3)
    assert ueir([1, 1, 1], [3, 1, 2]) == 0.0  # ties count as consistent
    with pytest.raises(LengthMismatch):
        ueir([1], [1])
    with pytest.raises(LengthMismatch):
        ueir([1, 2], [1, 2, 3])


@given(small, st.data())
def test_ueir_matches_pair_enumeration(err, data):
    unc = data.draw(st.lists(st.integers(-5, 5).map(float), min_size=len(err), max_size=len(err)))
    got = ueir(err, unc)
    assert 0.0 <= got <= 100.0
    assert got == pytest.approx(ueir_by_pairs(err, unc), abs=1e-10)


@given(small, st.data())
def test_ueir_monotone_invariance(err, data):
    unc = np.array(data.draw(st.lists(st.floats(-10, 10), min_size=len(err), max_size=len(err))))
    base = ueir(err, unc)
    assert ueir(np.exp(np.asarray(err) / 5), unc) == pytest.approx(base, abs=1e-10)
    assert ueir(err, unc**3 + 2 * unc) == pytest.approx(base, abs=1e-10)


def test_ueir_chunking_matches_small_path():
    rng = np.random.default_rng(0)
    err, unc = rng.normal(size=3000), rng.normal(size=3000)
    sub = slice(0, 300)
    assert ueir(err[sub], unc[sub]) == pytest.approx(ueir_by_pairs(err[sub], unc[sub]), abs=1e-10)
    full = ueir(err, unc)
    assert full == pytest.approx(50.0, abs=2.0)


def test_ueir_subsamples_above_cap():
    rng = np.random.default_rng(1)
    err = rng.normal(size=600)
    unc = err + rng.normal(size=600)
    capped = ueir(err, unc, max_samples=200, seed=4)
    keep = np.random.default_rng(4).choice(600, size=200, replace=False)
    assert capped == pytest.approx(ueir_by_pairs(err[keep], unc[keep]), abs=1e-10)
    assert capped == ueir(err, unc, max_samples=200, seed=4)
