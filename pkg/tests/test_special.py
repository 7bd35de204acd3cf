import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special as sp

from monig.special import digamma, lgamma


def test_lgamma_known_values():
    assert lgamma(1.0) == pytest.approx(0.0, abs=1e-14)
    assert lgamma(2.0) == pytest.approx(0.0, abs=1e-14)
    assert lgamma(0.5) == pytest.approx(0.5 * math.log(math.pi), abs=1e-14)
    assert lgamma(10.0) == pytest.approx(math.log(362880.0), abs=1e-12)


def test_lgamma_against_stdlib_on_grid():
    xs = np.concatenate([np.linspace(0.01, 10, 2000), np.linspace(10, 300, 500)])
    ref = np.array([math.lgamma(x) for x in xs])
    assert np.max(np.abs(lgamma(xs) - ref)) < 1e-12


def test_digamma_against_scipy_on_grid():
    xs = np.concatenate([np.linspace(0.01, 10, 2000), np.linspace(10, 500, 500)])
    assert np.max(np.abs(digamma(xs) - sp.digamma(xs))) < 1e-12


def test_digamma_known_values():
    euler = 0.5772156649015329
    assert digamma(1.0) == pytest.approx(-euler, abs=1e-12)
    assert digamma(0.5) == pytest.approx(-euler - 2 * math.log(2), abs=1e-12)


@given(st.floats(0.05, 200.0))
def test_digamma_is_derivative_of_lgamma(x):
    h = 1e-5 * max(1.0, x)
    fd = (math.lgamma(x + h) - math.lgamma(x - h)) / (2 * h)
    assert digamma(x) == pytest.approx(fd, rel=1e-6, abs=1e-7)


@given(st.floats(0.1, 100.0))
def test_recurrences(x):
    assert lgamma(x + 1) - lgamma(x) == pytest.approx(math.log(x), abs=1e-11)
    assert digamma(x + 1) - digamma(x) == pytest.approx(1.0 / x, rel=1e-11, abs=1e-12)


@pytest.mark.parametrize("fn", [lgamma, digamma])
@pytest.mark.parametrize("bad", [0.0, -1.0, np.nan])
def test_rejects_non_positive(fn, bad):
    with pytest.raises(ValueError):
        fn(bad)


def test_vectorised_shape():
    x = np.linspace(1, 5, 12).reshape(3, 4)
    assert lgamma(x).shape == (3, 4)
    assert digamma(x).shape == (3, 4)
    assert isinstance(lgamma(3.0), float)
