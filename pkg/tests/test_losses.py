import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import nig_strategy, random_nig
from oracles import central_difference
from monig.autodiff import Parameter
from monig.errors import ConfigError, DomainError
from monig.losses import (
    LossConfig,
    branch_loss,
    evidence_regularizer,
    evidence_regularizer_grad,
    gaussian_nll,
    gaussian_nll_grad,
    nig_nll,
    nig_nll_grad,
)
from monig.nig import NIGParams

P = NIGParams(0.0, 1.0, 1.5, 1.0)
# 0.5 ln(pi) - 1.5 ln 4 + 2 ln 4 + ln(Gamma(1.5) / Gamma(2)), evaluated with math.lgamma
NLL_AT_ZERO = 0.5 * math.log(math.pi) + 0.5 * math.log(4.0) + math.lgamma(1.5) - math.lgamma(2.0)


def test_nll_hand_value():
    assert NLL_AT_ZERO == pytest.approx(1.1447298858494, abs=1e-12)
    assert nig_nll(0.0, P) == pytest.approx(NLL_AT_ZERO, abs=1e-13)


def test_nll_grows_with_residual():
    assert nig_nll(0.0, P) < nig_nll(2.0, P)


def test_nll_validates():
    with pytest.raises(DomainError):
        nig_nll(0.0, NIGParams(0, 1, 1, 1))
    nig_nll(0.0, NIGParams(0, 1, 1, 1), check=False)  # caller takes responsibility


@given(nig_strategy(delta=(-5, 5), gamma=(0.01, 100), alpha=(1.01, 100), beta=(0.01, 100)), st.floats(-5, 5))
def test_nll_minimised_at_delta(p, dy):
    assert nig_nll(p.delta, p) <= nig_nll(p.delta + dy, p)


@pytest.mark.parametrize("seed", range(100))
def test_nll_gradient_against_finite_differences(seed):
    rng = np.random.default_rng(seed)
    p = random_nig(rng)
    y = rng.normal(0, 3)
    fd = central_difference(lambda v: nig_nll(y, NIGParams(*v)), np.array(p, dtype=float))
    an = np.array(nig_nll_grad(y, p))
    np.testing.assert_allclose(an, fd, rtol=1e-6, atol=1e-9)


def test_regularizer_examples():
    assert evidence_regularizer(0.0, P) == 0.0
    assert evidence_regularizer(2.0, P) == 8.0
    assert evidence_regularizer(4.0, P) == 2 * evidence_regularizer(2.0, P)
    assert evidence_regularizer(-2.0, P) == 8.0


@given(nig_strategy(), st.floats(-100, 100))
def test_regularizer_non_negative(p, y):
    assert evidence_regularizer(y, p) >= 0


def test_regularizer_gradient():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = random_nig(rng)
        y = rng.normal(0, 3)
        fd = central_difference(lambda v: evidence_regularizer(y, NIGParams(*v)), np.array(p, dtype=float))
        np.testing.assert_allclose(np.array(evidence_regularizer_grad(y, p)), fd, rtol=1e-6, atol=1e-9)
    # subgradient at the kink is zero for delta
    assert evidence_regularizer_grad(0.0, P).delta == 0.0


def test_regularizer_delta_toggle():
    d = Parameter(0.5)
    p = NIGParams(d, 1.0, 1.5, 1.0)
    evidence_regularizer(2.0, p, delta_grad=False).backward()
    assert d.grad == 0.0
    evidence_regularizer(2.0, p, delta_grad=True).backward()
    assert d.grad == pytest.approx(-4.0)


def test_branch_loss_examples():
    assert branch_loss(0.0, P, LossConfig(lam=0.0)) == nig_nll(0.0, P)
    assert branch_loss(2.0, P, LossConfig(lam=0.0)) == nig_nll(2.0, P)
    assert branch_loss(0.0, P, LossConfig(lam=0.6)) == pytest.approx(NLL_AT_ZERO, abs=1e-13)
    assert branch_loss(2.0, P, LossConfig(lam=0.6)) == pytest.approx(nig_nll(2.0, P) + 4.8, rel=1e-14)


def test_loss_config_validation():
    with pytest.raises(ConfigError):
        LossConfig(lam=-1.0)
    with pytest.raises(ConfigError):
        LossConfig(lam=float("nan"))


def test_loss_vectorised():
    rng = np.random.default_rng(2)
    p = random_nig(rng, 9)
    y = rng.normal(size=9)
    out = branch_loss(y, p, LossConfig(0.3))
    for i in range(9):
        row = NIGParams(*(v[i] for v in p))
        assert out[i] == pytest.approx(branch_loss(y[i], row, LossConfig(0.3)), rel=1e-14)


def test_gaussian_nll_examples():
    assert gaussian_nll(0.3, 0.3, 1 / (2 * math.pi)) == pytest.approx(0.0, abs=1e-15)
    assert gaussian_nll(1.0, 0.0, 1.0) == pytest.approx(0.5 * math.log(2 * math.pi) + 0.5, abs=1e-15)
    with pytest.raises(DomainError):
        gaussian_nll(0.0, 0.0, 0.0)


def test_gaussian_nll_gradient():
    rng = np.random.default_rng(5)
    for _ in range(20):
        y, mean, var = rng.normal(), rng.normal(), rng.uniform(0.1, 4)
        fd = central_difference(lambda v: gaussian_nll(y, v[0], v[1]), np.array([mean, var]))
        np.testing.assert_allclose(np.array(gaussian_nll_grad(y, mean, var)), fd, rtol=1e-6, atol=1e-9)
