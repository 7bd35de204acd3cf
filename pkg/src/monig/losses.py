"""Evidential regression losses.

The functions work elementwise on floats, numpy arrays or autodiff tensors.
Analytic gradients of the scalar forms are provided separately
(``*_grad``) for checking and for callers that do not need a graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .errors import ConfigError, DomainError
from .nig import NIGParams, validate
from .special import digamma, lgamma

_HALF_LOG_PI = 0.5 * np.log(np.pi)
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class LossConfig:
    """Weight of the evidence penalty and whether it trains the mean."""

    lam: float = 0.6
    regularizer_delta_grad: bool = True

    def __post_init__(self):
        if not (self.lam >= 0 and np.isfinite(self.lam)):
            raise ConfigError("lam must be a finite non-negative number")


def _log(x):
    return x.log() if isinstance(x, Tensor) else np.log(x)


def _lgamma(x):
    return x.lgamma() if isinstance(x, Tensor) else lgamma(x)


def _abs(x):
    return x.abs() if isinstance(x, Tensor) else np.abs(x)


def _float_or_array(x):
    if isinstance(x, (np.ndarray, np.generic)) and np.ndim(x) == 0:
        return float(x)
    return x


def nig_nll(y, p: NIGParams, *, check: bool = True):
    """Negative log marginal likelihood of ``y`` under NIG ``p``.

    Equal to minus the log density of the Student-t with location delta,
    squared scale beta (1 + gamma) / (gamma alpha) and 2 alpha degrees of
    freedom.
    """
    if check:
        validate(p)
    delta, gamma, alpha, beta = p
    omega = 2.0 * beta * (1.0 + gamma)
    resid = y - delta
    out = (
        _HALF_LOG_PI
        - 0.5 * _log(gamma)
        - alpha * _log(omega)
        + (alpha + 0.5) * _log(resid * resid * gamma + omega)
        + _lgamma(alpha)
        - _lgamma(alpha + 0.5)
    )
    return _float_or_array(out)


def nig_nll_grad(y, p: NIGParams) -> NIGParams:
    """Partial derivatives of :func:`nig_nll` with respect to each field."""
    validate(p)
    delta, gamma, alpha, beta = (np.asarray(v, dtype=np.float64) for v in p)
    y = np.asarray(y, dtype=np.float64)
    r = y - delta
    omega = 2.0 * beta * (1.0 + gamma)
    s = r * r * gamma + omega
    d_delta = -(2.0 * alpha + 1.0) * r * gamma / s
    d_gamma = -0.5 / gamma - alpha * 2.0 * beta / omega + (alpha + 0.5) * (r * r + 2.0 * beta) / s
    d_alpha = -np.log(omega) + np.log(s) + digamma(alpha) - digamma(alpha + 0.5)
    d_beta = -alpha / beta + (alpha + 0.5) * 2.0 * (1.0 + gamma) / s
    return NIGParams(*(_float_or_array(v) for v in (d_delta, d_gamma, d_alpha, d_beta)))


def evidence_regularizer(y, p: NIGParams, *, delta_grad: bool = True):
    """Absolute error scaled by the total evidence ``gamma + 2 alpha``.

    With ``delta_grad=False`` a tensor delta is detached, so the penalty only
    pushes evidence down and never moves the prediction.
    """
    delta = p.delta
    if not delta_grad and isinstance(delta, Tensor):
        delta = delta.detach()
    return _float_or_array(_abs(y - delta) * (p.gamma + 2.0 * p.alpha))


def evidence_regularizer_grad(y, p: NIGParams) -> NIGParams:
    y = np.asarray(y, dtype=np.float64)
    delta, gamma, alpha, _ = (np.asarray(v, dtype=np.float64) for v in p)
    r = y - delta
    evidence = gamma + 2.0 * alpha
    return NIGParams(
        _float_or_array(np.sign(delta - y) * evidence),
        _float_or_array(np.abs(r)),
        _float_or_array(2.0 * np.abs(r)),
        _float_or_array(np.zeros_like(r)),
    )


def branch_loss(y, p: NIGParams, cfg: LossConfig = LossConfig(), *, check: bool = True):
    """NLL plus ``cfg.lam`` times the evidence penalty."""
    nll = nig_nll(y, p, check=check)
    if cfg.lam == 0:
        return nll
    reg = evidence_regularizer(y, p, delta_grad=cfg.regularizer_delta_grad)
    return nll + cfg.lam * reg


def gaussian_nll(y, mean, variance):
    if isinstance(variance, Tensor):
        v = variance.value
    else:
        v = np.asarray(variance, dtype=np.float64)
    if np.any(~(v > 0)):
        raise DomainError("variance must be positive")
    resid = y - mean
    out = _HALF_LOG_2PI + 0.5 * _log(variance) + resid * resid / (2.0 * variance)
    return _float_or_array(out)


def gaussian_nll_grad(y, mean, variance):
    """Return ``(d/d mean, d/d variance)`` of :func:`gaussian_nll`."""
    r = np.asarray(y, dtype=np.float64) - np.asarray(mean, dtype=np.float64)
    variance = np.asarray(variance, dtype=np.float64)
    if np.any(~(variance > 0)):
        raise DomainError("variance must be positive")
    d_mean = -r / variance
    d_var = 0.5 / variance - r * r / (2.0 * variance * variance)
    return _float_or_array(d_mean), _float_or_array(d_var)
