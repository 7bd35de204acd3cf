"""Closed-form algebra on Normal-Inverse-Gamma (NIG) distributions.

An NIG(delta, gamma, alpha, beta) is the conjugate prior over the mean and
variance of a Gaussian target::

    y ~ N(mu, sigma2),  mu ~ N(delta, sigma2 / gamma),  sigma2 ~ InvGamma(alpha, beta)

The fields of :class:`NIGParams` may be Python floats, numpy arrays (one NIG
per element) or :class:`monig.autodiff.Tensor` objects. Every operation
here uses only arithmetic, so the same code fuses single distributions,
whole batches, and differentiable network outputs.
"""

from __future__ import annotations

from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, EmptyInputError, NegativeWeightError
from .special import lgamma


class NIGParams(NamedTuple):
    delta: float
    gamma: float
    alpha: float
    beta: float


class StudentTParams(NamedTuple):
    """Student-t with location, squared scale and degrees of freedom."""

    location: float
    scale: float
    dof: float


def _raw(x):
    return np.asarray(getattr(x, "value", x), dtype=np.float64)


def validate(p: NIGParams) -> None:
    """Raise :class:`DomainError` unless ``p`` is a valid NIG.

    Checks ``gamma > 0``, ``alpha > 1``, ``beta > 0`` and that every field is
    finite. Array fields are checked elementwise.
    """
    delta, gamma, alpha, beta = (_raw(v) for v in p)
    for name, v in zip(NIGParams._fields, (delta, gamma, alpha, beta)):
        if not np.all(np.isfinite(v)):
            raise DomainError(f"{name} must be finite")
    if not np.all(gamma > 0):
        raise DomainError("gamma must be positive")
    if not np.all(alpha > 1):
        raise DomainError("alpha must exceed 1")
    if not np.all(beta > 0):
        raise DomainError("beta must be positive")


def is_valid(p: NIGParams) -> bool:
    try:
        validate(p)
    except DomainError:
        return False
    return True


def _sum_unchecked(a: NIGParams, b: NIGParams) -> NIGParams:
    d1, g1, a1, b1 = a
    d2, g2, a2, b2 = b
    gamma = g1 + g2
    delta = (g1 * d1 + g2 * d2) / gamma
    if isinstance(delta, (float, np.floating, np.ndarray)):
        # rounding can leave the weighted mean an ulp outside [d1, d2]
        delta = np.clip(delta, np.minimum(d1, d2), np.maximum(d1, d2))
        if np.ndim(delta) == 0:
            delta = float(delta)
    alpha = a1 + a2 + 0.5
    # pairwise grouping keeps the result bitwise symmetric in (a, b)
    beta = (b1 + b2) + 0.5 * (g1 * (d1 - delta) ** 2 + g2 * (d2 - delta) ** 2)
    return NIGParams(delta, gamma, alpha, beta)


def nig_sum(a: NIGParams, b: NIGParams, *, check: bool = True) -> NIGParams:
    """Sum two NIG distributions into one.

    The fused mean is the gamma-weighted average of the two means, gamma and
    alpha add (alpha gains an extra 1/2), and beta collects both betas plus
    the gamma-weighted squared deviation of each input mean from the fused
    mean. Disagreement between inputs therefore shows up as extra uncertainty.
    """
    if check:
        validate(a)
        validate(b)
    return _sum_unchecked(NIGParams(*a), NIGParams(*b))


def monig_fuse(branches: Sequence[NIGParams], *, check: bool = True) -> NIGParams:
    """Left fold of :func:`nig_sum` over ``branches`` in the given order."""
    branches = list(branches)
    if not branches:
        raise EmptyInputError("cannot fuse an empty list of NIG distributions")
    if check:
        for p in branches:
            validate(p)
    if len(branches) == 1:
        return NIGParams(*branches[0])
    return reduce(_sum_unchecked, (NIGParams(*p) for p in branches))


def point_prediction(p: NIGParams):
    return p.delta


def aleatoric(p: NIGParams):
    """Expected observation variance, ``beta / (alpha - 1)``."""
    return p.beta / (p.alpha - 1.0)


def epistemic(p: NIGParams):
    """Variance of the mean, ``beta / (gamma (alpha - 1))``."""
    return p.beta / (p.gamma * (p.alpha - 1.0))


def marginal_student_t(p: NIGParams) -> StudentTParams:
    """Marginal distribution of ``y`` after integrating out mean and variance."""
    return StudentTParams(
        location=p.delta,
        scale=p.beta * (1.0 + p.gamma) / (p.gamma * p.alpha),
        dof=2.0 * p.alpha,
    )


def student_t_logpdf(y, t: StudentTParams):
    """Log density of a Student-t parameterised by its squared scale."""
    y = np.asarray(y, dtype=np.float64)
    nu = np.asarray(t.dof, dtype=np.float64)
    scale = np.asarray(t.scale, dtype=np.float64)
    z = (y - t.location) ** 2 / (nu * scale)
    return (
        lgamma(0.5 * (nu + 1.0))
        - lgamma(0.5 * nu)
        - 0.5 * np.log(nu * np.pi * scale)
        - 0.5 * (nu + 1.0) * np.log1p(z)
    )


def naive_average_fuse(branches: Sequence[NIGParams], weights: Sequence[float] | None = None):
    """Weighted mean of the branch locations; uniform weights by default.

    This is a point prediction only. Averaging the distributions themselves
    has no closed-form NIG result.
    """
    branches = list(branches)
    if not branches:
        raise EmptyInputError("cannot average an empty list of NIG distributions")
    deltas = np.stack([_raw(p.delta) for p in branches])
    if weights is None:
        w = np.ones(len(branches))
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (len(branches),):
            raise ValueError("need exactly one weight per branch")
        if np.any(w < 0):
            raise NegativeWeightError("weights must be non-negative")
        if w.sum() <= 0:
            raise NegativeWeightError("weights must not all be zero")
    w = w / w.sum()
    out = np.tensordot(w, deltas, axes=1)
    return float(out) if out.ndim == 0 else out
