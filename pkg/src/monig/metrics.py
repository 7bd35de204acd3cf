"""Point-error, OOD-detection and uncertainty-ranking metrics."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import LengthMismatch, SingleClass

UEIR_MAX_SAMPLES = 5000


def _pair(a, b, min_len=1):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    if a.size < min_len:
        raise LengthMismatch(f"need at least {min_len} values, got {a.size}")
    return a, b


def rmse(pred, target) -> float:
    pred, target = _pair(pred, target)
    diff = np.abs(pred - target)
    scale = diff.max()
    if scale == 0 or not np.isfinite(scale):
        return float(scale)
    # factor out the largest residual so tiny or huge errors do not under/overflow
    return float(scale * np.sqrt(np.mean((diff / scale) ** 2)))


def mae(pred, target) -> float:
    pred, target = _pair(pred, target)
    return float(np.mean(np.abs(pred - target)))


def auroc(scores, labels) -> float:
    """Area under the ROC curve, with label 1 as the positive class.

    Computed from the Mann-Whitney U statistic on midranks, so tied scores
    contribute one half.
    """
    scores, labels = _pair(scores, labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUROC needs both positive and negative labels")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def ueir(errors, uncertainties, *, max_samples: int = UEIR_MAX_SAMPLES, seed: int = 0) -> float:
    """Uncertainty-error inconsistency rate, in percent.

    The share of sample pairs whose errors and uncertainties are strictly
    ordered in opposite directions. Pairs tied in either quantity count as
    consistent. Inputs longer than ``max_samples`` are subsampled (seeded)
    before the exhaustive pair count.
    """
    errors, uncertainties = _pair(errors, uncertainties, min_len=2)
    n = errors.size
    if n > max_samples:
        keep = np.random.default_rng(seed).choice(n, size=max_samples, replace=False)
        errors, uncertainties = errors[keep], uncertainties[keep]
        n = max_samples
    opposed = 0
    chunk = max(1, 2_000_000 // n)
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        de = np.sign(errors[start:stop, None] - errors[None, :])
        du = np.sign(uncertainties[start:stop, None] - uncertainties[None, :])
        opposed += int(np.count_nonzero(de * du < 0))
    # every unordered pair was counted twice
    return 100.0 * (opposed / 2) / (n * (n - 1) / 2)
