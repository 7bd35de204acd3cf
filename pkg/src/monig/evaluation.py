"""Scoring trained models and tracing uncertainty trends."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .data import TEST, TRAIN, MultimodalDataset, NoiseSpec, inject_noise
from .errors import ConfigError
from .metrics import auroc, mae, rmse, ueir
from .model import train


@dataclass
class EvalReport:
    """Test-set scores. AUROC fields stay ``None`` without OOD labels."""

    rmse: float
    mae: float
    auroc_au: float | None
    auroc_eu: float | None
    ueir_au: float
    ueir_eu: float
    branch_mean_au: list = field(default_factory=list)
    branch_mean_eu: list = field(default_factory=list)
    n_samples: int = 0

    def __post_init__(self):
        for name in ("auroc_au", "auroc_eu"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} outside [0, 1]: {v}")
        for name in ("ueir_au", "ueir_eu"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"{name} outside [0, 100]: {v}")

    def to_dict(self) -> dict:
        return asdict(self)


def score_prediction(pred, target, ood=None, *, seed: int = 0) -> EvalReport:
    """Build an :class:`EvalReport` from an ``EvidentialPrediction``."""
    target = np.asarray(target, dtype=np.float64)
    point = np.asarray(pred.prediction, dtype=np.float64)
    err = np.abs(point - target)
    au = np.asarray(pred.aleatoric, dtype=np.float64)
    eu = np.asarray(pred.epistemic, dtype=np.float64)
    a_au = a_eu = None
    if ood is not None:
        a_au, a_eu = auroc(au, ood), auroc(eu, ood)
    return EvalReport(
        rmse=rmse(point, target),
        mae=mae(point, target),
        auroc_au=a_au,
        auroc_eu=a_eu,
        ueir_au=ueir(err, au, seed=seed),
        ueir_eu=ueir(err, eu, seed=seed),
        branch_mean_au=[float(np.mean(u)) for u in pred.per_branch_aleatoric],
        branch_mean_eu=[float(np.mean(u)) for u in pred.per_branch_epistemic],
        n_samples=int(target.size),
    )


def evaluate(model, dataset: MultimodalDataset, part: str | None = TEST, *, ood=None, seed: int = 0) -> EvalReport:
    data = dataset if part is None else dataset.subset(part)
    return score_prediction(model.predict(data.features()), data.target(), ood, seed=seed)


def uncertainty_noise_curve(model, dataset, epsilons, *, target: str = "all", modality: int = 0, seed: int = 0):
    """Mean fused AU and EU on the test split with every row corrupted.

    Returns a list of ``(epsilon, mean_au, mean_eu)`` in grid order.
    """
    rows = []
    for eps in epsilons:
        noisy = inject_noise(dataset, NoiseSpec(float(eps), target, modality, fraction=1.0), seed=seed)
        pred = model.predict(noisy.dataset.features())
        rows.append((float(eps), float(np.mean(pred.aleatoric)), float(np.mean(pred.epistemic))))
    return rows


def epistemic_vs_trainsize(dataset: MultimodalDataset, fractions, build, cfg, *, seed: int = 0):
    """Retrain on growing shares of the train split and record test mean EU.

    ``build(input_dims, seed)`` returns a fresh model and ``cfg`` is the
    ``TrainConfig`` used for every run. Each fraction keeps a prefix of one
    fixed permutation of the train rows, so smaller sets are nested in larger
    ones, and model initialisation uses the same seed throughout.
    """
    fractions = sorted(float(f) for f in fractions)
    if any(not 0.0 < f <= 1.0 for f in fractions):
        raise ConfigError("fractions must lie in (0, 1]")
    train_rows = np.flatnonzero(dataset.mask(TRAIN))
    order = np.random.default_rng(seed).permutation(train_rows)
    other = np.flatnonzero(~dataset.mask(TRAIN))
    out = []
    for f in fractions:
        k = max(1, int(round(f * train_rows.size)))
        sub = dataset.subset(np.sort(np.concatenate([order[:k], other])))
        model = build(sub.dims, seed)
        train(model, sub, cfg)
        pred = model.predict(sub.features(TEST))
        out.append((f, float(np.mean(pred.epistemic))))
    return out
