"""Experiment protocols shared by the command line and the acceptance tests.

Each function is deterministic given its seed and returns plain
dictionaries or lists that serialise straight to JSON.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TEST, MultimodalDataset, NoiseSpec, cubic_grid, gen_synthetic_cubic, gen_tabular_replica, inject_noise, split, standardize
from .errors import ConfigError
from .evaluation import score_prediction
from .metrics import auroc, rmse
from .model import FUSION_MODES, MultimodalRegressor, TrainConfig, TrainResult, build_model, decision_fusion_baseline, train

# synthetic cubic ----------------------------------------------------------------

SYNTH_HIDDEN = (100,) * 4
SYNTH_PSEUDO_HIDDEN = (100,)
AU_INNER = 2.0
FIT_RANGE = 4.0
EXTRAP_RANGE = (5.0, 7.0)


@dataclass
class SynthRun:
    x: np.ndarray
    y_true: np.ndarray
    prediction: object
    report: dict
    history: TrainResult


def synth_report(x, pred) -> dict:
    """Trend summary of a prediction over the synthetic test grid."""
    ax = np.abs(x)
    inner = ax <= AU_INNER
    ring = (ax >= AU_INNER) & (ax <= FIT_RANGE)
    fit = ax <= FIT_RANGE
    far = (ax >= EXTRAP_RANGE[0]) & (ax <= EXTRAP_RANGE[1])
    clean = x**3
    au, eu = np.asarray(pred.aleatoric), np.asarray(pred.epistemic)
    n_mod = len(pred.per_branch) - 1 if len(pred.per_branch) > 1 else 1
    return {
        "rmse": rmse(np.asarray(pred.prediction)[fit], clean[fit]),
        "branch_rmse": [rmse(np.asarray(p.delta)[fit], clean[fit]) for p in pred.per_branch],
        "best_modality_rmse": min(rmse(np.asarray(p.delta)[fit], clean[fit]) for p in pred.per_branch[:n_mod]),
        "mean_au_in": float(au[inner].mean()),
        "mean_au_out": float(au[ring].mean()),
        "mean_eu_interpolation": float(eu[ring].mean()),
        "mean_eu_extrapolation": float(eu[far].mean()),
    }


def run_synthetic(seed: int = 0, cfg: TrainConfig | None = None, *, n_train: int = 800) -> SynthRun:
    """Fit the two-modality cubic and score it on the wide test grid.

    ``rmse`` compares the fused mean with the noise-free cubic on the
    training range. Inputs are left unscaled so the networks extrapolate
    in the raw coordinate.
    """
    cfg = cfg if cfg is not None else TrainConfig.synthetic(seed=seed)
    data = gen_synthetic_cubic(n_train, seed)
    model = MultimodalRegressor(
        data.dims, SYNTH_HIDDEN, pseudo_hidden_dims=SYNTH_PSEUDO_HIDDEN, use_pseudo=cfg.use_pseudo, seed=seed
    )
    history = train(model, data, cfg)
    x = cubic_grid()
    pred = model.predict(data.features(TEST))
    return SynthRun(x, x**3, pred, synth_report(x, pred), history)


def synth_table(run: SynthRun) -> tuple:
    """Header and rows for the per-grid-point prediction CSV."""
    pred = run.prediction
    header = ["x", "y_true", "delta_fused"] + [f"delta_branch{i}" for i in range(len(pred.per_branch))] + ["au", "eu"]
    cols = [run.x, run.y_true, pred.prediction] + [p.delta for p in pred.per_branch] + [pred.aleatoric, pred.epistemic]
    return header, np.column_stack([np.asarray(c, dtype=np.float64) for c in cols])


# tabular replica ----------------------------------------------------------------

REPLICA_SPLIT = (2000, 0, 1000)
REPLICA_EPOCHS = 100


def make_replica(seed: int = 0, sizes=REPLICA_SPLIT, **gen) -> MultimodalDataset:
    """Split and train-standardised replica of a two-modality tabular task."""
    data = gen_tabular_replica(int(sum(sizes)), seed, **gen)
    return standardize(split(data, sizes, seed))


def replica_config(seed: int = 0, **overrides) -> TrainConfig:
    return TrainConfig.tabular(**{"epochs": REPLICA_EPOCHS, "seed": seed, **overrides})


def fit(kind: str, data: MultimodalDataset, cfg: TrainConfig, hidden_dims=(64,) * 6):
    model = build_model(kind, data.dims, hidden_dims, use_pseudo=cfg.use_pseudo, seed=cfg.seed)
    train(model, data, cfg)
    return model


# noise protocols ---------------------------------------------------------------

NOISE_MODES = ("Mod1", "Mod2", "RandMod", "AllMod")


def noise_spec(mode: str, epsilon: float, fraction: float = 0.5) -> NoiseSpec:
    """``ModK`` corrupts modality K (1-based), ``RandMod`` one random
    modality per row and ``AllMod`` every modality."""
    if mode == "RandMod":
        return NoiseSpec(epsilon, "random", fraction=fraction)
    if mode == "AllMod":
        return NoiseSpec(epsilon, "all", fraction=fraction)
    if mode.startswith("Mod") and mode[3:].isdigit() and int(mode[3:]) >= 1:
        return NoiseSpec(epsilon, "fixed", int(mode[3:]) - 1, fraction)
    raise ConfigError(f"unknown noise mode {mode!r}")


def ood_grid(model, data: MultimodalDataset, modes=NOISE_MODES, epsilons=(0.1, 0.5), *, fraction: float = 0.5, seed: int = 0):
    """AUROC of fused AU and EU at separating corrupted from clean test rows."""
    rows = []
    for mode in modes:
        for eps in epsilons:
            noisy = inject_noise(data, noise_spec(mode, float(eps), fraction), seed=seed)
            pred = model.predict(noisy.dataset.features())
            rows.append({
                "mode": mode,
                "epsilon": float(eps),
                "auroc_au": auroc(pred.aleatoric, noisy.ood),
                "auroc_eu": auroc(pred.epistemic, noisy.ood),
            })
    return rows


def noisy_rmse(model, data: MultimodalDataset, spec: NoiseSpec, seed: int = 0) -> float:
    noisy = inject_noise(data, spec, seed=seed)
    return rmse(model.predict(noisy.dataset.features()).prediction, noisy.dataset.target())


def robustness_table(models: dict, data: MultimodalDataset, epsilons=(0.05, 0.1), *, mode: str = "RandMod", seed: int = 0):
    """Test RMSE of each named model with every test row corrupted."""
    rows = []
    for eps in epsilons:
        spec = noise_spec(mode, float(eps), fraction=1.0)
        row = {"epsilon": float(eps)}
        row.update({name: noisy_rmse(m, data, spec, seed) for name, m in models.items()})
        rows.append(row)
    return rows


def decision_fusion_table(model: MultimodalRegressor, data: MultimodalDataset) -> dict:
    """Clean test RMSE of the decision-fusion rules over the modality
    branches, next to the full MoNIG prediction."""
    pred = model.predict(data.features(TEST))
    y = data.target(TEST)
    branches = pred.per_branch[: len(model.input_dims)]
    out = {mode: rmse(decision_fusion_baseline(branches, mode), y) for mode in FUSION_MODES}
    out["monig"] = rmse(pred.prediction, y)
    return out


def ueir_table(models: dict, data: MultimodalDataset, *, seed: int = 0) -> dict:
    out = {}
    for name, m in models.items():
        rep = score_prediction(m.predict(data.features(TEST)), data.target(TEST), seed=seed)
        out[name] = {"ueir_au": rep.ueir_au, "ueir_eu": rep.ueir_eu}
    return out
