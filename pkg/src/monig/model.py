"""Multimodal evidential regressors, baselines and the training loop."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import MLP, AdamState, EvidentialHead, GaussianHead, MLPSpec, adam_step, concat, no_grad
from .data import TRAIN, VAL, MultimodalDataset
from .errors import ConfigError, EmptyInputError, ShapeMismatch
from .losses import LossConfig, branch_loss, gaussian_nll
from .nig import NIGParams, aleatoric, epistemic, monig_fuse, naive_average_fuse

FUSION_MODES = ("average", "au_weighted", "eu_weighted")


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation settings. Defaults follow the synthetic cubic experiment.

    ``epochs`` counts full passes over the train split. With
    ``standardize_targets`` the model fits z-scored targets internally (so
    ``lam`` acts on standardised residuals) while every prediction is
    reported in the original target units.
    """

    epochs: int = 60
    batch_size: int = 128
    lr: float = 5e-3
    lam: float = 0.6
    seed: int = 0
    use_pseudo: bool = True
    regularizer_delta_grad: bool = True
    select_best_val: bool = True
    standardize_targets: bool = True

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if not self.lam >= 0:
            raise ConfigError("lam must be non-negative")

    @classmethod
    def synthetic(cls, **overrides) -> "TrainConfig":
        return cls(**{"epochs": 60, "lr": 5e-3, "lam": 0.6, "batch_size": 128, **overrides})

    @classmethod
    def tabular(cls, **overrides) -> "TrainConfig":
        return cls(**{"epochs": 400, "lr": 1e-3, "lam": 0.05, "batch_size": 128, **overrides})

    @property
    def loss(self) -> LossConfig:
        return LossConfig(self.lam, self.regularizer_delta_grad)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EvidentialPrediction:
    """Fused NIG, its point prediction and uncertainties, plus every branch.

    Fields are floats for one sample or arrays for a batch. Branch order is
    the modality order, then the pseudo branch when present.
    """

    fused: NIGParams
    per_branch: list
    prediction: object
    aleatoric: object
    epistemic: object
    per_branch_aleatoric: list = field(default_factory=list)
    per_branch_epistemic: list = field(default_factory=list)

    @classmethod
    def from_nigs(cls, fused: NIGParams, per_branch) -> "EvidentialPrediction":
        return cls(
            fused=fused,
            per_branch=list(per_branch),
            prediction=fused.delta,
            aleatoric=aleatoric(fused),
            epistemic=epistemic(fused),
            per_branch_aleatoric=[aleatoric(p) for p in per_branch],
            per_branch_epistemic=[epistemic(p) for p in per_branch],
        )

    def row(self, i: int) -> "EvidentialPrediction":
        take = lambda p: NIGParams(*(float(v[i]) for v in p))  # noqa: E731
        return EvidentialPrediction.from_nigs(take(self.fused), [take(p) for p in self.per_branch])


def _values(nig: NIGParams) -> NIGParams:
    return NIGParams(*(np.array(v.value) for v in nig))


def _to_target_units(nig: NIGParams, mean: float, std: float) -> NIGParams:
    # exact for y = mean + std * u: location shifts and scales, beta scales by std**2
    return NIGParams(mean + std * nig.delta, nig.gamma, nig.alpha, std * std * nig.beta)


def _check_inputs(xs, dims):
    if len(xs) != len(dims):
        raise ShapeMismatch(f"expected {len(dims)} modalities, got {len(xs)}")
    out = []
    n = None
    for x, d in zip(xs, dims):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != d:
            raise ShapeMismatch(f"modality expects {d} features, got shape {x.shape}")
        if n is not None and x.shape[0] != n:
            raise ShapeMismatch("modalities have different sample counts")
        n = x.shape[0]
        out.append(x)
    return out


class _Trainable:
    """Shared plumbing: parameter listing, snapshots and checkpoints."""

    kind = ""
    target_mean = 0.0
    target_std = 1.0

    def parameters(self):
        raise NotImplementedError

    def set_target_scaling(self, mean: float, std: float) -> None:
        if not std > 0:
            raise ConfigError("target std must be positive")
        self.target_mean = float(mean)
        self.target_std = float(std)

    def _scaled(self, y):
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def snapshot(self):
        return [p.value.copy() for p in self.parameters()]

    def restore(self, values):
        for p, v in zip(self.parameters(), values):
            p.value[...] = v

    def config(self) -> dict:
        raise NotImplementedError

    def to_checkpoint(self, extra: dict | None = None) -> dict:
        doc = {
            "format_version": ad.CHECKPOINT_FORMAT_VERSION,
            "kind": self.kind,
            "config": self.config(),
            "target_scaling": [self.target_mean, self.target_std],
            "tensors": ad.params_to_dict(self.parameters()),
        }
        if extra:
            doc.update(extra)
        return doc

    def save(self, path, extra: dict | None = None) -> None:
        ad.write_json(path, self.to_checkpoint(extra))

    def predict_mean(self, xs) -> np.ndarray:
        return np.asarray(self.predict(xs).prediction)


class MultimodalRegressor(_Trainable):
    """One MLP branch and evidential head per modality, an optional pseudo
    branch fed by the concatenated last hidden layers, and MoNIG fusion.
    """

    kind = "monig"

    def __init__(
        self,
        input_dims,
        hidden_dims=(64,) * 6,
        *,
        pseudo_hidden_dims=(64, 64),
        use_pseudo: bool = True,
        activation: str = "relu",
        seed: int = 0,
    ):
        input_dims = tuple(int(d) for d in input_dims)
        if not input_dims:
            raise ConfigError("need at least one modality")
        self.input_dims = input_dims
        self.hidden_dims = tuple(hidden_dims)
        self.pseudo_hidden_dims = tuple(pseudo_hidden_dims)
        self.use_pseudo = bool(use_pseudo)
        self.activation = activation
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.branches = [
            MLP(MLPSpec(d, self.hidden_dims, activation), rng, name=f"branch{m}")
            for m, d in enumerate(input_dims)
        ]
        self.heads = [
            EvidentialHead(net.spec.output_dim, rng, name=f"head{m}")
            for m, net in enumerate(self.branches)
        ]
        self.pseudo = self.pseudo_head = None
        if self.use_pseudo:
            pseudo_in = sum(net.spec.output_dim for net in self.branches)
            self.pseudo = MLP(MLPSpec(pseudo_in, self.pseudo_hidden_dims, activation), rng, name="pseudo")
            self.pseudo_head = EvidentialHead(self.pseudo.spec.output_dim, rng, name="pseudo_head")

    @property
    def n_branches(self) -> int:
        return len(self.branches) + int(self.use_pseudo)

    def parameters(self):
        params = [p for net in self.branches for p in net.parameters()]
        params += [p for head in self.heads for p in head.parameters()]
        if self.use_pseudo:
            params += self.pseudo.parameters() + self.pseudo_head.parameters()
        return params

    def config(self) -> dict:
        return {
            "input_dims": list(self.input_dims),
            "hidden_dims": list(self.hidden_dims),
            "pseudo_hidden_dims": list(self.pseudo_hidden_dims),
            "use_pseudo": self.use_pseudo,
            "activation": self.activation,
            "seed": self.seed,
        }

    def branch_nigs(self, xs):
        """Per-branch NIG tensors, modalities first and pseudo last."""
        xs = _check_inputs(xs, self.input_dims)
        hidden = [net(x) for net, x in zip(self.branches, xs)]
        nigs = [head(h) for head, h in zip(self.heads, hidden)]
        if self.use_pseudo:
            nigs.append(self.pseudo_head(self.pseudo(concat(hidden, axis=-1))))
        return nigs

    def loss(self, xs, y, cfg: LossConfig = LossConfig()):
        """Mean over the batch of every branch loss plus the fused loss.

        Evaluated in the model's internal (possibly standardised) target units.
        """
        nigs = self.branch_nigs(xs)
        fused = monig_fuse(nigs, check=False)
        y = self._scaled(y)
        total = branch_loss(y, fused, cfg, check=False)
        for nig in nigs:
            total = total + branch_loss(y, nig, cfg, check=False)
        return total.mean()

    def predict(self, xs) -> EvidentialPrediction:
        with no_grad():
            nigs = [
                _to_target_units(_values(n), self.target_mean, self.target_std)
                for n in self.branch_nigs(xs)
            ]
        return EvidentialPrediction.from_nigs(monig_fuse(nigs, check=False), nigs)

    def forward_all(self, sample) -> EvidentialPrediction:
        """Prediction for a single sample given one feature vector per modality."""
        return self.predict([np.asarray(x, dtype=np.float64)[None, :] for x in sample]).row(0)


def total_loss(model: MultimodalRegressor, xs, y, cfg: LossConfig = LossConfig()):
    return model.loss(xs, y, cfg)


class ConcatRegressor(_Trainable):
    """Single-head baseline on fused features.

    ``fusion="early"`` concatenates the raw modality features;
    ``fusion="intermediate"`` concatenates the last hidden layer of
    per-modality MLPs and feeds that through a further MLP. ``head`` selects
    an evidential (NIG) or Gaussian output.
    """

    def __init__(
        self,
        input_dims,
        hidden_dims=(64,) * 6,
        *,
        fusion: str = "early",
        head: str = "evidential",
        fusion_hidden_dims=(64, 64),
        activation: str = "relu",
        seed: int = 0,
    ):
        if fusion not in ("early", "intermediate"):
            raise ConfigError(f"unknown fusion {fusion!r}")
        if head not in ("evidential", "gaussian"):
            raise ConfigError(f"unknown head {head!r}")
        self.input_dims = tuple(int(d) for d in input_dims)
        self.hidden_dims = tuple(hidden_dims)
        self.fusion_hidden_dims = tuple(fusion_hidden_dims)
        self.fusion = fusion
        self.head_type = head
        self.activation = activation
        self.seed = seed
        rng = np.random.default_rng(seed)
        if fusion == "early":
            self.branches = []
            self.trunk = MLP(MLPSpec(sum(self.input_dims), self.hidden_dims, activation), rng, name="trunk")
        else:
            self.branches = [
                MLP(MLPSpec(d, self.hidden_dims, activation), rng, name=f"branch{m}")
                for m, d in enumerate(self.input_dims)
            ]
            width = sum(net.spec.output_dim for net in self.branches)
            self.trunk = MLP(MLPSpec(width, self.fusion_hidden_dims, activation), rng, name="trunk")
        head_cls = EvidentialHead if head == "evidential" else GaussianHead
        self.head = head_cls(self.trunk.spec.output_dim, rng, name="head")

    @property
    def kind(self) -> str:
        prefix = "evd" if self.head_type == "evidential" else "gs"
        return f"{prefix}-{'df' if self.fusion == 'early' else 'if'}"

    def parameters(self):
        params = [p for net in self.branches for p in net.parameters()]
        return params + self.trunk.parameters() + self.head.parameters()

    def config(self) -> dict:
        return {
            "input_dims": list(self.input_dims),
            "hidden_dims": list(self.hidden_dims),
            "fusion_hidden_dims": list(self.fusion_hidden_dims),
            "fusion": self.fusion,
            "head": self.head_type,
            "activation": self.activation,
            "seed": self.seed,
        }

    def _outputs(self, xs):
        xs = _check_inputs(xs, self.input_dims)
        if self.fusion == "early":
            h = self.trunk(np.concatenate(xs, axis=1))
        else:
            h = self.trunk(concat([net(x) for net, x in zip(self.branches, xs)], axis=-1))
        return self.head(h)

    def loss(self, xs, y, cfg: LossConfig = LossConfig()):
        out = self._outputs(xs)
        y = self._scaled(y)
        if self.head_type == "evidential":
            return branch_loss(y, out, cfg, check=False).mean()
        mean, var = out
        return gaussian_nll(y, mean, var).mean()

    def predict(self, xs) -> EvidentialPrediction:
        """For the Gaussian head both uncertainties report the predicted variance."""
        with no_grad():
            out = self._outputs(xs)
        mu, sd = self.target_mean, self.target_std
        if self.head_type == "evidential":
            nig = _to_target_units(_values(out), mu, sd)
            return EvidentialPrediction.from_nigs(nig, [nig])
        mean = mu + sd * np.array(out[0].value)
        var = sd * sd * np.array(out[1].value)
        return EvidentialPrediction(
            fused=None, per_branch=[], prediction=mean, aleatoric=var, epistemic=var,
        )


MODEL_KINDS = ("monig", "evd-df", "evd-if", "gs-df", "gs-if")


def build_model(kind: str, input_dims, hidden_dims=(64,) * 6, *, use_pseudo=True, seed=0, extra_dims=(64, 64)):
    """Construct any supported model from its short name."""
    if kind == "monig":
        return MultimodalRegressor(input_dims, hidden_dims, pseudo_hidden_dims=extra_dims, use_pseudo=use_pseudo, seed=seed)
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")
    head, fusion = kind.split("-")
    return ConcatRegressor(
        input_dims,
        hidden_dims,
        fusion="early" if fusion == "df" else "intermediate",
        head="evidential" if head == "evd" else "gaussian",
        fusion_hidden_dims=extra_dims,
        seed=seed,
    )


def model_from_checkpoint(doc: dict):
    cfg = doc["config"]
    if doc["kind"] == "monig":
        model = MultimodalRegressor(
            cfg["input_dims"],
            cfg["hidden_dims"],
            pseudo_hidden_dims=cfg["pseudo_hidden_dims"],
            use_pseudo=cfg["use_pseudo"],
            activation=cfg["activation"],
            seed=cfg["seed"],
        )
    elif doc["kind"] in MODEL_KINDS:
        model = ConcatRegressor(
            cfg["input_dims"],
            cfg["hidden_dims"],
            fusion=cfg["fusion"],
            head=cfg["head"],
            fusion_hidden_dims=cfg["fusion_hidden_dims"],
            activation=cfg["activation"],
            seed=cfg["seed"],
        )
    else:
        raise ConfigError(f"unknown model kind {doc['kind']!r}")
    ad.load_params_from_dict(model.parameters(), doc["tensors"])
    model.set_target_scaling(*doc.get("target_scaling", (0.0, 1.0)))
    return model


def load_model(path):
    return model_from_checkpoint(ad.read_checkpoint(path))


# training ---------------------------------------------------------------------


@dataclass
class TrainResult:
    model: object
    train_loss: list
    val_loss: list
    val_rmse: list
    best_epoch: int | None


def _rmse(pred, y):
    return float(np.sqrt(np.mean((np.asarray(pred) - y) ** 2)))


def train(model, dataset: MultimodalDataset, cfg: TrainConfig) -> TrainResult:
    """Shuffled mini-batch Adam on the train split.

    Records mean train loss per epoch and, when a validation split exists,
    validation loss and RMSE. With ``select_best_val`` the parameters from
    the epoch with the lowest validation RMSE are restored at the end.
    """
    if tuple(dataset.dims) != tuple(model.input_dims):
        raise ConfigError(f"dataset dims {dataset.dims} do not match model dims {model.input_dims}")
    if isinstance(model, MultimodalRegressor) and model.use_pseudo != cfg.use_pseudo:
        raise ConfigError("model.use_pseudo disagrees with the training config")
    xs = dataset.features(TRAIN)
    y = dataset.target(TRAIN)
    if len(y) == 0:
        raise ConfigError("train split is empty")
    has_val = dataset.split is not None and bool(dataset.mask(VAL).any())
    xv, yv = (dataset.features(VAL), dataset.target(VAL)) if has_val else (None, None)

    if cfg.standardize_targets and cfg.epochs > 0:
        std = float(np.std(y))
        model.set_target_scaling(float(np.mean(y)), std if std > 0 else 1.0)
    loss_cfg = cfg.loss
    params = model.parameters()
    state = AdamState(lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed + 7919)
    result = TrainResult(model, [], [], [], None)
    best = (np.inf, None)
    n = len(y)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss = model.loss([x[idx] for x in xs], y[idx], loss_cfg)
            loss.backward()
            adam_step(state, params)
            total += float(loss.value) * len(idx)
        result.train_loss.append(total / n)
        if has_val:
            with no_grad():
                result.val_loss.append(float(model.loss(xv, yv, loss_cfg).value))
            score = _rmse(model.predict_mean(xv), yv)
            result.val_rmse.append(score)
            if cfg.select_best_val and score < best[0]:
                best = (score, model.snapshot())
                result.best_epoch = epoch
    if best[1] is not None:
        model.restore(best[1])
    return result


# decision-fusion baselines ------------------------------------------------------


def decision_fusion_baseline(per_branch, mode: str = "average"):
    """Combine branch locations without building a fused distribution.

    ``average`` is the plain mean of the branch means. ``au_weighted`` and
    ``eu_weighted`` weight each branch by the inverse of its aleatoric or
    epistemic uncertainty, normalised to sum to one. Works per sample when
    the fields are arrays.
    """
    per_branch = list(per_branch)
    if not per_branch:
        raise EmptyInputError("no branches to fuse")
    if mode == "average":
        return naive_average_fuse(per_branch)
    if mode not in FUSION_MODES:
        raise ConfigError(f"unknown fusion mode {mode!r}; choose from {FUSION_MODES}")
    unc = aleatoric if mode == "au_weighted" else epistemic
    deltas = np.stack([np.asarray(p.delta, dtype=np.float64) for p in per_branch])
    w = np.stack([1.0 / np.asarray(unc(p), dtype=np.float64) for p in per_branch])
    out = (w * deltas).sum(axis=0) / w.sum(axis=0)
    return float(out) if out.ndim == 0 else out
