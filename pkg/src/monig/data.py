"""Multimodal datasets: synthetic generators, CSV ingestion, splitting,
standardisation and test-time noise injection."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, ParseError, SchemaError, SplitError

TRAIN, VAL, TEST = "train", "val", "test"

# (train, val, test) sample counts
SUPERCONDUCTIVITY_SPLIT = (10633, 4000, 6600)
CT_SLICES_SPLIT = (26750, 10000, 16750)


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MultimodalDataset:
    """Per-modality feature matrices sharing one target vector.

    ``split`` holds one of ``"train"``, ``"val"``, ``"test"`` per sample
    (or is ``None`` before splitting). ``stats`` holds the per-modality
    ``(mean, std)`` used by :func:`standardize`, computed on train rows.
    """

    modalities: tuple
    targets: np.ndarray
    names: tuple = ()
    split: np.ndarray | None = None
    stats: tuple | None = None

    def __post_init__(self):
        mods = tuple(_frozen(np.reshape(m, (-1, 1)) if np.ndim(m) == 1 else m) for m in self.modalities)
        if not mods:
            raise SchemaError("a dataset needs at least one modality")
        targets = _frozen(np.ravel(self.targets))
        n = len(targets)
        for i, m in enumerate(mods):
            if m.ndim != 2 or m.shape[0] != n:
                raise SchemaError(f"modality {i} has {m.shape[0]} rows, targets have {n}")
            if np.any(~np.isfinite(m)):
                raise SchemaError(f"modality {i} contains non-finite values")
        if np.any(~np.isfinite(targets)):
            raise SchemaError("targets contain non-finite values")
        names = tuple(self.names) or tuple(f"mod{i + 1}" for i in range(len(mods)))
        if len(names) != len(mods):
            raise SchemaError("need one name per modality")
        object.__setattr__(self, "modalities", mods)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "names", names)
        if self.split is not None:
            split = np.asarray(self.split, dtype=object)
            if split.shape != (n,):
                raise SplitError("split labels must have one entry per sample")
            split.setflags(write=False)
            object.__setattr__(self, "split", split)

    def __len__(self):
        return len(self.targets)

    @property
    def n_modalities(self) -> int:
        return len(self.modalities)

    @property
    def dims(self) -> tuple:
        return tuple(m.shape[1] for m in self.modalities)

    def mask(self, part: str) -> np.ndarray:
        if self.split is None:
            raise SplitError("dataset has not been split")
        return self.split == part

    def subset(self, rows) -> "MultimodalDataset":
        """Dataset restricted to ``rows`` (a split name, boolean mask or indices)."""
        if isinstance(rows, str):
            rows = self.mask(rows)
        return replace(
            self,
            modalities=tuple(m[rows] for m in self.modalities),
            targets=self.targets[rows],
            split=None if self.split is None else self.split[rows],
        )

    def features(self, part: str | None = None) -> list:
        if part is None:
            return list(self.modalities)
        rows = self.mask(part)
        return [m[rows] for m in self.modalities]

    def target(self, part: str | None = None) -> np.ndarray:
        return self.targets if part is None else self.targets[self.mask(part)]


# synthetic data ---------------------------------------------------------------


def cubic_noise_std(x):
    """Target noise std: 3 on |x| >= 2, rising linearly to 4.6 at x = 0."""
    ax = np.abs(np.asarray(x, dtype=np.float64))
    return np.where(ax < 2.0, 3.0 + 0.8 * (2.0 - ax), 3.0)


def cubic_grid(n_test: int = 1000, test_range: float = 7.0) -> np.ndarray:
    return np.linspace(-test_range, test_range, n_test)


def gen_synthetic_cubic(
    n_train: int = 800,
    seed: int = 0,
    *,
    n_modalities: int = 2,
    x_range: float = 4.0,
    input_noise_var: float = 0.01,
    noise: bool = True,
    n_test: int = 1000,
    test_range: float = 7.0,
) -> MultimodalDataset:
    """Samples of ``y = x**3 + eps`` seen through ``n_modalities`` noisy copies of x.

    Train rows draw x uniformly on ``[-x_range, x_range]`` and each modality
    sees ``x + N(0, input_noise_var)``. Test rows are the noise-free grid
    :func:`cubic_grid` with noisy targets. ``noise=False`` turns off all
    noise, giving ``y == x**3``.
    """
    if n_train < 1:
        raise ConfigError("n_train must be at least 1")
    rng = np.random.default_rng(seed)
    x_train = rng.uniform(-x_range, x_range, size=n_train)
    x_test = cubic_grid(n_test, test_range)
    x = np.concatenate([x_train, x_test])
    y = x**3
    if noise:
        y = y + rng.normal(0.0, 1.0, size=x.shape) * cubic_noise_std(x)
    mods = []
    for _ in range(n_modalities):
        xm = x.copy()
        if noise:
            xm[:n_train] += rng.normal(0.0, np.sqrt(input_noise_var), size=n_train)
        mods.append(xm[:, None])
    split = np.array([TRAIN] * n_train + [TEST] * n_test, dtype=object)
    return MultimodalDataset(tuple(mods), y, split=split)


def gen_tabular_replica(
    n: int = 3000,
    seed: int = 0,
    *,
    dims: Sequence[int] = (16, 12),
    latent_dim: int = 4,
    feature_noise: float = 0.1,
    target_noise: float = 0.5,
    heteroscedastic: float = 0.0,
) -> MultimodalDataset:
    """Two-or-more-modality regression data driven by a shared latent vector.

    This is a desk-scale stand-in for the tabular benchmarks, not a copy of
    them. Each modality is a random linear map of the latent followed by a
    tanh on half of its columns, plus independent feature noise. The target
    is a fixed nonlinear function of the latent plus Gaussian noise.
    """
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, latent_dim))
    mods = []
    for d in dims:
        w = rng.normal(size=(latent_dim, d)) / np.sqrt(latent_dim)
        f = z @ w
        half = d // 2
        f[:, :half] = np.tanh(f[:, :half])
        f += rng.normal(0.0, feature_noise, size=f.shape)
        mods.append(f)
    y = (
        3.0 * np.sin(z[:, 0])
        + 2.0 * z[:, 1]
        + z[:, 2] * z[:, 3]
        + 0.5 * z[:, 0] ** 2
    )
    noise_std = target_noise * (1.0 + heteroscedastic * np.abs(z[:, 3]))
    y = 10.0 * (y + rng.normal(0.0, 1.0, size=n) * noise_std)
    return MultimodalDataset(tuple(mods), y)


# CSV ingestion ----------------------------------------------------------------


@dataclass(frozen=True)
class ModalitySchema:
    name: str
    start: int
    stop: int


@dataclass(frozen=True)
class CSVSchema:
    """Column layout of a multimodal CSV file.

    Column ranges are half-open ``[start, stop)`` indices into the file's
    columns. The id column, when present, is never used as a feature.
    """

    modalities: tuple
    target_column: int
    id_column: int | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "CSVSchema":
        unknown = set(doc) - {"modalities", "target_column", "id_column"}
        if unknown:
            raise SchemaError(f"unknown schema keys: {sorted(unknown)}")
        try:
            mods = tuple(
                ModalitySchema(str(m["name"]), int(m["columns"][0]), int(m["columns"][1]))
                for m in doc["modalities"]
            )
            target = int(doc["target_column"])
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise SchemaError(f"malformed schema: {exc}") from None
        id_col = doc.get("id_column")
        schema = cls(mods, target, None if id_col is None else int(id_col))
        schema.check()
        return schema

    @classmethod
    def from_json(cls, path) -> "CSVSchema":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: {exc}") from None
        return cls.from_dict(doc)

    def check(self, n_columns: int | None = None) -> None:
        if not self.modalities:
            raise SchemaError("schema declares no modalities")
        used = set()
        for m in self.modalities:
            if not 0 <= m.start < m.stop:
                raise SchemaError(f"modality {m.name!r} has an empty or negative column range")
            cols = set(range(m.start, m.stop))
            if cols & used:
                raise SchemaError(f"modality {m.name!r} overlaps another modality")
            used |= cols
        for col, what in ((self.target_column, "target"), (self.id_column, "id")):
            if col is not None and col in used:
                raise SchemaError(f"{what} column {col} is also a feature column")
        if n_columns is not None:
            top = max([m.stop for m in self.modalities] + [self.target_column + 1])
            if top > n_columns:
                raise SchemaError(f"schema needs {top} columns, file has {n_columns}")

    def to_dict(self) -> dict:
        return {
            "modalities": [{"name": m.name, "columns": [m.start, m.stop]} for m in self.modalities],
            "target_column": self.target_column,
            "id_column": self.id_column,
        }


def superconductivity_schema() -> CSVSchema:
    """81 material-property features, then 86 element-fraction features.

    Assumes the two UCI files were joined column-wise with the formula
    file's critical temperature and material name dropped, target last.
    """
    return CSVSchema(
        (ModalitySchema("properties", 0, 81), ModalitySchema("formula", 81, 167)),
        target_column=167,
    )


def ct_slices_schema() -> CSVSchema:
    """UCI CT slices layout: patient id, 240 bone, 144 air, reference."""
    return CSVSchema(
        (ModalitySchema("bone", 1, 241), ModalitySchema("air", 241, 385)),
        target_column=385,
        id_column=0,
    )


def read_numeric_csv(path):
    """Header row and float matrix of a fully numeric CSV file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, 0, "file is empty, expected a header row") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(lineno, len(row), f"expected {len(header)} cells, found {len(row)}")
            values = []
            for col, cell in enumerate(row):
                text = cell.strip()
                if not text:
                    raise ParseError(lineno, col, "missing value")
                try:
                    v = float(text)
                except ValueError:
                    raise ParseError(lineno, col, f"not a number: {text!r}") from None
                if not np.isfinite(v):
                    raise ParseError(lineno, col, f"non-finite value: {text!r}")
                values.append(v)
            rows.append(values)
    return header, np.array(rows, dtype=np.float64).reshape(len(rows), len(header))


def load_csv_multimodal(paths, schema: CSVSchema) -> MultimodalDataset:
    """Read one CSV, or several CSVs joined column-wise, into a dataset.

    Row numbers in :class:`ParseError` are 1-based file lines (the header is
    line 1); columns are 0-based within the offending file.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    blocks = []
    for path in paths:
        _, block = read_numeric_csv(path)
        blocks.append(block)
    if len({b.shape[0] for b in blocks}) > 1:
        raise SchemaError("joined CSV files have different row counts")
    table = np.concatenate(blocks, axis=1)
    schema.check(table.shape[1])
    mods = tuple(table[:, m.start:m.stop] for m in schema.modalities)
    return MultimodalDataset(mods, table[:, schema.target_column], tuple(m.name for m in schema.modalities))


# splitting and scaling ----------------------------------------------------------


def split(dataset: MultimodalDataset, sizes, seed: int = 0) -> MultimodalDataset:
    """Shuffle rows with ``seed`` and assign train/val/test labels.

    ``sizes`` is a triple of counts, or of fractions summing to at most 1.
    Rows beyond the requested total are dropped.
    """
    n = len(dataset)
    sizes = tuple(sizes)
    if len(sizes) != 3 or any(s < 0 for s in sizes):
        raise SplitError("sizes must be three non-negative numbers")
    if all(isinstance(s, (int, np.integer)) for s in sizes):
        counts = [int(s) for s in sizes]
    else:
        if sum(sizes) > 1.0 + 1e-12:
            raise SplitError("split fractions sum to more than 1")
        counts = [int(np.floor(s * n)) for s in sizes]
    if sum(counts) > n:
        raise SplitError(f"split counts {counts} exceed {n} samples")
    if counts[0] < 1:
        raise SplitError("train split must not be empty")
    order = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=object)
    labels[:] = None
    start = 0
    for name, count in zip((TRAIN, VAL, TEST), counts):
        labels[order[start:start + count]] = name
        start += count
    keep = labels != None  # noqa: E711
    out = replace(dataset, split=labels)
    return out if keep.all() else out.subset(keep)


def standardize(dataset: MultimodalDataset) -> MultimodalDataset:
    """Z-score every feature using train-split statistics only.

    Constant features (zero train std) map to 0. Targets are left alone.
    """
    train = dataset.mask(TRAIN)
    if not train.any():
        raise SplitError("train split is empty")
    mods, stats = [], []
    for m in dataset.modalities:
        mean = m[train].mean(axis=0)
        std = m[train].std(axis=0)
        safe = np.where(std > 0, std, 1.0)
        z = np.where(std > 0, (m - mean) / safe, 0.0)
        mods.append(z)
        stats.append((_frozen(mean), _frozen(std)))
    return replace(dataset, modalities=tuple(mods), stats=tuple(stats))


def apply_stats(dataset: MultimodalDataset, stats) -> MultimodalDataset:
    """Standardise with previously computed ``stats`` (e.g. from a checkpoint)."""
    mods = []
    for m, (mean, std) in zip(dataset.modalities, stats):
        std = np.asarray(std)
        safe = np.where(std > 0, std, 1.0)
        mods.append(np.where(std > 0, (m - mean) / safe, 0.0))
    return replace(dataset, modalities=tuple(mods), stats=tuple(stats))


def destandardize(dataset: MultimodalDataset) -> MultimodalDataset:
    """Undo :func:`standardize`. Constant features come back as their mean."""
    if dataset.stats is None:
        raise ConfigError("dataset carries no standardisation stats")
    mods = tuple(m * np.where(s > 0, s, 1.0) + mu for m, (mu, s) in zip(dataset.modalities, dataset.stats))
    return replace(dataset, modalities=mods, stats=None)


# noise injection --------------------------------------------------------------

NOISE_TARGETS = ("fixed", "random", "all")


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian corruption of test features.

    ``epsilon`` is the noise variance. ``target`` picks the corrupted
    modalities: ``"fixed"`` uses ``modality``, ``"random"`` draws one per
    sample, ``"all"`` corrupts every modality. ``fraction`` of the test rows
    are corrupted and labelled OOD.
    """

    epsilon: float
    target: str = "fixed"
    modality: int = 0
    fraction: float = 0.5

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ConfigError("epsilon must be non-negative")
        if not 0.0 <= self.fraction <= 1.0:
            raise ConfigError("fraction must lie in [0, 1]")
        if self.target not in NOISE_TARGETS:
            raise ConfigError(f"noise target must be one of {NOISE_TARGETS}")


@dataclass(frozen=True)
class NoisyTestSet:
    dataset: MultimodalDataset
    ood: np.ndarray  # 1 where the row was corrupted
    corrupted: np.ndarray  # (n, M) boolean, which modality of which row


def inject_noise(dataset: MultimodalDataset, spec: NoiseSpec, seed: int = 0, part: str | None = TEST) -> NoisyTestSet:
    """Corrupt ``floor(fraction * n)`` rows of ``part`` with N(0, epsilon) noise.

    Returns only the rows of ``part`` (all rows when ``part`` is None),
    with an OOD label per row.
    """
    data = dataset if part is None else dataset.subset(part)
    n, n_mod = len(data), data.n_modalities
    if spec.target == "fixed" and not 0 <= spec.modality < n_mod:
        raise ConfigError(f"modality index {spec.modality} out of range")
    rng = np.random.default_rng(seed)
    k = int(np.floor(spec.fraction * n))
    rows = rng.permutation(n)[:k]
    ood = np.zeros(n, dtype=int)
    ood[rows] = 1
    corrupted = np.zeros((n, n_mod), dtype=bool)
    if spec.target == "fixed":
        corrupted[rows, spec.modality] = True
    elif spec.target == "random":
        corrupted[rows, rng.integers(0, n_mod, size=k)] = True
    else:
        corrupted[rows, :] = True
    std = np.sqrt(spec.epsilon)
    mods = []
    for j, m in enumerate(data.modalities):
        noise = rng.normal(0.0, std, size=m.shape) if std > 0 else np.zeros(m.shape)
        mods.append(m + noise * corrupted[:, j:j + 1])
    return NoisyTestSet(replace(data, modalities=tuple(mods)), ood, corrupted)
