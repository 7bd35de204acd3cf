"""Command-line entry point: ``monig <command> [options]``.

Every command resolves its settings from built-in defaults, then an
optional ``--config`` JSON file, then explicit flags. The resolved settings
are written into each output document. Exit status is 0 on success, 1 on a
runtime failure and 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .autodiff import read_checkpoint
from .data import (
    CT_SLICES_SPLIT,
    SUPERCONDUCTIVITY_SPLIT,
    CSVSchema,
    TEST,
    ct_slices_schema,
    load_csv_multimodal,
    read_numeric_csv,
    split,
    standardize,
    superconductivity_schema,
)
from .errors import ConfigError, MonigError, SchemaError, SplitError
from .evaluation import score_prediction
from .model import MODEL_KINDS, TrainConfig, build_model, model_from_checkpoint, train
from .nig import NIGParams, aleatoric, epistemic, marginal_student_t, monig_fuse

DATASETS = ("replica", "superconductivity", "ct", "csv")
DEFAULT_SPLITS = {
    "replica": list(ex.REPLICA_SPLIT),
    "superconductivity": list(SUPERCONDUCTIVITY_SPLIT),
    "ct": list(CT_SLICES_SPLIT),
    "csv": [0.6, 0.2, 0.2],
}

_TRAIN_DEFAULTS = {
    "epochs": 400,
    "lr": 1e-3,
    "lam": 0.05,
    "batch_size": 128,
    "use_pseudo": True,
    "hidden_dims": [64] * 6,
    "extra_dims": [64, 64],
}
_DATA_DEFAULTS = {"dataset": "replica", "paths": [], "schema": None, "split": None}

DEFAULTS = {
    "synth": {"epochs": 60, "lr": 5e-3, "lam": 0.6, "batch_size": 128, "use_pseudo": True, "n_train": 800, "out": "synth_out"},
    "train": {**_DATA_DEFAULTS, **_TRAIN_DEFAULTS, "model": "monig", "baselines": [], "out": "train_out"},
    "eval": {"checkpoint": None, "out": "eval_out"},
    "ood": {"checkpoint": None, "modes": list(ex.NOISE_MODES), "epsilons": [0.1, 0.5], "fraction": 0.5, "out": "ood_out"},
    "ablate": {
        **_DATA_DEFAULTS,
        **_TRAIN_DEFAULTS,
        "checkpoint": None,
        "epsilons": [0.05, 0.1],
        "noise_mode": "RandMod",
        "out": "ablate_out",
    },
    "fuse": {"input": None, "out": None},
}
for _d in DEFAULTS.values():
    _d["seed"] = 0


# settings -------------------------------------------------------------------------


def _env_seed():
    raw = os.environ.get("MONIG_SEED")
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"MONIG_SEED must be an integer, got {raw!r}") from None


def resolve(command: str, flags: dict, config_path=None) -> dict:
    """Merge defaults, config file and flags, in increasing priority.

    The seed falls back to ``MONIG_SEED`` when neither the config file nor a
    flag sets it.
    """
    settings = dict(DEFAULTS[command])
    file_cfg = {}
    if config_path is not None:
        try:
            file_cfg = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(file_cfg) - set(settings)
        if unknown:
            raise ConfigError(f"unknown config keys for {command!r}: {sorted(unknown)}")
    if "seed" not in file_cfg and "seed" not in flags:
        env = _env_seed()
        if env is not None:
            settings["seed"] = env
    settings.update(file_cfg)
    settings.update(flags)
    _validate(command, settings)
    return settings


def _validate(command: str, s: dict) -> None:
    if not isinstance(s["seed"], int) or isinstance(s["seed"], bool) or s["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    if "dataset" in s and s["dataset"] not in DATASETS:
        raise ConfigError(f"dataset must be one of {DATASETS}")
    if command == "train" and s["model"] not in MODEL_KINDS:
        raise ConfigError(f"model must be one of {MODEL_KINDS}")
    for kind in s.get("baselines", []):
        if kind not in MODEL_KINDS or kind == "monig":
            raise ConfigError(f"unknown baseline {kind!r}")
    for mode in s.get("modes", []):
        ex.noise_spec(mode, 0.0)
    if "noise_mode" in s:
        ex.noise_spec(s["noise_mode"], 0.0)
    if any(e < 0 for e in s.get("epsilons", [])):
        raise ConfigError("epsilons must be non-negative")
    if command in ("eval", "ood") and not s["checkpoint"]:
        raise ConfigError(f"{command} needs --checkpoint")
    if command == "fuse" and not s["input"]:
        raise ConfigError("fuse needs --input")
    if "epochs" in s:
        _train_config(s)


def _train_config(s: dict) -> TrainConfig:
    try:
        return TrainConfig(
            epochs=int(s["epochs"]),
            batch_size=int(s["batch_size"]),
            lr=float(s["lr"]),
            lam=float(s["lam"]),
            seed=int(s["seed"]),
            use_pseudo=bool(s["use_pseudo"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad training setting: {exc}") from None


# data -------------------------------------------------------------------------------


def data_spec(s: dict) -> dict:
    """The part of the settings that determines the dataset and its split."""
    sizes = s["split"] if s["split"] is not None else DEFAULT_SPLITS[s["dataset"]]
    return {"dataset": s["dataset"], "paths": list(s["paths"]), "schema": s["schema"], "split": list(sizes), "seed": s["seed"]}


def load_data(spec: dict):
    """Split and train-standardised dataset described by ``spec``."""
    name, sizes = spec["dataset"], spec["split"]
    if len(sizes) != 3:
        raise SplitError("split needs three sizes")
    if all(float(v).is_integer() for v in sizes) and sum(sizes) > 1:
        sizes = tuple(int(v) for v in sizes)
    else:
        sizes = tuple(float(v) for v in sizes)
    if name == "replica":
        return ex.make_replica(spec["seed"], sizes)
    if not spec["paths"]:
        raise ConfigError(f"dataset {name!r} needs --paths")
    if spec["schema"] is not None:
        schema = CSVSchema.from_json(spec["schema"])
    elif name == "superconductivity":
        schema = superconductivity_schema()
    elif name == "ct":
        schema = ct_slices_schema()
    else:
        raise ConfigError("dataset 'csv' needs --schema")
    raw = load_csv_multimodal(spec["paths"], schema)
    return standardize(split(raw, sizes, spec["seed"]))


# output -----------------------------------------------------------------------------


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_json(path: Path, doc) -> None:
    path.write_text(_dumps(doc))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _outdir(s: dict) -> Path:
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# commands -----------------------------------------------------------------------------


def cmd_synth(s: dict) -> int:
    cfg = TrainConfig.synthetic(
        epochs=s["epochs"], lr=s["lr"], lam=s["lam"], batch_size=s["batch_size"], seed=s["seed"], use_pseudo=s["use_pseudo"]
    )
    run = ex.run_synthetic(s["seed"], cfg, n_train=s["n_train"])
    out = _outdir(s)
    header, rows = ex.synth_table(run)
    _write_csv(out / "predictions.csv", header, rows)
    doc = {**run.report, "config": s}
    _write_json(out / "report.json", doc)
    print(_dumps(doc), end="")
    return 0


def _fit(kind: str, data, s: dict, cfg: TrainConfig):
    model = build_model(
        kind, data.dims, tuple(s["hidden_dims"]), use_pseudo=cfg.use_pseudo, seed=s["seed"], extra_dims=tuple(s["extra_dims"])
    )
    result = train(model, data, cfg)
    return model, result


def cmd_train(s: dict) -> int:
    spec = data_spec(s)
    data = load_data(spec)
    cfg = _train_config(s)
    out = _outdir(s)
    reports = {}
    for kind in [s["model"]] + [k for k in s["baselines"] if k != s["model"]]:
        model, result = _fit(kind, data, s, cfg)
        tag = kind if kind != s["model"] else "model"
        model.save(out / f"checkpoint_{tag}.json", {"data": spec, "train_config": cfg.to_dict(), "settings": s})
        pred = model.predict(data.features(TEST))
        y = data.target(TEST)
        header = ["y", "prediction", "au", "eu"]
        _write_csv(out / f"predictions_{tag}.csv", header, np.column_stack([y, pred.prediction, pred.aleatoric, pred.epistemic]))
        rep = score_prediction(pred, y, seed=s["seed"]).to_dict()
        rep["best_epoch"] = result.best_epoch
        rep["final_train_loss"] = result.train_loss[-1] if result.train_loss else None
        reports[kind] = rep
    doc = {"reports": reports, "model": s["model"], "config": s}
    _write_json(out / "report.json", doc)
    print(_dumps(doc), end="")
    return 0


def _load_checkpoint(path):
    doc = read_checkpoint(path)
    if "data" not in doc:
        raise ConfigError(f"{path} carries no data provenance")
    return model_from_checkpoint(doc), doc


def cmd_eval(s: dict) -> int:
    model, doc = _load_checkpoint(s["checkpoint"])
    data = load_data(doc["data"])
    rep = score_prediction(model.predict(data.features(TEST)), data.target(TEST), seed=s["seed"])
    out = _outdir(s)
    result = {**rep.to_dict(), "kind": doc["kind"], "data": doc["data"], "config": s}
    _write_json(out / "report.json", result)
    print(_dumps(result), end="")
    return 0


def cmd_ood(s: dict) -> int:
    model, doc = _load_checkpoint(s["checkpoint"])
    data = load_data(doc["data"]).subset(TEST)
    rows = ex.ood_grid(model, data, s["modes"], s["epsilons"], fraction=s["fraction"], seed=s["seed"])
    out = _outdir(s)
    result = {"grid": rows, "kind": doc["kind"], "data": doc["data"], "config": s}
    _write_json(out / "ood.json", result)
    print(_dumps(result), end="")
    return 0


def cmd_ablate(s: dict) -> int:
    if s["checkpoint"]:
        monig, doc = _load_checkpoint(s["checkpoint"])
        if doc["kind"] != "monig":
            raise ConfigError("ablate needs a MoNIG checkpoint")
        spec = doc["data"]
        tc = doc["train_config"]
        settings = {**s, **{k: tc[k] for k in ("epochs", "lr", "lam", "batch_size", "use_pseudo")}}
        settings["hidden_dims"] = doc["config"]["hidden_dims"]
        settings["extra_dims"] = doc["config"].get("pseudo_hidden_dims", s["extra_dims"])
        settings["seed"] = doc["config"]["seed"]
    else:
        spec, settings, monig = data_spec(s), s, None
    data = load_data(spec)
    cfg = _train_config(settings)
    if monig is None:
        monig, _ = _fit("monig", data, settings, cfg)
    evd, _ = _fit("evd-df", data, settings, cfg)
    models = {"monig": monig, "evd_concat": evd}
    test = data.subset(TEST)
    result = {
        "robustness": ex.robustness_table(models, test, s["epsilons"], mode=s["noise_mode"], seed=s["seed"]),
        "decision_fusion": ex.decision_fusion_table(monig, data),
        "ueir": ex.ueir_table(models, data, seed=s["seed"]),
        "data": spec,
        "config": s,
    }
    out = _outdir(s)
    _write_json(out / "ablation.json", result)
    print(_dumps(result), end="")
    return 0


def cmd_fuse(s: dict) -> int:
    header, table = read_numeric_csv(s["input"])
    cols = [h.strip() for h in header]
    missing = [c for c in NIGParams._fields if c not in cols]
    if missing:
        raise ConfigError(f"fuse input lacks columns {missing}")
    if table.shape[0] == 0:
        raise ConfigError("fuse input has no rows")
    branches = [NIGParams(*(float(row[cols.index(c)]) for c in NIGParams._fields)) for row in table]
    fused = monig_fuse(branches)
    t = marginal_student_t(fused)
    result = {
        "n_branches": len(branches),
        "fused": fused._asdict(),
        "prediction": fused.delta,
        "aleatoric": aleatoric(fused),
        "epistemic": epistemic(fused),
        "student_t": {"location": t.location, "scale_squared": t.scale, "dof": t.dof},
        "config": s,
    }
    if s["out"]:
        _write_json(_outdir(s) / "fused.json", result)
    print(_dumps(result), end="")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "ood": cmd_ood,
    "ablate": cmd_ablate,
    "fuse": cmd_fuse,
}


# argument parsing ------------------------------------------------------------------------


def _add_train_flags(p):
    p.add_argument("--epochs", "--iterations", dest="epochs", type=int, help="passes over the train split")
    p.add_argument("--lr", type=float)
    p.add_argument("--lam", type=float, help="weight of the evidence penalty")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--pseudo", dest="use_pseudo", action="store_true", help="use the pseudo branch")
    p.add_argument("--no-pseudo", dest="use_pseudo", action="store_false")


def _add_data_flags(p):
    p.add_argument("--dataset", choices=DATASETS)
    p.add_argument("--paths", nargs="+", help="CSV file(s), joined column-wise")
    p.add_argument("--schema", help="JSON column schema")
    p.add_argument("--split", nargs=3, type=float, metavar=("TRAIN", "VAL", "TEST"), help="counts or fractions")
    p.add_argument("--hidden-dims", dest="hidden_dims", nargs="+", type=int)
    p.add_argument("--extra-dims", dest="extra_dims", nargs="+", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="monig", description="Multimodal evidential regression with NIG fusion.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int)
    common.add_argument("--config", help="JSON file of settings")
    common.add_argument("--out", help="output directory")

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text, argument_default=argparse.SUPPRESS)

    p = add("synth", "fit the synthetic cubic and dump predictions over the wide grid")
    _add_train_flags(p)
    p.add_argument("--n-train", dest="n_train", type=int)

    p = add("train", "train a model (and optional baselines) on a tabular dataset")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--model", choices=MODEL_KINDS)
    p.add_argument("--baselines", nargs="*", choices=[k for k in MODEL_KINDS if k != "monig"])

    p = add("eval", "score a checkpoint on its test split")
    p.add_argument("--checkpoint")

    p = add("ood", "AUROC of uncertainty for detecting corrupted test rows")
    p.add_argument("--checkpoint")
    p.add_argument("--modes", nargs="+")
    p.add_argument("--epsilons", nargs="+", type=float)
    p.add_argument("--fraction", type=float)

    p = add("ablate", "noise robustness, decision-fusion and UEIR comparisons")
    p.add_argument("--checkpoint")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--epsilons", nargs="+", type=float)
    p.add_argument("--noise-mode", dest="noise_mode")

    p = add("fuse", "fuse NIG rows (columns delta,gamma,alpha,beta) from a CSV file")
    p.add_argument("--input")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = vars(parser.parse_args(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        settings = resolve(command, args, config_path)
        return COMMANDS[command](settings)
    except (ConfigError, SchemaError, SplitError) as exc:
        print(f"monig {command}: configuration error: {exc}", file=sys.stderr)
        return 2
    except (MonigError, OSError, ValueError, KeyError) as exc:
        print(f"monig {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
