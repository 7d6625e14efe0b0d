"""Command-line pipeline orchestration.

Subcommands: ``te`` (causality matrix), ``train``, ``eval``, ``forecast``,
and ``ablate`` (the variant-comparison suite).  Every run writes a
``manifest.json`` capturing the resolved parameters, seed, dataset hash, and
sha256 of each artifact, so a run can be reproduced exactly.

Parameter precedence is CLI flag > config file > built-in default; the
config file is a flat ``key=value`` text format mirroring the flag names
(dashes as underscores).  Exit codes: 0 success, 1 usage error, 2 data
error, 3 numerical failure.  The TEGNN_OUTPUT_DIR environment variable
supplies the default output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from tegnn.causality import (
    build_causality_matrix,
    load_causality_csv,
    save_causality_csv,
)
from tegnn.data import fit_scaling_and_split, load_csv
from tegnn.model import (
    ForecastModel,
    ModelConfig,
    forward,
    load_checkpoint,
    save_checkpoint,
)
from tegnn.training import (
    TrainConfig,
    evaluate,
    save_history_csv,
    save_report_csv,
    train,
)
from tegnn import autodiff as ad
from tegnn.autodiff import Tensor

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "TEGNN_OUTPUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    """Bad flags, config keys, or value combinations."""


class DataError(Exception):
    """Unreadable/invalid datasets, checkpoints, or schema mismatches."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text) -> Tuple[int, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    try:
        return tuple(int(part) for part in str(text).split(",") if part.strip())
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


# every tunable parameter: name -> (parser, default)
PARAM_SPEC = {
    "bins": (int, 8),
    "k": (int, 1),
    "l": (int, 1),
    "threshold": (float, 0.005),
    "horizon": (int, 5),
    "window": (int, 32),
    "kernels": (_int_list, (3, 5, 7)),
    "channels": (int, 12),
    "hidden": (_int_list, (30, 10)),
    "variant": (str, "kgnn"),
    "no_causality": (_bool, False),
    "no_cnn": (_bool, False),
    "symmetric_neighbors": (_bool, False),
    "epochs": (int, 1000),
    "batch_size": (int, 128),
    "lr": (float, 0.001),
    "seed": (int, 0),
    "seeds": (_int_list, (0, 1, 2)),
    "selection_metric": (str, "MAE"),
    "delimiter": (str, ","),
    "split": (str, "test"),
    "at": (int, None),
}


def _read_config_file(path) -> Dict[str, str]:
    entries: Dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(
                        f"{path}:{line_no}: expected key=value, got {line!r}"
                    )
                key, value = line.split("=", 1)
                entries[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}")
    return entries


def resolve_params(args: argparse.Namespace, keys: Sequence[str]) -> Dict[str, object]:
    """Merge CLI flags over config-file entries over built-in defaults."""
    file_cfg = _read_config_file(args.config) if getattr(args, "config", None) else {}
    unknown = set(file_cfg) - set(PARAM_SPEC)
    if unknown:
        raise UsageError(f"unknown config file keys: {sorted(unknown)}")
    resolved: Dict[str, object] = {}
    for key in keys:
        parse, default = PARAM_SPEC[key]
        value = default
        if key in file_cfg:
            try:
                value = parse(file_cfg[key])
            except ValueError:
                raise UsageError(
                    f"config file {args.config}: invalid value for "
                    f"{key}: {file_cfg[key]!r}"
                )
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            value = parse(cli_value)
        resolved[key] = value
    return resolved


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _output_dir(args, command: str) -> str:
    out = args.out or os.environ.get(OUTPUT_DIR_ENV) or os.path.join("runs", command)
    os.makedirs(out, exist_ok=True)
    return out


def _write_manifest(outdir, command, args, params, artifacts: Dict[str, str],
                    dataset_path=None) -> str:
    manifest = {
        "command": command,
        "dataset": dataset_path,
        "dataset_sha256": _sha256(dataset_path) if dataset_path else None,
        "config_file": getattr(args, "config", None),
        "parameters": {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()},
        "seed": params.get("seed"),
        "output_dir": outdir,
        "artifacts": {name: _sha256(os.path.join(outdir, name)) for name in artifacts},
    }
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _load_dataset(path, delimiter: str):
    if not os.path.exists(path):
        raise DataError(f"dataset file not found: {path}")
    try:
        return load_csv(path, delimiter=delimiter)
    except ValueError as exc:
        raise DataError(f"cannot parse dataset {path}: {exc}")


def _validate_windows(ds, window: int, horizon: int) -> None:
    for split in ("train", "valid", "test"):
        lo, hi = ds.split_range(split)
        if (hi - lo) - window - horizon + 1 <= 0:
            raise DataError(
                f"horizon {horizon} with window {window} leaves the {split} split "
                f"(length {hi - lo}) without samples"
            )


# --- commands ---------------------------------------------------------------

def cmd_te(args) -> int:
    params = resolve_params(args, ["bins", "k", "l", "threshold", "delimiter"])
    ds = _load_dataset(args.dataset, params["delimiter"])
    if ds.n_vars < 2:
        raise DataError(f"need at least 2 variables for causality, got {ds.n_vars}")
    ds = fit_scaling_and_split(ds)
    matrix = build_causality_matrix(
        ds, bin_count=params["bins"], k=params["k"], l=params["l"],
        threshold=params["threshold"],
    )
    outdir = _output_dir(args, "te")
    save_causality_csv(matrix, os.path.join(outdir, "te_matrix.csv"))
    _write_manifest(outdir, "te", args, params, {"te_matrix.csv": ""},
                    dataset_path=args.dataset)
    n = matrix.n
    edges = matrix.edge_count()
    print(f"variables: {n}")
    print(f"edges: {edges}")
    print(f"density: {edges / (n * (n - 1)):.4f}")
    print(f"wrote {os.path.join(outdir, 'te_matrix.csv')}")
    return EXIT_OK


TRAIN_KEYS = [
    "horizon", "window", "kernels", "channels", "hidden", "variant",
    "no_causality", "no_cnn", "symmetric_neighbors", "epochs", "batch_size",
    "lr", "seed", "selection_metric", "bins", "k", "l", "threshold", "delimiter",
]


def _model_config(params) -> ModelConfig:
    try:
        return ModelConfig(
            kernel_sizes=params["kernels"],
            channels_per_kernel=params["channels"],
            gnn_hidden=params["hidden"],
            window=params["window"],
            variant=params["variant"],
            use_causality=not params["no_causality"],
            use_cnn=not params["no_cnn"],
            symmetric_neighbors=params["symmetric_neighbors"],
        )
    except ValueError as exc:
        raise UsageError(str(exc))


def _causality_for_train(args, ds, params):
    """Build the TE matrix, or reuse a precomputed one with a drift guard."""
    te_path = getattr(args, "te_matrix", None)
    if not te_path:
        return build_causality_matrix(
            ds, bin_count=params["bins"], k=params["k"], l=params["l"],
            threshold=params["threshold"],
        )
    try:
        matrix = load_causality_csv(te_path)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load TE matrix {te_path}: {exc}")
    if matrix.variable_names != ds.variable_names:
        raise DataError(
            f"TE matrix variables {list(matrix.variable_names)} do not match "
            f"dataset variables {list(ds.variable_names)}"
        )
    sibling = os.path.join(os.path.dirname(os.path.abspath(te_path)), "manifest.json")
    if os.path.exists(sibling):
        with open(sibling, "r", encoding="utf-8") as fh:
            recorded = json.load(fh).get("dataset_sha256")
        if recorded and recorded != _sha256(args.dataset):
            raise DataError(
                f"TE matrix {te_path} was computed from a different dataset "
                f"(hash mismatch against {args.dataset}); recompute with the te command"
            )
    else:
        logger.warning("no manifest next to %s; skipping dataset drift check", te_path)
    return matrix


def _train_once(ds, matrix, params, seed: int):
    config = _model_config(params)
    model = ForecastModel(config, seed=seed)
    try:
        train_config = TrainConfig(
            epochs=params["epochs"], batch_size=params["batch_size"],
            learning_rate=params["lr"], horizon=params["horizon"], seed=seed,
            selection_metric=params["selection_metric"],
        )
    except ValueError as exc:
        raise UsageError(str(exc))
    adjacency = None if matrix is None else matrix.adjacency
    history = train(model, ds, adjacency, train_config)
    return model, history


def cmd_train(args) -> int:
    params = resolve_params(args, TRAIN_KEYS)
    if params["no_cnn"] and (args.kernels is not None):
        logger.warning("--kernels is ignored because --no-cnn removes the CNN stage")
    config = _model_config(params)  # fail fast on bad architecture values
    ds = _load_dataset(args.dataset, params["delimiter"])
    ds = fit_scaling_and_split(ds)
    _validate_windows(ds, params["window"], params["horizon"])
    matrix = _causality_for_train(args, ds, params)
    model, history = _train_once(ds, matrix, params, params["seed"])
    outdir = _output_dir(args, "train")
    metadata = {
        "variable_names": list(ds.variable_names),
        "scale": ds.scale,
        "split_bounds": list(ds.split_bounds),
        "split_ratios": [0.6, 0.2, 0.2],
        "n_steps": ds.n_steps,
        "horizon": params["horizon"],
        "threshold": matrix.threshold,
        "seed": params["seed"],
        "dataset": str(args.dataset),
        "dataset_sha256": _sha256(args.dataset),
        "selection_metric": params["selection_metric"],
    }
    ckpt_path = os.path.join(outdir, "model.ckpt")
    save_checkpoint(model, ckpt_path, metadata=metadata,
                    arrays={"net_te": matrix.net_te, "adjacency": matrix.adjacency})
    save_history_csv(history, os.path.join(outdir, "history.csv"))
    _write_manifest(outdir, "train", args, params,
                    {"model.ckpt": "", "history.csv": ""}, dataset_path=args.dataset)
    best = min(h[f"valid_{params['selection_metric']}"] for h in history)
    print(f"trained {params['epochs']} epochs; best valid "
          f"{params['selection_metric']} = {best:.6f}")
    print(f"wrote {ckpt_path}")
    return EXIT_OK


def _restore(args, delimiter: str):
    """Load checkpoint + dataset, reattach training-time scale and splits."""
    if not os.path.exists(args.checkpoint):
        raise DataError(f"checkpoint not found: {args.checkpoint}")
    try:
        model, metadata, extras = load_checkpoint(args.checkpoint)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load checkpoint {args.checkpoint}: {exc}")
    ds = _load_dataset(args.dataset, delimiter)
    expected = tuple(metadata["variable_names"])
    if ds.variable_names != expected:
        raise DataError(
            f"dataset schema mismatch: checkpoint expects variables "
            f"{list(expected)}, found {list(ds.variable_names)}"
        )
    scale = np.asarray(metadata["scale"], dtype=np.float64)
    if ds.n_steps == metadata["n_steps"]:
        bounds = tuple(metadata["split_bounds"])
    else:
        logger.warning(
            "dataset has %d rows but checkpoint was trained on %d; "
            "re-deriving split bounds at the training ratios",
            ds.n_steps, metadata["n_steps"],
        )
        r = metadata.get("split_ratios", [0.6, 0.2, 0.2])
        bounds = (int(ds.n_steps * r[0]), int(ds.n_steps * (r[0] + r[1])))
    ds = dataclasses.replace(ds, scale=scale, split_bounds=bounds)
    return model, metadata, extras, ds


def cmd_eval(args) -> int:
    params = resolve_params(args, ["split", "delimiter"])
    if params["split"] not in ("train", "valid", "test"):
        raise UsageError(f"--split must be train, valid, or test, got {params['split']}")
    model, metadata, extras, ds = _restore(args, params["delimiter"])
    adjacency = extras.get("adjacency")
    report = evaluate(
        model, ds, adjacency, horizon=metadata["horizon"], split=params["split"],
        dataset_id=os.path.basename(str(args.dataset)), variant_id=model.config.variant,
    )
    outdir = _output_dir(args, "eval")
    save_report_csv([report], os.path.join(outdir, "eval.csv"))
    _write_manifest(outdir, "eval", args, params, {"eval.csv": ""},
                    dataset_path=args.dataset)
    corr = "n/a" if report.corr is None else f"{report.corr:.6f}"
    print(f"split: {report.split}  horizon: {report.horizon}  samples: {report.n_samples}")
    print(f"MAE  = {report.mae:.6f}")
    print(f"RAE  = {report.rae:.6f}")
    print(f"CORR = {corr}")
    return EXIT_OK


def cmd_forecast(args) -> int:
    params = resolve_params(args, ["at", "delimiter"])
    model, metadata, extras, ds = _restore(args, params["delimiter"])
    window = model.config.window
    t = params["at"] if params["at"] is not None else ds.n_steps - 1
    if t < window - 1:
        raise DataError(
            f"--at {t} is too early: a full window needs index >= {window - 1}"
        )
    if t >= ds.n_steps:
        raise DataError(f"--at {t} is beyond the data (last index {ds.n_steps - 1})")
    x = (ds.values[t - window + 1 : t + 1] / ds.scale).T
    with ad.no_grad():
        pred = forward(Tensor(x), extras.get("adjacency"), model).data * ds.scale
    horizon = metadata["horizon"]
    outdir = _output_dir(args, "forecast")
    rows = [(name, float(value)) for name, value in zip(ds.variable_names, pred)]
    with open(os.path.join(outdir, "forecast.csv"), "w", encoding="utf-8") as fh:
        fh.write("variable,prediction\n")
        for name, value in rows:
            fh.write(f"{name},{value!r}\n")
    _write_manifest(outdir, "forecast", args, params, {"forecast.csv": ""},
                    dataset_path=args.dataset)
    print(f"forecast for t+{horizon} from t={t}:")
    for name, value in rows:
        print(f"{name}\t{value:.6f}")
    return EXIT_OK


ABLATE_KEYS = [
    "horizon", "window", "kernels", "channels", "hidden", "variant", "epochs",
    "batch_size", "lr", "seeds", "selection_metric", "bins", "k", "l",
    "threshold", "delimiter", "symmetric_neighbors",
]

# name -> parameter overrides relative to the full model
ABLATION_VARIANTS = (
    ("full", {}),
    ("nCau", {"no_causality": True}),
    ("nCNN", {"no_cnn": True}),
    ("1CNN", {"kernels": (3,)}),
)


def cmd_ablate(args) -> int:
    params = resolve_params(args, ABLATE_KEYS)
    params["no_causality"] = False
    params["no_cnn"] = False
    ds = _load_dataset(args.dataset, params["delimiter"])
    ds = fit_scaling_and_split(ds)
    _validate_windows(ds, params["window"], params["horizon"])
    matrix = build_causality_matrix(
        ds, bin_count=params["bins"], k=params["k"], l=params["l"],
        threshold=params["threshold"],
    )
    dataset_id = os.path.basename(str(args.dataset))
    rows = []
    medians = {}
    for name, overrides in ABLATION_VARIANTS:
        run_params = dict(params)
        run_params.update(overrides)
        maes = []
        for seed in params["seeds"]:
            model, _ = _train_once(ds, matrix, run_params, seed)
            report = evaluate(
                model, ds, matrix.adjacency, horizon=params["horizon"],
                dataset_id=dataset_id, variant_id=name,
            )
            rows.append((name, seed, report))
            maes.append(report.mae)
        medians[name] = float(np.median(maes))
    outdir = _output_dir(args, "ablate")
    with open(os.path.join(outdir, "ablation.csv"), "w", encoding="utf-8") as fh:
        fh.write("variant,seed,MAE,RAE,CORR\n")
        for name, seed, report in rows:
            corr = "" if report.corr is None else repr(report.corr)
            fh.write(f"{name},{seed},{report.mae!r},{report.rae!r},{corr}\n")
        for name, _ in ABLATION_VARIANTS:
            fh.write(f"{name},median,{medians[name]!r},,\n")
        # the raw-feature variant is the no-CNN model under another name
        fh.write(f"RF,median,{medians['nCNN']!r},,\n")
    _write_manifest(outdir, "ablate", args, params, {"ablation.csv": ""},
                    dataset_path=args.dataset)
    print(f"{'variant':<8} {'median test MAE':>16}")
    for name, _ in ABLATION_VARIANTS:
        print(f"{name:<8} {medians[name]:>16.6f}")
    print(f"{'RF':<8} {medians['nCNN']:>16.6f}")
    return EXIT_OK


# --- entry point ------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="tegnn", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (default $TEGNN_OUTPUT_DIR)")
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--delimiter", help="dataset field delimiter (default ,)")

    p_te = sub.add_parser("te", help="compute the transfer-entropy causality matrix")
    p_te.add_argument("dataset")
    p_te.add_argument("--bins", type=int)
    p_te.add_argument("--k", type=int)
    p_te.add_argument("--l", type=int)
    p_te.add_argument("--threshold", type=float)
    common(p_te)

    p_train = sub.add_parser("train", help="train a forecaster end to end")
    p_train.add_argument("dataset")
    p_train.add_argument("--horizon", type=int)
    p_train.add_argument("--variant", choices=("kgnn", "gin"))
    p_train.add_argument("--no-causality", dest="no_causality",
                         action="store_const", const=True)
    p_train.add_argument("--no-cnn", dest="no_cnn", action="store_const", const=True)
    p_train.add_argument("--symmetric-neighbors", dest="symmetric_neighbors",
                         action="store_const", const=True)
    p_train.add_argument("--kernels")
    p_train.add_argument("--channels", type=int)
    p_train.add_argument("--hidden")
    p_train.add_argument("--window", type=int)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch-size", dest="batch_size", type=int)
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--selection-metric", dest="selection_metric",
                         choices=("MAE", "RAE"))
    p_train.add_argument("--bins", type=int)
    p_train.add_argument("--k", type=int)
    p_train.add_argument("--l", type=int)
    p_train.add_argument("--threshold", type=float)
    p_train.add_argument("--te-matrix", dest="te_matrix",
                         help="reuse a precomputed TE matrix CSV")
    common(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p_eval.add_argument("checkpoint")
    p_eval.add_argument("dataset")
    p_eval.add_argument("--split", choices=("train", "valid", "test"))
    common(p_eval)

    p_fc = sub.add_parser("forecast", help="predict the next values from a window")
    p_fc.add_argument("checkpoint")
    p_fc.add_argument("dataset")
    p_fc.add_argument("--at", type=int, help="index of the window's last row")
    common(p_fc)

    p_ab = sub.add_parser("ablate", help="run the variant comparison suite")
    p_ab.add_argument("dataset")
    p_ab.add_argument("--horizon", type=int)
    p_ab.add_argument("--variant", choices=("kgnn", "gin"))
    p_ab.add_argument("--kernels")
    p_ab.add_argument("--channels", type=int)
    p_ab.add_argument("--hidden")
    p_ab.add_argument("--window", type=int)
    p_ab.add_argument("--epochs", type=int)
    p_ab.add_argument("--batch-size", dest="batch_size", type=int)
    p_ab.add_argument("--lr", type=float)
    p_ab.add_argument("--seeds", help="comma-separated seeds (default 0,1,2)")
    p_ab.add_argument("--selection-metric", dest="selection_metric",
                      choices=("MAE", "RAE"))
    p_ab.add_argument("--bins", type=int)
    p_ab.add_argument("--k", type=int)
    p_ab.add_argument("--l", type=int)
    p_ab.add_argument("--threshold", type=float)
    p_ab.add_argument("--symmetric-neighbors", dest="symmetric_neighbors",
                      action="store_const", const=True)
    common(p_ab)

    return parser


COMMANDS = {
    "te": cmd_te,
    "train": cmd_train,
    "eval": cmd_eval,
    "forecast": cmd_forecast,
    "ablate": cmd_ablate,
}


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # config/validation errors raised by library layers
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
