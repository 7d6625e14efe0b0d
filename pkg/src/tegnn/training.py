"""Training loop (L1 loss + Adam, best-on-validation) and raw-scale metrics.

Training minimizes the mean-per-element L1 loss over shuffled mini-batches
in scaled space; after every epoch the model is scored on the validation
split and the parameters of the best epoch (by MAE or RAE) are retained.
Evaluation inverse-scales predictions and reports MAE, RAE, and CORR in the
original units of the data.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from tegnn import autodiff as ad
from tegnn.autodiff import Adam, Tensor
from tegnn.data import TimeSeriesDataset, window_arrays
from tegnn.model import ForecastModel, forward

logger = logging.getLogger(__name__)

SELECTION_METRICS = ("MAE", "RAE")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 128
    learning_rate: float = 0.001
    horizon: int = 5
    seed: int = 0
    selection_metric: str = "MAE"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.selection_metric not in SELECTION_METRICS:
            raise ValueError(
                f"selection_metric must be one of {SELECTION_METRICS}, "
                f"got {self.selection_metric!r}"
            )


@dataclass(frozen=True)
class EvalReport:
    """Raw-scale test metrics; corr is None when every variable had zero
    variance (undefined, never reported as 0)."""

    mae: float
    rae: float
    corr: Optional[float]
    horizon: int
    split: str
    n_samples: int
    dataset_id: str = ""
    variant_id: str = ""
    raw_scale: bool = True

    def row(self) -> Dict[str, object]:
        return {
            "dataset": self.dataset_id,
            "variant": self.variant_id,
            "horizon": self.horizon,
            "split": self.split,
            "MAE": self.mae,
            "RAE": self.rae,
            "CORR": "" if self.corr is None else self.corr,
            "samples": self.n_samples,
        }


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute difference per element (batch-size invariant)."""
    return ad.tensor_mean(ad.absolute(ad.subtract(pred, target)))


def forecast_metrics(pred_raw: np.ndarray, actual_raw: np.ndarray):
    """(MAE, RAE, CORR) over an N x n block of raw-scale values.

    RAE compares total absolute error against the constant global-mean
    predictor's; CORR averages per-variable Pearson correlation, skipping
    variables where either sequence has zero variance (None if every
    variable is skipped — undefined, never reported as 0).
    """
    pred_raw = np.asarray(pred_raw, dtype=np.float64)
    actual_raw = np.asarray(actual_raw, dtype=np.float64)
    if pred_raw.shape != actual_raw.shape or pred_raw.ndim != 2:
        raise ValueError(
            f"predictions {pred_raw.shape} and actuals {actual_raw.shape} "
            "must be matching N x n arrays"
        )
    err = np.abs(pred_raw - actual_raw)
    mae = float(np.mean(err))
    mean_actual = np.mean(actual_raw)
    denom = np.sum(np.abs(actual_raw - mean_actual))
    rae = float(np.sum(err) / denom) if denom > 0 else 0.0 if mae == 0.0 else float("inf")
    corrs = []
    for i in range(actual_raw.shape[1]):
        a = actual_raw[:, i]
        p = pred_raw[:, i]
        # constant sequences have zero variance by definition; checking the
        # values (not the float-noise variance of x - mean(x)) keeps the
        # skip exact
        if np.all(a == a[0]) or np.all(p == p[0]):
            continue
        da, dp = a - a.mean(), p - p.mean()
        va, vp = np.mean(da * da), np.mean(dp * dp)
        if va == 0.0 or vp == 0.0:
            continue
        # sqrt(va*vp) rather than std_a*std_b so self-correlation is exact 1
        corrs.append(float(np.mean(da * dp) / np.sqrt(va * vp)))
    corr = float(np.mean(corrs)) if corrs else None
    return mae, rae, corr


def _predict_raw(model: ForecastModel, adjacency, x: np.ndarray, scale: np.ndarray,
                 batch_size: int = 512) -> np.ndarray:
    preds = np.empty((x.shape[0], x.shape[1]))
    with ad.no_grad():
        for start in range(0, x.shape[0], batch_size):
            xb = Tensor(x[start : start + batch_size])
            preds[start : start + xb.shape[0]] = forward(xb, adjacency, model).data
    return preds * scale


def evaluate(
    model: ForecastModel,
    dataset: TimeSeriesDataset,
    adjacency: Optional[np.ndarray],
    horizon: int,
    split: str = "test",
    dataset_id: str = "",
    variant_id: str = "",
) -> EvalReport:
    """Score the model on one split, in raw units."""
    x, y, _ = window_arrays(dataset, split, model.config.window, horizon)
    if x.shape[0] == 0:
        raise ValueError(
            f"split {split!r} yields no samples for window={model.config.window}, "
            f"horizon={horizon}"
        )
    pred = _predict_raw(model, adjacency, x, dataset.scale)
    mae, rae, corr = forecast_metrics(pred, y)
    return EvalReport(
        mae=mae, rae=rae, corr=corr, horizon=horizon, split=split,
        n_samples=x.shape[0], dataset_id=dataset_id, variant_id=variant_id,
    )


def train(
    model: ForecastModel,
    dataset: TimeSeriesDataset,
    adjacency: Optional[np.ndarray],
    config: TrainConfig,
    log_every: int = 0,
) -> List[Dict[str, float]]:
    """Train in place and return the per-epoch history.

    Each epoch shuffles the training windows with the run-seeded RNG,
    steps Adam on mean-per-element L1 loss in scaled space, then scores the
    validation split; the best validation epoch's parameters are restored
    into the model before returning.  A non-finite loss aborts immediately
    with the epoch/batch location.
    """
    w = model.config.window
    x_train, y_train, _ = window_arrays(dataset, "train", w, config.horizon)
    if x_train.shape[0] == 0:
        raise ValueError(
            f"train split yields no samples for window={w}, horizon={config.horizon}"
        )
    y_scaled = y_train / dataset.scale
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.named_parameters(), lr=config.learning_rate)
    history: List[Dict[str, float]] = []
    best_value = np.inf
    best_params = model.parameter_vector()
    n_samples = x_train.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n_samples)
        epoch_loss = 0.0
        for bidx, start in enumerate(range(0, n_samples, config.batch_size)):
            batch = order[start : start + config.batch_size]
            pred = forward(Tensor(x_train[batch]), adjacency, model)
            loss = l1_loss(pred, Tensor(y_scaled[batch]))
            value = float(loss.data)
            if not np.isfinite(value):
                raise FloatingPointError(
                    f"non-finite training loss {value} at epoch {epoch}, batch {bidx}"
                )
            loss.backward()
            opt.step()
            opt.zero_grad()
            epoch_loss += value * batch.size
        report = evaluate(model, dataset, adjacency, config.horizon, split="valid")
        entry = {
            "epoch": epoch,
            "train_loss": epoch_loss / n_samples,
            "valid_MAE": report.mae,
            "valid_RAE": report.rae,
            "valid_CORR": np.nan if report.corr is None else report.corr,
        }
        history.append(entry)
        selected = report.mae if config.selection_metric == "MAE" else report.rae
        if selected < best_value:
            best_value = selected
            best_params = model.parameter_vector()
        if log_every and epoch % log_every == 0:
            logger.info(
                "epoch %d: train_loss %.6f valid_MAE %.6f", epoch,
                entry["train_loss"], report.mae,
            )
    model.load_parameter_vector(best_params)
    return history


def save_history_csv(history: Sequence[Dict[str, float]], path) -> None:
    """History rows as CSV: epoch, train_loss, valid_MAE, valid_RAE, valid_CORR."""
    fields = ["epoch", "train_loss", "valid_MAE", "valid_RAE", "valid_CORR"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in fields})


def save_report_csv(reports: Sequence[EvalReport], path) -> None:
    """EvalReports as one CSV row each, matching the printed table columns."""
    fields = ["dataset", "variant", "horizon", "split", "MAE", "RAE", "CORR", "samples"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for report in reports:
            writer.writerow(report.row())
