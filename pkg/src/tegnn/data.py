"""Dataset ingestion, scaling, chronological splitting, and window emission.

A dataset is a T×n matrix of raw values (rows = time steps, columns =
variables).  Splits are chronological: train = [0, train_end), validation =
[train_end, valid_end), test = [valid_end, T).  Per-variable max-abs scaling
is fit on the train split only; raw values are stored and scaling is applied
lazily when windows are emitted, so metrics can always be reported in the
original units.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")


@dataclass(frozen=True)
class TimeSeriesDataset:
    """A multivariate series with optional scaling/split metadata.

    ``values`` holds the raw (unscaled) data at all times.  ``scale`` and
    ``split_bounds`` are None until :func:`fit_scaling_and_split` has run.
    """

    values: np.ndarray                       # T×n, float64, finite
    variable_names: Tuple[str, ...]
    scale: Optional[np.ndarray] = None       # n positive reals
    split_bounds: Optional[Tuple[int, int]] = None  # (train_end, valid_end)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def split_range(self, split: str) -> Tuple[int, int]:
        """Half-open row range [lo, hi) of a named split."""
        if self.split_bounds is None:
            raise ValueError("dataset has no split bounds; call fit_scaling_and_split first")
        train_end, valid_end = self.split_bounds
        if split == "train":
            return 0, train_end
        if split == "valid":
            return train_end, valid_end
        if split == "test":
            return valid_end, self.n_steps
        raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")

    def scaled_values(self) -> np.ndarray:
        """The full value matrix divided columnwise by the fitted scale."""
        if self.scale is None:
            raise ValueError("dataset has no scale; call fit_scaling_and_split first")
        return self.values / self.scale


@dataclass(frozen=True)
class WindowSample:
    """One (input window, forecast target) pair.

    ``window`` is n×W in scaled space, rows aligned with variable order.
    ``target`` is the length-n raw-unit value row at time ``t + horizon``
    (``raw_target`` records that convention).
    """

    window: np.ndarray          # n×W, scaled
    target: np.ndarray          # n raw values at t+horizon
    t: int                      # index of the last window row
    raw_target: bool = True


def _parse_row(cells: Sequence[str], line_no: int) -> np.ndarray:
    out = np.empty(len(cells))
    for j, cell in enumerate(cells):
        try:
            out[j] = float(cell)
        except ValueError:
            raise ValueError(
                f"row {line_no}: non-numeric cell {cell.strip()!r} in column {j}"
            ) from None
    return out


def load_csv(path, delimiter: str = ",") -> TimeSeriesDataset:
    """Load a delimited numeric table, one row per time step.

    A single leading non-numeric row is treated as a header supplying
    variable names; otherwise names are generated v0..v(n-1).  Rows that
    parse but contain NaN/Inf are dropped with a logged count; ragged rows
    and non-numeric cells elsewhere are hard errors naming the row.
    """
    rows = []
    names = None
    n_cols = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(delimiter)
            if n_cols is None:
                n_cols = len(cells)
                if n_cols < 2:
                    raise ValueError(
                        f"{path}: expected at least 2 columns, found {n_cols}"
                    )
                try:
                    rows.append(_parse_row(cells, line_no))
                except ValueError:
                    names = tuple(c.strip() for c in cells)
                continue
            if len(cells) != n_cols:
                raise ValueError(
                    f"row {line_no}: expected {n_cols} cells, found {len(cells)}"
                )
            rows.append(_parse_row(cells, line_no))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    values = np.asarray(rows, dtype=np.float64)
    finite = np.isfinite(values).all(axis=1)
    dropped = int(values.shape[0] - finite.sum())
    if dropped:
        logger.warning("%s: dropped %d rows containing NaN/Inf", path, dropped)
        values = values[finite]
    if values.shape[0] == 0:
        raise ValueError(f"{path}: all rows contained NaN/Inf")
    if names is None:
        names = tuple(f"v{j}" for j in range(values.shape[1]))
    return TimeSeriesDataset(values=values, variable_names=names)


def save_csv(ds: TimeSeriesDataset, path, delimiter: str = ",") -> None:
    """Write the raw values with a header row of variable names."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(delimiter.join(ds.variable_names) + "\n")
        for row in ds.values:
            fh.write(delimiter.join(repr(float(v)) for v in row) + "\n")


def fit_scaling_and_split(
    ds: TimeSeriesDataset,
    ratios: Tuple[float, float, float] = (0.6, 0.2, 0.2),
) -> TimeSeriesDataset:
    """Set chronological split bounds and per-variable max-abs scale.

    The scale is the maximum absolute value of each variable over the train
    split only (1.0 with a warning for all-zero training columns), so no
    information flows backward from validation or test.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise ValueError(f"split ratios must be non-negative, got {ratios}")
    t = ds.n_steps
    if t < 10:
        raise ValueError(f"need at least 10 time steps to split, got {t}")
    train_end = int(t * ratios[0])
    valid_end = int(t * (ratios[0] + ratios[1]))
    if not (0 < train_end < valid_end < t):
        raise ValueError(
            f"ratios {ratios} give degenerate bounds ({train_end}, {valid_end}) for T={t}"
        )
    scale = np.max(np.abs(ds.values[:train_end]), axis=0)
    zero = scale == 0.0
    if zero.any():
        for name in np.asarray(ds.variable_names)[zero]:
            logger.warning("variable %s is all-zero on the train split; scale set to 1", name)
        scale = np.where(zero, 1.0, scale)
    return dataclasses.replace(ds, scale=scale, split_bounds=(train_end, valid_end))


def _window_positions(ds: TimeSeriesDataset, split: str, window: int, horizon: int):
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    lo, hi = ds.split_range(split)
    # last window row t needs [t-window+1, t] and t+horizon inside [lo, hi)
    return range(lo + window - 1, hi - horizon)


def windows(
    ds: TimeSeriesDataset, split: str, window: int, horizon: int
) -> Iterator[WindowSample]:
    """Yield every in-split (window, target) pair for the given horizon.

    Sample count is split_len - window - horizon + 1 when positive, else
    the stream is empty.  Neither the window nor the target ever crosses a
    split boundary.
    """
    scale = ds.scale
    if scale is None:
        raise ValueError("dataset has no scale; call fit_scaling_and_split first")
    for t in _window_positions(ds, split, window, horizon):
        win = (ds.values[t - window + 1 : t + 1] / scale).T
        yield WindowSample(window=win, target=ds.values[t + horizon].copy(), t=t)


def window_arrays(
    ds: TimeSeriesDataset, split: str, window: int, horizon: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized form of :func:`windows`.

    Returns (X, Y, t) where X is N×n×W scaled windows, Y is N×n raw
    targets, and t the last-row indices; N may be 0.
    """
    positions = np.asarray(list(_window_positions(ds, split, window, horizon)), dtype=int)
    n = ds.n_vars
    if positions.size == 0:
        return (
            np.empty((0, n, window)),
            np.empty((0, n)),
            positions,
        )
    scaled = ds.scaled_values()
    sliding = np.lib.stride_tricks.sliding_window_view(scaled, window, axis=0)
    # sliding[s] is the window ending at row s+window-1, shape n×W
    x = sliding[positions - window + 1]
    y = ds.values[positions + horizon]
    return np.ascontiguousarray(x), y.copy(), positions
