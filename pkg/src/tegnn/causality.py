"""Transfer-entropy causality graphs over discretized series.

Each variable is discretized into B equal-width bins (edges fit on the
train+validation range).  Pairwise transfer entropy is the plug-in
(histogram) estimate, in bits,

    T(source -> target) = H(X_{t+1} | X_t^(k)) - H(X_{t+1} | X_t^(k), Y_t^(l))

with X the target and Y the source; lags default to k = l = 1.  The net
value T(i->j) - T(j->i) is antisymmetrized into a matrix, and entries
exceeding a significance threshold c become the directed adjacency:
adjacency[i][j] > 0 means variable i causes variable j.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from tegnn.data import TimeSeriesDataset

logger = logging.getLogger(__name__)

DEFAULT_BINS = 8
DEFAULT_THRESHOLD = 0.005


@dataclass(frozen=True)
class DiscretizedSeries:
    """A series mapped to integer bin symbols in [0, bin_count)."""

    symbols: np.ndarray        # int64, all in [0, bin_count)
    bin_count: int
    bin_edges: np.ndarray      # bin_count + 1 ascending reals

    def __post_init__(self):
        s = np.asarray(self.symbols)
        if s.ndim != 1:
            raise ValueError(f"symbols must be 1-D, got shape {s.shape}")
        if s.size and (s.min() < 0 or s.max() >= self.bin_count):
            raise ValueError(
                f"symbols out of range [0, {self.bin_count}): "
                f"min {s.min()}, max {s.max()}"
            )

    def __len__(self) -> int:
        return self.symbols.size


@dataclass(frozen=True)
class CausalityMatrix:
    """Antisymmetric net-TE matrix plus its thresholded adjacency."""

    n: int
    net_te: np.ndarray         # n×n, bits, antisymmetric, zero diagonal
    threshold: float
    adjacency: np.ndarray      # net_te where > threshold, else 0
    variable_names: Tuple[str, ...]

    def edge_count(self) -> int:
        return int(np.count_nonzero(self.adjacency))


def discretize(
    values: np.ndarray,
    bin_count: int = DEFAULT_BINS,
    fit_values: Optional[np.ndarray] = None,
) -> DiscretizedSeries:
    """Equal-width binning of a 1-D series.

    Edges span the [min, max] range of ``fit_values`` (the series itself by
    default); values outside that range clamp into the nearest edge bin.  A
    constant fit range degenerates to unit-width bins centered on the value,
    putting every sample in one bin (entropy 0).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError(f"expected a 1-D series, got shape {values.shape}")
    if values.size == 0:
        raise ValueError("cannot discretize an empty series")
    if bin_count < 1:
        raise ValueError(f"bin_count must be >= 1, got {bin_count}")
    fit = values if fit_values is None else np.asarray(fit_values, dtype=np.float64)
    lo, hi = float(np.min(fit)), float(np.max(fit))
    if hi > lo:
        edges = np.linspace(lo, hi, bin_count + 1)
        width = (hi - lo) / bin_count
        symbols = np.floor((values - lo) / width).astype(np.int64)
    else:
        edges = lo + np.arange(bin_count + 1, dtype=np.float64) - bin_count / 2.0
        symbols = np.full(values.shape, bin_count // 2, dtype=np.int64)
    symbols = np.clip(symbols, 0, bin_count - 1)
    return DiscretizedSeries(symbols=symbols, bin_count=bin_count, bin_edges=edges)


def _entropy_of_codes(codes: np.ndarray) -> float:
    """Plug-in entropy in bits of an integer code sequence."""
    counts = np.bincount(codes)
    counts = counts[counts > 0]
    p = counts / codes.size
    return float(-np.sum(p * np.log2(p)))


def _history_codes(symbols: np.ndarray, lag: int, base: int, t_last: np.ndarray) -> np.ndarray:
    """Mixed-radix code of the length-``lag`` history ending at each index."""
    codes = np.zeros(t_last.size, dtype=np.int64)
    for j in range(lag):
        codes = codes * base + symbols[t_last - j]
    return codes


def entropy(series: DiscretizedSeries) -> float:
    """H(X) in bits from empirical bin frequencies; 0 <= H <= log2(B)."""
    if len(series) == 0:
        raise ValueError("entropy of an empty series is undefined")
    return _entropy_of_codes(series.symbols)


def conditional_entropy(x: DiscretizedSeries, y: DiscretizedSeries) -> float:
    """H(X|Y) = H(X,Y) - H(Y) in bits, over paired samples."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: x has {len(x)}, y has {len(y)}")
    if len(x) == 0:
        raise ValueError("conditional entropy of empty series is undefined")
    joint = x.symbols.astype(np.int64) * y.bin_count + y.symbols
    return _entropy_of_codes(joint) - _entropy_of_codes(y.symbols)


def transfer_entropy(
    source: DiscretizedSeries,
    target: DiscretizedSeries,
    k: int = 1,
    l: int = 1,
) -> float:
    """T(source -> target) in bits with target lag k and source lag l.

    Computed in the conditional-entropy form over the common sample set and
    clamped at 0 (the plug-in value is a conditional mutual information, so
    only floating-point noise can drive it negative).
    """
    if k < 1 or l < 1:
        raise ValueError(f"lags must be >= 1, got k={k}, l={l}")
    if len(source) != len(target):
        raise ValueError(
            f"length mismatch: source has {len(source)}, target has {len(target)}"
        )
    n = len(target)
    m = max(k, l)
    if n < m + 2:
        raise ValueError(
            f"series of length {n} too short for lags k={k}, l={l}; need at least {m + 2}"
        )
    t_last = np.arange(m - 1, n - 1)           # last history index of each sample
    bt, bs = target.bin_count, source.bin_count
    x_next = target.symbols[t_last + 1].astype(np.int64)
    x_hist = _history_codes(target.symbols, k, bt, t_last)
    y_hist = _history_codes(source.symbols, l, bs, t_last)

    n_hist = bt ** k
    n_src = bs ** l
    joint_xh = x_next * n_hist + x_hist
    h_cond_hist = _entropy_of_codes(joint_xh) - _entropy_of_codes(x_hist)
    xh_y = joint_xh * n_src + y_hist
    h_y = x_hist * n_src + y_hist
    h_cond_both = _entropy_of_codes(xh_y) - _entropy_of_codes(h_y)
    return max(0.0, h_cond_hist - h_cond_both)


def net_transfer_entropy(
    x: DiscretizedSeries, y: DiscretizedSeries, k: int = 1, l: int = 1
) -> float:
    """T(x->y) - T(y->x); positive means x causes y, and the value is
    exactly antisymmetric under swapping the arguments."""
    return transfer_entropy(x, y, k=k, l=l) - transfer_entropy(y, x, k=k, l=l)


def build_causality_matrix(
    dataset: TimeSeriesDataset,
    bin_count: int = DEFAULT_BINS,
    k: int = 1,
    l: int = 1,
    threshold: float = DEFAULT_THRESHOLD,
) -> CausalityMatrix:
    """Pairwise net TE over the train+validation rows, thresholded.

    Every unordered pair is computed once and antisymmetrized, so
    net_te[j][i] == -net_te[i][j] holds exactly; entries strictly above the
    threshold survive into the adjacency.  Constant variables get a logged
    warning and contribute only zero edges.
    """
    n = dataset.n_vars
    if n < 2:
        raise ValueError(f"need at least 2 variables, got {n}")
    if threshold < 0:
        raise ValueError(f"threshold must be non-negative, got {threshold}")
    fit_end = dataset.split_bounds[1] if dataset.split_bounds else dataset.n_steps
    if fit_end < 2:
        raise ValueError("train+validation range is too short for transfer entropy")
    sub = dataset.values[:fit_end]
    series = []
    for i in range(n):
        col = sub[:, i]
        if np.max(col) == np.min(col):
            logger.warning(
                "variable %s is constant over the fit range; its causality edges will be 0",
                dataset.variable_names[i],
            )
        series.append(discretize(col, bin_count=bin_count))
    net = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            net[i, j] = net_transfer_entropy(series[i], series[j], k=k, l=l)
            net[j, i] = -net[i, j]
    adjacency = np.where(net > threshold, net, 0.0)
    return CausalityMatrix(
        n=n,
        net_te=net,
        threshold=threshold,
        adjacency=adjacency,
        variable_names=tuple(dataset.variable_names),
    )


def save_causality_csv(matrix: CausalityMatrix, path) -> None:
    """Write net TE as CSV: a `# threshold=` metadata line, a header row of
    variable names, then n rows of n values (full float precision)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# threshold={matrix.threshold!r}\n")
        fh.write(",".join(matrix.variable_names) + "\n")
        for row in matrix.net_te:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_causality_csv(path) -> CausalityMatrix:
    """Read a matrix written by :func:`save_causality_csv` (exact round-trip)."""
    threshold = None
    names = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.startswith("threshold="):
                    threshold = float(body.split("=", 1)[1])
                continue
            if names is None:
                names = tuple(c.strip() for c in line.split(","))
                continue
            rows.append([float(c) for c in line.split(",")])
    if threshold is None or names is None:
        raise ValueError(f"{path}: missing threshold metadata or header row")
    net = np.asarray(rows, dtype=np.float64)
    n = len(names)
    if net.shape != (n, n):
        raise ValueError(f"{path}: expected a {n}x{n} matrix, got {net.shape}")
    if np.max(np.abs(net + net.T)) > 1e-9:
        raise ValueError(f"{path}: net TE matrix is not antisymmetric")
    adjacency = np.where(net > threshold, net, 0.0)
    return CausalityMatrix(
        n=n, net_te=net, threshold=threshold, adjacency=adjacency, variable_names=names
    )
