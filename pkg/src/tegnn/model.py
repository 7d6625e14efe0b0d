"""The graph forecaster: convolutional node features + message passing.

Per variable, multi-kernel 1-D convolutions (valid, ReLU) extract a feature
vector from the scaled input window; the flattened channel outputs of all
kernels are concatenated into a length-d node feature.  Two graph layers
then propagate features along the directed causality adjacency (node j
aggregates its causes {i : adjacency[i][j] > 0}, unweighted), and a shared
per-node linear readout maps the last hidden vector to one scalar: the
scaled-space forecast of each variable at t+horizon.

Variants: ``kgnn`` layers h' = ReLU(h W1 + sum_neighbors h_j W2) or ``gin``
layers h' = MLP((1+eps) h + sum_neighbors h_j); causality off swaps in a
complete graph; CNN off feeds the raw scaled window rows as node features.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from tegnn import autodiff as ad
from tegnn.autodiff import Tensor

CHECKPOINT_MAGIC = b"TEGNNCKPT1\n"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Architecture settings; parameter shapes depend only on these."""

    kernel_sizes: Tuple[int, ...] = (3, 5, 7)
    channels_per_kernel: int = 12
    gnn_hidden: Tuple[int, ...] = (30, 10)
    window: int = 32
    variant: str = "kgnn"
    use_causality: bool = True
    use_cnn: bool = True
    symmetric_neighbors: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kernel_sizes", tuple(int(k) for k in self.kernel_sizes))
        object.__setattr__(self, "gnn_hidden", tuple(int(h) for h in self.gnn_hidden))
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.use_cnn:
            if not self.kernel_sizes:
                raise ValueError("kernel_sizes must be nonempty when the CNN is enabled")
            bad = [k for k in self.kernel_sizes if k < 1 or k > self.window]
            if bad:
                raise ValueError(
                    f"kernel sizes {bad} invalid: must be in [1, window={self.window}]"
                )
            if self.channels_per_kernel < 1:
                raise ValueError(
                    f"channels_per_kernel must be >= 1, got {self.channels_per_kernel}"
                )
        if not self.gnn_hidden:
            raise ValueError("gnn_hidden must be nonempty")
        if any(h < 1 for h in self.gnn_hidden):
            raise ValueError(f"gnn_hidden sizes must be >= 1, got {self.gnn_hidden}")
        if self.variant not in ("kgnn", "gin"):
            raise ValueError(f"variant must be 'kgnn' or 'gin', got {self.variant!r}")

    @property
    def feature_dim(self) -> int:
        """Node feature length d: sum of channels*(W-k+1), or W without CNN."""
        if not self.use_cnn:
            return self.window
        return sum(
            self.channels_per_kernel * (self.window - k + 1) for k in self.kernel_sizes
        )


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class ForecastModel:
    """Holds the named parameter tensors; shapes are n-independent."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        params: Dict[str, Tensor] = {}
        if config.use_cnn:
            c = config.channels_per_kernel
            for k in config.kernel_sizes:
                params[f"conv{k}_weight"] = Tensor(_uniform(rng, (c, k), k), requires_grad=True)
                params[f"conv{k}_bias"] = Tensor(_uniform(rng, (c,), k), requires_grad=True)
        dims = [config.feature_dim, *config.gnn_hidden]
        for idx, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            if config.variant == "kgnn":
                params[f"gnn{idx}_self"] = Tensor(
                    _uniform(rng, (d_in, d_out), d_in), requires_grad=True
                )
                params[f"gnn{idx}_neighbor"] = Tensor(
                    _uniform(rng, (d_in, d_out), d_in), requires_grad=True
                )
            else:
                params[f"gin{idx}_eps"] = Tensor(np.zeros(()), requires_grad=True)
                params[f"gin{idx}_lin1"] = Tensor(
                    _uniform(rng, (d_in, d_out), d_in), requires_grad=True
                )
                params[f"gin{idx}_lin2"] = Tensor(
                    _uniform(rng, (d_out, d_out), d_out), requires_grad=True
                )
        last = dims[-1]
        params[f"readout_weight"] = Tensor(_uniform(rng, (last,), last), requires_grad=True)
        params[f"readout_bias"] = Tensor(_uniform(rng, (), last), requires_grad=True)
        self.params = params

    def named_parameters(self) -> Dict[str, Tensor]:
        return self.params

    def parameter_vector(self) -> np.ndarray:
        """All parameter values concatenated in name order (for snapshots)."""
        return np.concatenate([self.params[k].data.ravel() for k in sorted(self.params)])

    def load_parameter_vector(self, vec: np.ndarray) -> None:
        pos = 0
        for k in sorted(self.params):
            p = self.params[k]
            p.data = vec[pos : pos + p.data.size].reshape(p.data.shape).copy()
            pos += p.data.size
        if pos != vec.size:
            raise ValueError(f"parameter vector has {vec.size} values, expected {pos}")

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()


def neighbor_matrix(adjacency: np.ndarray, symmetric: bool = False) -> np.ndarray:
    """Aggregation matrix A with A[i, j] = 1 iff j is a neighbor feeding node i.

    Row i of A @ H sums the features of node i's causes (in-edges of the
    directed adjacency); with ``symmetric`` the edge direction is ignored.
    """
    adjacency = np.asarray(adjacency, dtype=np.float64)
    if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise ad.ShapeError(f"adjacency must be square, got shape {adjacency.shape}")
    mask = (adjacency > 0).astype(np.float64)
    if symmetric:
        mask = np.maximum(mask, mask.T)
    return mask.T.copy()


def complete_graph_adjacency(n: int) -> np.ndarray:
    """All-ones adjacency with zero diagonal (the no-causality ablation)."""
    adj = np.ones((n, n))
    np.fill_diagonal(adj, 0.0)
    return adj


def kgnn_layer(h: Tensor, adjacency: np.ndarray, w1: Tensor, w2: Tensor,
               symmetric: bool = False) -> Tensor:
    """One message-passing layer: ReLU(h W1 + (sum over neighbors) h_j W2).

    Neighbor contributions are summed unweighted (edge presence only).
    ``h`` is n x d_in or batched ... x n x d_in.
    """
    agg = Tensor(neighbor_matrix(adjacency, symmetric))
    return ad.relu(ad.add(ad.matmul(h, w1), ad.matmul(agg, ad.matmul(h, w2))))


def gin_layer(h: Tensor, adjacency: np.ndarray, eps: Tensor, w1: Tensor, w2: Tensor,
              symmetric: bool = False) -> Tensor:
    """One GIN layer: MLP((1+eps) h + neighbor sum), MLP = linear-ReLU-linear."""
    agg = Tensor(neighbor_matrix(adjacency, symmetric))
    z = ad.add(ad.multiply(h, ad.add(eps, 1.0)), ad.matmul(agg, h))
    return ad.matmul(ad.relu(ad.matmul(z, w1)), w2)


def extract_features(window: Tensor, model: ForecastModel) -> Tensor:
    """Map scaled windows (... x n x W) to node features (... x n x d).

    Each kernel size contributes channels-many valid 1-D convolutions per
    variable; outputs pass through ReLU, are flattened across the channel
    and time axes, and concatenated across kernel sizes.  With the CNN off,
    the window rows are returned unchanged (d = W).
    """
    cfg = model.config
    if window.shape[-1] != cfg.window:
        raise ad.ShapeError(
            f"window length {window.shape[-1]} does not match config window {cfg.window}"
        )
    if not cfg.use_cnn:
        return window
    lead = window.shape[:-1]
    pieces = []
    for k in cfg.kernel_sizes:
        out = ad.conv1d(
            window, model.params[f"conv{k}_weight"], bias=model.params[f"conv{k}_bias"]
        )
        out = ad.relu(out)
        flat_len = cfg.channels_per_kernel * (cfg.window - k + 1)
        pieces.append(ad.reshape(out, (*lead, flat_len)))
    return ad.concat(pieces, axis=-1)


def forward(window: Tensor, adjacency: Optional[np.ndarray], model: ForecastModel) -> Tensor:
    """Full forecaster pass: windows (... x n x W) to predictions (... x n).

    ``adjacency`` is the causality matrix (ignored and replaced by the
    complete graph when use_causality is off); predictions are in scaled
    space and are inverse-scaled by the caller for reporting.
    """
    cfg = model.config
    n = window.shape[-2]
    if cfg.use_causality:
        if adjacency is None:
            raise ValueError("model uses causality but no adjacency was given")
        adjacency = np.asarray(adjacency, dtype=np.float64)
        if adjacency.shape != (n, n):
            raise ad.ShapeError(
                f"adjacency shape {adjacency.shape} does not match n={n} variables"
            )
    else:
        adjacency = complete_graph_adjacency(n)
    h = extract_features(window, model)
    for idx in range(len(cfg.gnn_hidden)):
        if cfg.variant == "kgnn":
            h = kgnn_layer(
                h, adjacency,
                model.params[f"gnn{idx}_self"], model.params[f"gnn{idx}_neighbor"],
                symmetric=cfg.symmetric_neighbors,
            )
        else:
            h = gin_layer(
                h, adjacency,
                model.params[f"gin{idx}_eps"],
                model.params[f"gin{idx}_lin1"], model.params[f"gin{idx}_lin2"],
                symmetric=cfg.symmetric_neighbors,
            )
    pred = ad.matmul(h, model.params["readout_weight"])
    return ad.add(pred, model.params["readout_bias"])


def _jsonable(obj):
    """Recursively convert numpy scalars/arrays so json can serialize them."""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def save_checkpoint(model: ForecastModel, path, metadata: Optional[dict] = None,
                    arrays: Optional[Dict[str, np.ndarray]] = None) -> None:
    """Write a byte-deterministic checkpoint container.

    Layout: magic, 8-byte little-endian manifest length, manifest JSON
    (sorted keys; config fields, seed, format version, caller metadata, and
    an array table of name/shape/offset), then every array concatenated as
    little-endian float64.  ``arrays`` lets callers persist extras such as
    the adjacency next to the parameters; identical inputs produce
    identical bytes, and loading is an exact round-trip.
    """
    entries = dict(model.params.items())
    extra = dict(arrays or {})
    clash = set(entries) & set(extra)
    if clash:
        raise ValueError(f"extra array names collide with parameters: {sorted(clash)}")
    table = []
    payload = io.BytesIO()
    offset = 0
    for name in sorted(entries) + sorted(extra):
        arr = entries[name].data if name in entries else np.asarray(extra[name], dtype=np.float64)
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        table.append(
            {"name": name, "shape": list(arr.shape), "offset": offset,
             "kind": "param" if name in entries else "extra"}
        )
        payload.write(raw)
        offset += len(raw)
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "seed": model.seed,
        "metadata": _jsonable(metadata or {}),
        "arrays": table,
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(payload.getvalue())


def load_checkpoint(path) -> Tuple[ForecastModel, dict, Dict[str, np.ndarray]]:
    """Read a checkpoint: (model, metadata, extra arrays)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic)")
        (blob_len,) = struct.unpack("<Q", fh.read(8))
        manifest = json.loads(fh.read(blob_len).decode("utf-8"))
        payload = fh.read()
    if manifest["format_version"] != CHECKPOINT_VERSION:
        raise ValueError(
            f"{path}: unsupported checkpoint version {manifest['format_version']}"
        )
    cfg_dict = dict(manifest["config"])
    cfg_dict["kernel_sizes"] = tuple(cfg_dict["kernel_sizes"])
    cfg_dict["gnn_hidden"] = tuple(cfg_dict["gnn_hidden"])
    config = ModelConfig(**cfg_dict)
    model = ForecastModel(config, seed=manifest["seed"])
    extras: Dict[str, np.ndarray] = {}
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=start)
        arr = arr.reshape(shape).astype(np.float64)
        if entry["kind"] == "param":
            name = entry["name"]
            if name not in model.params:
                raise ValueError(f"{path}: unknown parameter {name!r} for this config")
            if model.params[name].data.shape != shape:
                raise ValueError(
                    f"{path}: parameter {name!r} has shape {shape}, "
                    f"expected {model.params[name].data.shape}"
                )
            model.params[name].data = arr.copy()
        else:
            extras[entry["name"]] = arr.copy()
    return model, manifest["metadata"], extras
