"""Multivariate time series forecasting on transfer-entropy causality graphs.

The package couples a plug-in transfer-entropy estimator (which turns a
panel of series into a directed causality graph) with a small neural
forecaster: per-variable convolutional feature extraction followed by
graph message passing over the learned causal structure, trained end to
end with a reverse-mode autodiff engine built on numpy.
"""

from tegnn.autodiff import (
    Adam,
    ShapeError,
    Tensor,
    absolute,
    add,
    concat,
    conv1d,
    matmul,
    multiply,
    no_grad,
    relu,
    reshape,
    subtract,
    tensor_mean,
    tensor_sum,
)
from tegnn.causality import (
    CausalityMatrix,
    DiscretizedSeries,
    build_causality_matrix,
    conditional_entropy,
    discretize,
    entropy,
    load_causality_csv,
    net_transfer_entropy,
    save_causality_csv,
    transfer_entropy,
)
from tegnn.data import (
    TimeSeriesDataset,
    WindowSample,
    fit_scaling_and_split,
    load_csv,
    save_csv,
    window_arrays,
    windows,
)
from tegnn.model import (
    ForecastModel,
    ModelConfig,
    complete_graph_adjacency,
    extract_features,
    forward,
    gin_layer,
    kgnn_layer,
    load_checkpoint,
    neighbor_matrix,
    save_checkpoint,
)
from tegnn.synthetic import (
    coupled_ar_chain,
    coupled_panel,
    energy_readings,
    fx_rates,
    iid_noise,
    stock_prices,
)
from tegnn.training import (
    EvalReport,
    TrainConfig,
    evaluate,
    forecast_metrics,
    l1_loss,
    save_history_csv,
    save_report_csv,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "CausalityMatrix",
    "DiscretizedSeries",
    "EvalReport",
    "ForecastModel",
    "ModelConfig",
    "ShapeError",
    "Tensor",
    "TimeSeriesDataset",
    "TrainConfig",
    "WindowSample",
    "absolute",
    "add",
    "build_causality_matrix",
    "complete_graph_adjacency",
    "concat",
    "conditional_entropy",
    "conv1d",
    "coupled_ar_chain",
    "coupled_panel",
    "discretize",
    "energy_readings",
    "entropy",
    "evaluate",
    "extract_features",
    "fit_scaling_and_split",
    "forecast_metrics",
    "forward",
    "fx_rates",
    "gin_layer",
    "iid_noise",
    "kgnn_layer",
    "l1_loss",
    "load_causality_csv",
    "load_checkpoint",
    "load_csv",
    "save_csv",
    "matmul",
    "multiply",
    "net_transfer_entropy",
    "neighbor_matrix",
    "no_grad",
    "relu",
    "reshape",
    "save_causality_csv",
    "save_checkpoint",
    "save_history_csv",
    "save_report_csv",
    "stock_prices",
    "subtract",
    "tensor_mean",
    "tensor_sum",
    "train",
    "window_arrays",
    "windows",
    "__version__",
]
