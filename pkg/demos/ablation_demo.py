#!/usr/bin/env python3
"""Which parts of the forecaster matter?  An ablation comparison.

Trains four variants on the same data with shared seeds and compares
median test MAE:

  full  - causality graph + multi-kernel CNN features (the whole model)
  nCau  - no causality graph: message passing over the complete graph
  nCNN  - no CNN: raw window values as node features
  1CNN  - a single kernel size instead of three
  RF    - "raw features"; identical to nCNN, reported as its own row

Defaults are sized to finish in a few minutes; pass --steps 7588
--epochs 120 for a full-scale comparison.
"""

import argparse
import time

import numpy as np

from tegnn.causality import build_causality_matrix
from tegnn.data import fit_scaling_and_split, load_csv
from tegnn.model import ForecastModel, ModelConfig
from tegnn.synthetic import fx_rates
from tegnn.training import TrainConfig, evaluate, train

VARIANTS = (
    ("full", {}),
    ("nCau", {"use_causality": False}),
    ("nCNN", {"use_cnn": False}),
    ("1CNN", {"kernel_sizes": (3,)}),
)


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--dataset", help="CSV panel (default: synthetic FX-style)")
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--horizon", type=int, default=5)
    parser.add_argument("--epochs", type=int, default=40)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--seeds", default="0,1,2")
    args = parser.parse_args()

    seeds = [int(s) for s in args.seeds.split(",")]
    if args.dataset:
        ds = load_csv(args.dataset)
    else:
        ds = fx_rates(args.steps)
    ds = fit_scaling_and_split(ds)
    matrix = build_causality_matrix(ds)
    print(f"{ds.n_vars} variables, {ds.n_steps} steps, "
          f"{matrix.edge_count()} causal edges; seeds {seeds}")

    results = {}
    for name, overrides in VARIANTS:
        config = ModelConfig(**overrides)
        maes = []
        for seed in seeds:
            model = ForecastModel(config, seed=seed)
            t0 = time.time()
            train(model, ds, matrix.adjacency,
                  TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                              horizon=args.horizon, seed=seed))
            report = evaluate(model, ds, matrix.adjacency, horizon=args.horizon)
            maes.append(report.mae)
            print(f"  {name} seed {seed}: test MAE {report.mae:.6f} "
                  f"({time.time() - t0:.0f}s)")
        results[name] = float(np.median(maes))
    results["RF"] = results["nCNN"]

    print(f"\n{'variant':<8}{'median test MAE':>18}")
    for name in ("full", "nCau", "nCNN", "1CNN", "RF"):
        marker = "  <- best" if results[name] == min(results.values()) else ""
        print(f"{name:<8}{results[name]:>18.6f}{marker}")

    full = results["full"]
    beats = [n for n in ("nCau", "nCNN", "RF") if full <= results[n]]
    if len(beats) == 3:
        print("\nthe full model is at least as good as every ablation, "
              "matching the motivating comparison.")
    else:
        print(f"\nfull model beats {beats} but not the rest on this run; "
              "small panels and few epochs make the ordering noisy.")


if __name__ == "__main__":
    main()
