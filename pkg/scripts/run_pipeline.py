#!/usr/bin/env python3
"""Run the full experiment on a dataset directory, optionally over several
seeds, and report mean final accuracies.

Example (single seed):
    python scripts/run_pipeline.py --data /path/to/dataset --out /tmp/exp

Example (replication across seeds):
    python scripts/run_pipeline.py --data /path/to/dataset --out /tmp/exp --seeds 0,1,2,3,4
"""

import argparse
import json
from pathlib import Path

import numpy as np

from follicle.cli import main as cli


def run_one(data: str, out: Path, seed: int, extra_flags: list[str]) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    flags = ["--seed", str(seed), *extra_flags]
    assert cli(["ingest", data, "--out", str(out), *flags]) == 0
    assert cli(["preprocess", str(out / "manifest.json"), "--out", str(out), *flags]) == 0
    assert cli(["train", str(out / "processed" / "manifest.json"), "--out", str(out / "run"), *flags]) == 0
    history = (out / "run" / "history.csv").read_text().strip().split("\n")
    last = history[-1].split(",")
    metrics = json.loads((out / "run" / "metrics.json").read_text())
    return {
        "seed": seed,
        "train_acc": float(last[2]),
        "val_acc": float(last[4]),
        "train_loss": float(last[1]),
        "val_loss": float(last[3]),
        "test_accuracy": metrics["accuracy"],
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data", required=True, help="dataset root (class-per-directory)")
    parser.add_argument("--out", required=True, help="experiment output directory")
    parser.add_argument("--seeds", default="0", help="comma-separated seeds")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--input-size", type=int)
    args = parser.parse_args()

    extra = []
    if args.epochs is not None:
        extra += ["--epochs", str(args.epochs)]
    if args.input_size is not None:
        extra += ["--input-size", str(args.input_size)]

    results = []
    for seed in (int(s) for s in args.seeds.split(",")):
        result = run_one(args.data, Path(args.out) / f"seed_{seed}", seed, extra)
        print(json.dumps(result))
        results.append(result)

    if len(results) > 1:
        train_accs = [r["train_acc"] for r in results]
        val_accs = [r["val_acc"] for r in results]
        print(
            f"mean over {len(results)} seeds: "
            f"train_acc={np.mean(train_accs):.4f} (+/- {np.std(train_accs):.4f}) "
            f"val_acc={np.mean(val_accs):.4f} (+/- {np.std(val_accs):.4f})"
        )


if __name__ == "__main__":
    main()
