"""Probe a trained model's robustness to Gaussian input noise.

Adds elementwise zero-mean Gaussian noise of increasing variance to the
normalized input drive, redrawn at every timestep (no clipping, so the
configured noise power is exact)
and reports accuracy at each level.  Variance 0 reuses the clean images
bit-for-bit, so the first row always matches the clean evaluation.
"""

import os
import sys
from pathlib import Path

from spikefirst import load_mnist_idx
from spikefirst.checkpoint import load_checkpoint
from spikefirst.metrics import noise_sweep

DATA = Path(os.environ.get("SPIKEFIRST_DATA", "/root/data")) / "mnist"
VARIANCES = [0.0, 0.25, 0.5, 0.75, 1.0]


def main(path):
    ckpt = load_checkpoint(path)
    test_ds = load_mnist_idx(DATA / "t10k-images-idx3-ubyte",
                             DATA / "t10k-labels-idx1-ubyte", split="test")
    print(f"{ckpt.spec.model_kind} {ckpt.spec.arch}: accuracy under input noise")
    for var, acc in noise_sweep(ckpt, test_ds, VARIANCES):
        bar = "#" * int(round(acc * 40))
        print(f"  variance {var:>4.2f}: {acc:.4f} {bar}")


if __name__ == "__main__":
    if len(sys.argv) != 2:
        sys.exit(f"usage: {sys.argv[0]} CHECKPOINT")
    main(sys.argv[1])
