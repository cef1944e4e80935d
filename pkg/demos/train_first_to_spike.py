"""Train a small first-to-spike classifier on MNIST and watch it learn.

Uses the deterministic model: hidden and output layers are hard-threshold LIF
neurons, the prediction is the index of the first output neuron to fire, and
the temporal cross-entropy loss over first-spike times is driven through the
network with the arctan surrogate and the sign estimator.

By default this trains on a 6000-sample subset for a couple of epochs so it
finishes in about a minute; point SPIKEFIRST_DATA at a directory containing
the MNIST IDX files (or keep the default /root/data).
"""

import os
from pathlib import Path

import numpy as np

from spikefirst import load_mnist_idx
from spikefirst.train import TrainConfig, train

DATA = Path(os.environ.get("SPIKEFIRST_DATA", "/root/data")) / "mnist"


def main():
    train_ds = load_mnist_idx(DATA / "train-images-idx3-ubyte",
                              DATA / "train-labels-idx1-ubyte")
    test_ds = load_mnist_idx(DATA / "t10k-images-idx3-ubyte",
                             DATA / "t10k-labels-idx1-ubyte", split="test")
    train_ds = train_ds.subset(np.arange(6000))
    test_ds = test_ds.subset(np.arange(2000))

    config = TrainConfig(model_kind="D-F-BPTT", arch="mlp2", epochs=3,
                         batch_size=256, lr=1e-3, weight_decay=1e-4,
                         lambda_leak=0.9, horizon=10, hidden=256, seed=0)

    def hook(row, _ckpt):
        print(f"epoch {row['epoch']}: loss {row['train_loss']:.4f}  "
              f"test accuracy {row['test_acc']:.4f}  ({row['wall_time_s']:.1f}s)")

    ckpt, _rows = train(config, train_ds, test_ds, epoch_hook=hook)
    print(f"best test accuracy on the subset: {ckpt.best_accuracy:.4f}")
    print("(the full published schedule is available as preset 'mnist-df-bptt')")


if __name__ == "__main__":
    main()
