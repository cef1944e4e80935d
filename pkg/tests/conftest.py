import os
from pathlib import Path

import numpy as np
import pytest

import spikefirst as sf
from spikefirst.checkpoint import load_checkpoint, save_checkpoint
from spikefirst.train import PRESETS, train

MNIST_DIR = Path(os.environ.get("SPIKEFIRST_DATA", "/root/data")) / "mnist"
CACHE_DIR = Path(__file__).resolve().parent.parent / ".cache"


def mnist_available() -> bool:
    return (MNIST_DIR / "train-images-idx3-ubyte").exists()


needs_mnist = pytest.mark.skipif(not mnist_available(),
                                 reason="MNIST IDX files not found")


@pytest.fixture(scope="session")
def mnist_train():
    if not mnist_available():
        pytest.skip("MNIST IDX files not found")
    return sf.load_mnist_idx(MNIST_DIR / "train-images-idx3-ubyte",
                             MNIST_DIR / "train-labels-idx1-ubyte", "train")


@pytest.fixture(scope="session")
def mnist_test():
    if not mnist_available():
        pytest.skip("MNIST IDX files not found")
    return sf.load_mnist_idx(MNIST_DIR / "t10k-images-idx3-ubyte",
                             MNIST_DIR / "t10k-labels-idx1-ubyte", "test")


def trained_smoke(preset: str, train_ds, test_ds):
    """Train (or load from the on-disk cache) one smoke-schedule model."""
    CACHE_DIR.mkdir(exist_ok=True)
    path = CACHE_DIR / f"{preset}.ckpt"
    if path.exists():
        return load_checkpoint(path)
    ckpt, _ = train(PRESETS[preset], train_ds, test_ds)
    save_checkpoint(ckpt, path)
    return ckpt


@pytest.fixture(scope="session")
def smoke_df(mnist_train, mnist_test):
    return trained_smoke("mnist-df-bptt-smoke", mnist_train, mnist_test)


@pytest.fixture(scope="session")
def smoke_sf(mnist_train, mnist_test):
    return trained_smoke("mnist-sf-bptt-smoke", mnist_train, mnist_test)


@pytest.fixture(scope="session")
def smoke_dr(mnist_train, mnist_test):
    return trained_smoke("mnist-dr-bptt-smoke", mnist_train, mnist_test)


@pytest.fixture(scope="session")
def eval_subset(mnist_test):
    # fixed 2000-sample slice keeps evaluation-heavy tests fast
    return mnist_test.subset(np.arange(2000))
