from pathlib import Path

import numpy as np
import pytest

from qsnncl.data import Dataset

ROOT = Path(__file__).resolve().parents[1]
MNIST_DIR = ROOT / "data" / "mnist"
CONFIG_DIR = ROOT / "configs"


@pytest.fixture(scope="session")
def mnist():
    from qsnncl.data import load_mnist

    train = load_mnist(MNIST_DIR / "train-images-idx3-ubyte.gz", MNIST_DIR / "train-labels-idx1-ubyte.gz")
    test = load_mnist(MNIST_DIR / "test-images-idx3-ubyte.gz", MNIST_DIR / "test-labels-idx1-ubyte.gz")
    return train, test


def blob_dataset(per_class=12, num_classes=10, seed=0):
    """Synthetic digits: class c lights a distinct 4x28 horizontal band plus noise."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for c in range(num_classes):
        for _ in range(per_class):
            img = np.zeros((28, 28), dtype=np.uint8)
            rows = slice(2 * c + 4, 2 * c + 8)
            img[rows, 4:24] = rng.integers(180, 256, size=(4, 20))
            images.append(img)
            labels.append(c)
    return Dataset(np.array(images), np.array(labels, dtype=np.int64))


@pytest.fixture
def blobs():
    return blob_dataset()
