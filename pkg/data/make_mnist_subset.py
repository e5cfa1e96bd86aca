"""Rebuild the bundled 10k-digit MNIST subset as IDX files.

Source: the ``mnist`` npm package (v1.1.0, MIT), which ships 10,000 MNIST
digits as per-class JSON arrays with pixels scaled to [0, 1] at three
decimals.  ``round(x * 255)`` recovers the original byte exactly.

Split: the first 500 digits of each class form the training file, the
rest (363 to 627 per class) the test file.  Both files keep class-major
order; consumers shuffle with their own seed.

Usage::

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python data/make_mnist_subset.py package/src/digits data/mnist
"""

import gzip
import json
import struct
import sys
from pathlib import Path

import numpy as np

TRAIN_PER_CLASS = 500


def write_idx(path, array):
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    header = struct.pack(">I", magic) + struct.pack(">" + "I" * array.ndim, *array.shape)
    # mtime=0 keeps the archives byte-reproducible
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + array.tobytes())


def main(src, dst):
    src, dst = Path(src), Path(dst)
    dst.mkdir(parents=True, exist_ok=True)
    train_x, train_y, test_x, test_y = [], [], [], []
    for digit in range(10):
        flat = json.loads((src / f"{digit}.json").read_text())["data"]
        pixels = np.rint(np.asarray(flat, dtype=np.float64) * 255).astype(np.uint8)
        images = pixels.reshape(-1, 28, 28)
        train_x.append(images[:TRAIN_PER_CLASS])
        test_x.append(images[TRAIN_PER_CLASS:])
        train_y.append(np.full(min(len(images), TRAIN_PER_CLASS), digit))
        test_y.append(np.full(max(len(images) - TRAIN_PER_CLASS, 0), digit))
    write_idx(dst / "train-images-idx3-ubyte.gz", np.concatenate(train_x))
    write_idx(dst / "train-labels-idx1-ubyte.gz", np.concatenate(train_y))
    write_idx(dst / "test-images-idx3-ubyte.gz", np.concatenate(test_x))
    write_idx(dst / "test-labels-idx1-ubyte.gz", np.concatenate(test_y))


if __name__ == "__main__":
    main(*sys.argv[1:3])
