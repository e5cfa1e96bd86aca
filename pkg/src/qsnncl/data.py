"""MNIST IDX ingestion, per-class task splits and Poisson rate coding."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    IdxCountMismatchError,
    IdxShapeError,
    IdxMagicError,
    IdxTruncatedError,
    InsufficientSamplesError,
)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
NUM_CLASSES = 10


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # uint8 [n, 28, 28]
    labels: np.ndarray  # int64 [n]

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES):
            raise ValueError("labels must lie in [0, 9]")

    def __len__(self):
        return len(self.labels)

    @property
    def per_class_index(self) -> dict[int, np.ndarray]:
        return {c: np.flatnonzero(self.labels == c) for c in range(NUM_CLASSES)}

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self.images[index], self.labels[index])


@dataclass(frozen=True)
class SpikeTrain:
    spikes: np.ndarray  # bool [duration_steps, num_inputs]
    dt: float = 1.0

    @property
    def duration_steps(self) -> int:
        return self.spikes.shape[0]

    @property
    def num_inputs(self) -> int:
        return self.spikes.shape[1]

    def events(self):
        """CSR view: ``indices[indptr[t]:indptr[t+1]]`` are the inputs firing at step t."""
        steps, inputs = np.nonzero(self.spikes)
        indptr = np.zeros(self.duration_steps + 1, dtype=np.int64)
        np.cumsum(np.bincount(steps, minlength=self.duration_steps), out=indptr[1:])
        return indptr, inputs.astype(np.int64)


def _open(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path, expected_magic, item_dims):
    with _open(path) as f:
        raw = f.read()
    header_len = 4 * (2 + len(item_dims))
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: file holds {len(raw)} bytes, no magic number")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IdxMagicError(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    if len(raw) < header_len:
        raise IdxTruncatedError(
            f"{path}: header needs {header_len} bytes, file holds {len(raw)}"
        )
    count, *dims = struct.unpack(">" + "I" * (1 + len(item_dims)), raw[4:header_len])
    if item_dims and tuple(dims) != item_dims:
        raise IdxShapeError(f"{path}: item shape {tuple(dims)}, expected {item_dims}")
    expected = header_len + count * int(np.prod(item_dims, dtype=np.int64))
    if len(raw) < expected:
        raise IdxTruncatedError(
            f"{path}: expected {expected} bytes for {count} items, got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype=np.uint8, count=expected - header_len, offset=header_len)
    return data.reshape((count, *item_dims))


def load_mnist(images_path, labels_path) -> Dataset:
    """Parse a pair of (optionally gzipped) big-endian IDX files."""
    images = _read_idx(images_path, IMAGE_MAGIC, (28, 28))
    labels = _read_idx(labels_path, LABEL_MAGIC, ())
    if len(images) != len(labels):
        raise IdxCountMismatchError(
            f"{images_path} holds {len(images)} images but {labels_path} holds {len(labels)} labels"
        )
    return Dataset(images.copy(), labels.astype(np.int64))


def write_idx(path, array):
    """Write a uint8 array as an IDX file (gzip when the name ends in ``.gz``)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">I", 0x00000800 | array.ndim)
    header += struct.pack(">" + "I" * array.ndim, *array.shape)
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.GzipFile(path, "wb", mtime=0) as f:
            f.write(header + array.tobytes())
    else:
        path.write_bytes(header + array.tobytes())


def write_mnist(ds: Dataset, images_path, labels_path):
    write_idx(images_path, ds.images)
    write_idx(labels_path, ds.labels)


def spike_probability(max_rate_hz, dt):
    p = max_rate_hz * dt / 1000.0
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(
            f"max_rate_hz * dt / 1000 = {p} is not a per-step probability"
        )
    return p


def encode_rate(image, duration_steps: int, max_rate_hz: float, dt: float, rng) -> SpikeTrain:
    """Independent Bernoulli spikes with per-step probability ``(pixel/255) * rate * dt``.

    Zero pixels consume no random draws.
    """
    p_max = spike_probability(max_rate_hz, dt)
    pixels = np.asarray(image, dtype=np.float64).ravel()
    probs = pixels / 255.0 * p_max
    lit = np.flatnonzero(probs > 0)
    spikes = np.zeros((duration_steps, pixels.size), dtype=bool)
    if lit.size:
        spikes[:, lit] = rng.random((duration_steps, lit.size)) < probs[lit]
    return SpikeTrain(spikes, dt)


def split_by_class(ds: Dataset, samples_per_class: int, rng, num_classes=NUM_CLASSES):
    """Disjoint, seeded-shuffled index arrays, ``samples_per_class`` per class."""
    out = []
    for c in range(num_classes):
        idx = np.flatnonzero(ds.labels == c)
        if len(idx) < samples_per_class:
            raise InsufficientSamplesError(
                f"class {c} has {len(idx)} samples, {samples_per_class} requested"
            )
        out.append(rng.permutation(idx)[:samples_per_class])
    return out
