"""Class-sequential training/testing harness and its metrics.

The dynamic scenario trains on one class at a time (0, 1, ..., 9) without
revisiting earlier classes.  After phase ``i`` the neurons are relabeled
using samples of the classes seen so far and the model is tested on every
class ``k <= i``, filling ``acc[i, k]``.  The non-dynamic control trains once
on a shuffled mix of all classes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import NUM_CLASSES, Dataset, encode_rate, spike_probability, split_by_class
from .errors import ConfigurationError
from .network import (
    SnnModel,
    classify_counts,
    labels_from_counts,
    present_sample,
    response_counts,
)
from .quant import FULL_PRECISION_BITS, bits_per_weight

log = logging.getLogger(__name__)

TRAIN_STREAM, LABEL_STREAM, TEST_STREAM, SHUFFLE_STREAM = 0, 1, 2, 3


@dataclass(frozen=True)
class EncodingConfig:
    duration_steps: int = 100
    max_rate_hz: float = 63.75
    dt: float = 1.0

    def validation_errors(self) -> list[str]:
        errors = []
        if not (isinstance(self.duration_steps, int) and self.duration_steps >= 1):
            errors.append(f"duration_steps must be a positive integer, got {self.duration_steps}")
        if not self.dt > 0:
            errors.append(f"dt must be positive, got {self.dt}")
        try:
            spike_probability(self.max_rate_hz, self.dt)
        except ConfigurationError as exc:
            errors.append(str(exc))
        return errors


@dataclass(frozen=True)
class ScenarioConfig:
    samples_per_class: int = 500
    test_per_class: int | None = None  # None keeps every test sample
    label_samples_per_class: int = 100
    num_classes: int = NUM_CLASSES
    encoding: EncodingConfig = field(default_factory=EncodingConfig)

    def validation_errors(self) -> list[str]:
        errors = list(self.encoding.validation_errors())
        if self.samples_per_class < 1:
            errors.append(f"samples_per_class must be >= 1, got {self.samples_per_class}")
        if self.test_per_class is not None and self.test_per_class < 1:
            errors.append(f"test_per_class must be >= 1, got {self.test_per_class}")
        if self.label_samples_per_class < 1:
            errors.append(
                f"label_samples_per_class must be >= 1, got {self.label_samples_per_class}"
            )
        if not 1 <= self.num_classes <= NUM_CLASSES:
            errors.append(f"num_classes must lie in [1, {NUM_CLASSES}], got {self.num_classes}")
        return errors


class SampleEncoder:
    """Seeded, cached spike encodings of one dataset.

    Sample ``j`` of stream ``s`` is always encoded with
    ``default_rng([seed, s, j])``, so the same sample gets the same spike
    train in every phase and every grid point.
    """

    def __init__(self, ds: Dataset, encoding: EncodingConfig, seed: int, stream: int):
        self.ds = ds
        self.encoding = encoding
        self.seed = seed
        self.stream = stream
        self._cache = {}

    def __call__(self, j):
        j = int(j)
        ev = self._cache.get(j)
        if ev is None:
            rng = np.random.default_rng([self.seed, self.stream, j])
            enc = self.encoding
            ev = encode_rate(self.ds.images[j], enc.duration_steps, enc.max_rate_hz, enc.dt, rng).events()
            self._cache[j] = ev
        return ev


@dataclass
class TaskData:
    """Per-class index sets, Alg.-1 style ``D[i].train_set`` / ``D[i].test_set``."""

    train: Dataset
    test: Dataset
    train_by_class: list
    test_by_class: list
    seed: int
    encoding: EncodingConfig
    label_samples_per_class: int
    train_encoder: SampleEncoder = None
    label_encoder: SampleEncoder = None
    test_encoder: SampleEncoder = None

    def __post_init__(self):
        self.train_encoder = SampleEncoder(self.train, self.encoding, self.seed, TRAIN_STREAM)
        self.label_encoder = SampleEncoder(self.train, self.encoding, self.seed, LABEL_STREAM)
        self.test_encoder = SampleEncoder(self.test, self.encoding, self.seed, TEST_STREAM)

    @property
    def num_tasks(self) -> int:
        return len(self.train_by_class)

    def label_index(self, classes) -> tuple[np.ndarray, np.ndarray]:
        idx = [self.train_by_class[c][: self.label_samples_per_class] for c in classes]
        cls = [np.full(len(i), c) for i, c in zip(idx, classes)]
        return np.concatenate(idx), np.concatenate(cls)


def prepare_tasks(train: Dataset, test: Dataset, cfg: ScenarioConfig, seed: int) -> TaskData:
    errors = cfg.validation_errors()
    if errors:
        raise ConfigurationError("; ".join(errors))
    rng = np.random.default_rng([seed, SHUFFLE_STREAM])
    train_by_class = split_by_class(train, cfg.samples_per_class, rng, cfg.num_classes)
    test_by_class = []
    for c in range(cfg.num_classes):
        idx = np.flatnonzero(test.labels == c)
        if len(idx) == 0:
            raise ConfigurationError(f"test set has no samples of class {c}")
        if cfg.test_per_class is not None:
            idx = idx[: cfg.test_per_class]
        test_by_class.append(idx)
    return TaskData(train, test, train_by_class, test_by_class, seed, cfg.encoding,
                    min(cfg.label_samples_per_class, cfg.samples_per_class))


@dataclass
class AccuracyMatrix:
    """``acc[i, k]``: accuracy on task ``k`` after training phase ``i`` (NaN for ``k > i``)."""

    acc: np.ndarray

    @classmethod
    def empty(cls, num_tasks: int) -> "AccuracyMatrix":
        return cls(np.full((num_tasks, num_tasks), np.nan))

    @property
    def num_tasks(self) -> int:
        return self.acc.shape[0]

    @property
    def final_row(self) -> np.ndarray:
        return self.acc[-1]

    @property
    def is_complete(self) -> bool:
        lower = np.tril(np.ones_like(self.acc, dtype=bool))
        return bool(np.all(np.isfinite(self.acc[lower])))

    @property
    def per_phase_avg(self) -> np.ndarray:
        """Mean accuracy over the tasks seen after each phase."""
        return np.array([np.mean(self.acc[i, : i + 1]) for i in range(self.num_tasks)])

    @property
    def overall_avg(self) -> float:
        """Mean of the final row: the average over all evaluated tasks."""
        return float(np.mean(self.final_row))

    def to_csv(self) -> str:
        n = self.num_tasks
        lines = ["phase," + ",".join(f"task_{k}" for k in range(n))]
        for i in range(n):
            cells = [f"{self.acc[i, k]:.6f}" if k <= i else "" for k in range(n)]
            lines.append(f"{i}," + ",".join(cells))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "AccuracyMatrix":
        rows = [line.split(",") for line in text.strip().splitlines()[1:]]
        acc = np.array([[float(c) if c else np.nan for c in row[1:]] for row in rows])
        return cls(acc)


@dataclass(frozen=True)
class MemoryReport:
    synapse_count: int
    bits_per_weight: int
    total_bits: int
    ratio_vs_32bit: float

    @property
    def saving_factor(self) -> float:
        return FULL_PRECISION_BITS / self.bits_per_weight


def memory_report(model: SnnModel) -> MemoryReport:
    """Bit count of the learned weight matrix, relative to 32-bit storage."""
    synapses = model.num_inputs * model.num_excitatory
    bits = bits_per_weight(model.format)
    return MemoryReport(synapses, bits, synapses * bits, bits / FULL_PRECISION_BITS)


def low_accuracy_tasks(m: AccuracyMatrix, acc_low: float) -> list[tuple[int, int]]:
    """Final-row ``(phase, task)`` entries at or below ``acc_low``."""
    if not 0.0 < acc_low < 1.0:
        raise ConfigurationError(f"acc_low must lie in (0, 1), got {acc_low}")
    last = m.num_tasks - 1
    return [(last, k) for k, a in enumerate(m.final_row) if a <= acc_low]


def _train(model, encoder, index, observer, phase):
    for j in index:
        if observer is not None:
            observer("train", phase=phase, index=int(j))
        present_sample(model, encoder(j), learn=True)


def _relabel(model: SnnModel, tasks: TaskData, classes):
    idx, cls = tasks.label_index(classes)
    counts = response_counts(model, [tasks.label_encoder(j) for j in idx])
    model.neuron_labels = labels_from_counts(counts, cls)
    model.label_classes = tuple(int(c) for c in classes)


def _accuracy(model: SnnModel, tasks: TaskData, index, target) -> float:
    counts = response_counts(model, [tasks.test_encoder(j) for j in index])
    pred = classify_counts(counts, model.neuron_labels, model.label_classes)
    return float(np.mean(pred == target))


def run_dynamic(model: SnnModel, tasks: TaskData,
                observer: Callable | None = None) -> tuple[SnnModel, AccuracyMatrix]:
    """Train on each class in turn and test on every class seen so far.

    ``model`` is trained in place and returned.  ``observer``, when given, is
    called as ``observer(event, **info)`` for every training presentation
    (``"train"``: phase, index) and test (``"test"``: phase, task).
    """
    n = tasks.num_tasks
    m = AccuracyMatrix.empty(n)
    for i in range(n):
        _train(model, tasks.train_encoder, tasks.train_by_class[i], observer, i)
        _relabel(model, tasks, range(i + 1))
        for k in range(i + 1):
            if observer is not None:
                observer("test", phase=i, task=k)
            m.acc[i, k] = _accuracy(model, tasks, tasks.test_by_class[k], k)
        log.info("phase %d: seen-task average %.3f", i, m.per_phase_avg[i])
    return model, m


def run_nondynamic(model: SnnModel, tasks: TaskData,
                   observer: Callable | None = None) -> tuple[SnnModel, float]:
    """One pass over a seeded shuffle of every class's training samples."""
    order = np.concatenate(tasks.train_by_class)
    rng = np.random.default_rng([tasks.seed, SHUFFLE_STREAM, 1])
    order = order[rng.permutation(len(order))]
    _train(model, tasks.train_encoder, order, observer, 0)
    classes = range(tasks.num_tasks)
    _relabel(model, tasks, classes)
    test_idx = np.concatenate(tasks.test_by_class)
    target = np.concatenate([np.full(len(ix), c) for c, ix in enumerate(tasks.test_by_class)])
    acc = _accuracy(model, tasks, test_idx, target)
    log.info("non-dynamic accuracy %.3f", acc)
    return model, acc


def summary(m: AccuracyMatrix, report: MemoryReport, acc_low: float) -> dict:
    return {
        "seen_task_average_per_phase": [round(float(x), 6) for x in m.per_phase_avg],
        "final_average": round(m.overall_avg, 6),
        "min_final_task_accuracy": round(float(np.min(m.final_row)), 6),
        "acc_low": acc_low,
        "low_accuracy_tasks": [list(t) for t in low_accuracy_tasks(m, acc_low)],
        "memory": {
            "synapse_count": report.synapse_count,
            "bits_per_weight": report.bits_per_weight,
            "total_bits": report.total_bits,
            "ratio_vs_32bit": report.ratio_vs_32bit,
        },
    }
