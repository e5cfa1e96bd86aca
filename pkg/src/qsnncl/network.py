"""Single-layer excitatory network with soft winner-take-all inhibition.

Every input pixel connects to every excitatory neuron through the learned
:class:`~qsnncl.plasticity.SynapseMatrix`.  Lateral inhibition is a uniform
current, delayed by one step: neuron ``n`` receives
``-inhibition_strength * (number of other neurons that spiked at t-1)``.
Inhibitory weights are fixed and never quantized.

After training, each neuron is labeled with the class it responds to most
and a presentation is classified by the class whose neurons fire most on
average.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernel
from .data import SpikeTrain
from .errors import ConfigurationError, DimensionError, UnlabeledModelError
from .neuron import LayerState, LifParams, step_layer
from .plasticity import (
    StdpParams,
    SynapseMatrix,
    check_w_decay,
    decay_traces,
    decay_weights,
    on_post_spikes,
    on_pre_spikes,
)
from .quant import FixedPointFormat, NEAREST, format_name, parse_format

UNASSIGNED = -1
MNIST_INPUTS = 784
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkConfig:
    num_excitatory: int = 400
    num_inputs: int = MNIST_INPUTS
    inhibition_strength: float = 20.0
    weight_format: str = "Q0.3"
    rounding: str = "truncate"
    w_decay: float = 0.0005
    w_max: float = 1.0
    init_weight_max: float = 0.3

    def validation_errors(self) -> list[str]:
        errors = []
        if not (isinstance(self.num_excitatory, int) and self.num_excitatory >= 1):
            errors.append(f"num_excitatory must be a positive integer, got {self.num_excitatory}")
        if not (isinstance(self.num_inputs, int) and self.num_inputs >= 1):
            errors.append(f"num_inputs must be a positive integer, got {self.num_inputs}")
        if not self.inhibition_strength >= 0:
            errors.append(f"inhibition_strength must be >= 0, got {self.inhibition_strength}")
        try:
            parse_format(self.weight_format, self.rounding)
        except ConfigurationError as exc:
            errors.append(str(exc))
        if not 0.0 <= self.w_decay < 1.0:
            errors.append(f"w_decay must lie in [0, 1), got {self.w_decay}")
        if not self.w_max > 0:
            errors.append(f"w_max must be positive, got {self.w_max}")
        if not 0 <= self.init_weight_max <= self.w_max:
            errors.append(f"init_weight_max must lie in [0, w_max], got {self.init_weight_max}")
        return errors

    @property
    def format(self) -> FixedPointFormat | None:
        return parse_format(self.weight_format, self.rounding)


@dataclass
class SnnModel:
    lif_params: LifParams
    stdp_params: StdpParams
    synapses: SynapseMatrix
    neuron_states: LayerState
    inhibition_strength: float
    neuron_labels: np.ndarray | None = None
    label_classes: tuple = field(default=())

    @property
    def num_inputs(self) -> int:
        return self.synapses.num_inputs

    @property
    def num_excitatory(self) -> int:
        return self.synapses.num_excitatory

    @property
    def format(self) -> FixedPointFormat | None:
        return self.synapses.format

    def clone(self) -> "SnnModel":
        return SnnModel(
            self.lif_params,
            self.stdp_params,
            self.synapses.copy(),
            self.neuron_states.copy(),
            self.inhibition_strength,
            None if self.neuron_labels is None else self.neuron_labels.copy(),
            self.label_classes,
        )

    def with_adjustments(self, *, w_decay=None, theta_inc=None) -> "SnnModel":
        """Clone with a different weight decay rate and/or threshold increment."""
        model = self.clone()
        if w_decay is not None:
            check_w_decay(w_decay)
            model.synapses.w_decay = float(w_decay)
        if theta_inc is not None:
            model.lif_params = replace(model.lif_params, theta_inc=float(theta_inc))
        return model


@dataclass(frozen=True)
class SpikeCountVector:
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def build_model(net: NetworkConfig, lif: LifParams, stdp: StdpParams, seed) -> SnnModel:
    errors = net.validation_errors()
    if errors:
        raise ConfigurationError("; ".join(errors))
    rng = np.random.default_rng(seed)
    syn = SynapseMatrix.random(
        net.num_inputs, net.num_excitatory, rng,
        init_max=net.init_weight_max, w_decay=net.w_decay, w_max=net.w_max, fmt=net.format,
    )
    return SnnModel(lif, stdp, syn, LayerState.at_rest(net.num_excitatory, lif),
                    float(net.inhibition_strength))


def _as_events(spikes, num_inputs):
    if isinstance(spikes, SpikeTrain):
        if spikes.num_inputs != num_inputs:
            raise DimensionError(f"spike train has {spikes.num_inputs} inputs, model has {num_inputs}")
        return spikes.events()
    indptr, indices = spikes
    if len(indices) and (indices.min() < 0 or indices.max() >= num_inputs):
        raise DimensionError("spike event index outside the input layer")
    return indptr, indices


def present_sample(model: SnnModel, spikes, learn: bool) -> SpikeCountVector:
    """Run one presentation and return per-neuron spike counts.

    ``spikes`` is a :class:`~qsnncl.data.SpikeTrain` or its ``events()`` pair.
    Membranes and traces start from rest; theta carries over from previous
    presentations when learning and is restored afterwards when not.
    """
    indptr, indices = _as_events(spikes, model.num_inputs)
    lif, stdp, syn, st = model.lif_params, model.stdp_params, model.synapses, model.neuron_states
    st.reset_transient(lif)
    syn.clear_traces()
    theta_before = None if learn else st.theta.copy()
    counts = np.zeros(model.num_excitatory, dtype=np.int64)
    fmt = syn.format
    _kernel.present(
        syn.weights, syn.pre_traces, syn.post_traces,
        st.v_mem, st.theta, st.refractory, counts,
        np.ascontiguousarray(indptr, dtype=np.int64), np.ascontiguousarray(indices, dtype=np.int64),
        lif.v_rest, lif.v_reset, lif.v_th_base, lif.v_decay, lif.theta_inc, lif.theta_decay,
        int(lif.t_ref), model.inhibition_strength, bool(learn),
        stdp.eta_post, stdp.eta_pre, stdp.trace_decay_pre, stdp.trace_decay_post, stdp.trace_inc,
        syn.w_max, syn.w_decay,
        fmt is not None,
        float(fmt.scale) if fmt else 1.0,
        fmt.min_code if fmt else 0,
        fmt.max_code if fmt else 0,
        fmt is not None and fmt.rounding == NEAREST,
    )
    if theta_before is not None:
        st.theta[:] = theta_before
    return SpikeCountVector(counts)


def present_sample_reference(model: SnnModel, spikes: SpikeTrain, learn: bool) -> SpikeCountVector:
    """Step-by-step composition of the public neuron and plasticity operations."""
    if spikes.num_inputs != model.num_inputs:
        raise DimensionError(f"spike train has {spikes.num_inputs} inputs, model has {model.num_inputs}")
    lif, stdp, syn, st = model.lif_params, model.stdp_params, model.synapses, model.neuron_states
    st.reset_transient(lif)
    syn.clear_traces()
    theta_before = st.theta.copy()
    n = model.num_excitatory
    counts = np.zeros(n, dtype=np.int64)
    learned = np.zeros(n, dtype=bool)
    prev = np.zeros(n, dtype=bool)
    for t in range(spikes.duration_steps):
        pre = spikes.spikes[t]
        if learn:
            decay_traces(syn, stdp)
            on_pre_spikes(syn, stdp, pre)
        current = np.zeros(n)
        for j in np.flatnonzero(pre):
            current += syn.weights[j]
        current = current - model.inhibition_strength * (prev.sum() - prev)
        spiked = step_layer(st, lif, current)
        if learn:
            on_post_spikes(syn, stdp, spiked)
            learned |= spiked
        counts += spiked
        prev = spiked
    if learn:
        decay_weights(syn, learned)
    else:
        st.theta[:] = theta_before
    return SpikeCountVector(counts)


def response_counts(model: SnnModel, trains) -> np.ndarray:
    """Spike counts ``[len(trains), N]`` for inference presentations."""
    out = np.zeros((len(trains), model.num_excitatory), dtype=np.int64)
    for i, spikes in enumerate(trains):
        out[i] = present_sample(model, spikes, learn=False).counts
    return out


def labels_from_counts(counts: np.ndarray, classes: np.ndarray) -> np.ndarray:
    """Label each neuron with the class of highest mean response.

    Ties go to the lower class id; neurons that never fired stay unassigned.
    """
    classes = np.asarray(classes)
    seen = np.unique(classes)
    means = np.stack([counts[classes == c].mean(axis=0) for c in seen])
    labels = seen[np.argmax(means, axis=0)].astype(np.int64)
    labels[counts.sum(axis=0) == 0] = UNASSIGNED
    return labels


def assign_labels(model: SnnModel, labeled_samples) -> SnnModel:
    """Label neurons from inference responses to ``(spikes, class)`` pairs."""
    labeled_samples = list(labeled_samples)
    if not labeled_samples:
        raise ValueError("assign_labels needs at least one labeled sample")
    trains = [s for s, _ in labeled_samples]
    classes = np.array([c for _, c in labeled_samples], dtype=np.int64)
    counts = response_counts(model, trains)
    model.neuron_labels = labels_from_counts(counts, classes)
    model.label_classes = tuple(int(c) for c in np.unique(classes))
    return model


def fallback_label(labels: np.ndarray, label_classes) -> int:
    assigned = labels[labels != UNASSIGNED]
    if assigned.size:
        return int(np.argmax(np.bincount(assigned)))
    return int(min(label_classes))


def classify_counts(counts: np.ndarray, labels: np.ndarray, label_classes) -> np.ndarray:
    """Vectorized readout for a batch of response vectors ``[m, N]``."""
    counts = np.atleast_2d(counts)
    classes = np.unique(labels[labels != UNASSIGNED])
    fallback = fallback_label(labels, label_classes)
    if classes.size == 0:
        return np.full(len(counts), fallback, dtype=np.int64)
    means = np.stack([counts[:, labels == c].mean(axis=1) for c in classes], axis=1)
    pred = classes[np.argmax(means, axis=1)]
    pred[counts.sum(axis=1) == 0] = fallback
    return pred.astype(np.int64)


def classify(model: SnnModel, spikes) -> int:
    if model.neuron_labels is None:
        raise UnlabeledModelError("model has no neuron labels; run assign_labels first")
    counts = present_sample(model, spikes, learn=False).counts
    return int(classify_counts(counts, model.neuron_labels, model.label_classes)[0])


def save_checkpoint(model: SnnModel, path):
    """Write an ``.npz`` checkpoint.

    Keys: ``version`` (int), ``format`` ("Qi.f" or "fp32"), ``weight_codes``
    (int64 ``[inputs, N]``, weights times ``2**f``; quantized formats only),
    ``weights`` (float64, full precision only), ``theta`` (float64 ``[N]``),
    ``labels`` (int64 ``[N]``, -1 unassigned, empty when unlabeled),
    ``label_classes`` (int64) and ``params`` (JSON text of the neuron,
    plasticity and inhibition parameters).
    """
    fmt = model.format
    syn = model.synapses
    payload = {
        "version": np.int64(CHECKPOINT_VERSION),
        "format": np.str_(format_name(fmt)),
        "rounding": np.str_(fmt.rounding if fmt else "none"),
        "theta": model.neuron_states.theta,
        "labels": (np.zeros(0, dtype=np.int64) if model.neuron_labels is None
                   else model.neuron_labels.astype(np.int64)),
        "label_classes": np.asarray(model.label_classes, dtype=np.int64),
        "params": np.str_(json.dumps({
            "lif": asdict(model.lif_params),
            "stdp": asdict(model.stdp_params),
            "inhibition_strength": model.inhibition_strength,
            "w_decay": syn.w_decay,
            "w_max": syn.w_max,
        }, sort_keys=True)),
    }
    if fmt is None:
        payload["weights"] = syn.weights
    else:
        payload["weight_codes"] = np.rint(syn.weights * fmt.scale).astype(np.int64)
    if hasattr(path, "write"):
        np.savez(path, **payload)
        return
    with open(Path(path), "wb") as f:
        np.savez(f, **payload)


def load_checkpoint(path) -> SnnModel:
    with np.load(path, allow_pickle=False) as z:
        version = int(z["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        rounding = str(z["rounding"])
        fmt = parse_format(str(z["format"]), rounding if rounding != "none" else "truncate")
        params = json.loads(str(z["params"]))
        if fmt is None:
            weights = z["weights"].astype(np.float64)
        else:
            weights = z["weight_codes"].astype(np.float64) / fmt.scale
        theta = z["theta"].astype(np.float64)
        labels = z["labels"].astype(np.int64)
        label_classes = tuple(int(c) for c in z["label_classes"])
    lif = LifParams(**params["lif"])
    stdp = StdpParams(**params["stdp"])
    n_in, n_exc = weights.shape
    syn = SynapseMatrix(weights, np.zeros(n_in), np.zeros(n_exc),
                        params["w_decay"], params["w_max"], fmt)
    states = LayerState.at_rest(n_exc, lif)
    states.theta[:] = theta
    return SnnModel(lif, stdp, syn, states, params["inhibition_strength"],
                    labels if labels.size else None, label_classes)
