"""Trace-based pair STDP with per-presentation weight decay.

Potentiation happens on postsynaptic spikes and is proportional to the
presynaptic trace.  Depression has two routes: an optional pre-on-post term
(``eta_pre``) and a multiplicative decay applied once per presentation to
every neuron that did not spike.  Every weight change is computed in full
precision and the result is then truncated onto the active fixed-point grid
(simulated quantization), so sub-grid increments are lost.

The operations mutate the :class:`SynapseMatrix` they receive and return it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError
from .quant import FixedPointFormat, quantize_array


@dataclass(frozen=True)
class StdpParams:
    eta_post: float = 0.02
    eta_pre: float = 0.0
    trace_decay_pre: float = 0.9
    trace_decay_post: float = 0.9
    trace_inc: float = 1.0

    def __post_init__(self):
        errors = self.validation_errors()
        if errors:
            raise ConfigurationError("; ".join(errors))

    def validation_errors(self) -> list[str]:
        errors = []
        if not self.eta_post >= 0:
            errors.append(f"eta_post must be >= 0, got {self.eta_post}")
        if not self.eta_pre >= 0:
            errors.append(f"eta_pre must be >= 0, got {self.eta_pre}")
        for name in ("trace_decay_pre", "trace_decay_post"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                errors.append(f"{name} must lie in (0, 1), got {value}")
        if not self.trace_inc >= 0:
            errors.append(f"trace_inc must be >= 0, got {self.trace_inc}")
        return errors


@dataclass
class SynapseMatrix:
    """Input-to-excitatory weights ``[num_inputs, num_excitatory]`` plus traces."""

    weights: np.ndarray
    pre_traces: np.ndarray
    post_traces: np.ndarray
    w_decay: float = 0.0
    w_max: float = 1.0
    format: FixedPointFormat | None = None

    def __post_init__(self):
        check_w_decay(self.w_decay)
        if not self.w_max > 0:
            raise ConfigurationError(f"w_max must be positive, got {self.w_max}")
        n_in, n_exc = self.weights.shape
        if self.pre_traces.shape != (n_in,) or self.post_traces.shape != (n_exc,):
            raise DimensionError("trace vectors do not match the weight matrix")

    @classmethod
    def random(cls, num_inputs, num_excitatory, rng, *, init_max=0.3, w_decay=0.0,
               w_max=1.0, fmt=None) -> "SynapseMatrix":
        """Uniform ``[0, init_max)`` weights, snapped to ``fmt``."""
        raw = rng.uniform(0.0, init_max, size=(num_inputs, num_excitatory))
        return cls(
            quantize_array(np.minimum(raw, w_max), fmt),
            np.zeros(num_inputs),
            np.zeros(num_excitatory),
            w_decay=w_decay,
            w_max=w_max,
            format=fmt,
        )

    @property
    def num_inputs(self) -> int:
        return self.weights.shape[0]

    @property
    def num_excitatory(self) -> int:
        return self.weights.shape[1]

    def clear_traces(self):
        self.pre_traces.fill(0.0)
        self.post_traces.fill(0.0)

    def copy(self) -> "SynapseMatrix":
        return SynapseMatrix(
            self.weights.copy(), self.pre_traces.copy(), self.post_traces.copy(),
            self.w_decay, self.w_max, self.format,
        )


def check_w_decay(w_decay):
    if not 0.0 <= w_decay < 1.0:
        raise ConfigurationError(f"w_decay must lie in [0, 1), got {w_decay}")


def _bounded(candidate, syn: SynapseMatrix):
    return quantize_array(np.clip(candidate, 0.0, syn.w_max), syn.format)


def on_pre_spikes(syn: SynapseMatrix, p: StdpParams, pre_spiked) -> SynapseMatrix:
    pre_spiked = np.asarray(pre_spiked, dtype=bool)
    if pre_spiked.shape != (syn.num_inputs,):
        raise DimensionError(f"expected {syn.num_inputs} presynaptic flags, got {pre_spiked.shape}")
    syn.pre_traces[pre_spiked] += p.trace_inc
    if p.eta_pre > 0 and pre_spiked.any() and syn.post_traces.any():
        rows = np.flatnonzero(pre_spiked)
        syn.weights[rows] = _bounded(syn.weights[rows] - p.eta_pre * syn.post_traces, syn)
    return syn


def on_post_spikes(syn: SynapseMatrix, p: StdpParams, post_spiked) -> SynapseMatrix:
    post_spiked = np.asarray(post_spiked, dtype=bool)
    if post_spiked.shape != (syn.num_excitatory,):
        raise DimensionError(
            f"expected {syn.num_excitatory} postsynaptic flags, got {post_spiked.shape}"
        )
    for n in np.flatnonzero(post_spiked):
        syn.weights[:, n] = _bounded(syn.weights[:, n] + p.eta_post * syn.pre_traces, syn)
    syn.post_traces[post_spiked] += p.trace_inc
    return syn


def decay_weights(syn: SynapseMatrix, learning_mask) -> SynapseMatrix:
    """Shrink the incoming weights of every neuron with no learning activity.

    Called once per presentation.  Under truncation, any nonzero weight of a
    decayed neuron drops by at least one grid step.
    """
    check_w_decay(syn.w_decay)
    learning_mask = np.asarray(learning_mask, dtype=bool)
    if learning_mask.shape != (syn.num_excitatory,):
        raise DimensionError("learning mask does not match the excitatory layer")
    if syn.w_decay == 0.0:
        return syn
    idle = np.flatnonzero(~learning_mask)
    syn.weights[:, idle] = quantize_array(syn.weights[:, idle] * (1.0 - syn.w_decay), syn.format)
    return syn


def decay_traces(syn: SynapseMatrix, p: StdpParams) -> SynapseMatrix:
    syn.pre_traces *= p.trace_decay_pre
    syn.post_traces *= p.trace_decay_post
    return syn
