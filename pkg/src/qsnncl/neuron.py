"""Leaky integrate-and-fire neurons with an adaptive threshold.

Discrete-time update, one call per timestep::

    v     <- v_rest + (v - v_rest) * v_decay + I
    theta <- theta * theta_decay
    spike  = v >= v_th_base + theta

On a spike ``v`` goes to ``v_reset``, ``theta`` grows by ``theta_inc`` and the
neuron is refractory for ``t_ref`` steps, during which input is ignored while
``v`` and ``theta`` keep decaying.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class LifParams:
    v_rest: float = -65.0
    v_reset: float = -60.0
    v_th_base: float = -52.0
    v_decay: float = 0.99
    theta_inc: float = 1.0
    theta_decay: float = 0.99999
    t_ref: int = 5
    dt: float = 1.0

    def __post_init__(self):
        errors = self.validation_errors()
        if errors:
            raise ConfigurationError("; ".join(errors))

    def validation_errors(self) -> list[str]:
        errors = []
        if not self.v_reset < self.v_th_base:
            errors.append(f"v_reset ({self.v_reset}) must be below v_th_base ({self.v_th_base})")
        if not self.v_rest <= self.v_reset:
            errors.append(f"v_rest ({self.v_rest}) must not exceed v_reset ({self.v_reset})")
        for name in ("v_decay", "theta_decay"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                errors.append(f"{name} must lie in (0, 1], got {value}")
        if self.theta_inc < 0:
            errors.append(f"theta_inc must be >= 0, got {self.theta_inc}")
        if self.t_ref < 0 or int(self.t_ref) != self.t_ref:
            errors.append(f"t_ref must be a non-negative integer, got {self.t_ref}")
        if not self.dt > 0:
            errors.append(f"dt must be positive, got {self.dt}")
        return errors


@dataclass(frozen=True)
class LifNeuronState:
    v_mem: float
    theta: float = 0.0
    refractory_remaining: int = 0

    @classmethod
    def at_rest(cls, params: LifParams, theta: float = 0.0) -> "LifNeuronState":
        return cls(params.v_rest, theta, 0)


def step_neuron(state: LifNeuronState, params: LifParams, input_current: float):
    """Advance one neuron by one timestep; returns ``(new_state, spiked)``."""
    v_leak = params.v_rest + (state.v_mem - params.v_rest) * params.v_decay
    theta = state.theta * params.theta_decay
    if state.refractory_remaining > 0:
        return LifNeuronState(v_leak, theta, state.refractory_remaining - 1), False
    v = v_leak + input_current
    if v >= params.v_th_base + theta:
        return LifNeuronState(params.v_reset, theta + params.theta_inc, int(params.t_ref)), True
    return LifNeuronState(v, theta, 0), False


@dataclass
class LayerState:
    """Struct-of-arrays state for a population of LIF neurons."""

    v_mem: np.ndarray
    theta: np.ndarray
    refractory: np.ndarray

    @classmethod
    def at_rest(cls, n: int, params: LifParams) -> "LayerState":
        return cls(
            np.full(n, params.v_rest, dtype=np.float64),
            np.zeros(n, dtype=np.float64),
            np.zeros(n, dtype=np.int64),
        )

    def __len__(self):
        return len(self.v_mem)

    def neuron(self, i: int) -> LifNeuronState:
        return LifNeuronState(float(self.v_mem[i]), float(self.theta[i]), int(self.refractory[i]))

    def copy(self) -> "LayerState":
        return LayerState(self.v_mem.copy(), self.theta.copy(), self.refractory.copy())

    def reset_transient(self, params: LifParams):
        """Return membranes to rest between presentations; theta is kept."""
        self.v_mem.fill(params.v_rest)
        self.refractory.fill(0)


def step_layer(state: LayerState, params: LifParams, current: np.ndarray) -> np.ndarray:
    """Vectorized :func:`step_neuron` over a layer, in place. Returns the spike mask."""
    v = params.v_rest + (state.v_mem - params.v_rest) * params.v_decay
    state.theta *= params.theta_decay
    active = state.refractory == 0
    v = np.where(active, v + current, v)
    spiked = active & (v >= params.v_th_base + state.theta)
    state.refractory[~active] -= 1
    v[spiked] = params.v_reset
    state.theta[spiked] += params.theta_inc
    state.refractory[spiked] = int(params.t_ref)
    state.v_mem = v
    return spiked
