"""
Truncation and the stuck-at-zero effect
=======================================

Weights live on a Qi.f grid.  Truncation floors every update onto that
grid, so any change smaller than one grid step vanishes, and decay always
removes at least one step from a nonzero weight.
"""

import numpy as np

from qsnncl.plasticity import StdpParams, SynapseMatrix, decay_weights, on_post_spikes
from qsnncl.quant import parse_format, quantize

# A 4-bit format with no integer bits covers [-1, 0.875] in steps of 1/8.
q03 = parse_format("Q0.3")
print(q03, "range", (q03.min_value, q03.max_value), "step", q03.epsilon)

# Floor, not round-toward-zero: negative values move down.
for x in (0.3, 0.124, -0.01, 5.0):
    print(f"quantize({x}) = {quantize(x, q03).value}")

# Potentiation below one step leaves the weight where it was.
syn = SynapseMatrix(np.full((1, 1), 0.25), np.ones(1), np.zeros(1), format=q03)
on_post_spikes(syn, StdpParams(eta_post=0.1), [True])
print("0.25 + 0.1 stored as", syn.weights[0, 0])

# Decay of an idle neuron: at 8 bits a 0.3 weight survives a few dozen idle
# presentations; at 4 bits it is gone after two.
for name in ("fp32", "Q0.7", "Q0.3"):
    fmt = parse_format(name)
    syn = SynapseMatrix(np.full((1, 1), 0.3), np.zeros(1), np.zeros(1), w_decay=0.0005, format=fmt)
    syn.weights[:] = quantize(0.3, fmt).value if fmt else 0.3
    steps = 0
    while syn.weights[0, 0] > 0 and steps < 10_000:
        decay_weights(syn, [False])
        steps += 1
    print(f"{name}: weight after {steps} idle presentations = {syn.weights[0, 0]:.4f}")
