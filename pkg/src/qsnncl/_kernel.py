"""Fused per-presentation simulation loop.

Same arithmetic, in the same order, as composing
:func:`~qsnncl.plasticity.decay_traces`, :func:`~qsnncl.plasticity.on_pre_spikes`,
:func:`~qsnncl.neuron.step_layer` and :func:`~qsnncl.plasticity.on_post_spikes`
per timestep; ``tests/test_network.py`` checks the two paths agree bit for bit.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _snap(x, w_max, quantized, scale, code_lo, code_hi, nearest):
    if x < 0.0:
        x = 0.0
    elif x > w_max:
        x = w_max
    if not quantized:
        return x
    s = x * scale
    c = math.floor(s + 0.5) if nearest else math.floor(s)
    if c < code_lo:
        c = code_lo
    elif c > code_hi:
        c = code_hi
    return c / scale


@njit(cache=True)
def present(
    weights, pre_tr, post_tr, v, theta, refractory, counts,
    indptr, indices,
    v_rest, v_reset, v_th, v_decay, theta_inc, theta_decay, t_ref,
    inhibition, learn,
    eta_post, eta_pre, decay_pre, decay_post, trace_inc,
    w_max, w_decay, quantized, scale, code_lo, code_hi, nearest,
):
    n_in, n_exc = weights.shape
    steps = indptr.shape[0] - 1
    current = np.empty(n_exc)
    prev = np.zeros(n_exc, dtype=np.bool_)
    spiked = np.zeros(n_exc, dtype=np.bool_)
    learned = np.zeros(n_exc, dtype=np.bool_)
    n_prev = 0
    for t in range(steps):
        lo = indptr[t]
        hi = indptr[t + 1]
        if learn:
            for j in range(n_in):
                pre_tr[j] *= decay_pre
            for n in range(n_exc):
                post_tr[n] *= decay_post
            for k in range(lo, hi):
                pre_tr[indices[k]] += trace_inc
            if eta_pre > 0.0:
                any_post = False
                for n in range(n_exc):
                    if post_tr[n] != 0.0:
                        any_post = True
                        break
                if any_post:
                    for k in range(lo, hi):
                        j = indices[k]
                        for n in range(n_exc):
                            weights[j, n] = _snap(weights[j, n] - eta_pre * post_tr[n],
                                                  w_max, quantized, scale, code_lo, code_hi, nearest)
        for n in range(n_exc):
            current[n] = 0.0
        for k in range(lo, hi):
            j = indices[k]
            for n in range(n_exc):
                current[n] += weights[j, n]
        n_spiked = 0
        for n in range(n_exc):
            if n_prev > 0:
                others = n_prev - 1 if prev[n] else n_prev
                current[n] = current[n] - inhibition * others
            vl = v_rest + (v[n] - v_rest) * v_decay
            theta[n] *= theta_decay
            spiked[n] = False
            if refractory[n] > 0:
                refractory[n] -= 1
                v[n] = vl
            else:
                vn = vl + current[n]
                if vn >= v_th + theta[n]:
                    spiked[n] = True
                    v[n] = v_reset
                    theta[n] += theta_inc
                    refractory[n] = t_ref
                    counts[n] += 1
                    n_spiked += 1
                else:
                    v[n] = vn
        if learn and n_spiked > 0:
            for n in range(n_exc):
                if spiked[n]:
                    learned[n] = True
                    for j in range(n_in):
                        weights[j, n] = _snap(weights[j, n] + eta_post * pre_tr[j],
                                              w_max, quantized, scale, code_lo, code_hi, nearest)
            for n in range(n_exc):
                if spiked[n]:
                    post_tr[n] += trace_inc
        for n in range(n_exc):
            prev[n] = spiked[n]
        n_prev = n_spiked
    if learn and w_decay > 0.0:
        keep = 1.0 - w_decay
        for j in range(n_in):
            for n in range(n_exc):
                if not learned[n]:
                    weights[j, n] = _snap(weights[j, n] * keep,
                                          w_max, quantized, scale, code_lo, code_hi, nearest)
