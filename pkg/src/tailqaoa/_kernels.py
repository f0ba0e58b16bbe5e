"""Compiled inner loops for the state-vector kernels.

All kernels take a 2-D array ``(batch, 2**n)``; gate kernels modify it in place.
"""
import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def mixer(states, cos_b, sin_b, n):
    # exp(-i beta X) on every qubit: a' = c a - i s b, b' = -i s a + c b
    batch, size = states.shape
    for k in range(batch):
        c = cos_b[k]
        ms = -1j * sin_b[k]
        row = states[k]
        for q in range(n):
            stride = 1 << q
            for start in range(0, size, 2 * stride):
                for i in range(start, start + stride):
                    a = row[i]
                    b = row[i + stride]
                    row[i] = c * a + ms * b
                    row[i + stride] = ms * a + c * b


@numba.njit(cache=True, nogil=True)
def diagonal(states, phases, index):
    # phases has shape (batch, n_levels) or (1, n_levels)
    batch, size = states.shape
    shared = phases.shape[0] == 1
    for k in range(batch):
        ph = phases[0] if shared else phases[k]
        row = states[k]
        for i in range(size):
            row[i] *= ph[index[i]]


@numba.njit(cache=True, nogil=True)
def weighted_norm(states, weights):
    out = np.empty(states.shape[0])
    for k in range(states.shape[0]):
        row = states[k]
        acc = 0.0
        for i in range(row.shape[0]):
            a = row[i]
            acc += (a.real * a.real + a.imag * a.imag) * weights[i]
        out[k] = acc
    return out
