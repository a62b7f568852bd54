"""Compiled inner loop for the single-site update process.

All randomness is drawn vectorized outside the kernel, so the kernel itself is
pure arithmetic and bit-deterministic.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def run_updates(x, nbr_ptr, nbr_idx, nbr_beta, nodes, eps, out_values):
    """Apply the update sequence in place.

    x            : current state, length p (mutated)
    nbr_ptr/idx/beta : CSR neighbor lists with regression weights
    nodes        : node updated at each round
    eps          : pre-scaled Gaussian innovation per round
    out_values   : new coordinate value per round (written)
    """
    for n in range(nodes.shape[0]):
        i = nodes[n]
        acc = 0.0
        for k in range(nbr_ptr[i], nbr_ptr[i + 1]):
            acc += nbr_beta[k] * x[nbr_idx[k]]
        v = acc + eps[n]
        x[i] = v
        out_values[n] = v


def run_updates_py(x, nbr_ptr, nbr_idx, nbr_beta, nodes, eps, out_values):
    """Pure-python reference for the kernel (tests, tiny inputs)."""
    for n in range(nodes.shape[0]):
        i = nodes[n]
        lo, hi = nbr_ptr[i], nbr_ptr[i + 1]
        acc = 0.0
        for k in range(lo, hi):
            acc += nbr_beta[k] * x[nbr_idx[k]]
        v = acc + eps[n]
        x[i] = v
        out_values[n] = v
