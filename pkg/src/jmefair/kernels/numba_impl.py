"""Numba-compiled kernel implementations (default backend).

Loop-level mirror of :mod:`jmefair.kernels.numpy_impl`; same contracts,
same numerical semantics up to float summation order.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    t = np.exp(x)
    return t / (1.0 + t)


@njit(cache=True)
def hard_exposure_rows(noisy: np.ndarray, rank_weights: np.ndarray) -> np.ndarray:
    n_samples, k = noisy.shape
    out = np.zeros(k, dtype=np.float64)
    for s in range(n_samples):
        order = np.argsort(-noisy[s])
        for pos in range(k):
            out[order[pos]] += rank_weights[pos]
    return out / n_samples


@njit(cache=True)
def soft_exposure_forward(z: np.ndarray, tau: float, gamma: float, prefix: float):
    n_samples, k = z.shape
    p = np.empty((n_samples, k), dtype=np.float64)
    rho = np.empty((n_samples, k), dtype=np.float64)
    e = np.empty((n_samples, k), dtype=np.float64)
    for s in range(n_samples):
        m = z[s, 0]
        for j in range(1, k):
            if z[s, j] > m:
                m = z[s, j]
        total = 0.0
        for j in range(k):
            p[s, j] = np.exp(z[s, j] - m)
            total += p[s, j]
        for j in range(k):
            p[s, j] /= total
        for j in range(k):
            acc = 0.0
            for l in range(k):
                acc += _sigmoid((p[s, l] - p[s, j]) / tau)
            rho[s, j] = 0.5 + acc  # the l == j self term contributes sigmoid(0) = 0.5
            e[s, j] = prefix * gamma ** (rho[s, j] - 1.0)
    return p, rho, e


@njit(cache=True)
def soft_exposure_backward(
    p: np.ndarray, e: np.ndarray, d_row: np.ndarray, tau: float, gamma: float
) -> np.ndarray:
    n_samples, k = p.shape
    scale = np.log(gamma) / n_samples
    out = np.zeros(k, dtype=np.float64)
    a = np.empty(k, dtype=np.float64)
    gp = np.empty(k, dtype=np.float64)
    for s in range(n_samples):
        for j in range(k):
            a[j] = d_row[j] * e[s, j] * scale
        for mm in range(k):
            acc = 0.0
            for j in range(k):
                sig = _sigmoid((p[s, mm] - p[s, j]) / tau)
                acc += sig * (1.0 - sig) * (a[j] - a[mm])
            gp[mm] = acc / tau
        dot = 0.0
        for j in range(k):
            dot += gp[j] * p[s, j]
        for j in range(k):
            out[j] += p[s, j] * (gp[j] - dot)
    return out
