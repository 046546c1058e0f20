"""Pure-numpy kernel implementations (fallback backend).

Shapes: ``noisy``/``z`` are (n_samples, n_candidates) score rows, one row
per sampled ranking. Smooth ranks follow the pairwise-sigmoid form
``rho_j = 1 + sum_{k != j} sigmoid((p_k - p_j) / tau)`` so the top item
tends to rank 1, and exposure is ``prefix * gamma ** (rho - 1)``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def hard_exposure_rows(noisy: np.ndarray, rank_weights: np.ndarray) -> np.ndarray:
    n_samples, k = noisy.shape
    order = np.argsort(-noisy, axis=1)
    tiled = np.broadcast_to(rank_weights, (n_samples, k))
    return np.bincount(order.ravel(), weights=tiled.ravel(), minlength=k) / n_samples


def soft_exposure_forward(z: np.ndarray, tau: float, gamma: float, prefix: float):
    m = z.max(axis=1, keepdims=True)
    p = np.exp(z - m)
    p /= p.sum(axis=1, keepdims=True)
    # [s, j, l] = (p_l - p_j) / tau; the l == j self term contributes
    # sigmoid(0) = 0.5, subtracted back out below
    diff = (p[:, None, :] - p[:, :, None]) / tau
    rho = 0.5 + expit(diff).sum(axis=2)
    e = prefix * gamma ** (rho - 1.0)
    return p, rho, e


def soft_exposure_backward(
    p: np.ndarray, e: np.ndarray, d_row: np.ndarray, tau: float, gamma: float
) -> np.ndarray:
    n_samples = p.shape[0]
    # d exposure / d rank = e * log(gamma); mean over samples gives the 1/S
    a = d_row[None, :] * e * (np.log(gamma) / n_samples)
    diff = (p[:, :, None] - p[:, None, :]) / tau
    sig = expit(diff)
    sig *= 1.0 - sig
    # [s, m] = (1/tau) sum_{j != m} sigmoid'((p_m - p_j)/tau) (a_j - a_m);
    # the j == m term vanishes with the a difference
    gp = np.einsum("smj,smj->sm", sig, a[:, None, :] - a[:, :, None]) / tau
    dz = p * (gp - (gp * p).sum(axis=1, keepdims=True))
    return dz.sum(axis=0)
