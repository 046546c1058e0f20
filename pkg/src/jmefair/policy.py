"""Stochastic ranking policies over ranker scores.

A policy samples rankings with probability proportional to
``exp(score / beta)`` without replacement (Plackett-Luce). Sampling is
realized by Gumbel perturbation followed by a descending sort, which is
distributionally identical to sequential categorical sampling; both
constructions are exposed so tests can cross-validate them.

Scores of ``-inf`` mark items outside a user's candidate pool; such items
are never ranked and receive zero exposure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .exposure import BrowsingModel, ExposureMatrix


def check_scores(scores: np.ndarray) -> np.ndarray:
    """Validate a users x items score matrix (-inf allowed as pool sentinel)."""
    y = np.asarray(scores, dtype=np.float64)
    if y.ndim != 2:
        raise ValueError("score matrix must be 2-dimensional")
    if np.isnan(y).any():
        raise ValueError("score matrix contains NaN")
    if np.isposinf(y).any():
        raise ValueError("score matrix contains +inf")
    return y


def descending_order(row: np.ndarray) -> np.ndarray:
    """Indices sorting a score row high-to-low, ties broken by ascending index."""
    return np.lexsort((np.arange(row.size), -row))


@dataclass
class PLPolicy:
    """Plackett-Luce policy over a score matrix with softmax temperature beta."""

    scores: np.ndarray
    beta: float = 1.0
    top_k: int | None = None
    seed: int = 0

    def __post_init__(self):
        self.scores = check_scores(self.scores)
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.top_k is not None and self.top_k > self.scores.shape[1]:
            raise ValueError("top_k exceeds catalog size")

    @property
    def n_users(self) -> int:
        return self.scores.shape[0]

    @property
    def n_items(self) -> int:
        return self.scores.shape[1]

    def pool(self, user: int) -> np.ndarray:
        """Candidate item indices for a user: finite scores, cut to top_k by score."""
        row = self.scores[user]
        order = descending_order(row)
        order = order[np.isfinite(row[order])]
        if self.top_k is not None:
            order = order[: self.top_k]
        return order

    def user_rng(self, user: int, *extra) -> np.random.Generator:
        """Per-user stream independent of evaluation order and worker count."""
        return np.random.default_rng([self.seed, user, *extra])


def gumbel_noise(rng: np.random.Generator, shape) -> np.ndarray:
    u = rng.random(shape)
    return -np.log(-np.log(np.maximum(u, np.finfo(np.float64).tiny)))


def pl_sample(policy: PLPolicy, user: int, rng=None) -> np.ndarray:
    """One ranking of the user's pool via Gumbel perturbation + sort."""
    if rng is None:
        rng = policy.user_rng(user)
    pool = policy.pool(user)
    keys = policy.scores[user, pool] / policy.beta + gumbel_noise(rng, pool.size)
    return pool[np.argsort(-keys)]


def pl_sample_sequential(policy: PLPolicy, user: int, rng=None) -> np.ndarray:
    """One ranking via explicit sampling without replacement (test cross-check)."""
    if rng is None:
        rng = policy.user_rng(user)
    pool = policy.pool(user)
    logits = policy.scores[user, pool] / policy.beta
    remaining = list(range(pool.size))
    out = np.empty(pool.size, dtype=np.int64)
    for pos in range(pool.size):
        lg = logits[remaining]
        p = np.exp(lg - lg.max())
        p /= p.sum()
        choice = rng.choice(len(remaining), p=p)
        out[pos] = pool[remaining.pop(choice)]
    return out


def expected_exposure_mc(
    policy: PLPolicy, model: BrowsingModel, n_samples: int
) -> ExposureMatrix:
    """Monte-Carlo estimate of the system expected-exposure matrix.

    Draws ``n_samples`` rankings per user from the policy and averages
    their exposure rows. Deterministic given the policy seed.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    out = np.zeros(policy.scores.shape, dtype=np.float64)
    for user in range(policy.n_users):
        pool = policy.pool(user)
        if pool.size == 0:
            continue
        rng = policy.user_rng(user)
        noisy = policy.scores[user, pool] / policy.beta + gumbel_noise(
            rng, (n_samples, pool.size)
        )
        out[user, pool] = kernels.hard_exposure_rows(
            noisy, model.rank_weights(pool.size)
        )
    return ExposureMatrix(out, "system")


def deterministic_exposure(
    scores: np.ndarray, model: BrowsingModel, top_k: int | None = None
) -> ExposureMatrix:
    """Exposure of the single descending-score ranking per user.

    Ties are broken by ascending item index; -inf scores stay unranked.
    """
    y = check_scores(scores)
    out = np.zeros(y.shape, dtype=np.float64)
    for user in range(y.shape[0]):
        order = descending_order(y[user])
        order = order[np.isfinite(y[user, order])]
        if top_k is not None:
            order = order[:top_k]
        out[user, order] = model.rank_weights(order.size)
    return ExposureMatrix(out, "system")
