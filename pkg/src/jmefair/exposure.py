"""Exposure semantics: browsing model, rankings, and reference exposure matrices.

Exposure of an item is the probability that a user examines it. Under the
geometric (RBP-style) browsing model the item at 1-based rank ``r`` is
examined with probability ``gamma ** (r - 1)``; an optional ``(1 - gamma)``
prefix turns that into a normalized distribution over ranks, which is the
form used during differentiable training. Three reference matrices are
built here:

* system exposure: induced by the ranking policy under audit,
* target exposure: the ideal policy that gives equally relevant items
  equal exposure (relevant block uniformly shuffled above the rest),
* random exposure: a uniformly random permutation of the candidates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MATRIX_LABELS = ("system", "target", "random", "delta_system", "delta_target")


@dataclass
class Catalog:
    """Ordered user/item id lists with dense-index lookup."""

    user_ids: list
    item_ids: list
    _user_index: dict = field(init=False, repr=False)
    _item_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self._user_index = {u: i for i, u in enumerate(self.user_ids)}
        self._item_index = {d: j for j, d in enumerate(self.item_ids)}
        if len(self._user_index) != len(self.user_ids):
            raise ValueError("duplicate user ids in catalog")
        if len(self._item_index) != len(self.item_ids):
            raise ValueError("duplicate item ids in catalog")

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def user_index(self, user_id) -> int:
        return self._user_index[user_id]

    def item_index(self, item_id) -> int:
        return self._item_index[item_id]


@dataclass(frozen=True)
class BrowsingModel:
    """Geometric browsing model with patience ``gamma`` in [0, 1).

    ``normalized=True`` multiplies every rank weight by ``(1 - gamma)`` so
    the weights over an infinite ranking sum to one. The flag is a constant
    scale and does not change any metric ordering.
    """

    gamma: float = 0.8
    normalized: bool = False
    kind: str = "rbp"

    def __post_init__(self):
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.kind != "rbp":
            raise ValueError(f"unsupported browsing model kind: {self.kind!r}")

    @property
    def prefix(self) -> float:
        return 1.0 - self.gamma if self.normalized else 1.0

    def rank_weights(self, n: int) -> np.ndarray:
        """Exposure at ranks 1..n as a vector."""
        return self.prefix * self.gamma ** np.arange(n, dtype=np.float64)

    def mass(self, first: int, last: int) -> float:
        """Total exposure over rank positions ``first..last`` (1-based, inclusive)."""
        if last < first:
            return 0.0
        g = self.gamma
        # closed form of the geometric partial sum; exact at gamma == 0 too
        return self.prefix * (g ** (first - 1) - g**last) / (1.0 - g)


@dataclass
class ExposureMatrix:
    """Dense users x items exposure probabilities with a provenance label."""

    values: np.ndarray
    label: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("exposure matrix must be 2-dimensional")
        if self.label not in MATRIX_LABELS:
            raise ValueError(f"unknown exposure label: {self.label!r}")
        lo, hi = (-1.0, 1.0) if self.label.startswith("delta") else (0.0, 1.0)
        v = self.values
        if v.size and (v.min() < lo - 1e-12 or v.max() > hi + 1e-12):
            raise ValueError(f"{self.label} exposure entries outside [{lo}, {hi}]")

    @property
    def shape(self) -> tuple:
        return self.values.shape


def check_ranking(ranking, n_items: int) -> np.ndarray:
    """Validate a ranking (permutation or top-k prefix) against a catalog size."""
    r = np.asarray(ranking, dtype=np.int64)
    if r.ndim != 1:
        raise ValueError("ranking must be a flat index sequence")
    if r.size:
        if r.min() < 0 or r.max() >= n_items:
            raise ValueError("ranking contains out-of-catalog item indices")
        if np.unique(r).size != r.size:
            raise ValueError("ranking contains duplicate items")
    return r


def exposure_at_rank(rank: int, model: BrowsingModel) -> float:
    """Exposure probability of the item shown at 1-based ``rank``."""
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    return model.prefix * model.gamma ** (rank - 1)


def exposure_of_ranking(ranking, model: BrowsingModel, n_items: int) -> np.ndarray:
    """Exposure row over ``n_items``; items absent from the ranking get 0."""
    r = check_ranking(ranking, n_items)
    row = np.zeros(n_items, dtype=np.float64)
    row[r] = model.rank_weights(r.size)
    return row


def random_exposure(n: int, model: BrowsingModel) -> np.ndarray:
    """Per-item exposure under a uniformly random permutation of ``n`` items."""
    if n < 1:
        raise ValueError("empty catalog: need at least one item")
    return np.full(n, model.mass(1, n) / n, dtype=np.float64)


def target_exposure_values(m: int, n: int, model: BrowsingModel) -> tuple:
    """Per-item target exposure ``(relevant, non_relevant)`` for m of n relevant.

    The ideal policy places the relevant block, uniformly shuffled, above
    the uniformly shuffled non-relevant block. With no relevant items the
    row falls back to random exposure.
    """
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
    if m == 0:
        v = model.mass(1, n) / n
        return v, v
    rel = model.mass(1, m) / m
    non = model.mass(m + 1, n) / (n - m) if m < n else 0.0
    return rel, non


def target_exposure(
    labels: np.ndarray, model: BrowsingModel, pools: np.ndarray | None = None
) -> ExposureMatrix:
    """Target exposure matrix from binary relevance ``labels`` (users x items).

    ``pools`` optionally restricts each user to a candidate pool (boolean
    users x items mask); exposure outside the pool is zero and the ideal
    policy ranks the pool only, mirroring top-k reranking.
    """
    R = np.asarray(labels)
    if R.ndim != 2:
        raise ValueError("relevance labels must be a 2-d matrix")
    if not np.isin(R, (0, 1)).all():
        raise ValueError("relevance labels must be binary")
    if pools is not None and pools.shape != R.shape:
        raise ValueError(f"pool mask shape {pools.shape} != labels shape {R.shape}")

    out = np.zeros(R.shape, dtype=np.float64)
    for i in range(R.shape[0]):
        in_pool = pools[i] if pools is not None else np.ones(R.shape[1], dtype=bool)
        n = int(in_pool.sum())
        if n == 0:
            continue
        rel_mask = (R[i] == 1) & in_pool
        m = int(rel_mask.sum())
        rel, non = target_exposure_values(m, n, model)
        out[i, rel_mask] = rel
        out[i, in_pool & ~rel_mask] = non
    return ExposureMatrix(out, "target")


def random_exposure_matrix(
    shape: tuple, model: BrowsingModel, pools: np.ndarray | None = None
) -> ExposureMatrix:
    """Random-policy exposure matrix, optionally restricted to per-user pools."""
    n_users, n_items = shape
    if pools is None:
        row = random_exposure(n_items, model)
        return ExposureMatrix(np.tile(row, (n_users, 1)), "random")
    if pools.shape != shape:
        raise ValueError(f"pool mask shape {pools.shape} != {shape}")
    out = np.zeros(shape, dtype=np.float64)
    for i in range(n_users):
        n = int(pools[i].sum())
        if n:
            out[i, pools[i]] = model.mass(1, n) / n
    return ExposureMatrix(out, "random")


def deviations(
    system: ExposureMatrix, target: ExposureMatrix, rand: ExposureMatrix
) -> tuple:
    """System-from-random and target-from-random deviation matrices."""
    if not (system.shape == target.shape == rand.shape):
        raise ValueError(
            f"shape mismatch: {system.shape}, {target.shape}, {rand.shape}"
        )
    e_delta = ExposureMatrix(system.values - rand.values, "delta_system")
    e_delta_star = ExposureMatrix(target.values - rand.values, "delta_target")
    return e_delta, e_delta_star
