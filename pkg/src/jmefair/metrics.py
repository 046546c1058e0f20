"""The six joint exposure-fairness metrics and their decomposition.

Every metric is the mean squared entry of the system-to-target exposure
deviation after collapsing users and/or items onto groups:

===== ==================== ====================
name  user aggregation     item aggregation
===== ==================== ====================
II    individual users     individual items
IG    individual users     item groups
GI    user groups          individual items
GG    user groups          item groups
AI    all users (weighted) individual items
AG    all users (weighted) item groups
===== ==================== ====================

All six share one collapse operation, so the reduction identities
(singleton groups recover the finer metric, one big weighted user group
recovers the all-user metrics) hold bit-for-bit.

Each metric value F splits into F = D - R + C where D (disparity) is the
collapsed squared system-from-random deviation, R (relevance, higher is
better) is twice the collapsed cross term, and C is a system-independent
constant. Lower F, lower D, and higher R are the desirable directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

METRICS = ("II", "IG", "GI", "GG", "AI", "AG")
COMPONENTS = ("F", "D", "R", "C")


def _values(m) -> np.ndarray:
    """Accept a bare ndarray or anything carrying a .values matrix."""
    return np.asarray(getattr(m, "values", m), dtype=np.float64)


@dataclass
class GroupMap:
    """Assignment of one catalog side to (possibly overlapping) groups.

    Each group carries member indices and non-negative member weights
    summing to one; the weights play the role of p(member | group).
    ``kind`` marks the two trivial maps used by the metric family:
    ``identity`` (one singleton group per entity) and ``global`` (a single
    group holding everyone, weighted by a population distribution).
    """

    side: str
    n: int
    group_ids: list
    members: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    kind: str = "groups"

    def __post_init__(self):
        if self.side not in ("user", "item"):
            raise ValueError(f"side must be 'user' or 'item', got {self.side!r}")
        if len(self.group_ids) != len(self.members) or len(self.members) != len(
            self.weights
        ):
            raise ValueError("group ids, members, and weights must align")
        for gid, idx, w in zip(self.group_ids, self.members, self.weights):
            idx = np.asarray(idx)
            w = np.asarray(w, dtype=np.float64)
            if idx.size == 0:
                raise ValueError(f"group {gid!r} is empty")
            if idx.min() < 0 or idx.max() >= self.n:
                raise ValueError(f"group {gid!r} has out-of-range member indices")
            if (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError(
                    f"group {gid!r} weights must be non-negative and sum to 1"
                )

    @classmethod
    def from_members(cls, side: str, n: int, groups: dict, weights: dict | None = None):
        """Build from {group id: member indices}; weights default to uniform."""
        gids = list(groups)
        members = [np.asarray(groups[g], dtype=np.int64) for g in gids]
        wts = []
        for g, idx in zip(gids, members):
            if weights is not None and g in weights:
                wts.append(np.asarray(weights[g], dtype=np.float64))
            else:
                wts.append(np.full(idx.size, 1.0 / idx.size))
        return cls(side, n, gids, members, wts)

    @classmethod
    def identity(cls, side: str, n: int):
        """One singleton group per entity; collapse is a no-op."""
        gids = list(range(n))
        members = [np.array([i], dtype=np.int64) for i in range(n)]
        weights = [np.ones(1)] * n
        return cls(side, n, gids, members, weights, kind="identity")

    @classmethod
    def global_pool(cls, side: str, n: int, population: np.ndarray | None = None):
        """Single all-member group weighted by a population distribution."""
        w = uniform_population(n) if population is None else check_population(population, n)
        return cls(side, n, ["all"], [np.arange(n, dtype=np.int64)], [w], kind="global")

    @property
    def n_groups(self) -> int:
        return len(self.group_ids)

    def weight_matrix(self) -> np.ndarray:
        """Dense (n_groups, n) matrix of p(member | group) rows."""
        w = np.zeros((self.n_groups, self.n), dtype=np.float64)
        for g, (idx, wt) in enumerate(zip(self.members, self.weights)):
            w[g, idx] = wt
        return w


def uniform_population(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def check_population(weights: np.ndarray, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"population weights must have length {n}")
    if (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("population weights must be non-negative and sum to 1")
    return w


def collapse(matrix, user_groups: GroupMap | None, item_groups: GroupMap | None):
    """Group-level aggregate: entry (U, D) = sum_ij p(U_i|U) p(D_j|D) M_ij.

    ``None`` or an identity map leaves that side untouched; identity maps
    return the input values unchanged (no floating-point perturbation).
    """
    m = _values(matrix)
    if user_groups is not None and user_groups.n != m.shape[0]:
        raise ValueError("user group map does not match matrix rows")
    if item_groups is not None and item_groups.n != m.shape[1]:
        raise ValueError("item group map does not match matrix columns")
    if user_groups is not None and user_groups.kind != "identity":
        m = user_groups.weight_matrix() @ m
    if item_groups is not None and item_groups.kind != "identity":
        m = m @ item_groups.weight_matrix().T
    return m


def _mean_sq(m: np.ndarray) -> float:
    return float(np.mean(np.square(m)))


def _deviation(e, e_star) -> np.ndarray:
    e, e_star = _values(e), _values(e_star)
    if e.shape != e_star.shape:
        raise ValueError(f"shape mismatch: {e.shape} vs {e_star.shape}")
    return e - e_star


def metric_value(e, e_star, user_groups=None, item_groups=None) -> float:
    """Mean squared collapsed deviation; the generic form behind all six metrics."""
    return _mean_sq(collapse(_deviation(e, e_star), user_groups, item_groups))


def ii_f(e, e_star) -> float:
    """Individual users to individual items."""
    return metric_value(e, e_star)


def ig_f(e, e_star, item_groups: GroupMap) -> float:
    """Individual users to item groups."""
    return metric_value(e, e_star, None, item_groups)


def gi_f(e, e_star, user_groups: GroupMap) -> float:
    """User groups to individual items."""
    return metric_value(e, e_star, user_groups, None)


def gg_f(e, e_star, user_groups: GroupMap, item_groups: GroupMap) -> float:
    """User groups to item groups jointly."""
    return metric_value(e, e_star, user_groups, item_groups)


def ai_f(e, e_star, population: np.ndarray | None = None) -> float:
    """All users (population-weighted) to individual items."""
    n_users = _values(e).shape[0]
    return metric_value(e, e_star, GroupMap.global_pool("user", n_users, population))


def ag_f(
    e, e_star, item_groups: GroupMap, population: np.ndarray | None = None
) -> float:
    """All users (population-weighted) to item groups."""
    n_users = _values(e).shape[0]
    return metric_value(
        e, e_star, GroupMap.global_pool("user", n_users, population), item_groups
    )


@dataclass
class MetricReport:
    """All six metric values with their D/R/C components for one system."""

    metrics: dict
    fingerprint: dict = field(default_factory=dict)

    def value(self, metric: str, component: str = "F") -> float:
        return self.metrics[metric][component]

    def validate(self, tol: float = 1e-9) -> None:
        for name, comp in self.metrics.items():
            if comp["F"] < 0:
                raise AssertionError(f"{name}-F negative: {comp['F']}")
            gap = abs(comp["F"] - (comp["D"] - comp["R"] + comp["C"]))
            if gap > tol:
                raise AssertionError(f"{name}: F != D - R + C (gap {gap:.3e})")


def metric_group_maps(
    n_users: int,
    n_items: int,
    user_groups: GroupMap,
    item_groups: GroupMap,
    population: np.ndarray | None = None,
) -> dict:
    """Per-metric (user map, item map) pairs implementing the aggregation table."""
    uid = GroupMap.identity("user", n_users)
    iid = GroupMap.identity("item", n_items)
    uall = GroupMap.global_pool("user", n_users, population)
    return {
        "II": (uid, iid),
        "IG": (uid, item_groups),
        "GI": (user_groups, iid),
        "GG": (user_groups, item_groups),
        "AI": (uall, iid),
        "AG": (uall, item_groups),
    }


def decompose(
    e,
    e_star,
    e_rand,
    user_groups: GroupMap,
    item_groups: GroupMap,
    population: np.ndarray | None = None,
    fingerprint: dict | None = None,
) -> MetricReport:
    """Evaluate all six metrics and their disparity/relevance/constant parts.

    With collapsed deviations d = collapse(E - E~) and t = collapse(E* - E~):
    D = mean(d^2), R = 2 mean(d t), C = mean(t^2), and F = D - R + C holds
    as the exact algebraic expansion of the squared collapsed deviation.
    """
    e, e_star, e_rand = _values(e), _values(e_star), _values(e_rand)
    if not (e.shape == e_star.shape == e_rand.shape):
        raise ValueError(
            f"shape mismatch: {e.shape}, {e_star.shape}, {e_rand.shape}"
        )
    maps = metric_group_maps(*e.shape, user_groups, item_groups, population)
    delta_sys = e - e_rand
    delta_tgt = e_star - e_rand
    dev = e - e_star
    out = {}
    for name, (umap, imap) in maps.items():
        d = collapse(delta_sys, umap, imap)
        t = collapse(delta_tgt, umap, imap)
        out[name] = {
            "F": _mean_sq(collapse(dev, umap, imap)),
            "D": _mean_sq(d),
            "R": 2.0 * float(np.mean(d * t)),
            "C": _mean_sq(t),
        }
    return MetricReport(out, fingerprint or {})
