"""Matrix-factorization recommender trained against exposure-fairness loss.

The model scores user-item pairs by inner product of embedding rows. The
training objective is ``II-F + alpha * GG-F`` computed on a differentiable
exposure estimate: scores get Gumbel noise (reparameterization, noise
fixed within a step), the noisy softmax weights are turned into smooth
ranks through pairwise sigmoids, ranks into normalized geometric exposure,
and per-sample exposures averaged. Gradients are hand-derived through the
whole chain and validated against central finite differences.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from . import kernels
from .data import DatasetBundle
from .errors import DataError
from .exposure import BrowsingModel, target_exposure, target_exposure_values
from .metrics import GroupMap, gg_f, ii_f
from .policy import PLPolicy, expected_exposure_mc, gumbel_noise

CKPT_MAGIC = b"JMEFMF01"


@dataclass
class TrainerConfig:
    alpha: float = 0.0
    tau: float = 0.1
    gamma: float = 0.8
    learning_rate: float = 1e-2
    batch_size: int = 32
    epochs: int = 20
    n_rank_samples: int = 100
    l2: float = 1e-4
    embedding_dim: int = 64
    seed: int = 0
    min_rating: int = 1
    eval_samples: int = 100
    ndcg_k: int = 50
    # optional per-user candidate pool: train-relevant items plus the
    # highest-scored others, refreshed each epoch. Bounds the O(k^2)
    # smooth-rank cost and keeps exposure gradients alive on large
    # catalogs, where smooth ranks of a cold model cluster near n/2 and
    # gamma ** rank vanishes.
    pool_size: int | None = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("training gamma must be in (0, 1)")
        if self.batch_size < 1 or self.n_rank_samples < 1 or self.embedding_dim < 1:
            raise ValueError("batch_size, n_rank_samples, embedding_dim must be >= 1")

    def fingerprint(self) -> dict:
        return {k: getattr(self, k) for k in sorted(self.__dataclass_fields__)}


@dataclass
class MFModel:
    """User/item embedding tables; score = inner product of rows."""

    user_vecs: np.ndarray
    item_vecs: np.ndarray
    seed: int = 0

    @classmethod
    def init(cls, n_users: int, n_items: int, dim: int, seed: int) -> "MFModel":
        """Variance-scaled uniform init with bound sqrt(6 / (fan_in + fan_out))."""
        rng = np.random.default_rng([seed, 0])
        bu = np.sqrt(6.0 / (n_users + dim))
        bi = np.sqrt(6.0 / (n_items + dim))
        return cls(
            rng.uniform(-bu, bu, (n_users, dim)),
            rng.uniform(-bi, bi, (n_items, dim)),
            seed,
        )

    @property
    def dim(self) -> int:
        return self.user_vecs.shape[1]

    def copy(self) -> "MFModel":
        return MFModel(self.user_vecs.copy(), self.item_vecs.copy(), self.seed)

    def scores(self) -> np.ndarray:
        return self.user_vecs @ self.item_vecs.T


def forward_scores(model: MFModel, users) -> np.ndarray:
    """Score rows for a batch of user indices."""
    return model.user_vecs[np.asarray(users)] @ model.item_vecs.T


def gumbel_perturb(scores: np.ndarray, noise: np.ndarray | None = None, rng=None):
    """Noisy softmax weights exp(y + g) / sum exp(y + g), rows summing to 1.

    ``noise=None`` with no rng is the zero-noise test hook (plain softmax).
    """
    y = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    if noise is None:
        noise = gumbel_noise(rng, y.shape) if rng is not None else 0.0
    z = y + noise
    z = z - z.max(axis=1, keepdims=True)
    w = np.exp(z)
    w /= w.sum(axis=1, keepdims=True)
    return w if np.asarray(scores).ndim > 1 else w[0]


def smooth_rank(weights: np.ndarray, tau: float) -> np.ndarray:
    """Differentiable 1-based ranks: 1 + sum_{k != j} sigmoid((w_k - w_j) / tau)."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    diff = (w[:, None, :] - w[:, :, None]) / tau
    rho = 0.5 + expit(diff).sum(axis=2)  # self term contributes sigmoid(0) = 0.5
    return rho if np.asarray(weights).ndim > 1 else rho[0]


def differentiable_exposure(ranks: np.ndarray, gamma: float, normalized: bool = True):
    """Geometric exposure of real-valued ranks, (1 - gamma) prefixed by default."""
    prefix = 1.0 - gamma if normalized else 1.0
    return prefix * gamma ** (np.asarray(ranks, dtype=np.float64) - 1.0)


def loss_jme(e, e_star, user_groups: GroupMap, item_groups: GroupMap, alpha: float):
    """II-F + alpha * GG-F; alpha = 0 reduces to II-F exactly."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    value = ii_f(e, e_star)
    if alpha > 0:
        value += alpha * gg_f(e, e_star, user_groups, item_groups)
    return value


def _batch_group_weights(user_weight_matrix: np.ndarray, users: np.ndarray):
    """Restrict user group weights to a batch, renormalized per group.

    Groups with no member in the batch are dropped for the step.
    """
    w = user_weight_matrix[:, users]
    totals = w.sum(axis=1)
    present = totals > 0
    return w[present] / totals[present, None]


@dataclass
class BatchGradients:
    loss: float
    ii: float
    gg: float
    d_user: np.ndarray  # (batch, dim)
    d_item: np.ndarray  # (n_items, dim)
    exposure: np.ndarray  # (batch, n_items)


def batch_loss_and_grads(
    model: MFModel,
    users: np.ndarray,
    e_star_rows: np.ndarray,
    user_w: np.ndarray,
    item_w: np.ndarray,
    config: TrainerConfig,
    noise: list,
    pools: list | None = None,
) -> BatchGradients:
    """Forward plus hand-derived backward pass for one user batch.

    ``noise`` holds one (n_rank_samples, pool size) array of frozen
    Gumbel draws per batch user; with the draws fixed the loss is a
    deterministic differentiable function of the embeddings and repeated
    calls give identical results. ``pools`` optionally restricts each
    user to a candidate item subset; exposure (and the target rows)
    outside the pool are zero.
    """
    users = np.asarray(users)
    n_batch = users.size
    n_items = model.item_vecs.shape[0]
    prefix = 1.0 - config.gamma

    exposure = np.zeros((n_batch, n_items))
    caches = []
    for b in range(n_batch):
        idx = slice(None) if pools is None else pools[b]
        z = model.item_vecs[idx] @ model.user_vecs[users[b]] + noise[b]
        p, _, e = kernels.soft_exposure_forward(z, config.tau, config.gamma, prefix)
        caches.append((p, e))
        exposure[b, idx] = e.mean(axis=0)

    dev = exposure - e_star_rows
    ii = float(np.mean(dev**2))
    d_exposure = (2.0 / dev.size) * dev

    gg = 0.0
    wb = _batch_group_weights(user_w, users)
    if config.alpha > 0 and wb.shape[0] > 0:
        c = wb @ dev @ item_w.T
        gg = float(np.mean(c**2))
        d_exposure = d_exposure + (2.0 * config.alpha / c.size) * (wb.T @ c @ item_w)

    d_user = np.empty_like(model.user_vecs[users])
    d_item = np.zeros_like(model.item_vecs)
    for b in range(n_batch):
        idx = slice(None) if pools is None else pools[b]
        p, e = caches[b]
        dy = kernels.soft_exposure_backward(
            p, e, d_exposure[b, idx], config.tau, config.gamma
        )
        d_user[b] = dy @ model.item_vecs[idx]
        d_item[idx] += dy[:, None] * model.user_vecs[users[b]]

    loss = ii + config.alpha * gg
    if config.l2 > 0:
        u = model.user_vecs[users]
        loss += config.l2 * (
            float(np.sum(u**2)) / n_batch + float(np.sum(model.item_vecs**2)) / n_items
        )
        d_user += (2.0 * config.l2 / n_batch) * u
        d_item += (2.0 * config.l2 / n_items) * model.item_vecs
    return BatchGradients(loss, ii, gg, d_user, d_item, exposure)


def training_pools(
    n_items: int, relevant: list, pool_size: int | None, rng
) -> list | None:
    """Per-user candidate pools: all train-relevant items plus uniformly
    sampled negatives up to ``pool_size``, redrawn every epoch.

    Random negatives keep the suppression pressure even across the
    catalog (score-ranked negatives cycle adversarially with pool
    refresh). Users with more relevant items than the pool size keep a
    random relevant subset. Returns None when pooling is disabled.
    """
    if pool_size is None:
        return None
    pools = []
    for rel in relevant:
        if rel.size >= pool_size:
            pools.append(np.sort(rng.choice(rel, size=pool_size, replace=False)))
            continue
        mask = np.zeros(n_items, dtype=bool)
        mask[rel] = True
        others = np.flatnonzero(~mask)
        fill = rng.choice(others, size=pool_size - rel.size, replace=False)
        pools.append(np.sort(np.concatenate([rel, fill])))
    return pools


def pooled_target_rows(
    labels: np.ndarray, pools: list | None, model_rows: tuple, browsing: BrowsingModel
) -> np.ndarray:
    """Target exposure rows over each user's candidate pool."""
    if pools is None:
        return target_exposure(labels, browsing).values
    n_users, n_items = model_rows
    out = np.zeros((n_users, n_items))
    for u, idx in enumerate(pools):
        m = int(labels[u, idx].sum())
        rel, non = target_exposure_values(m, idx.size, browsing)
        row = np.where(labels[u, idx] == 1, rel, non)
        out[u, idx] = row
    return out


class Adam:
    """Adaptive-moment optimizer with lazy row updates for embedding tables.

    Moments advance only for rows that received gradient this step; bias
    correction uses the global step count.
    """

    def __init__(self, shape, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray, rows=None) -> None:
        self.t += 1
        sel = slice(None) if rows is None else rows
        self.m[sel] = self.beta1 * self.m[sel] + (1 - self.beta1) * grads
        self.v[sel] = self.beta2 * self.v[sel] + (1 - self.beta2) * grads**2
        mhat = self.m[sel] / (1 - self.beta1**self.t)
        vhat = self.v[sel] / (1 - self.beta2**self.t)
        params[sel] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class EpochStats:
    epoch: int
    loss: float
    ii_val: float
    gg_val: float
    ndcg_val: float


@dataclass
class TrainResult:
    model: MFModel  # snapshot selected by validation II-F
    trace: list
    best_epoch: int
    config: TrainerConfig
    final_model: MFModel | None = None  # last-epoch parameters


def ndcg_at_k(
    scores: np.ndarray,
    labels: np.ndarray,
    k: int,
    exclude: np.ndarray | None = None,
) -> float:
    """Mean NDCG@k with binary gains and log2 discount.

    ``exclude`` masks items out of the candidate ranking (for instance
    already-seen training items). Users without any relevant label are
    left out of the mean; with no eligible users the result is 0.
    """
    y = np.array(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if exclude is not None:
        y[exclude] = -np.inf
    discounts = 1.0 / np.log2(np.arange(2, k + 2))
    vals = []
    for u in range(y.shape[0]):
        m = int(labels[u].sum())
        if m == 0:
            continue
        order = np.lexsort((np.arange(y.shape[1]), -y[u]))[:k]
        gains = labels[u, order].astype(np.float64)
        dcg = float(gains @ discounts[: order.size])
        idcg = float(discounts[: min(m, k)].sum())
        vals.append(dcg / idcg)
    return float(np.mean(vals)) if vals else 0.0


def exposure_eval(
    model: MFModel,
    bundle: DatasetBundle,
    config: TrainerConfig,
    user_groups: GroupMap,
    item_groups: GroupMap,
    which: str = "val",
    seed_tag: int = 0,
) -> tuple:
    """(II-F, GG-F) of the model's unit-temperature policy on a held-out split.

    The policy is audited as deployed: rankings over the full catalog, no
    masking of already-seen items (unlike NDCG). Target exposure comes
    from the held-out split's relevance.
    """
    browsing = BrowsingModel(gamma=config.gamma, normalized=True)
    eval_seed = int(
        np.random.SeedSequence([config.seed, 2, seed_tag]).generate_state(1)[0]
    )
    policy = PLPolicy(model.scores(), beta=1.0, seed=eval_seed)
    system = expected_exposure_mc(policy, browsing, config.eval_samples)
    labels = bundle.relevance_matrix(which, config.min_rating)
    target = target_exposure(labels, browsing)
    return ii_f(system, target), gg_f(system, target, user_groups, item_groups)


def _validation_stats(
    model: MFModel,
    bundle: DatasetBundle,
    config: TrainerConfig,
    user_groups: GroupMap,
    item_groups: GroupMap,
    epoch: int,
) -> tuple:
    ii, gg = exposure_eval(
        model, bundle, config, user_groups, item_groups, "val", seed_tag=epoch
    )
    labels_val = bundle.relevance_matrix("val", config.min_rating)
    ndcg = ndcg_at_k(
        model.scores(),
        labels_val,
        config.ndcg_k,
        exclude=bundle.interaction_mask_matrix("train"),
    )
    return ii, gg, ndcg


def train(
    model: MFModel,
    bundle: DatasetBundle,
    config: TrainerConfig,
    user_groups: GroupMap,
    item_groups: GroupMap,
) -> TrainResult:
    """Mini-batch training with per-epoch validation trace and model selection.

    The target exposure for the loss comes from training-split relevance
    (held-out labels never leak into the objective); validation II-F
    selects the returned model snapshot. Gumbel draws are resampled each
    epoch and held fixed within a step.
    """
    if bundle.split is None:
        raise ValueError("training requires a split dataset bundle")
    n_users, n_items = bundle.catalog.n_users, bundle.catalog.n_items
    browsing = BrowsingModel(gamma=config.gamma, normalized=True)
    labels_train = bundle.relevance_matrix("train", config.min_rating)
    relevant = [np.flatnonzero(labels_train[u]) for u in range(n_users)]
    user_w = user_groups.weight_matrix()
    item_w = item_groups.weight_matrix()

    opt_user = Adam(model.user_vecs.shape, config.learning_rate)
    opt_item = Adam(model.item_vecs.shape, config.learning_rate)

    trace = []
    best = (np.inf, 0, model.copy())
    e_star_full = (
        target_exposure(labels_train, browsing).values
        if config.pool_size is None
        else None
    )
    for epoch in range(1, config.epochs + 1):
        pools = training_pools(
            n_items,
            relevant,
            config.pool_size,
            np.random.default_rng([config.seed, 4, epoch]),
        )
        e_star = (
            e_star_full
            if pools is None
            else pooled_target_rows(labels_train, pools, (n_users, n_items), browsing)
        )
        order = np.random.default_rng([config.seed, 1, epoch]).permutation(n_users)
        total, n_batches = 0.0, 0
        for start in range(0, n_users, config.batch_size):
            batch = order[start : start + config.batch_size]
            noise = [
                gumbel_noise(
                    np.random.default_rng([config.seed, 3, epoch, int(u)]),
                    (
                        config.n_rank_samples,
                        n_items if pools is None else pools[u].size,
                    ),
                )
                for u in batch
            ]
            grads = batch_loss_and_grads(
                model,
                batch,
                e_star[batch],
                user_w,
                item_w,
                config,
                noise,
                pools=None if pools is None else [pools[u] for u in batch],
            )
            if not np.isfinite(grads.loss):
                raise RuntimeError(f"training diverged at epoch {epoch} (loss NaN)")
            opt_user.step(model.user_vecs, grads.d_user, rows=batch)
            opt_item.step(model.item_vecs, grads.d_item)
            total += grads.loss
            n_batches += 1

        ii_val, gg_val, ndcg_val = _validation_stats(
            model, bundle, config, user_groups, item_groups, epoch
        )
        trace.append(EpochStats(epoch, total / max(n_batches, 1), ii_val, gg_val, ndcg_val))
        if ii_val < best[0]:
            best = (ii_val, epoch, model.copy())

    return TrainResult(best[2], trace, best[1], config, final_model=model.copy())


def config_hash(config: TrainerConfig) -> str:
    import json

    payload = json.dumps(config.fingerprint(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def save_checkpoint(path, model: MFModel, config: TrainerConfig) -> None:
    """Binary checkpoint: magic, dims, seed, config hash, then row-major
    little-endian float64 embedding blocks."""
    n_users, dim = model.user_vecs.shape
    n_items = model.item_vecs.shape[0]
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<QQQQ", n_users, n_items, dim, model.seed))
        fh.write(bytes.fromhex(config_hash(config)))
        fh.write(np.ascontiguousarray(model.user_vecs, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.item_vecs, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple:
    """Returns (model, config hash hex)."""
    with open(path, "rb") as fh:
        if fh.read(len(CKPT_MAGIC)) != CKPT_MAGIC:
            raise DataError(f"{path}: not a model checkpoint")
        n_users, n_items, dim, seed = struct.unpack("<QQQQ", fh.read(32))
        chash = fh.read(8).hex()
        u = np.frombuffer(fh.read(n_users * dim * 8), dtype="<f8").reshape(n_users, dim)
        v = np.frombuffer(fh.read(n_items * dim * 8), dtype="<f8").reshape(n_items, dim)
    return MFModel(u.copy(), v.copy(), int(seed)), chash


@dataclass
class GradCheckReport:
    """Analytic-vs-numeric gradient agreement for each parameter block."""

    max_rel_error_user: float
    max_rel_error_item: float
    tolerance: float = 1e-4

    @property
    def max_rel_error(self) -> float:
        return max(self.max_rel_error_user, self.max_rel_error_item)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def grad_check(
    model: MFModel,
    e_star_rows: np.ndarray,
    user_groups: GroupMap,
    item_groups: GroupMap,
    config: TrainerConfig,
    users: np.ndarray | None = None,
    h: float = 1e-5,
    rng=None,
) -> GradCheckReport:
    """Central-difference check of the analytic batch gradients."""
    users = np.arange(model.user_vecs.shape[0]) if users is None else np.asarray(users)
    rng = np.random.default_rng(0) if rng is None else rng
    n_items = model.item_vecs.shape[0]
    pool_k = config.pool_size or n_items
    pools = None
    if config.pool_size is not None:
        pools = [
            np.sort(rng.choice(n_items, size=pool_k, replace=False)) for _ in users
        ]
    noise = [gumbel_noise(rng, (config.n_rank_samples, pool_k)) for _ in users]
    user_w = user_groups.weight_matrix()
    item_w = item_groups.weight_matrix()

    def loss_of(m: MFModel) -> float:
        return batch_loss_and_grads(
            m, users, e_star_rows, user_w, item_w, config, noise, pools=pools
        ).loss

    grads = batch_loss_and_grads(
        model, users, e_star_rows, user_w, item_w, config, noise, pools=pools
    )

    def block_error(param_name: str, analytic: np.ndarray, rows) -> float:
        worst = 0.0
        base = getattr(model, param_name)
        for r, row in enumerate(rows):
            for c in range(base.shape[1]):
                keep = base[row, c]
                base[row, c] = keep + h
                up = loss_of(model)
                base[row, c] = keep - h
                down = loss_of(model)
                base[row, c] = keep
                numeric = (up - down) / (2 * h)
                a = analytic[r, c] if param_name == "user_vecs" else analytic[row, c]
                err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
                worst = max(worst, err)
        return worst

    err_u = block_error("user_vecs", grads.d_user, users)
    err_i = block_error(
        "item_vecs", grads.d_item, range(model.item_vecs.shape[0])
    )
    return GradCheckReport(err_u, err_i)
