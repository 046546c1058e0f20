"""Study orchestration: evaluate systems, emit reproducible CSV reports.

A study is a set of system instances (run files or model checkpoints,
crossed with a grid of softmax temperatures) evaluated against one
dataset and one pair of group attributes. Every emitted file starts with
a ``# config_hash=...`` comment so outputs are traceable to their exact
configuration; reruns with identical config and seed are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (
    METRICS,
    SystemInstance,
    auc_table,
    build_tradeoff_curves,
    correlation_matrix,
)
from .data import DatasetBundle, build_group_maps
from .exposure import BrowsingModel, random_exposure_matrix, target_exposure
from .metrics import COMPONENTS, decompose
from .policy import PLPolicy, expected_exposure_mc

DEFAULT_BETAS = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)


@dataclass
class StudyConfig:
    dataset: str | None = None
    variant: str = "ml100k"
    runs: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    betas: list = field(default_factory=lambda: list(DEFAULT_BETAS))
    gamma: float = 0.8
    samples: int = 100
    topk: int | None = 100
    groups_user: str = "gender"
    groups_item: str = "genre"
    min_rating: int = 1
    seed: int = 42
    out: str = "out"

    def to_dict(self) -> dict:
        return {
            k: list(v) if isinstance(v, (list, tuple)) else v
            for k, v in self.__dict__.items()
        }


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def evaluate_system(
    label: str,
    scores: np.ndarray,
    beta: float,
    bundle: DatasetBundle,
    config: StudyConfig,
    user_groups,
    item_groups,
) -> SystemInstance:
    """One MetricReport: PL-randomize the scores, estimate exposure, decompose.

    Target and random exposure are computed over each user's candidate
    pool (the reranked top-k), with zero exposure outside it.
    """
    browsing = BrowsingModel(gamma=config.gamma)
    policy = PLPolicy(scores, beta=beta, top_k=config.topk, seed=config.seed)
    system = expected_exposure_mc(policy, browsing, config.samples)

    pools = np.zeros(scores.shape, dtype=bool)
    for u in range(scores.shape[0]):
        pools[u, policy.pool(u)] = True
    labels = bundle.relevance_matrix("test", config.min_rating)
    target = target_exposure(labels, browsing, pools)
    rand = random_exposure_matrix(scores.shape, browsing, pools)

    fingerprint = {
        "system": label,
        "beta": beta,
        "gamma": config.gamma,
        "samples": config.samples,
        "topk": config.topk,
        "groups_user": config.groups_user,
        "groups_item": config.groups_item,
        "seed": config.seed,
        "kendall_variant": "tau-b",
    }
    report = decompose(
        system, target, rand, user_groups, item_groups, fingerprint=fingerprint
    )
    return SystemInstance(label, beta, report)


def evaluate_study(
    bundle: DatasetBundle,
    score_matrices: dict,
    config: StudyConfig,
    user_attr: str | None = None,
) -> list:
    """All (system, beta) instances for one user-side group attribute."""
    user_groups = build_group_maps(bundle, user_attr or config.groups_user)
    item_groups = build_group_maps(bundle, config.groups_item)
    instances = []
    for label in sorted(score_matrices):
        for beta in config.betas:
            instances.append(
                evaluate_system(
                    label,
                    score_matrices[label],
                    beta,
                    bundle,
                    config,
                    user_groups,
                    item_groups,
                )
            )
    return instances


def _open_out(path: Path, chash: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", encoding="utf-8", newline="\n")
    fh.write(f"# config_hash={chash}\n")
    return fh


def write_metrics_csv(instances, out_dir, chash: str) -> Path:
    """metrics.csv plus a metrics.json sidecar with full fingerprints."""
    out = Path(out_dir)
    path = out / "metrics.csv"
    cols = [f"{m}-{c}" for m in METRICS for c in COMPONENTS]
    with _open_out(path, chash) as fh:
        fh.write("system,beta,gamma," + ",".join(cols) + "\n")
        for inst in instances:
            vals = [
                f"{inst.report.value(m, c):.10g}" for m in METRICS for c in COMPONENTS
            ]
            gamma = inst.report.fingerprint.get("gamma", "")
            fh.write(f"{inst.label},{inst.beta:g},{gamma:g}," + ",".join(vals) + "\n")
    sidecar = {
        "config_hash": chash,
        "instances": [
            {"system": i.label, "beta": i.beta, "fingerprint": i.report.fingerprint}
            for i in instances
        ],
    }
    (out / "metrics.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    )
    return path


def write_tradeoff_csvs(instances, out_dir, chash: str) -> dict:
    """tradeoff_<metric>.csv files of normalized (disparity, relevance) points."""
    curves = build_tradeoff_curves(instances)
    paths = {}
    for metric, per_label in curves.items():
        path = Path(out_dir) / f"tradeoff_{metric}.csv"
        with _open_out(path, chash) as fh:
            fh.write("system,disparity,relevance\n")
            for curve in per_label:
                for x, y in curve.points:
                    fh.write(f"{curve.label},{x:.10g},{y:.10g}\n")
        paths[metric] = path
    return paths


def write_auc_csv(instances, out_dir, chash: str) -> Path:
    path = Path(out_dir) / "auc.csv"
    table = auc_table(instances)
    with _open_out(path, chash) as fh:
        fh.write("system,metric,auc\n")
        for label in sorted(table):
            for metric in METRICS:
                fh.write(f"{label},{metric},{table[label][metric]:.10g}\n")
    return path


def correlation_fields() -> list:
    """F, D, and R orderings per metric; C is system-independent and excluded."""
    return [f"{m}-{c}" for c in ("F", "D", "R") for m in METRICS]


def write_correlation_csv(instances, out_dir, attr: str, chash: str) -> Path:
    fields = correlation_fields()
    matrix = correlation_matrix(instances, fields)
    path = Path(out_dir) / f"correlation_{attr}.csv"
    with _open_out(path, chash) as fh:
        fh.write("field," + ",".join(fields) + "\n")
        for name, row in zip(fields, matrix):
            fh.write(name + "," + ",".join(f"{v:.10g}" for v in row) + "\n")
    return path
