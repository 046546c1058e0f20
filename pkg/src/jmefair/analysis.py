"""Cross-system analysis: normalization, trade-off curves, rank correlation.

A study evaluates many system instances (one per model x stochasticity
level) and compares them: disparity-relevance trade-off curves per
metric, the area under those curves, and Kendall rank correlation
between the orderings different metrics induce over the instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .metrics import METRICS, MetricReport


@dataclass
class SystemInstance:
    """One evaluated system: a model label at one stochasticity level."""

    label: str
    beta: float
    report: MetricReport

    @property
    def key(self) -> str:
        return f"{self.label}@beta={self.beta:g}"


@dataclass
class TradeoffCurve:
    """Normalized (disparity, relevance) points for one metric, one model."""

    metric: str
    label: str
    points: list  # (disparity, relevance), sorted by disparity ascending


def min_max_normalize(values) -> np.ndarray:
    """Affine rescale onto [0, 1]; rejects a degenerate all-equal range."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ValueError("need at least two values to normalize")
    lo, hi = v.min(), v.max()
    if lo == hi:
        raise ValueError("degenerate range: all values equal")
    return (v - lo) / (hi - lo)


def auc_tradeoff(points) -> float:
    """Trapezoidal area under a relevance-over-disparity curve on [0, 1].

    The curve is extended to the domain boundaries by its endpoint values,
    so adding collinear interior points never changes the area.
    """
    pts = sorted((float(x), float(y)) for x, y in points)
    if len(pts) < 2:
        raise ValueError("need at least two curve points")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if xs.min() < -1e-12 or xs.max() > 1 + 1e-12 or ys.min() < -1e-12 or ys.max() > 1 + 1e-12:
        raise ValueError("curve coordinates must lie in [0, 1]")
    if xs[0] > 0:
        xs, ys = np.concatenate(([0.0], xs)), np.concatenate(([ys[0]], ys))
    if xs[-1] < 1:
        xs, ys = np.concatenate((xs, [1.0])), np.concatenate((ys, [ys[-1]]))
    return float(np.sum(np.diff(xs) * (ys[:-1] + ys[1:]) / 2.0))


def kendall_tau(a, b) -> float:
    """Tie-corrected (tau-b) Kendall rank correlation."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be equal-length 1-d sequences")
    if a.size < 2:
        raise ValueError("need at least two observations")
    return float(stats.kendalltau(a, b, variant="b").statistic)


def paired_t_test(a, b) -> tuple:
    """Two-sided paired t test; returns (t statistic, p value).

    Identical samples give (0, 1); any other zero-variance difference is
    degenerate and rejected.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be equal-length 1-d sequences")
    n = a.size
    if n < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    sd = d.std(ddof=1)
    if sd == 0.0:
        if d[0] == 0.0:
            return 0.0, 1.0
        raise ValueError("degenerate: differences have zero variance")
    t = float(d.mean() / (sd / np.sqrt(n)))
    p = 2.0 * float(stats.t.sf(abs(t), n - 1))
    return t, p


def instance_values(instances, field: str) -> np.ndarray:
    """Extract 'II-F'-style metric/component values across instances."""
    metric, component = field.split("-")
    return np.array([inst.report.value(metric, component) for inst in instances])


def correlation_matrix(instances, fields) -> np.ndarray:
    """Pairwise Kendall tau between the orderings induced by each field.

    Exactly symmetric with unit diagonal by construction.
    """
    if len(instances) < 2:
        raise ValueError("need at least two system instances")
    cols = [instance_values(instances, f) for f in fields]
    k = len(fields)
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = kendall_tau(cols[i], cols[j])
    return out


def build_tradeoff_curves(instances) -> dict:
    """Per-metric trade-off curves, one per model label.

    Disparity and relevance are min-max normalized per metric across all
    instances of the study, so curves from different models share axes.
    """
    labels = sorted({inst.label for inst in instances})
    curves = {}
    for metric in METRICS:
        disp = min_max_normalize(instance_values(instances, f"{metric}-D"))
        rel = min_max_normalize(instance_values(instances, f"{metric}-R"))
        per_label = []
        for label in labels:
            pts = [
                (disp[i], rel[i])
                for i, inst in enumerate(instances)
                if inst.label == label
            ]
            pts.sort()
            per_label.append(TradeoffCurve(metric, label, pts))
        curves[metric] = per_label
    return curves


def auc_table(instances) -> dict:
    """{model label: {metric: AUC}} over the study's trade-off curves."""
    curves = build_tradeoff_curves(instances)
    out = {}
    for metric, per_label in curves.items():
        for curve in per_label:
            out.setdefault(curve.label, {})[metric] = auc_tradeoff(curve.points)
    return out
