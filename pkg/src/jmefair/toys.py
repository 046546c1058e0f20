"""Six constructed toy recommenders exercising every metric separately.

The setting: four candidates split into two demographic groups
(a = rows 0,1; b = rows 2,3) and four jobs split into two salary groups
(x = columns 0,1; y = columns 2,3). Every job is relevant to every
candidate. The system shows exactly one result per impression and the
user always inspects it, so each exposure row is a probability
distribution over the four jobs and the ideal policy exposes every job
at 0.25. Random exposure is likewise 0.25 everywhere.

Each system concentrates each user's exposure on two jobs at 0.5, so the
individual-level deviation is +/-0.25 everywhere and II-F is 0.0625 for
all six; they differ only in which aggregation level inherits the
disparity:

a. per-user skew only: every user and user group still covers both
   salary groups and all jobs are globally balanced,
b. each user sees a single salary group, but the two user groups balance
   per item,
c. each user group locks onto one job per salary group,
d. everyone sees the same two jobs (one per salary group),
e. group a sees only high-salary jobs, group b only low-salary jobs,
f. everyone sees only high-salary jobs.

Expected table (0 unless listed): II always 0.0625; IG for b, e, f;
GI for c, d, e, f; GG for e, f; AI for d, f; AG for f.
"""

from __future__ import annotations

import numpy as np

from .metrics import METRICS, GroupMap, MetricReport, decompose

TOY_SYSTEMS = ("a", "b", "c", "d", "e", "f")

EXPECTED = {
    "a": {"II": 0.0625, "IG": 0.0, "GI": 0.0, "GG": 0.0, "AI": 0.0, "AG": 0.0},
    "b": {"II": 0.0625, "IG": 0.0625, "GI": 0.0, "GG": 0.0, "AI": 0.0, "AG": 0.0},
    "c": {"II": 0.0625, "IG": 0.0, "GI": 0.0625, "GG": 0.0, "AI": 0.0, "AG": 0.0},
    "d": {"II": 0.0625, "IG": 0.0, "GI": 0.0625, "GG": 0.0, "AI": 0.0625, "AG": 0.0},
    "e": {
        "II": 0.0625,
        "IG": 0.0625,
        "GI": 0.0625,
        "GG": 0.0625,
        "AI": 0.0,
        "AG": 0.0,
    },
    "f": {
        "II": 0.0625,
        "IG": 0.0625,
        "GI": 0.0625,
        "GG": 0.0625,
        "AI": 0.0625,
        "AG": 0.0625,
    },
}


def toy_group_maps() -> tuple:
    users = GroupMap.from_members("user", 4, {"a": [0, 1], "b": [2, 3]})
    items = GroupMap.from_members("item", 4, {"x": [0, 1], "y": [2, 3]})
    return users, items


def toy_target() -> np.ndarray:
    return np.full((4, 4), 0.25)


def toy_random() -> np.ndarray:
    return np.full((4, 4), 0.25)


def toy_system(name: str) -> np.ndarray:
    h = 0.5
    rows = {
        "a": [[h, 0, h, 0], [0, h, 0, h], [h, 0, h, 0], [0, h, 0, h]],
        "b": [[h, h, 0, 0], [0, 0, h, h], [h, h, 0, 0], [0, 0, h, h]],
        "c": [[h, 0, h, 0], [h, 0, h, 0], [0, h, 0, h], [0, h, 0, h]],
        "d": [[h, 0, h, 0]] * 4,
        "e": [[h, h, 0, 0], [h, h, 0, 0], [0, 0, h, h], [0, 0, h, h]],
        "f": [[h, h, 0, 0]] * 4,
    }
    if name not in rows:
        raise ValueError(f"unknown toy system {name!r}; expected one of {TOY_SYSTEMS}")
    return np.array(rows[name], dtype=np.float64)


def toy_reports() -> dict:
    """MetricReport per toy system against the 0.25 target and random exposure."""
    users, items = toy_group_maps()
    target, rand = toy_target(), toy_random()
    return {
        name: decompose(toy_system(name), target, rand, users, items)
        for name in TOY_SYSTEMS
    }


def toy_table() -> tuple:
    """(computed, expected, max abs error) metric tables over all toy systems."""
    reports = toy_reports()
    computed = {
        name: {m: reports[name].value(m) for m in METRICS} for name in TOY_SYSTEMS
    }
    worst = max(
        abs(computed[name][m] - EXPECTED[name][m])
        for name in TOY_SYSTEMS
        for m in METRICS
    )
    return computed, EXPECTED, worst
