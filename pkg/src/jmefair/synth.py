"""Synthetic dataset generator in the MovieLens 100K file layout.

Produces interaction data with deliberately gender-skewed genre
preferences, so group-level exposure disparities are present and
fairness-aware training has signal to remove. Used by tests, the
acceptance suite, and for demo runs where the real datasets are not
on disk.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

SYNTH_GENRES = ("Action", "Comedy", "Drama", "Romance", "SciFi")


def generate_ml100k(
    out_dir,
    n_users: int = 200,
    n_items: int = 100,
    seed: int = 0,
    min_interactions: int = 15,
    max_interactions: int = 40,
) -> Path:
    """Write u.data / u.user / u.item / u.genre under ``out_dir``.

    Users get a gender, an age, and an occupation; items get one or two
    genres. Preference over genres is drawn from a gender-specific
    Dirichlet with opposite skews, ratings follow preference strength.
    """
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    genders = rng.choice(["M", "F"], size=n_users)
    ages = rng.integers(16, 70, size=n_users)
    occupations = rng.choice(["student", "engineer", "artist", "other"], size=n_users)

    n_genres = len(SYNTH_GENRES)
    item_genre_idx = [
        tuple(
            sorted(
                rng.choice(n_genres, size=rng.integers(1, 3), replace=False).tolist()
            )
        )
        for _ in range(n_items)
    ]

    # opposite ends of the genre list dominate for the two genders
    base = np.ones(n_genres)
    skew_m = base + np.array([4.0, 2.0, 0.5, 0.2, 3.0])
    skew_f = base + np.array([0.2, 2.0, 3.0, 4.0, 0.5])

    lines = []
    ts = 880000000
    for u in range(n_users):
        pref = rng.dirichlet(skew_m if genders[u] == "M" else skew_f)
        affinity = np.array(
            [np.mean([pref[g] for g in gs]) for gs in item_genre_idx]
        )
        p = affinity / affinity.sum()
        n_inter = int(rng.integers(min_interactions, max_interactions + 1))
        n_inter = min(n_inter, n_items)
        items = rng.choice(n_items, size=n_inter, replace=False, p=p)
        for d in items:
            strength = affinity[d] / affinity.max()
            rating = int(np.clip(round(1 + 4 * strength + rng.normal(0, 0.5)), 1, 5))
            ts += int(rng.integers(1, 50))
            lines.append(f"{u + 1}\t{d + 1}\t{rating}\t{ts}")

    (out / "u.data").write_text("\n".join(lines) + "\n")
    (out / "u.user").write_text(
        "\n".join(
            f"{u + 1}|{ages[u]}|{genders[u]}|{occupations[u]}|00000"
            for u in range(n_users)
        )
        + "\n"
    )
    (out / "u.genre").write_text(
        "\n".join(f"{g}|{i}" for i, g in enumerate(SYNTH_GENRES)) + "\n"
    )
    item_lines = []
    for d in range(n_items):
        flags = ["0"] * n_genres
        for g in item_genre_idx[d]:
            flags[g] = "1"
        item_lines.append(
            f"{d + 1}|Item {d + 1}|01-Jan-1995||http://example/{d + 1}|" + "|".join(flags)
        )
    (out / "u.item").write_text("\n".join(item_lines) + "\n")
    return out
