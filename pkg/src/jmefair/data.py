"""Dataset ingestion, splitting, group extraction, and run-file loading.

Supports the two MovieLens layouts: the 100K layout (tab-separated
``u.data``, pipe-separated ``u.user``/``u.item`` with binary genre flag
columns) and the 1M layout (``::``-separated ``ratings.dat``,
``users.dat``, ``movies.dat`` with pipe-separated genre name lists).
Entity ids are remapped to dense indices at load; original ids are kept
for reporting. The dataset root may also be set via the ``JME_DATA_DIR``
environment variable.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError
from .exposure import Catalog

TRAIN, VAL, TEST = 0, 1, 2
SPLIT_NAMES = {"train": TRAIN, "val": VAL, "test": TEST}

# 1M-style age buckets; 100K raw ages are folded onto the same ranges
AGE_BUCKETS = {1: "Under 18", 18: "18-24", 25: "25-34", 35: "35-44",
               45: "45-49", 50: "50-55", 56: "56+"}

ML1M_OCCUPATIONS = {
    0: "other", 1: "academic/educator", 2: "artist", 3: "clerical/admin",
    4: "college/grad student", 5: "customer service", 6: "doctor/health care",
    7: "executive/managerial", 8: "farmer", 9: "homemaker", 10: "K-12 student",
    11: "lawyer", 12: "programmer", 13: "retired", 14: "sales/marketing",
    15: "scientist", 16: "self-employed", 17: "technician/engineer",
    18: "tradesman/craftsman", 19: "unemployed", 20: "writer",
}

ML100K_GENRES = (
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
)

UNKNOWN_GENRE = "(unknown)"


def age_bucket(age: int) -> str:
    """Fold a raw age onto the 1M-style bucket labels."""
    label = AGE_BUCKETS[1]
    for lo in sorted(AGE_BUCKETS):
        if age >= lo:
            label = AGE_BUCKETS[lo]
    return label


@dataclass
class InteractionRecord:
    user: str
    item: str
    rating: int
    timestamp: int


@dataclass
class DatasetBundle:
    """A loaded dataset: catalog, interactions, attributes, split assignment."""

    catalog: Catalog
    user_idx: np.ndarray  # (n,) dense user index per interaction
    item_idx: np.ndarray
    rating: np.ndarray
    timestamp: np.ndarray
    user_gender: list
    user_age: list
    user_occupation: list
    item_genres: list  # tuple of genre names per item, may be empty
    split: np.ndarray | None = None  # (n,) in {TRAIN, VAL, TEST}
    short_users: list = field(default_factory=list)  # users with < 3 interactions

    @property
    def n_interactions(self) -> int:
        return self.user_idx.size

    def split_mask(self, which: str) -> np.ndarray:
        if self.split is None:
            raise ValueError("dataset has not been split")
        return self.split == SPLIT_NAMES[which]

    def relevance_matrix(self, which: str = "test", min_rating: int = 1) -> np.ndarray:
        """Binary users x items relevance: rated in the given split at or above
        the threshold."""
        mask = self.split_mask(which) & (self.rating >= min_rating)
        out = np.zeros((self.catalog.n_users, self.catalog.n_items), dtype=np.int8)
        out[self.user_idx[mask], self.item_idx[mask]] = 1
        return out

    def interaction_mask_matrix(self, *which: str) -> np.ndarray:
        """Boolean users x items matrix marking interactions in the given splits."""
        sel = np.zeros(self.n_interactions, dtype=bool)
        for w in which:
            sel |= self.split_mask(w)
        out = np.zeros((self.catalog.n_users, self.catalog.n_items), dtype=bool)
        out[self.user_idx[sel], self.item_idx[sel]] = True
        return out


def resolve_dataset_path(path: str | None, variant: str) -> Path:
    """Apply JME_DATA_DIR when no explicit path is given."""
    if path:
        return Path(path)
    root = os.environ.get("JME_DATA_DIR")
    if not root:
        raise DataError("no dataset path given and JME_DATA_DIR is not set")
    return Path(root) / {"ml100k": "ml-100k", "ml1m": "ml-1m"}[variant]


def _read_lines(path: Path, encoding="latin-1"):
    try:
        with open(path, encoding=encoding) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n").rstrip("\r")
                if line:
                    yield lineno, line
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _parse_ratings(path: Path, sep: str) -> list:
    records = []
    for lineno, line in _read_lines(path):
        parts = line.split(sep)
        if len(parts) != 4:
            raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        try:
            user, item = parts[0], parts[1]
            rating, ts = int(parts[2]), int(parts[3])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        if not 1 <= rating <= 5:
            raise DataError(f"{path}:{lineno}: rating {rating} outside [1, 5]")
        records.append(InteractionRecord(user, item, rating, ts))
    if not records:
        raise DataError(f"{path}: empty ratings file")
    return records


def _parse_ml100k_users(path: Path) -> dict:
    users = {}
    for lineno, line in _read_lines(path):
        parts = line.split("|")
        if len(parts) != 5:
            raise DataError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
        uid, age, gender, occupation = parts[0], parts[1], parts[2], parts[3]
        try:
            users[uid] = (gender, age_bucket(int(age)), occupation)
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return users


def _parse_ml100k_items(path: Path, genre_names) -> dict:
    items = {}
    n_flags = len(genre_names)
    for lineno, line in _read_lines(path):
        parts = line.split("|")
        if len(parts) != 5 + n_flags:
            raise DataError(
                f"{path}:{lineno}: expected {5 + n_flags} fields, got {len(parts)}"
            )
        flags = parts[5:]
        try:
            genres = tuple(
                g for g, f in zip(genre_names, flags) if int(f) == 1 and g != "unknown"
            )
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        items[parts[0]] = genres
    return items


def _parse_ml100k_genres(path: Path) -> list:
    names = []
    for lineno, line in _read_lines(path):
        parts = line.split("|")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'name|index'")
        names.append(parts[0])
    return names


def _parse_ml1m_users(path: Path) -> dict:
    users = {}
    for lineno, line in _read_lines(path):
        parts = line.split("::")
        if len(parts) != 5:
            raise DataError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
        uid, gender, age, occupation = parts[0], parts[1], parts[2], parts[3]
        try:
            users[uid] = (
                gender,
                age_bucket(int(age)),
                ML1M_OCCUPATIONS.get(int(occupation), f"occupation-{occupation}"),
            )
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return users


def _parse_ml1m_items(path: Path) -> dict:
    items = {}
    for lineno, line in _read_lines(path):
        parts = line.split("::")
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
        genres = tuple(g for g in parts[2].split("|") if g)
        items[parts[0]] = genres
    return items


def load_movielens(path: str | None = None, variant: str = "ml100k") -> DatasetBundle:
    """Load a MovieLens-layout dataset into a dense-index bundle (unsplit).

    The catalog covers exactly the users and items that appear in the
    ratings file, ordered by numeric id.
    """
    if variant not in ("ml100k", "ml1m"):
        raise DataError(f"unknown variant {variant!r}; expected ml100k or ml1m")
    root = resolve_dataset_path(path, variant)
    if variant == "ml100k":
        records = _parse_ratings(root / "u.data", "\t")
        user_attrs = _parse_ml100k_users(root / "u.user")
        genre_file = root / "u.genre"
        genre_names = (
            _parse_ml100k_genres(genre_file)
            if genre_file.exists()
            else list(ML100K_GENRES)
        )
        item_attrs = _parse_ml100k_items(root / "u.item", genre_names)
    else:
        records = _parse_ratings(root / "ratings.dat", "::")
        user_attrs = _parse_ml1m_users(root / "users.dat")
        item_attrs = _parse_ml1m_items(root / "movies.dat")

    for rec in records:
        if rec.user not in user_attrs:
            raise DataError(f"rating references unknown user {rec.user}")
        if rec.item not in item_attrs:
            raise DataError(f"rating references unknown item {rec.item}")

    def _numeric_sort(ids):
        return sorted(ids, key=lambda s: (0, int(s), "") if s.isdigit() else (1, 0, s))

    user_ids = _numeric_sort({r.user for r in records})
    item_ids = _numeric_sort({r.item for r in records})
    catalog = Catalog(user_ids, item_ids)

    return DatasetBundle(
        catalog=catalog,
        user_idx=np.array([catalog.user_index(r.user) for r in records], dtype=np.int64),
        item_idx=np.array([catalog.item_index(r.item) for r in records], dtype=np.int64),
        rating=np.array([r.rating for r in records], dtype=np.int64),
        timestamp=np.array([r.timestamp for r in records], dtype=np.int64),
        user_gender=[user_attrs[u][0] for u in user_ids],
        user_age=[user_attrs[u][1] for u in user_ids],
        user_occupation=[user_attrs[u][2] for u in user_ids],
        item_genres=[item_attrs[d] for d in item_ids],
    )


def split(bundle: DatasetBundle, seed: int) -> DatasetBundle:
    """Assign interactions to train/val/test at 70/10/20 per user.

    Counts round toward train (test and val take the floor), so every
    user keeps at least one training interaction. Users with fewer than
    three interactions go entirely to train and are flagged.
    """
    if bundle.split is not None:
        raise ValueError("bundle is already split")
    assignment = np.full(bundle.n_interactions, TRAIN, dtype=np.int8)
    short = []
    for u in range(bundle.catalog.n_users):
        rows = np.flatnonzero(bundle.user_idx == u)
        n = rows.size
        if n < 3:
            if n:
                short.append(bundle.catalog.user_ids[u])
            continue
        rng = np.random.default_rng([seed, u])
        perm = rng.permutation(n)
        n_test, n_val = int(0.2 * n), int(0.1 * n)
        assignment[rows[perm[:n_test]]] = TEST
        assignment[rows[perm[n_test : n_test + n_val]]] = VAL
    return replace(bundle, split=assignment, short_users=short)


def build_group_maps(bundle: DatasetBundle, attribute: str):
    """GroupMap for one attribute: gender/age/occupation (user side) or
    genre (item side).

    One group per attribute value with uniform member weights; items with
    multiple genres join every matching group, genre-less items form an
    implicit catch-all group.
    """
    from .metrics import GroupMap

    if attribute in ("gender", "age", "occupation"):
        values = {
            "gender": bundle.user_gender,
            "age": bundle.user_age,
            "occupation": bundle.user_occupation,
        }[attribute]
        groups = {}
        for idx, value in enumerate(values):
            groups.setdefault(value, []).append(idx)
        return GroupMap.from_members(
            "user", bundle.catalog.n_users, {g: groups[g] for g in sorted(groups)}
        )
    if attribute == "genre":
        groups = {}
        for idx, genres in enumerate(bundle.item_genres):
            for g in genres or (UNKNOWN_GENRE,):
                groups.setdefault(g, []).append(idx)
        return GroupMap.from_members(
            "item", bundle.catalog.n_items, {g: groups[g] for g in sorted(groups)}
        )
    raise DataError(f"unknown group attribute {attribute!r}")


def load_run_file(path, catalog: Catalog, lenient: bool = False) -> np.ndarray:
    """Score matrix from a `user item score` run file.

    A four-column `user item rank score` layout is tolerated with the
    rank ignored. Pairs absent from the file get -inf, marking them as
    outside the candidate pool. Duplicate pairs resolve last-wins with a
    warning; unknown ids raise unless ``lenient``.
    """
    scores = np.full((catalog.n_users, catalog.n_items), -np.inf)
    seen = set()
    duplicates = 0
    for lineno, line in _read_lines(Path(path), encoding="utf-8"):
        parts = line.split()
        if len(parts) == 3:
            user, item, score = parts
        elif len(parts) == 4:
            user, item, _, score = parts
        else:
            raise DataError(f"{path}:{lineno}: expected 3 or 4 fields")
        try:
            i = catalog.user_index(user)
            j = catalog.item_index(item)
        except KeyError:
            if lenient:
                continue
            raise DataError(f"{path}:{lineno}: unknown user/item {user} {item}") from None
        try:
            value = float(score)
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad score {score!r}") from exc
        if not np.isfinite(value):
            raise DataError(f"{path}:{lineno}: non-finite score")
        if (i, j) in seen:
            duplicates += 1
        seen.add((i, j))
        scores[i, j] = value
    if duplicates:
        warnings.warn(f"{path}: {duplicates} duplicate (user, item) rows, last wins")
    return scores
