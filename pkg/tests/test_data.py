import numpy as np
import pytest

from jmefair.data import (
    DatasetBundle,
    age_bucket,
    build_group_maps,
    load_movielens,
    load_run_file,
    split,
)
from jmefair.errors import DataError
from jmefair.matrixio import (
    load_matrix_bin,
    load_matrix_csv,
    save_matrix_bin,
    save_matrix_csv,
)


@pytest.fixture
def ml1m_dir(tmp_path):
    d = tmp_path / "ml-1m"
    d.mkdir()
    (d / "ratings.dat").write_text(
        "1::1193::5::978300760\n1::661::3::978302109\n2::1193::4::978298413\n"
        "2::2355::5::978824291\n3::661::4::978301968\n"
    )
    (d / "users.dat").write_text(
        "1::F::1::10::48067\n2::M::56::16::70072\n3::M::25::15::55117\n"
    )
    (d / "movies.dat").write_text(
        "661::James and the Giant Peach (1996)::Animation|Children's|Musical\n"
        "1193::One Flew Over the Cuckoo's Nest (1975)::Drama\n"
        "2355::Bug's Life, A (1998)::Animation|Children's|Comedy\n"
        "9999::Never Rated (2000)::Drama\n"
    )
    return d


class TestMovieLensLoading:
    def test_ml1m_line_parse(self, ml1m_dir):
        bundle = load_movielens(ml1m_dir, "ml1m")
        i = bundle.catalog.user_index("1")
        j = bundle.catalog.item_index("1193")
        k = np.flatnonzero((bundle.user_idx == i) & (bundle.item_idx == j))[0]
        assert bundle.rating[k] == 5
        assert bundle.timestamp[k] == 978300760

    def test_catalog_covers_only_rated(self, ml1m_dir):
        bundle = load_movielens(ml1m_dir, "ml1m")
        assert bundle.catalog.n_users == 3
        assert bundle.catalog.n_items == 3  # 9999 has no ratings
        assert bundle.catalog.item_ids == ["661", "1193", "2355"]

    def test_user_attributes(self, ml1m_dir):
        bundle = load_movielens(ml1m_dir, "ml1m")
        u = bundle.catalog.user_index("2")
        assert bundle.user_gender[u] == "M"
        assert bundle.user_age[u] == "56+"
        assert bundle.user_occupation[u] == "self-employed"

    def test_multi_genre_items(self, ml1m_dir):
        bundle = load_movielens(ml1m_dir, "ml1m")
        j = bundle.catalog.item_index("661")
        assert bundle.item_genres[j] == ("Animation", "Children's", "Musical")

    def test_empty_ratings_rejected(self, ml1m_dir):
        (ml1m_dir / "ratings.dat").write_text("")
        with pytest.raises(DataError, match="empty"):
            load_movielens(ml1m_dir, "ml1m")

    def test_malformed_line_has_line_number(self, ml1m_dir):
        (ml1m_dir / "ratings.dat").write_text("1::1193::5::978300760\n1::661::3\n")
        with pytest.raises(DataError, match=":2"):
            load_movielens(ml1m_dir, "ml1m")

    def test_unknown_user_reference(self, ml1m_dir):
        (ml1m_dir / "ratings.dat").write_text("77::1193::5::978300760\n")
        with pytest.raises(DataError, match="unknown user"):
            load_movielens(ml1m_dir, "ml1m")

    def test_rating_range_enforced(self, ml1m_dir):
        (ml1m_dir / "ratings.dat").write_text("1::1193::9::978300760\n")
        with pytest.raises(DataError, match="rating"):
            load_movielens(ml1m_dir, "ml1m")

    def test_ml100k_synth_roundtrip(self, synth_dir):
        bundle = load_movielens(synth_dir, "ml100k")
        assert bundle.catalog.n_users == 60
        assert bundle.n_interactions > 0
        assert set(bundle.user_gender) == {"M", "F"}
        assert all(1 <= r <= 5 for r in bundle.rating)
        assert any(len(g) == 2 for g in bundle.item_genres)

    def test_env_var_root(self, ml1m_dir, monkeypatch):
        monkeypatch.setenv("JME_DATA_DIR", str(ml1m_dir.parent))
        bundle = load_movielens(None, "ml1m")
        assert bundle.catalog.n_users == 3

    def test_missing_path_without_env(self, monkeypatch):
        monkeypatch.delenv("JME_DATA_DIR", raising=False)
        with pytest.raises(DataError, match="JME_DATA_DIR"):
            load_movielens(None, "ml1m")

    def test_age_buckets(self):
        assert age_bucket(5) == "Under 18"
        assert age_bucket(18) == "18-24"
        assert age_bucket(33) == "25-34"
        assert age_bucket(70) == "56+"


def make_bundle(counts, seed=0):
    """Tiny synthetic bundle: user u has counts[u] interactions."""
    rng = np.random.default_rng(seed)
    users, items, ratings, ts = [], [], [], []
    n_items = max(counts) + 2
    for u, n in enumerate(counts):
        picked = rng.choice(n_items, size=n, replace=False)
        for d in picked:
            users.append(u)
            items.append(int(d))
            ratings.append(int(rng.integers(1, 6)))
            ts.append(len(ts))
    from jmefair.exposure import Catalog

    catalog = Catalog([f"u{i}" for i in range(len(counts))],
                      [f"d{j}" for j in range(n_items)])
    return DatasetBundle(
        catalog=catalog,
        user_idx=np.array(users),
        item_idx=np.array(items),
        rating=np.array(ratings),
        timestamp=np.array(ts),
        user_gender=["M" if i % 2 else "F" for i in range(len(counts))],
        user_age=["25-34"] * len(counts),
        user_occupation=["other"] * len(counts),
        item_genres=[("A",) if j % 3 else ("A", "B") for j in range(n_items)],
    )


class TestSplit:
    def test_ten_interactions_split_7_1_2(self):
        bundle = split(make_bundle([10]), seed=1)
        assert int(bundle.split_mask("train").sum()) == 7
        assert int(bundle.split_mask("val").sum()) == 1
        assert int(bundle.split_mask("test").sum()) == 2

    def test_single_interaction_all_train(self):
        bundle = split(make_bundle([1]), seed=1)
        assert int(bundle.split_mask("train").sum()) == 1
        assert bundle.short_users == ["u0"]

    def test_deterministic(self):
        a = split(make_bundle([10, 7, 5]), seed=3)
        b = split(make_bundle([10, 7, 5]), seed=3)
        assert np.array_equal(a.split, b.split)

    def test_seed_changes_assignment(self):
        base = make_bundle([20, 20])
        a = split(base, seed=1)
        b = split(make_bundle([20, 20]), seed=2)
        assert not np.array_equal(a.split, b.split)

    def test_partition(self):
        bundle = split(make_bundle([10, 6, 3, 1]), seed=4)
        total = sum(int(bundle.split_mask(w).sum()) for w in ("train", "val", "test"))
        assert total == bundle.n_interactions

    def test_every_user_keeps_training_data(self):
        bundle = split(make_bundle([3, 4, 5, 6, 10, 17]), seed=5)
        train = bundle.split_mask("train")
        for u in range(6):
            assert (train & (bundle.user_idx == u)).sum() >= 1

    def test_double_split_rejected(self):
        bundle = split(make_bundle([5]), seed=1)
        with pytest.raises(ValueError):
            split(bundle, seed=1)


class TestGroupMaps:
    def test_gender_two_groups(self, synth_bundle):
        gmap = build_group_maps(synth_bundle, "gender")
        assert sorted(gmap.group_ids) == ["F", "M"]
        covered = sorted(int(i) for idx in gmap.members for i in idx)
        assert covered == list(range(synth_bundle.catalog.n_users))

    def test_age_groups_are_bucket_labels(self, synth_bundle):
        gmap = build_group_maps(synth_bundle, "age")
        assert set(gmap.group_ids) <= {
            "Under 18", "18-24", "25-34", "35-44", "45-49", "50-55", "56+"
        }

    def test_multi_genre_items_in_multiple_groups(self, synth_bundle):
        gmap = build_group_maps(synth_bundle, "genre")
        member_count = sum(len(m) for m in gmap.members)
        assert member_count > synth_bundle.catalog.n_items

    def test_uniform_weights(self, synth_bundle):
        gmap = build_group_maps(synth_bundle, "gender")
        for idx, w in zip(gmap.members, gmap.weights):
            assert w == pytest.approx(np.full(len(idx), 1 / len(idx)))

    def test_unknown_attribute(self, synth_bundle):
        with pytest.raises(DataError):
            build_group_maps(synth_bundle, "zodiac")


class TestRunFiles:
    def test_basic_placement(self, tmp_path, synth_bundle):
        cat = synth_bundle.catalog
        path = tmp_path / "run.txt"
        path.write_text("1 7 3.25\n2 7 1.5\n")
        y = load_run_file(path, cat)
        assert y[cat.user_index("1"), cat.item_index("7")] == 3.25
        assert np.isneginf(y).sum() == y.size - 2

    def test_four_column_rank_ignored(self, tmp_path, synth_bundle):
        cat = synth_bundle.catalog
        path = tmp_path / "run.txt"
        path.write_text("1 7 1 3.25\n")
        y = load_run_file(path, cat)
        assert y[cat.user_index("1"), cat.item_index("7")] == 3.25

    def test_duplicate_last_wins(self, tmp_path, synth_bundle):
        cat = synth_bundle.catalog
        path = tmp_path / "run.txt"
        path.write_text("1 7 1.0\n1 7 2.0\n")
        with pytest.warns(UserWarning, match="duplicate"):
            y = load_run_file(path, cat)
        assert y[cat.user_index("1"), cat.item_index("7")] == 2.0

    def test_unknown_id_strict_vs_lenient(self, tmp_path, synth_bundle):
        cat = synth_bundle.catalog
        path = tmp_path / "run.txt"
        path.write_text("999999 7 1.0\n1 7 2.0\n")
        with pytest.raises(DataError, match="unknown"):
            load_run_file(path, cat)
        y = load_run_file(path, cat, lenient=True)
        assert y[cat.user_index("1"), cat.item_index("7")] == 2.0

    def test_top_k_coverage(self, tmp_path, synth_bundle):
        cat = synth_bundle.catalog
        k = 10
        rng = np.random.default_rng(0)
        lines = []
        for uid in cat.user_ids:
            items = rng.choice(cat.item_ids, size=k, replace=False)
            lines += [f"{uid} {d} {rng.random():.4f}" for d in items]
        path = tmp_path / "run.txt"
        path.write_text("\n".join(lines) + "\n")
        y = load_run_file(path, cat)
        assert (np.isfinite(y).sum(axis=1) == k).all()


class TestMatrixIO:
    def test_binary_roundtrip_bitexact(self, tmp_path):
        m = np.random.default_rng(0).normal(size=(7, 5))
        path = tmp_path / "m.bin"
        save_matrix_bin(path, m)
        assert np.array_equal(load_matrix_bin(path), m)

    def test_csv_roundtrip_10_digits(self, tmp_path):
        m = np.random.default_rng(1).random((4, 6))
        path = tmp_path / "m.csv"
        save_matrix_csv(path, m, [f"u{i}" for i in range(4)], [f"d{j}" for j in range(6)])
        values, users, items = load_matrix_csv(path)
        assert users == [f"u{i}" for i in range(4)]
        assert items == [f"d{j}" for j in range(6)]
        assert values == pytest.approx(m, rel=1e-9)

    def test_truncated_binary_rejected(self, tmp_path):
        path = tmp_path / "m.bin"
        save_matrix_bin(path, np.ones((3, 3)))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DataError):
            load_matrix_bin(path)

    def test_csv_bad_header(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("wrong,a,b\n")
        with pytest.raises(DataError):
            load_matrix_csv(path)
