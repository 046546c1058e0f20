import numpy as np
import pytest

from jmefair.exposure import BrowsingModel, target_exposure
from jmefair.metrics import GroupMap, gg_f, ii_f
from jmefair.toys import toy_group_maps, toy_system, toy_target
from jmefair.trainer import (
    MFModel,
    TrainerConfig,
    batch_loss_and_grads,
    differentiable_exposure,
    grad_check,
    gumbel_perturb,
    gumbel_noise,
    load_checkpoint,
    loss_jme,
    ndcg_at_k,
    save_checkpoint,
    smooth_rank,
    train,
)


def tiny_setup(n_users=3, n_items=4, dim=2, seed=7, alpha=1.0, l2=1e-3, samples=3):
    rng = np.random.default_rng(seed)
    model = MFModel.init(n_users, n_items, dim, seed=seed)
    labels = (rng.random((n_users, n_items)) < 0.5).astype(np.int8)
    labels[labels.sum(axis=1) == 0, 0] = 1
    bm = BrowsingModel(gamma=0.8, normalized=True)
    e_star = target_exposure(labels, bm).values
    half_u, half_d = n_users // 2 or 1, n_items // 2 or 1
    ug = GroupMap.from_members(
        "user", n_users, {"a": list(range(half_u)), "b": list(range(half_u, n_users))}
    )
    ig = GroupMap.from_members(
        "item", n_items, {"x": list(range(half_d)), "y": list(range(half_d, n_items))}
    )
    cfg = TrainerConfig(
        alpha=alpha, n_rank_samples=samples, l2=l2, embedding_dim=dim, epochs=1
    )
    return model, e_star, ug, ig, cfg


class TestForwardScores:
    def test_zero_items_zero_scores(self):
        model = MFModel(np.ones((2, 3)), np.zeros((4, 3)))
        from jmefair.trainer import forward_scores

        assert not forward_scores(model, [0, 1]).any()

    def test_scalar_products(self):
        from jmefair.trainer import forward_scores

        model = MFModel(np.array([[2.0]]), np.array([[1.0], [3.0]]))
        assert forward_scores(model, [0]).tolist() == [[2.0, 6.0]]

    def test_orthogonal_vectors(self):
        from jmefair.trainer import forward_scores

        model = MFModel(np.array([[1.0, 0.0]]), np.array([[0.0, 5.0]]))
        assert forward_scores(model, [0])[0, 0] == 0.0


class TestGumbelPerturb:
    def test_zero_noise_is_softmax(self):
        y = np.array([1.0, 2.0, 0.5])
        w = gumbel_perturb(y)
        ref = np.exp(y - y.max())
        ref /= ref.sum()
        assert w == pytest.approx(ref, rel=1e-14)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        w = gumbel_perturb(rng.normal(size=(5, 6)) * 100, rng=rng)
        assert w.sum(axis=1) == pytest.approx(np.ones(5))

    def test_equal_scores_weight_expectation_half(self):
        rng = np.random.default_rng(1)
        w = gumbel_perturb(np.zeros((10_000, 2)), rng=rng)
        assert float(w[:, 0].mean()) == pytest.approx(0.5, abs=0.02)

    def test_gumbel_max_matches_softmax(self):
        y = np.array([0.7, -0.2, 0.1])
        rng = np.random.default_rng(2)
        draws = 100_000
        z = y[None, :] + gumbel_noise(rng, (draws, 3))
        freq = np.bincount(z.argmax(axis=1), minlength=3) / draws
        ref = np.exp(y - y.max())
        ref /= ref.sum()
        assert freq == pytest.approx(ref, abs=0.01)


class TestSmoothRank:
    def test_equal_weights_rank_two(self):
        for tau in (0.05, 0.5, 2.0):
            assert smooth_rank(np.full(3, 1 / 3), tau) == pytest.approx(
                np.full(3, 2.0)
            )

    def test_hard_sort_limit(self):
        ranks = smooth_rank(np.array([0.5, 0.2, 0.3]), 1e-5)
        assert ranks == pytest.approx([1.0, 3.0, 2.0], abs=1e-8)

    def test_unit_tau_value(self):
        ranks = smooth_rank(np.array([0.5, 0.3, 0.2]), 1.0)
        assert ranks[0] == pytest.approx(1.8757234858758631, rel=1e-12)

    def test_tau_must_be_positive(self):
        with pytest.raises(ValueError):
            smooth_rank(np.array([0.5, 0.5]), 0.0)


class TestDifferentiableExposure:
    def test_rank_one(self):
        assert differentiable_exposure(np.array(1.0), 0.8) == pytest.approx(0.2)

    def test_rank_two(self):
        assert differentiable_exposure(np.array(2.0), 0.8) == pytest.approx(0.16)

    def test_two_sample_mean(self):
        e = differentiable_exposure(np.array([1.0, 2.0]), 0.8)
        assert e.mean() == pytest.approx(0.18)

    def test_unnormalized(self):
        assert differentiable_exposure(np.array(1.0), 0.8, normalized=False) == 1.0


class TestLossJme:
    def test_alpha_zero_is_ii(self):
        users, items = toy_group_maps()
        e, t = toy_system("e"), toy_target()
        assert loss_jme(e, t, users, items, 0.0) == ii_f(e, t)

    def test_zero_at_target(self):
        users, items = toy_group_maps()
        t = toy_target()
        assert loss_jme(t, t, users, items, 5.0) == 0.0

    def test_toy_e_alpha_one(self):
        users, items = toy_group_maps()
        value = loss_jme(toy_system("e"), toy_target(), users, items, 1.0)
        assert value == pytest.approx(0.125, abs=1e-12)

    def test_negative_alpha_rejected(self):
        users, items = toy_group_maps()
        with pytest.raises(ValueError):
            loss_jme(toy_target(), toy_target(), users, items, -1.0)


class TestBackward:
    def test_gradients_vanish_at_optimum(self):
        # when realized exposure equals the target, the data term is stationary
        model, _, ug, ig, cfg = tiny_setup(alpha=2.0, l2=0.0)
        users = np.arange(3)
        noise = gumbel_noise(np.random.default_rng(0), (3, cfg.n_rank_samples, 4))
        first = batch_loss_and_grads(
            model, users, np.zeros((3, 4)), ug.weight_matrix(), ig.weight_matrix(),
            cfg, noise,
        )
        at_optimum = batch_loss_and_grads(
            model, users, first.exposure, ug.weight_matrix(), ig.weight_matrix(),
            cfg, noise,
        )
        assert at_optimum.loss == pytest.approx(0.0, abs=1e-16)
        assert np.abs(at_optimum.d_user).max() < 1e-8
        assert np.abs(at_optimum.d_item).max() < 1e-8

    def test_finite_difference_agreement(self):
        model, e_star, ug, ig, cfg = tiny_setup()
        report = grad_check(model, e_star, ug, ig, cfg, rng=np.random.default_rng(1))
        assert report.passed, report

    def test_alpha_linearity(self):
        model, e_star, ug, ig, _ = tiny_setup(l2=0.0)
        users = np.arange(3)
        noise = gumbel_noise(np.random.default_rng(2), (3, 5, 4))
        grads = {}
        for alpha in (0.0, 1.0, 2.0):
            cfg = TrainerConfig(alpha=alpha, n_rank_samples=5, l2=0.0,
                                embedding_dim=2, epochs=1)
            g = batch_loss_and_grads(
                model, users, e_star, ug.weight_matrix(), ig.weight_matrix(), cfg, noise
            )
            grads[alpha] = g
        lhs = grads[2.0].d_user - grads[0.0].d_user
        rhs = 2.0 * (grads[1.0].d_user - grads[0.0].d_user)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_repeated_backward_identical(self):
        model, e_star, ug, ig, cfg = tiny_setup()
        users = np.arange(3)
        noise = gumbel_noise(np.random.default_rng(3), (3, cfg.n_rank_samples, 4))
        a = batch_loss_and_grads(
            model, users, e_star, ug.weight_matrix(), ig.weight_matrix(), cfg, noise
        )
        b = batch_loss_and_grads(
            model, users, e_star, ug.weight_matrix(), ig.weight_matrix(), cfg, noise
        )
        assert a.loss == b.loss
        assert np.array_equal(a.d_user, b.d_user)
        assert np.array_equal(a.d_item, b.d_item)

    def test_gradcheck_sizes_sweep(self):
        # a few random instances across the size range
        rng = np.random.default_rng(4)
        for nU, nD, dim in ((3, 4, 2), (5, 8, 4), (10, 20, 8)):
            model, e_star, ug, ig, cfg = tiny_setup(nU, nD, dim, seed=int(rng.integers(1e6)))
            users = rng.choice(nU, size=min(3, nU), replace=False)
            report = grad_check(
                model, e_star[users], ug, ig, cfg, users=users,
                rng=np.random.default_rng(5),
            )
            assert report.passed, (nU, nD, dim, report)


class TestTraining:
    def test_ii_improves_on_synthetic(self, synth_bundle):
        from jmefair.data import build_group_maps

        cfg = TrainerConfig(alpha=0.0, epochs=5, n_rank_samples=10, batch_size=16,
                            embedding_dim=8, learning_rate=5e-2, l2=0.0, seed=3,
                            eval_samples=50)
        model = MFModel.init(
            synth_bundle.catalog.n_users, synth_bundle.catalog.n_items,
            cfg.embedding_dim, cfg.seed,
        )
        result = train(model, synth_bundle, cfg,
                       build_group_maps(synth_bundle, "gender"),
                       build_group_maps(synth_bundle, "genre"))
        iis = [row.ii_val for row in result.trace]
        assert iis[-1] < iis[0]
        # monotone decrease up to MC noise
        assert all(b <= a * 1.05 for a, b in zip(iis, iis[1:]))

    def test_zero_learning_rate_keeps_parameters(self, synth_bundle):
        from jmefair.data import build_group_maps

        cfg = TrainerConfig(alpha=0.0, epochs=1, n_rank_samples=2, batch_size=16,
                            embedding_dim=4, learning_rate=0.0, seed=1, eval_samples=5)
        model = MFModel.init(
            synth_bundle.catalog.n_users, synth_bundle.catalog.n_items,
            cfg.embedding_dim, cfg.seed,
        )
        before_u, before_v = model.user_vecs.copy(), model.item_vecs.copy()
        train(model, synth_bundle, cfg,
              build_group_maps(synth_bundle, "gender"),
              build_group_maps(synth_bundle, "genre"))
        assert np.array_equal(model.user_vecs, before_u)
        assert np.array_equal(model.item_vecs, before_v)

    def test_seeded_rerun_identical_trace(self, synth_bundle):
        from jmefair.data import build_group_maps

        def run():
            cfg = TrainerConfig(alpha=1.0, epochs=2, n_rank_samples=4, batch_size=16,
                                embedding_dim=4, learning_rate=1e-2, seed=9,
                                eval_samples=10)
            model = MFModel.init(
                synth_bundle.catalog.n_users, synth_bundle.catalog.n_items,
                cfg.embedding_dim, cfg.seed,
            )
            result = train(model, synth_bundle, cfg,
                           build_group_maps(synth_bundle, "gender"),
                           build_group_maps(synth_bundle, "genre"))
            return [(r.loss, r.ii_val, r.gg_val, r.ndcg_val) for r in result.trace]

        assert run() == run()

    def test_unsplit_bundle_rejected(self, synth_dir):
        from jmefair.data import build_group_maps, load_movielens

        bundle = load_movielens(synth_dir, "ml100k")
        cfg = TrainerConfig(embedding_dim=4, epochs=1)
        model = MFModel.init(bundle.catalog.n_users, bundle.catalog.n_items, 4, 0)
        with pytest.raises(ValueError):
            train(model, bundle, cfg,
                  build_group_maps(bundle, "gender"),
                  build_group_maps(bundle, "genre"))


class TestNdcg:
    def test_single_relevant_at_rank_one(self):
        scores = np.array([[3.0, 2.0, 1.0]])
        labels = np.array([[1, 0, 0]])
        assert ndcg_at_k(scores, labels, 3) == 1.0

    def test_single_relevant_at_rank_two(self):
        scores = np.array([[3.0, 2.0, 1.0]])
        labels = np.array([[0, 1, 0]])
        assert ndcg_at_k(scores, labels, 2) == pytest.approx(1 / np.log2(3))

    def test_none_retrieved(self):
        scores = np.array([[3.0, 2.0, 1.0, 0.5]])
        labels = np.array([[0, 0, 0, 1]])
        assert ndcg_at_k(scores, labels, 2) == 0.0

    def test_user_without_labels_excluded(self):
        scores = np.array([[3.0, 2.0], [2.0, 3.0]])
        labels = np.array([[1, 0], [0, 0]])
        assert ndcg_at_k(scores, labels, 2) == 1.0

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(6)
        scores = rng.normal(size=(5, 12))
        labels = (rng.random((5, 12)) < 0.3).astype(int)
        a = ndcg_at_k(scores, labels, 5)
        b = ndcg_at_k(np.exp(scores * 2), labels, 5)
        assert a == pytest.approx(b, rel=1e-12)

    def test_exclusion_mask(self):
        scores = np.array([[5.0, 4.0, 3.0]])
        labels = np.array([[0, 1, 0]])
        exclude = np.array([[True, False, False]])
        assert ndcg_at_k(scores, labels, 1, exclude=exclude) == 1.0


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        model = MFModel.init(5, 7, 3, seed=2)
        cfg = TrainerConfig(embedding_dim=3)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, model, cfg)
        loaded, chash = load_checkpoint(path)
        assert np.array_equal(loaded.user_vecs, model.user_vecs)
        assert np.array_equal(loaded.item_vecs, model.item_vecs)
        assert loaded.seed == model.seed
        assert len(chash) == 16

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTAMODEL")
        from jmefair.errors import DataError

        with pytest.raises(DataError):
            load_checkpoint(path)


class TestConfigValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            TrainerConfig(alpha=-1)
        with pytest.raises(ValueError):
            TrainerConfig(tau=0.0)
        with pytest.raises(ValueError):
            TrainerConfig(gamma=0.0)
        with pytest.raises(ValueError):
            TrainerConfig(batch_size=0)
