"""Two-step training loop, baselines, evaluation, semi-supervised split."""

import numpy as np
import pytest

from danet.core import RandomStream
from danet.data import Dataset, ShiftSpec, gen_synthetic_shift, zscore_apply, zscore_fit
from danet.errors import ConfigError, DataError, DegenerateBandwidthError, NonFiniteError
from danet.network import DannParams, print_model
from danet.trainer import (
    TrainConfig,
    evaluate,
    report_to_csv,
    semi_supervised_select,
    train_dann,
    train_nn,
)


def shifted_task(seed, per_class=20):
    spec = ShiftSpec(classes=2, per_class=per_class, spacing=2.0, angle_deg=30.0,
                     translation=(1.5, 0.0), noise_std=1.0)
    src, tgt = gen_synthetic_shift(spec, RandomStream(seed))
    stats = zscore_fit(src, tgt)
    return zscore_apply(src, stats), zscore_apply(tgt, stats)


def toy_labeled(seed=60, n_per=10):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(size=(n_per, 2)) + [1.5, 0.0],
                   rng.normal(size=(n_per, 2)) - [1.5, 0.0]])
    return Dataset(x, [0] * n_per + [1] * n_per, class_count=2)


class TestGammaZeroEquivalence:
    def test_bitwise_identical_models_and_reports(self):
        src, tgt = shifted_task(0)
        cfg = TrainConfig(iterations=10, hidden=16, seed=3, gamma=0.0)
        p_nn, r_nn = train_nn(src, tgt, cfg)
        p_red, r_red = train_dann(src, tgt, cfg)
        assert print_model(p_nn) == print_model(p_red)
        assert r_nn.j_nns == r_red.j_nns
        assert r_nn.mmd_sq == r_red.mmd_sq

    def test_train_nn_ignores_config_gamma(self):
        src, tgt = shifted_task(1)
        cfg = TrainConfig(iterations=5, hidden=16, seed=2, gamma=1e3)
        p_nn, r_nn = train_nn(src, tgt, cfg)
        p_base, _ = train_dann(src, tgt, TrainConfig(iterations=5, hidden=16, seed=2, gamma=0.0))
        assert print_model(p_nn) == print_model(p_base)
        assert r_nn.config.gamma == 0.0


class TestStepThreeLocality:
    def test_u2_untouched_by_mmd_step(self):
        src, tgt = shifted_task(2)
        with_mmd, _ = train_dann(src, tgt, TrainConfig(iterations=1, hidden=16, seed=3))
        without, _ = train_dann(src, tgt, TrainConfig(iterations=1, hidden=16, seed=3, gamma=0.0))
        assert np.array_equal(with_mmd.u2, without.u2)
        assert not np.array_equal(with_mmd.u1, without.u1)


class TestReports:
    def test_lengths_equal_iterations(self):
        src, tgt = shifted_task(3)
        _, report = train_dann(src, tgt, TrainConfig(iterations=7, hidden=8, seed=1))
        assert len(report.j_nns) == 7
        assert len(report.mmd_sq) == 7
        assert len(report.elapsed_ms) == 7

    def test_csv_shape_and_precision(self):
        src, tgt = shifted_task(4)
        _, report = train_dann(src, tgt, TrainConfig(iterations=5, hidden=8, seed=1))
        lines = report_to_csv(report).splitlines()
        assert lines[0] == "iter,j_nns,mmd_sq,elapsed_ms"
        assert len(lines) == 1 + 5 + 1
        cells = lines[1].split(",")
        assert int(cells[0]) == 1
        assert float(cells[1]) == report.j_nns[0]
        assert float(cells[2]) == report.mmd_sq[0]
        assert lines[-1].startswith("summary,seed=1,")

    def test_no_target_baseline_has_no_mmd_trace(self):
        _, report = train_nn(toy_labeled(), None, TrainConfig(iterations=3, hidden=8, seed=0))
        assert report.mmd_sq == []
        assert report.final_accuracy is None


class TestDeterminism:
    def test_same_seed_reproduces_run(self):
        src, tgt = shifted_task(5)
        cfg = TrainConfig(iterations=6, hidden=16, seed=11)
        p1, r1 = train_dann(src, tgt, cfg)
        p2, r2 = train_dann(src, tgt, cfg)
        assert print_model(p1) == print_model(p2)
        assert r1.j_nns == r2.j_nns
        assert r1.mmd_sq == r2.mmd_sq

    def test_different_seeds_differ(self):
        src, tgt = shifted_task(6)
        p1, _ = train_dann(src, tgt, TrainConfig(iterations=3, hidden=8, seed=1))
        p2, _ = train_dann(src, tgt, TrainConfig(iterations=3, hidden=8, seed=2))
        assert print_model(p1) != print_model(p2)


def test_mmd_pressure_shrinks_domain_gap():
    for seed in (0, 1):
        src, tgt = shifted_task(seed, per_class=50)
        _, report = train_dann(src, tgt, TrainConfig(iterations=60, hidden=32, seed=seed))
        assert report.mmd_sq[-1] < report.mmd_sq[0]


def test_nn_overfits_toy_set():
    toy = toy_labeled()
    cfg = TrainConfig(iterations=300, dropout_fraction=0.0, seed=1)
    params, _ = train_nn(toy, None, cfg)
    assert evaluate(params, toy) == 1.0


class TestEvaluate:
    @staticmethod
    def _always_class0_params(d=2, k=2, l=2):
        u2 = np.zeros((k + 1, l))
        u2[0, 0] = 10.0
        return DannParams(np.zeros((d + 1, k)), u2)

    def test_all_correct(self):
        params = self._always_class0_params()
        ds = Dataset(np.random.default_rng(61).normal(size=(5, 2)), [0] * 5, class_count=1)
        assert evaluate(params, ds) == 1.0

    def test_all_wrong(self):
        params = self._always_class0_params()
        ds = Dataset(np.random.default_rng(62).normal(size=(4, 2)), [1] * 4, class_count=2)
        assert evaluate(params, ds) == 0.0

    def test_three_of_four(self):
        params = self._always_class0_params()
        ds = Dataset(np.random.default_rng(63).normal(size=(4, 2)), [0, 0, 0, 1], class_count=2)
        assert evaluate(params, ds) == 0.75

    def test_needs_labels(self):
        params = self._always_class0_params()
        with pytest.raises(DataError):
            evaluate(params, Dataset(np.ones((2, 2))))

    def test_empty_test_set(self):
        with pytest.raises(DataError):
            evaluate(self._always_class0_params(), None)


class TestSemiSupervisedSelect:
    def test_exact_pool_leaves_empty_remainder(self):
        pool = Dataset(np.arange(12.0).reshape(6, 2), [0, 0, 0, 1, 1, 1], class_count=2)
        selected, remainder = semi_supervised_select(pool, per_class=3)
        assert selected.n == 6
        assert remainder is None

    def test_counts_ten_classes(self):
        labels = np.repeat(np.arange(10), 5)
        rng = np.random.default_rng(64)
        pool = Dataset(rng.normal(size=(50, 3)), labels, class_count=10)
        selected, remainder = semi_supervised_select(pool, per_class=3)
        assert selected.n == 30 and remainder.n == 20

    def test_order_stable_under_tail_permutation(self):
        rng = np.random.default_rng(65)
        feats = rng.normal(size=(10, 2))
        labels = np.array([0, 0, 0, 0, 0, 1, 1, 1, 1, 1])
        pool = Dataset(feats, labels, class_count=2)
        # shuffle only the rows after each class's first three
        perm = np.array([0, 1, 2, 4, 3, 5, 6, 7, 9, 8])
        pool_perm = Dataset(feats[perm], labels[perm], class_count=2)
        sel_a, _ = semi_supervised_select(pool, per_class=3)
        sel_b, _ = semi_supervised_select(pool_perm, per_class=3)
        assert np.array_equal(sel_a.features, sel_b.features)
        assert np.array_equal(sel_a.labels, sel_b.labels)

    def test_insufficient_class(self):
        pool = Dataset(np.ones((4, 2)), [0, 0, 0, 1], class_count=2)
        with pytest.raises(DataError, match="class 1"):
            semi_supervised_select(pool, per_class=3)

    def test_disjoint_partition(self):
        rng = np.random.default_rng(66)
        pool = Dataset(rng.normal(size=(20, 2)), rng.permutation([0] * 10 + [1] * 10),
                       class_count=2)
        selected, remainder = semi_supervised_select(pool, per_class=3)
        assert selected.n + remainder.n == pool.n
        sel_rows = {tuple(r) for r in selected.features}
        rem_rows = {tuple(r) for r in remainder.features}
        assert not (sel_rows & rem_rows)


class TestSemiSupervisedTraining:
    def test_labeled_rows_join_supervision_and_mmd(self):
        src, tgt = shifted_task(7, per_class=20)
        selected, remainder = semi_supervised_select(tgt, per_class=3)
        cfg = TrainConfig(iterations=4, hidden=8, seed=5, setting="semi_supervised")
        params, report = train_dann(src, remainder, cfg, target_labeled=selected)
        assert report.final_accuracy is not None
        assert len(report.mmd_sq) == 4

    def test_setting_mismatches_rejected(self):
        src, tgt = shifted_task(8)
        semi = TrainConfig(iterations=1, hidden=8, setting="semi_supervised")
        with pytest.raises(ConfigError):
            train_dann(src, tgt, semi)
        unsup = TrainConfig(iterations=1, hidden=8)
        selected, remainder = semi_supervised_select(tgt, per_class=3)
        with pytest.raises(ConfigError):
            train_dann(src, remainder, unsup, target_labeled=selected)


class TestInitialization:
    def test_pretraining_changes_only_u1(self):
        src, tgt = shifted_task(9)
        plain = TrainConfig(iterations=0, hidden=8, seed=4)
        dae = TrainConfig(iterations=0, hidden=8, seed=4, pretraining="dae", dae_epochs=5)
        p_plain, _ = train_dann(src, tgt, plain)
        p_dae, _ = train_dann(src, tgt, dae)
        assert np.array_equal(p_plain.u2, p_dae.u2)
        assert not np.array_equal(p_plain.u1, p_dae.u1)

    def test_explicit_u1_init(self):
        src, tgt = shifted_task(10)
        u1 = np.full((3, 8), 0.01)
        cfg = TrainConfig(iterations=0, hidden=8, seed=4)
        params, _ = train_dann(src, tgt, cfg, u1_init=u1)
        assert np.array_equal(params.u1, u1)

    def test_u1_init_and_pretraining_conflict(self):
        src, tgt = shifted_task(11)
        cfg = TrainConfig(iterations=0, hidden=8, pretraining="dae")
        with pytest.raises(ConfigError):
            train_dann(src, tgt, cfg, u1_init=np.zeros((3, 8)))

    def test_u1_init_shape_checked(self):
        src, tgt = shifted_task(12)
        cfg = TrainConfig(iterations=0, hidden=8)
        with pytest.raises(Exception):
            train_dann(src, tgt, cfg, u1_init=np.zeros((3, 4)))


class TestValidation:
    def test_config_ranges(self):
        for kwargs in (
            dict(lr=0.0),
            dict(iterations=-1),
            dict(momentum=1.0),
            dict(dropout_fraction=1.0),
            dict(gamma=-1.0),
            dict(batch_size=0),
            dict(hidden=0),
            dict(setting="transductive"),
            dict(pretraining="rbm"),
        ):
            with pytest.raises(ConfigError):
                TrainConfig(**kwargs)

    def test_unlabeled_source_rejected(self):
        tgt = Dataset(np.random.default_rng(67).normal(size=(5, 2)))
        with pytest.raises(DataError):
            train_dann(Dataset(np.ones((3, 2))), tgt, TrainConfig(iterations=1, hidden=4))

    def test_gamma_without_target_rejected(self):
        with pytest.raises(ConfigError):
            train_dann(toy_labeled(), None, TrainConfig(iterations=1, hidden=4))

    def test_degenerate_source_bandwidth(self):
        src = Dataset(np.ones((6, 2)), [0, 0, 0, 1, 1, 1], class_count=2)
        tgt = Dataset(np.random.default_rng(68).normal(size=(6, 2)))
        with pytest.raises(DegenerateBandwidthError):
            train_dann(src, tgt, TrainConfig(iterations=1, hidden=4))

    def test_divergence_reports_iteration(self):
        src, tgt = shifted_task(13)
        cfg = TrainConfig(iterations=30, hidden=8, seed=0, lr=1e8,
                          dropout_fraction=0.0, gamma=0.0)
        with pytest.raises(NonFiniteError, match="iteration"):
            train_dann(src, tgt, cfg)
