import numpy as np
import pytest

from fairadv.data import LabeledDataset, SplitView
from fairadv.errors import DegenerateDataError, DomainError, TrainingError
from fairadv.metrics import hard_report, report_from_arrays
from fairadv.mlp import MlpModel, default_model, forward
from fairadv.training import (
    LOG_CSV_HEADER,
    MODES,
    THRESHOLD_GRID,
    PostprocessThresholds,
    SampleWeights,
    TrainConfig,
    _sgd_loop,
    fit_group_thresholds,
    log_csv_lines,
    reweigh_labels,
    train,
)

from helpers import toy_dataset


def separable_dataset(n=160, seed=0, margin=0.1):
    """y = [x0 > 0.5] with a margin band removed; groups independent of y."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(4 * n, 3))
    x = x[np.abs(x[:, 0] - 0.5) > margin / 2][:n]
    y = (x[:, 0] > 0.5).astype(np.int64)
    a = (np.arange(n) % 2).astype(np.int64)
    split = np.array(["train"] * (n - n // 5) + ["test"] * (n // 5))
    return LabeledDataset(features=x, labels=y, sensitive=a, split=split,
                          column_names=("x0", "x1", "x2"))


def biased_dataset(n=240, seed=1, bias=2.0):
    """Positive rate much higher for a=1, with a feature (x2) that exposes
    group membership so models can pick the bias up."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(n, 3))
    a = (np.arange(n) % 2).astype(np.int64)
    x[:, 2] = 0.8 * a + 0.2 * x[:, 2]
    latent = bias * a + 2.0 * x[:, 0] + rng.normal(0, 0.5, n)
    y = (latent > np.median(latent)).astype(np.int64)
    split = np.array(["train"] * (n - n // 4) + ["test"] * (n // 4))
    return LabeledDataset(features=x, labels=y, sensitive=a, split=split,
                          column_names=("x0", "x1", "x2"))


def score_view(scores, labels, sensitive):
    """View whose single feature is the logit of the wanted soft label, so the
    identity-logit model below reproduces the scores through forward()."""
    s = np.asarray(scores, dtype=np.float64)
    return SplitView(features=np.log(s / (1.0 - s))[:, None],
                     labels=np.asarray(labels, dtype=np.int64),
                     sensitive=np.asarray(sensitive, dtype=np.int64),
                     column_names=("s",), frozen_mask=np.zeros(1, dtype=bool))


def logit_model():
    """Single sigmoid unit with unit weight: f(x) = sigmoid(x)."""
    return MlpModel((1, 1), (np.array([[1.0]]),), (np.array([0.0]),))


def models_equal(m1, m2):
    return (all(np.array_equal(w1, w2) for w1, w2 in zip(m1.weights, m2.weights))
            and all(np.array_equal(b1, b2) for b1, b2 in zip(m1.biases, m2.biases))
            and m1.group_thresholds == m2.group_thresholds)


class TestConfig:
    def test_bad_mode(self):
        with pytest.raises(DomainError):
            TrainConfig(mode="sgd")

    def test_negative_epsilon(self):
        with pytest.raises(DomainError):
            TrainConfig(mode="adv_acc", train_epsilon=-0.1)

    def test_negative_fairness_weight(self):
        with pytest.raises(DomainError):
            TrainConfig(mode="fair_adv_in", fairness_weight=-1.0)

    def test_bad_val_fraction(self):
        with pytest.raises(DomainError):
            TrainConfig(mode="fair_adv_post", val_fraction=1.0)

    def test_inner_attack_defaults(self):
        attack = TrainConfig(mode="adv_acc", train_epsilon=0.2).inner_attack("accuracy")
        assert attack.step == 0.05
        assert attack.iterations == 7
        assert attack.epsilon == 0.2


class TestSampleWeights:
    def test_mean_must_be_one(self):
        with pytest.raises(DomainError):
            SampleWeights(values=np.array([1.0, 2.0]))

    def test_non_negative(self):
        with pytest.raises(DomainError):
            SampleWeights(values=np.array([4.0, 1.0, -1.0, 0.0]))


class TestErm:
    def test_separable_toy_high_accuracy(self):
        ds = separable_dataset()
        res = train(ds, TrainConfig(mode="erm", epochs=200, batch_size=32,
                                    lr=1.0, seed=0))
        assert res.log[-1].train_acc >= 0.99

    def test_erm_fair_term_zero(self):
        res = train(toy_dataset(), TrainConfig(mode="erm", epochs=3))
        assert all(row.fair_term == 0.0 for row in res.log)
        assert all(row.loss == row.ce for row in res.log)

    def test_seed_determinism_all_modes(self):
        ds = toy_dataset(n_train=48, n_test=24)
        for mode in MODES:
            cfg = TrainConfig(mode=mode, epochs=2, train_epsilon=0.05, seed=3,
                              preprocess_iterations=2, preprocess_epochs=2)
            assert models_equal(train(ds, cfg).model, train(ds, cfg).model), mode

    def test_divergence_raises_with_epoch(self):
        # features at astronomical scale overflow the hidden layers into
        # NaN, which the loop must report rather than keep iterating on
        ds = separable_dataset(n=80)
        ds = LabeledDataset(features=ds.features * 1e300, labels=ds.labels,
                            sensitive=ds.sensitive, split=ds.split,
                            column_names=ds.column_names)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(TrainingError, match="epoch"):
                train(ds, TrainConfig(mode="erm", epochs=5))


class TestModeEquivalences:
    def test_adv_acc_zero_epsilon_equals_erm(self):
        ds = toy_dataset(n_train=60, n_test=24)
        erm = train(ds, TrainConfig(mode="erm", epochs=4, seed=1))
        adv = train(ds, TrainConfig(mode="adv_acc", train_epsilon=0.0,
                                    epochs=4, seed=1))
        assert models_equal(erm.model, adv.model)
        assert [r.loss for r in erm.log] == [r.loss for r in adv.log]

    def test_fair_adv_in_zero_weight_equals_adv_acc(self):
        ds = toy_dataset(n_train=60, n_test=24)
        adv = train(ds, TrainConfig(mode="adv_acc", train_epsilon=0.1,
                                    epochs=4, seed=2))
        fair = train(ds, TrainConfig(mode="fair_adv_in", train_epsilon=0.1,
                                     fairness_weight=0.0, epochs=4, seed=2))
        assert models_equal(adv.model, fair.model)

    def test_fairness_penalty_reduces_odds_gap(self):
        ds = biased_dataset()
        base = train(ds, TrainConfig(mode="erm", epochs=30, seed=0))
        fair = train(ds, TrainConfig(mode="fair_adv_in", train_epsilon=0.0,
                                     fairness_weight=2.0, epochs=30, seed=0))
        r0 = hard_report(base.model, ds, "train")
        r1 = hard_report(fair.model, ds, "train")
        assert r1.eod_relaxed < r0.eod_relaxed

    def test_fairness_modes_require_cells(self):
        n = 12
        ds = LabeledDataset(features=np.random.default_rng(0).uniform(size=(n, 2)),
                            labels=np.ones(n, dtype=np.int64),
                            sensitive=(np.arange(n) % 2).astype(np.int64),
                            split=np.array(["train"] * (n - 2) + ["test"] * 2),
                            column_names=("u", "v"))
        with pytest.raises(DegenerateDataError):
            train(ds, TrainConfig(mode="fair_adv_in", epochs=1))


def quick_factory(ds, epochs=8):
    """Cheap probe trainer for the reweighing loop."""
    view = ds.view("train")

    def factory(weights, round_index):
        cfg = TrainConfig(mode="erm", epochs=epochs, seed=round_index)
        model, _ = _sgd_loop(view.features, view.labels, view.sensitive,
                             view.frozen_mask, view.column_names, cfg,
                             "erm", weights=weights)
        return model

    return factory


class TestReweighing:
    def test_rate_zero_gives_unit_weights(self):
        ds = biased_dataset()
        sw = reweigh_labels(ds, quick_factory(ds), iterations=3, rate=0.0)
        assert np.all(sw.values == 1.0)

    def test_unbiased_data_keeps_weights_near_one(self):
        ds = separable_dataset(n=200, seed=5)
        sw = reweigh_labels(ds, quick_factory(ds), iterations=3, rate=0.5)
        assert np.max(np.abs(sw.values - 1.0)) < 0.05

    def test_planted_bias_upweights_disadvantaged_positives(self):
        ds = biased_dataset(seed=2)
        sw = reweigh_labels(ds, quick_factory(ds), iterations=5, rate=1.0)
        view = ds.view("train")
        w_pos_dis = sw.values[(view.labels == 1) & (view.sensitive == 0)]
        w_neg_dis = sw.values[(view.labels == 0) & (view.sensitive == 0)]
        assert w_pos_dis.mean() > 1.0
        assert w_pos_dis.mean() > w_neg_dis.mean()

    def test_bad_iterations(self):
        ds = biased_dataset()
        with pytest.raises(DomainError):
            reweigh_labels(ds, quick_factory(ds), iterations=0, rate=1.0)

    def test_fair_adv_pre_attaches_weights(self):
        cfg = TrainConfig(mode="fair_adv_pre", epochs=3, train_epsilon=0.05,
                          preprocess_iterations=2, preprocess_epochs=4)
        res = train(biased_dataset(), cfg)
        assert res.sample_weights is not None
        assert abs(res.sample_weights.values.mean() - 1.0) <= 1e-9


def brute_force_thresholds(soft, y, a):
    """Reference selection: full scan of the grid with the documented
    tie-break order (odds gap, accuracy, distance from 0.5, smaller pair)."""
    grid = THRESHOLD_GRID
    tpr, fpr = {}, {}
    for k in (0, 1):
        tpr[k] = [np.mean(soft[(a == k) & (y == 1)] >= t) for t in grid]
        fpr[k] = [np.mean(soft[(a == k) & (y == 0)] >= t) for t in grid]
    best_key, best = None, None
    n = len(y)
    for i, t0 in enumerate(grid):
        n0_correct = (np.sum(soft[(a == 0) & (y == 1)] >= t0)
                      + np.sum(soft[(a == 0) & (y == 0)] < t0))
        for j, t1 in enumerate(grid):
            n1_correct = (np.sum(soft[(a == 1) & (y == 1)] >= t1)
                          + np.sum(soft[(a == 1) & (y == 0)] < t1))
            eod = abs(tpr[0][i] - tpr[1][j]) + abs(fpr[0][i] - fpr[1][j])
            acc = (n0_correct + n1_correct) / n
            key = (eod, -acc, abs(t0 - 0.5) + abs(t1 - 0.5), t0, t1)
            if best_key is None or key < best_key:
                best_key, best = key, (float(t0), float(t1))
    return best


class TestThresholdFitting:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        scores = rng.uniform(0.02, 0.98, 60)
        y = (scores + rng.normal(0, 0.3, 60) > 0.5).astype(np.int64)
        a = (np.arange(60) % 2).astype(np.int64)
        view = score_view(scores, y, a)
        model = logit_model()
        got = fit_group_thresholds(model, view).as_tuple()
        soft = forward(model, view.features).soft_labels
        assert got == brute_force_thresholds(soft, y, a)

    def test_already_fair_keeps_half(self):
        # identical score/label pattern in both groups: many ties at odds gap
        # zero and accuracy one, and the distance tie-break keeps (0.5, 0.5)
        scores = np.tile([0.2, 0.4, 0.6, 0.8], 4)
        y = np.tile([0, 0, 1, 1], 4)
        a = np.repeat([0, 1], 8)
        thr = fit_group_thresholds(logit_model(), score_view(scores, y, a))
        assert thr.as_tuple() == (0.5, 0.5)

    def test_shifted_scores_shift_group1_threshold(self):
        rng = np.random.default_rng(3)
        s0 = np.concatenate([rng.uniform(0.05, 0.42, 30),
                             rng.uniform(0.58, 0.85, 30)])
        y0 = np.repeat([0, 1], 30)
        scores = np.concatenate([s0, s0 + 0.1])
        y = np.concatenate([y0, y0])
        a = np.repeat([0, 1], 60)
        thr = fit_group_thresholds(logit_model(), score_view(scores, y, a))
        t0, t1 = thr.as_tuple()
        assert t1 > t0
        soft = forward(logit_model(), score_view(scores, y, a).features).soft_labels
        rep = report_from_arrays(soft, y, a, (t0, t1))
        assert rep.eod_hard == 0.0 and rep.accuracy == 1.0

    def test_fitted_no_worse_than_default(self):
        ds = biased_dataset(seed=4)
        model = default_model(3, seed=4)
        view = ds.view("train")
        thr = fit_group_thresholds(model, view)
        soft = forward(model, view.features).soft_labels
        fitted = report_from_arrays(soft, view.labels, view.sensitive,
                                    thr.as_tuple())
        default = report_from_arrays(soft, view.labels, view.sensitive, 0.5)
        assert fitted.eod_hard <= default.eod_hard

    def test_threshold_bounds_validated(self):
        with pytest.raises(DomainError):
            PostprocessThresholds(threshold_g0=0.0, threshold_g1=0.5)

    def test_fair_adv_post_attaches_thresholds(self):
        cfg = TrainConfig(mode="fair_adv_post", epochs=3, train_epsilon=0.05)
        res = train(biased_dataset(), cfg)
        assert res.thresholds is not None
        assert res.model.group_thresholds == res.thresholds.as_tuple()
        report = hard_report(res.model, biased_dataset(), "test")
        assert report.threshold == res.thresholds.as_tuple()


class TestLogs:
    def test_log_schema(self):
        res = train(toy_dataset(), TrainConfig(mode="fair_adv_in", epochs=3,
                                               train_epsilon=0.05))
        lines = log_csv_lines(res)
        assert lines[0] == LOG_CSV_HEADER == "epoch,loss,ce,fair_term,train_acc"
        assert len(lines) == 4
        first = lines[1].split(",")
        assert first[0] == "0" and len(first) == 5

    def test_log_roundtrip_values(self):
        res = train(toy_dataset(), TrainConfig(mode="erm", epochs=2))
        line = log_csv_lines(res)[2].split(",")
        assert float(line[1]) == res.log[1].loss
        assert float(line[4]) == res.log[1].train_acc
