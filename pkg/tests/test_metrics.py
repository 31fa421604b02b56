import numpy as np
import pytest

from fairadv.errors import DegenerateDataError, DomainError
from fairadv.metrics import (
    REPORT_CSV_HEADER,
    SubgroupPartition,
    hard_predictions,
    hard_report,
    partition_from_arrays,
    partition_subgroups,
    relaxed_di,
    relaxed_eod,
    report_csv_row,
    report_from_arrays,
)
from fairadv.mlp import default_model, forward

from helpers import random_cell_soft, toy_dataset

# ---- independent brute-force oracles (pure python, no numpy reductions) ----


def bf_mean(values):
    return sum(float(v) for v in values) / len(values)


def bf_di(soft, sensitive):
    g0 = [f for f, a in zip(soft, sensitive) if a == 0]
    g1 = [f for f, a in zip(soft, sensitive) if a == 1]
    return abs(bf_mean(g1) - bf_mean(g0))


def bf_eod(soft, labels, sensitive):
    total = 0.0
    for y in (0, 1):
        cells = {k: [f for f, yy, a in zip(soft, labels, sensitive)
                     if yy == y and a == k] for k in (0, 1)}
        total += abs(bf_mean(cells[1]) - bf_mean(cells[0]))
    return total


def bf_rates(soft, labels, sensitive, threshold=0.5):
    """Per-group confusion tallies -> (acc, di_hard, eod_hard, tpr, tnr)."""
    pred = [1 if f >= threshold else 0 for f in soft]
    acc = bf_mean([1.0 if p == y else 0.0 for p, y in zip(pred, labels)])
    tpr, tnr, pos = {}, {}, {}
    for k in (0, 1):
        tp = sum(1 for p, y, a in zip(pred, labels, sensitive)
                 if a == k and y == 1 and p == 1)
        fn = sum(1 for p, y, a in zip(pred, labels, sensitive)
                 if a == k and y == 1 and p == 0)
        tn = sum(1 for p, y, a in zip(pred, labels, sensitive)
                 if a == k and y == 0 and p == 0)
        fp = sum(1 for p, y, a in zip(pred, labels, sensitive)
                 if a == k and y == 0 and p == 1)
        tpr[k] = tp / (tp + fn)
        tnr[k] = tn / (tn + fp)
        pos[k] = (tp + fp) / (tp + fn + tn + fp)
    di = abs(pos[1] - pos[0])
    eod = abs(tpr[0] - tpr[1]) + abs((1 - tnr[0]) - (1 - tnr[1]))
    return acc, di, eod, tpr, tnr


class TestRelaxedDi:
    def test_equal_scores_zero(self):
        soft = np.full(6, 0.5)
        a = np.array([0, 1, 0, 1, 0, 1])
        assert relaxed_di(soft, a) == 0.0

    def test_hand_example(self):
        soft = np.array([0.2, 0.4, 0.8])
        a = np.array([0, 0, 1])
        assert abs(relaxed_di(soft, a) - 0.5) < 1e-15

    def test_indicator_is_maximal(self):
        a = np.array([0, 0, 1, 1, 1])
        soft = a.astype(float)
        assert abs(relaxed_di(soft, a) - 1.0) < 1e-12

    def test_empty_group_errors(self):
        with pytest.raises(DegenerateDataError):
            relaxed_di(np.array([0.1, 0.2]), np.array([1, 1]))

    def test_permutation_and_swap_invariance(self):
        rng = np.random.default_rng(0)
        soft, y, a = random_cell_soft(rng)
        perm = rng.permutation(len(soft))
        assert abs(relaxed_di(soft[perm], a[perm]) - relaxed_di(soft, a)) <= 1e-12
        assert relaxed_di(soft, 1 - a) == relaxed_di(soft, a)


class TestRelaxedEod:
    def test_equal_cell_means_zero(self):
        soft = np.array([0.3, 0.3, 0.7, 0.7])
        y = np.array([0, 0, 1, 1])
        a = np.array([0, 1, 0, 1])
        assert relaxed_eod(soft, y, a) == 0.0

    def test_indicator_is_two(self):
        rng = np.random.default_rng(1)
        _, y, a = random_cell_soft(rng)
        soft = a.astype(float)
        assert abs(relaxed_eod(soft, y, a) - 2.0) < 1e-12

    def test_eight_row_hand_set(self):
        soft = np.array([0.1, 0.9, 0.2, 0.8, 0.3, 0.7, 0.4, 0.6])
        y = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        a = np.array([0, 0, 1, 1, 0, 0, 1, 1])
        assert abs(relaxed_eod(soft, y, a) - bf_eod(soft, y, a)) < 1e-15

    def test_empty_cell_errors(self):
        soft = np.array([0.5, 0.5, 0.5])
        with pytest.raises(DegenerateDataError):
            relaxed_eod(soft, np.array([0, 0, 1]), np.array([0, 1, 0]))

    def test_simultaneous_swap_invariance(self):
        rng = np.random.default_rng(2)
        soft, y, a = random_cell_soft(rng)
        assert abs(relaxed_eod(soft, y, 1 - a)
                   - relaxed_eod(soft, y, a)) < 1e-15


class TestBruteForceAgreement:
    def test_hundred_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            soft, y, a = random_cell_soft(rng)
            assert abs(relaxed_di(soft, a) - bf_di(soft, a)) <= 1e-12
            assert abs(relaxed_eod(soft, y, a) - bf_eod(soft, y, a)) <= 1e-12
            report = report_from_arrays(soft, y, a)
            acc, di, eod, tpr, tnr = bf_rates(soft, y, a)
            assert abs(report.accuracy - acc) <= 1e-12
            assert abs(report.di_hard - di) <= 1e-12
            assert abs(report.eod_hard - eod) <= 1e-12
            for k, got in ((0, report.tpr_g0), (1, report.tpr_g1)):
                assert abs(got - tpr[k]) <= 1e-12
            for k, got in ((0, report.tnr_g0), (1, report.tnr_g1)):
                assert abs(got - tnr[k]) <= 1e-12


class TestHardPredictions:
    def test_scalar_threshold(self):
        soft = np.array([0.2, 0.5, 0.8])
        a = np.array([0, 1, 0])
        assert np.array_equal(hard_predictions(soft, a, 0.5),
                              np.array([0, 1, 1]))

    def test_per_group_thresholds(self):
        soft = np.array([0.45, 0.45, 0.65, 0.65])
        a = np.array([0, 1, 0, 1])
        yhat = hard_predictions(soft, a, (0.4, 0.6))
        assert np.array_equal(yhat, np.array([1, 0, 1, 1]))

    def test_nonfinite_threshold_rejected(self):
        with pytest.raises(DomainError):
            hard_predictions(np.array([0.5]), np.array([1]), np.nan)
        with pytest.raises(DomainError):
            hard_predictions(np.array([0.5]), np.array([1]), (0.5, np.inf))


class TestReports:
    def test_perfect_classifier(self):
        y = np.array([0, 0, 1, 1, 0, 1])
        a = np.array([0, 1, 0, 1, 1, 0])
        soft = np.where(y == 1, 0.9, 0.1)
        report = report_from_arrays(soft, y, a)
        assert report.accuracy == 1.0
        assert report.eod_hard == 0.0

    def test_constant_classifier(self):
        rng = np.random.default_rng(3)
        _, y, a = random_cell_soft(rng, sizes=(3, 4, 5, 2))
        soft = np.full(len(y), 0.9)
        report = report_from_arrays(soft, y, a)
        assert report.accuracy == y.mean()
        assert report.di_hard == 0.0

    def test_twelve_row_confusion_layout(self):
        # per group: g0 = 2 TP, 1 FN, 2 TN, 1 FP; g1 = 1 TP, 2 FN, 1 TN, 2 FP
        soft = np.array([0.9, 0.8, 0.2, 0.7, 0.3, 0.1,
                         0.6, 0.4, 0.3, 0.2, 0.8, 0.9])
        y = np.array([1, 1, 1, 0, 0, 0, 1, 1, 1, 0, 0, 0])
        a = np.array([0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1])
        report = report_from_arrays(soft, y, a)
        assert report.tpr_g0 == 2 / 3 and report.tpr_g1 == 1 / 3
        assert abs(report.tnr_g0 - 2 / 3) <= 1e-12
        assert abs(report.tnr_g1 - 1 / 3) <= 1e-12
        assert abs(report.eod_hard - 2 / 3) < 1e-12
        assert abs(report.di_hard - 0.0) < 1e-12   # both groups predict 3/6 positive
        assert report.accuracy == 0.5

    def test_hard_report_uses_fitted_thresholds(self):
        ds = toy_dataset()
        model = default_model(ds.n_features, seed=0)
        r_default = hard_report(model, ds, "test")
        assert r_default.threshold == (0.5, 0.5)
        shifted = model.with_thresholds(0.3, 0.7)
        r_shift = hard_report(shifted, ds, "test")
        assert r_shift.threshold == (0.3, 0.7)

    def test_csv_row_schema(self):
        rng = np.random.default_rng(4)
        soft, y, a = random_cell_soft(rng)
        row = report_csv_row(0.25, report_from_arrays(soft, y, a))
        assert len(row.split(",")) == len(REPORT_CSV_HEADER.split(","))
        assert row.startswith("0.25,")


class TestPartition:
    def test_tp0_aligned_tp1_misaligned(self):
        soft = np.array([0.9, 0.9])
        y = np.array([1, 1])
        a = np.array([0, 1])
        part = partition_from_arrays(soft, y, a)
        assert list(part.indices("tp", 0)) == [0]
        assert list(part.indices("tp", 1)) == [1]
        assert SubgroupPartition.alignment("tp", 0) == "aligned"
        assert SubgroupPartition.alignment("tp", 1) == "misaligned"

    def test_alignment_table(self):
        aligned = {("tp", 0), ("fn", 0), ("tn", 1), ("fp", 1)}
        for kind in ("tp", "fn", "tn", "fp"):
            for g in (0, 1):
                want = "aligned" if (kind, g) in aligned else "misaligned"
                assert SubgroupPartition.alignment(kind, g) == want

    def test_cells_partition_all_rows(self):
        rng = np.random.default_rng(5)
        soft, y, a = random_cell_soft(rng, sizes=(6, 6, 6, 6))
        part = partition_from_arrays(soft, y, a)
        all_idx = np.concatenate([part.indices(k, g)
                                  for k in ("tp", "fn", "tn", "fp")
                                  for g in (0, 1)])
        assert sorted(all_idx) == list(range(len(soft)))
        assert len(set(all_idx)) == len(all_idx)

    def test_partition_from_model(self):
        ds = toy_dataset()
        model = default_model(ds.n_features, seed=1)
        part = partition_subgroups(model, ds, "test")
        view = ds.view("test")
        soft = forward(model, view.features).soft_labels
        pred = (soft >= 0.5).astype(int)
        for i in part.indices("tp", 0):
            assert view.labels[i] == 1 and pred[i] == 1 and view.sensitive[i] == 0
