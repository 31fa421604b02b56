import numpy as np
import pytest

from fairadv.attacks import (
    AttackConfig,
    iteration_soft_deltas,
    pgd_accuracy,
    pgd_di,
    pgd_eod,
    run_attack,
    soft_label_delta,
    trace_csv_lines,
)
from fairadv.data import SplitView
from fairadv.errors import DegenerateDataError, DomainError
from fairadv.mlp import MlpModel, new_model, predict

from helpers import toy_view


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def line_model(w=2.0, b=0.0):
    return MlpModel((1, 1), (np.array([[w]]),), (np.array([b]),))


def view1d(x, y, a, frozen=False):
    x = np.asarray(x, dtype=float)[:, None]
    return SplitView(features=x, labels=np.asarray(y, dtype=np.int64),
                     sensitive=np.asarray(a, dtype=np.int64),
                     column_names=("x0",),
                     frozen_mask=np.array([frozen]))


class TestConfig:
    def test_default_step_is_tenth(self):
        cfg = AttackConfig(objective="di", epsilon=0.3)
        assert cfg.step == 0.03

    def test_bad_objective(self):
        with pytest.raises(DomainError):
            AttackConfig(objective="stealth", epsilon=0.1)

    def test_negative_epsilon(self):
        with pytest.raises(DomainError):
            AttackConfig(objective="di", epsilon=-0.1)

    def test_short_budget_warns(self):
        with pytest.warns(UserWarning):
            AttackConfig(objective="di", epsilon=0.5, step=0.01, iterations=3)


class TestAccuracyAttack:
    def test_epsilon_zero_is_identity(self):
        view = toy_view()
        model = new_model((4, 3, 1), seed=0)
        res = pgd_accuracy(model, view, AttackConfig("accuracy", 0.0))
        assert np.array_equal(res.features_adv, view.features)
        assert np.all(soft_label_delta(res) == 0.0)

    def test_single_signed_step_hand_example(self):
        # w=2, y=1, x=0.5: CE gradient in x is -(1-f)w < 0, so one step of
        # size 0.1 moves x to 0.4
        view = view1d([0.5], [1], [1])
        res = pgd_accuracy(line_model(2.0), view,
                           AttackConfig("accuracy", 0.1, step=0.1, iterations=1))
        assert abs(res.features_adv[0, 0] - 0.4) < 1e-15

    def test_ce_rises_on_most_instances(self):
        rng = np.random.default_rng(0)
        rises = 0
        for trial in range(20):
            view = toy_view(n=30, seed=trial, d=5)
            model = new_model((5, 4, 1), seed=trial)
            res = pgd_accuracy(model, view, AttackConfig("accuracy", 0.2))
            rises += res.objective_values[-1] >= res.objective_values[0]
        assert rises >= 19

    def test_projection_box(self):
        rng = np.random.default_rng(1)
        view = toy_view(n=50, seed=3, d=6)
        eps = 0.15
        res = pgd_accuracy(new_model((6, 5, 1), seed=2), view,
                           AttackConfig("accuracy", eps, step=0.06, iterations=10))
        lo = np.maximum(view.features - eps, 0.0)
        hi = np.minimum(view.features + eps, 1.0)
        assert np.all(res.features_adv >= lo) and np.all(res.features_adv <= hi)
        assert np.max(np.abs(res.features_adv - view.features)) <= eps + 1e-12


class TestDiAttack:
    def test_advantaged_sample_pushed_up(self):
        # group 1 mean is higher, so its sample follows +grad f; w>0 makes
        # that a positive x step, and the other sample moves down
        view = view1d([0.5, 0.5], [1, 0], [1, 0])
        res = pgd_di(line_model(2.0), view,
                     AttackConfig("di", 0.1, step=0.1, iterations=1))
        x0, x1 = view.features[:, 0]
        assert res.features_adv[0, 0] == pytest.approx(x0 + 0.1)
        assert res.features_adv[1, 0] == pytest.approx(x1 - 0.1)

    def test_equal_means_tie_break_sends_group1_up(self):
        view = view1d([0.5, 0.5], [1, 0], [0, 1])   # identical scores
        res = pgd_di(line_model(2.0), view,
                     AttackConfig("di", 0.1, step=0.1, iterations=1))
        assert res.features_adv[1, 0] > view.features[1, 0]   # a=1 up
        assert res.features_adv[0, 0] < view.features[0, 0]   # a=0 down

    def test_one_group_slice_is_degenerate(self):
        view = view1d([0.2, 0.6], [0, 1], [1, 1])
        with pytest.raises(DegenerateDataError):
            pgd_di(line_model(), view, AttackConfig("di", 0.1))

    def test_di_non_decreasing_over_radii(self):
        view = toy_view(n=60, seed=5, d=5)
        model = new_model((5, 4, 1), seed=5)
        values = []
        for eps in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5):
            res = pgd_di(model, view, AttackConfig("di", eps))
            values.append(res.objective_values[-1])
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_fixed_initial_policy_differs_when_groups_flip(self):
        # valley-shaped score surface: the disadvantaged sample overshoots
        # the valley onto the higher right tail, so the advantaged group
        # flips after one step; dynamic re-evaluation reacts, locked signs
        # keep marching both samples back where they came from
        model = MlpModel((1, 3, 1),
                         (np.array([[10.0, 10.0, 1.0]]),
                          np.array([[-5.0], [5.0], [2.0]])),
                         (np.array([-4.0, -6.0, 0.0]), np.array([0.0])),
                         hidden_activation="tanh")
        view = view1d([0.36, 0.38], [1, 0], [1, 0])
        kw = dict(epsilon=0.66, step=0.33, iterations=2)
        dyn = pgd_di(model, view, AttackConfig("di", **kw))
        fix = pgd_di(model, view, AttackConfig(
            "di", group_sign_policy="fixed_initial", **kw))
        soft0 = predict(model, view.features)
        assert soft0[0] > soft0[1]     # group 1 starts advantaged
        assert not np.array_equal(dyn.features_adv, fix.features_adv)

    def test_frozen_coordinates_do_not_move(self):
        features = np.random.default_rng(0).uniform(size=(20, 4))
        frozen = np.array([False, True, False, True])
        view = SplitView(features=features,
                         labels=np.tile([0, 1], 10).astype(np.int64),
                         sensitive=np.tile([0, 0, 1, 1], 5).astype(np.int64),
                         column_names=("a", "b", "c", "d"), frozen_mask=frozen)
        res = pgd_di(new_model((4, 3, 1), seed=1), view,
                     AttackConfig("di", 0.2))
        assert np.array_equal(res.features_adv[:, frozen],
                              view.features[:, frozen])
        assert not np.array_equal(res.features_adv[:, ~frozen],
                                  view.features[:, ~frozen])


class TestEodAttack:
    def test_epsilon_zero_unchanged(self):
        view = toy_view(n=24, seed=2)
        model = new_model((4, 3, 1), seed=3)
        res = pgd_eod(model, view, AttackConfig("eod", 0.0))
        assert np.array_equal(res.features_adv, view.features)

    def test_empty_cell_is_degenerate(self):
        view = view1d([0.2, 0.4, 0.6], [0, 0, 1], [0, 1, 0])
        with pytest.raises(DegenerateDataError):
            pgd_eod(line_model(), view, AttackConfig("eod", 0.1))

    def test_matches_di_when_same_group_larger_in_both_cells(self):
        # group 1 scores higher within y=0 and within y=1, so the per-cell
        # sign pattern equals the plain group pattern for the first step
        x = np.array([0.30, 0.50, 0.40, 0.60])
        view = view1d(x, [0, 0, 1, 1], [0, 1, 0, 1])
        model = line_model(3.0, -1.0)
        di = pgd_di(model, view, AttackConfig("di", 0.1, step=0.1, iterations=1))
        eod = pgd_eod(model, view, AttackConfig("eod", 0.1, step=0.1, iterations=1))
        assert np.array_equal(di.features_adv, eod.features_adv)

    def test_eod_non_decreasing_over_radii(self):
        view = toy_view(n=48, seed=6, d=5)
        model = new_model((5, 4, 1), seed=7)
        values = []
        for eps in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5):
            res = pgd_eod(model, view, AttackConfig("eod", eps))
            values.append(res.objective_values[-1])
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


class TestResultContract:
    def test_soft_label_delta_closed_form(self):
        view = view1d([0.5], [1], [1])
        w = 2.0
        res = pgd_accuracy(line_model(w), view,
                           AttackConfig("accuracy", 0.1, step=0.1, iterations=1))
        want = abs(sigmoid(w * 0.4) - sigmoid(w * 0.5))
        assert abs(soft_label_delta(res)[0] - want) < 1e-12

    def test_deltas_non_negative_and_shapes(self):
        view = toy_view(n=30, seed=8)
        model = new_model((4, 4, 1), seed=8)
        cfg = AttackConfig("di", 0.2, step=0.05, iterations=6,
                           record_trajectory=True)
        res = pgd_di(model, view, cfg)
        assert soft_label_delta(res).min() >= 0.0
        assert iteration_soft_deltas(res).shape == (6, 30)
        assert res.soft_trajectory.shape == (7, 30)
        assert res.feature_trajectory.shape == (7, 30, 4)
        assert np.array_equal(res.feature_trajectory[0], view.features)
        assert np.array_equal(res.feature_trajectory[-1], res.features_adv)

    def test_chunked_gradients_identical(self):
        view = toy_view(n=25, seed=9, d=5)
        model = new_model((5, 3, 1), seed=9)
        full = pgd_eod(model, view, AttackConfig("eod", 0.2, step=0.05,
                                                 iterations=5))
        chunked = pgd_eod(model, view, AttackConfig("eod", 0.2, step=0.05,
                                                    iterations=5, chunk_size=4))
        assert np.array_equal(full.features_adv, chunked.features_adv)
        assert np.array_equal(full.objective_values, chunked.objective_values)

    def test_dispatch_and_objective_guard(self):
        view = toy_view()
        model = new_model((4, 3, 1), seed=0)
        cfg = AttackConfig("di", 0.1)
        res = run_attack(model, view, cfg)
        assert res.config.objective == "di"
        with pytest.raises(DomainError):
            pgd_accuracy(model, view, cfg)

    def test_trace_lines(self):
        view = toy_view(n=16, seed=4)
        model = new_model((4, 3, 1), seed=4)
        res = pgd_di(model, view, AttackConfig("di", 0.1, step=0.04,
                                               iterations=3))
        lines = trace_csv_lines(res)
        assert lines[0] == "iter,objective_value,accuracy,di,eod"
        assert len(lines) == 5
        assert lines[1].startswith("0,")

    def test_trace_handles_missing_cells(self):
        # DI attack runs with an empty (y=1, a=1) cell; snapshots skip the
        # full report but the objective column is still present
        view = view1d([0.2, 0.8, 0.5], [0, 1, 0], [1, 0, 0])
        res = pgd_di(line_model(), view, AttackConfig("di", 0.1, step=0.05,
                                                      iterations=2))
        lines = trace_csv_lines(res)
        assert all(ln.endswith(",,,") for ln in lines[1:])

    def test_clean_row_of_trajectory_is_clean_forward(self):
        view = toy_view(n=20, seed=11)
        model = new_model((4, 3, 1), seed=11)
        res = pgd_di(model, view, AttackConfig("di", 0.3))
        assert np.array_equal(res.soft_trajectory[0],
                              predict(model, view.features))
