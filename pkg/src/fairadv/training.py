"""Model training: plain ERM, adversarial training against the accuracy or
group-gap attacks, and three fairness hooks around the adversarial trainer.

All modes share one SGD loop over group-stratified minibatches (every batch
receives a proportional share of each (y, a) cell, so batch fairness terms
are always defined and modes differ only in what they add to the loss).
Consequences used by the test suite: accuracy-adversarial training with a
zero perturbation budget is bit-identical to ERM, and the inprocessing mode
with a zero fairness weight is bit-identical to accuracy-adversarial
training.

  erm            minimize mean cross-entropy on clean batches
  adv_acc        minimize cross-entropy on accuracy-attacked batches
  adv_di         minimize cross-entropy on group-gap-attacked batches
  fair_adv_in    cross-entropy on attacked batch + weight * odds gap on the
                 clean batch
  fair_adv_pre   learn per-sample weights that shrink the demographic gap,
                 then weighted adv_acc
  fair_adv_post  adv_acc on part of the training split, then per-group
                 decision thresholds fitted on the held-out remainder
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .attacks import AttackConfig, pgd_accuracy, pgd_di
from .data import LabeledDataset, SplitView
from .errors import DegenerateDataError, DomainError, TrainingError
from .mlp import (GradientPair, MlpModel, backward_loss, cross_entropy, forward,
                  new_model, sgd_step)

MODES = ("erm", "adv_acc", "adv_di", "fair_adv_pre", "fair_adv_in", "fair_adv_post")

LOG_CSV_HEADER = "epoch,loss,ce,fair_term,train_acc"

THRESHOLD_GRID = np.round(np.arange(0.01, 1.0, 0.01), 2)


@dataclass(frozen=True)
class TrainConfig:
    mode: str
    epochs: int = 40
    batch_size: int = 128
    lr: float = 0.5
    train_epsilon: float = 0.0         # attack radius for the adversarial modes
    inner_step: float | None = None    # None = train_epsilon / 4
    inner_iterations: int = 7
    fairness_weight: float = 1.0       # odds-gap weight for fair_adv_in
    preprocess_iterations: int = 5
    preprocess_rate: float = 1.0
    preprocess_epochs: int = 10
    val_fraction: float = 0.2          # held out of training for fair_adv_post
    hidden_dims: tuple[int, ...] = (32, 16)
    activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")
        if self.train_epsilon < 0:
            raise DomainError("train_epsilon must be non-negative")
        if self.fairness_weight < 0:
            raise DomainError("fairness_weight must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise DomainError("epochs and batch_size must be positive")
        if not (0.0 < self.val_fraction < 1.0):
            raise DomainError("val_fraction must be in (0,1)")

    def inner_attack(self, objective: str) -> AttackConfig:
        step = self.inner_step if self.inner_step is not None else self.train_epsilon / 4.0
        return AttackConfig(objective=objective, epsilon=self.train_epsilon,
                            step=step, iterations=self.inner_iterations)


@dataclass(frozen=True)
class SampleWeights:
    """Non-negative per-row training weights, mean-normalized to 1."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise DomainError("weights must be a non-empty vector")
        if (v < 0).any():
            raise DomainError("weights must be non-negative")
        if abs(float(v.mean()) - 1.0) > 1e-9:
            raise DomainError("weights must average to 1")
        object.__setattr__(self, "values", v)
        v.flags.writeable = False


@dataclass(frozen=True)
class PostprocessThresholds:
    threshold_g0: float
    threshold_g1: float

    def __post_init__(self):
        for t in (self.threshold_g0, self.threshold_g1):
            if not (0.0 < t < 1.0):
                raise DomainError("thresholds must lie in (0,1)")

    def as_tuple(self) -> tuple[float, float]:
        return (self.threshold_g0, self.threshold_g1)


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    loss: float
    ce: float
    fair_term: float
    train_acc: float


@dataclass(frozen=True)
class TrainResult:
    model: MlpModel
    log: tuple[EpochLog, ...]
    config: TrainConfig
    sample_weights: SampleWeights | None = None
    thresholds: PostprocessThresholds | None = None


def log_csv_lines(result: TrainResult) -> list[str]:
    lines = [LOG_CSV_HEADER]
    for row in result.log:
        lines.append("%d,%.17g,%.17g,%.17g,%.17g"
                     % (row.epoch, row.loss, row.ce, row.fair_term, row.train_acc))
    return lines


def _stratified_batches(labels, sensitive, batch_size, rng):
    """Batch index lists where each (y, a) cell contributes proportionally."""
    n = len(labels)
    n_batches = max(1, int(np.ceil(n / batch_size)))
    cell_chunks = []
    for j in (0, 1):
        for k in (0, 1):
            idx = np.flatnonzero((labels == j) & (sensitive == k))
            if idx.size:
                cell_chunks.append(np.array_split(rng.permutation(idx), n_batches))
    return [np.concatenate([chunks[b] for chunks in cell_chunks])
            for b in range(n_batches)]


def _require_cells(labels, sensitive, what):
    for j in (0, 1):
        for k in (0, 1):
            if not ((labels == j) & (sensitive == k)).any():
                raise DegenerateDataError(f"{what}: cell (y={j}, a={k}) is empty")


def _eod_coefficients(soft, labels, sensitive):
    """Batch odds gap and d(gap)/d(soft label) per sample (subgradient of the
    absolute values at the current iterate; exact zero gap treats group 1 as
    the larger side)."""
    value = 0.0
    coef = np.zeros(len(soft))
    for j in (0, 1):
        cell1 = (labels == j) & (sensitive == 1)
        cell0 = (labels == j) & (sensitive == 0)
        gap = float(soft[cell1].mean()) - float(soft[cell0].mean())
        value += abs(gap)
        sigma = 1.0 if gap >= 0 else -1.0
        coef[cell1] = sigma / cell1.sum()
        coef[cell0] = -sigma / cell0.sum()
    return value, coef


def _combine_grads(base: GradientPair, extra: GradientPair, scale: float) -> GradientPair:
    return GradientPair(
        input_grad=base.input_grad,
        weight_grads=tuple(bw + scale * ew for bw, ew
                           in zip(base.weight_grads, extra.weight_grads)),
        bias_grads=tuple(bb + scale * eb for bb, eb
                         in zip(base.bias_grads, extra.bias_grads)))


def _sgd_loop(features, labels, sensitive, frozen_mask, column_names, cfg,
              mode, weights=None):
    """Shared epoch/batch loop. `mode` here is erm, adv_acc, adv_di, or
    fair_adv_in; wrappers handle the pre/post hooks."""
    n, d = features.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    model = new_model((d, *cfg.hidden_dims, 1), cfg.activation, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    attack_objective = "di" if mode == "adv_di" else "accuracy"
    lam = cfg.fairness_weight if mode == "fair_adv_in" else 0.0
    log = []

    for epoch in range(cfg.epochs):
        ce_sum = 0.0
        fair_sum = 0.0
        n_seen = 0
        for idx in _stratified_batches(labels, sensitive, cfg.batch_size, rng):
            bx, by, ba, bw = features[idx], labels[idx], sensitive[idx], w[idx]
            if mode != "erm" and cfg.train_epsilon > 0:
                view = SplitView(features=bx, labels=by, sensitive=ba,
                                 column_names=column_names, frozen_mask=frozen_mask)
                attack = pgd_di if attack_objective == "di" else pgd_accuracy
                bx_in = attack(model, view, cfg.inner_attack(attack_objective)).features_adv
            else:
                bx_in = bx
            trace = forward(model, bx_in)
            batch_ce = float((cross_entropy(trace.soft_labels, by) * bw).sum() / len(idx))
            grads = backward_loss(model, trace, "ce", by, sample_weights=bw / len(idx))
            fair_value = 0.0
            if lam > 0:
                clean_trace = forward(model, bx)
                fair_value, coef = _eod_coefficients(clean_trace.soft_labels, by, ba)
                fair_grads = backward_loss(model, clean_trace, "signed_soft_label", coef)
                grads = _combine_grads(grads, fair_grads, lam)
            batch_loss = batch_ce + lam * fair_value
            if not np.isfinite(batch_loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            model = sgd_step(model, grads, cfg.lr)
            ce_sum += batch_ce * len(idx)
            fair_sum += fair_value * len(idx)
            n_seen += len(idx)
        ce_epoch = ce_sum / n_seen
        fair_epoch = fair_sum / n_seen
        train_acc = float(((forward(model, features).soft_labels >= 0.5)
                           .astype(np.int64) == labels).mean())
        log.append(EpochLog(epoch=epoch, loss=ce_epoch + lam * fair_epoch,
                            ce=ce_epoch, fair_term=fair_epoch, train_acc=train_acc))
    return model, tuple(log)


def reweigh_labels(ds: LabeledDataset, model_factory, iterations: int,
                   rate: float) -> SampleWeights:
    """Iterative per-sample reweighing that shrinks the demographic gap.

    Each round trains a probe model on the current weights (via
    ``model_factory(weights, round_index)``), measures the signed gap
    v = mean f | a=1  -  mean f | a=0 on the training split, and multiplies
    by exp(rate * |v|) the weights of the rows whose upweighting shrinks the
    gap: positives of the low-scored group and negatives of the high-scored
    group. Weights are renormalized to mean 1 every round.
    """
    if iterations < 1:
        raise DomainError("iterations must be >= 1")
    view = ds.view("train")
    _require_cells(view.labels, view.sensitive, "reweighing")
    y, a = view.labels, view.sensitive
    weights = np.ones(len(y))
    for r in range(iterations):
        model = model_factory(weights, r)
        soft = forward(model, view.features).soft_labels
        v = float(soft[a == 1].mean()) - float(soft[a == 0].mean())
        if v > 0:
            up = ((y == 1) & (a == 0)) | ((y == 0) & (a == 1))
        elif v < 0:
            up = ((y == 1) & (a == 1)) | ((y == 0) & (a == 0))
        else:
            continue
        weights = weights.copy()
        weights[up] *= np.exp(rate * abs(v))
        weights /= weights.mean()
    return SampleWeights(values=weights)


def fit_group_thresholds(model: MlpModel, view: SplitView) -> PostprocessThresholds:
    """Per-group decision thresholds minimizing the hard odds gap on a
    validation slice; ties broken by higher accuracy, then thresholds nearest
    0.5, then the smaller pair."""
    y, a = view.labels, view.sensitive
    _require_cells(y, a, "threshold fitting")
    soft = forward(model, view.features).soft_labels
    grid = THRESHOLD_GRID
    tpr, fpr, correct = {}, {}, {}
    for k in (0, 1):
        fk, yk = soft[a == k], y[a == k]
        hits = fk[:, None] >= grid[None, :]
        tpr[k] = hits[yk == 1].mean(axis=0)
        fpr[k] = hits[yk == 0].mean(axis=0)
        correct[k] = hits[yk == 1].sum(axis=0) + (~hits[yk == 0]).sum(axis=0)
    eod = (np.abs(tpr[0][:, None] - tpr[1][None, :])
           + np.abs(fpr[0][:, None] - fpr[1][None, :]))
    acc = (correct[0][:, None] + correct[1][None, :]) / len(y)
    dist = np.abs(grid - 0.5)[:, None] + np.abs(grid - 0.5)[None, :]
    t0g, t1g = np.meshgrid(grid, grid, indexing="ij")
    order = np.lexsort((t1g.ravel(), t0g.ravel(), dist.ravel(),
                        -acc.ravel(), eod.ravel()))
    i, j = np.unravel_index(order[0], eod.shape)
    return PostprocessThresholds(threshold_g0=float(grid[i]),
                                 threshold_g1=float(grid[j]))


def _validation_carve(labels, sensitive, fraction, rng):
    """Stratified row split of the training data into (core, validation)."""
    val = []
    for j in (0, 1):
        for k in (0, 1):
            idx = np.flatnonzero((labels == j) & (sensitive == k))
            n_val = max(1, int(round(fraction * idx.size))) if idx.size else 0
            if n_val:
                val.append(rng.permutation(idx)[:n_val])
    val_idx = np.sort(np.concatenate(val)) if val else np.array([], dtype=np.int64)
    core_idx = np.setdiff1d(np.arange(len(labels)), val_idx)
    if core_idx.size == 0 or val_idx.size == 0:
        raise DegenerateDataError("validation carve left a side empty")
    return core_idx, val_idx


def train(ds: LabeledDataset, cfg: TrainConfig) -> TrainResult:
    """Train one model on the training split of ``ds`` per ``cfg.mode``."""
    view = ds.view("train")
    if cfg.mode in ("adv_di", "fair_adv_in", "fair_adv_pre", "fair_adv_post"):
        _require_cells(view.labels, view.sensitive, cfg.mode)

    if cfg.mode == "fair_adv_pre":
        probe_cfg = replace(cfg, mode="erm", epochs=cfg.preprocess_epochs)

        def factory(weights, round_index):
            round_cfg = replace(probe_cfg, seed=cfg.seed + 7919 * (round_index + 1))
            model, _ = _sgd_loop(view.features, view.labels, view.sensitive,
                                 view.frozen_mask, view.column_names,
                                 round_cfg, "erm", weights=weights)
            return model

        sw = reweigh_labels(ds, factory, cfg.preprocess_iterations, cfg.preprocess_rate)
        model, log = _sgd_loop(view.features, view.labels, view.sensitive,
                               view.frozen_mask, view.column_names, cfg,
                               "adv_acc", weights=sw.values)
        return TrainResult(model=model, log=log, config=cfg, sample_weights=sw)

    if cfg.mode == "fair_adv_post":
        carve_rng = np.random.default_rng(cfg.seed + 500)
        core_idx, val_idx = _validation_carve(view.labels, view.sensitive,
                                              cfg.val_fraction, carve_rng)
        model, log = _sgd_loop(view.features[core_idx], view.labels[core_idx],
                               view.sensitive[core_idx], view.frozen_mask,
                               view.column_names, cfg, "adv_acc")
        val_view = SplitView(features=view.features[val_idx],
                             labels=view.labels[val_idx],
                             sensitive=view.sensitive[val_idx],
                             column_names=view.column_names,
                             frozen_mask=view.frozen_mask)
        thresholds = fit_group_thresholds(model, val_view)
        model = model.with_thresholds(*thresholds.as_tuple())
        return TrainResult(model=model, log=log, config=cfg, thresholds=thresholds)

    model, log = _sgd_loop(view.features, view.labels, view.sensitive,
                           view.frozen_mask, view.column_names, cfg, cfg.mode)
    return TrainResult(model=model, log=log, config=cfg)
