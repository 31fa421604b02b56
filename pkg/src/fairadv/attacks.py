"""Signed-gradient evasion attacks on binary MLP classifiers.

All three attacks run projected gradient steps inside an L-infinity ball of
radius epsilon around the clean features, optionally intersected with the
[0,1] feature box:

    x_{t+1} = project(x_t + step * sign(g_t))

where g_t is the per-sample input gradient of the chosen objective:

  accuracy  per-sample cross-entropy (raise the loss, flip predictions)
  di        group mean soft-label gap: advantaged-group samples step toward
            higher f, disadvantaged toward lower f
  eod       per true-label group gap: within each (y, a) cell the step sign
            follows the derivative of that label slice's absolute gap

Group means are recomputed every iteration by default, so the attack follows
the subgradient of the absolute-value objective; a fixed policy keeps the
iteration-0 direction for ablation. Both the ball projection and the box
clip are axis-aligned, so applying them in sequence is the exact projection
onto their intersection.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import SplitView
from .errors import DegenerateDataError, DomainError
from .metrics import FairnessReport, relaxed_di, relaxed_eod, report_from_arrays
from .mlp import MlpModel, ForwardTrace, backward_loss, cross_entropy, forward

OBJECTIVES = ("accuracy", "di", "eod")
SIGN_POLICIES = ("dynamic_per_iteration", "fixed_initial")

TRACE_CSV_HEADER = "iter,objective_value,accuracy,di,eod"


@dataclass(frozen=True)
class AttackConfig:
    objective: str
    epsilon: float
    step: float | None = None          # None = epsilon / 10
    iterations: int = 20
    box: bool = True                   # clip to the [0,1] feature box
    group_sign_policy: str = "dynamic_per_iteration"
    record_trajectory: bool = False    # keep per-iteration feature matrices
    chunk_size: int | None = None      # row-chunked gradients, same output

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise DomainError(f"objective must be one of {OBJECTIVES}")
        if self.group_sign_policy not in SIGN_POLICIES:
            raise DomainError(f"group_sign_policy must be one of {SIGN_POLICIES}")
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise DomainError("epsilon must be a finite non-negative real")
        if self.step is None:
            object.__setattr__(self, "step", self.epsilon / 10.0)
        if self.epsilon > 0 and not self.step > 0:
            raise DomainError("step must be positive")
        if self.iterations < 1:
            raise DomainError("iterations must be >= 1")
        if self.chunk_size is not None and self.chunk_size < 1:
            raise DomainError("chunk_size must be >= 1 when set")
        if self.step * self.iterations < self.epsilon:
            warnings.warn(
                "step * iterations < epsilon: the attack cannot reach the "
                "ball boundary", stacklevel=3)


@dataclass(frozen=True)
class AttackResult:
    config: AttackConfig
    clean_features: np.ndarray            # (N, d) input snapshot
    features_adv: np.ndarray               # (N, d) final iterate
    objective_values: np.ndarray            # (T+1,), index 0 = clean
    reports: tuple                           # (T+1,) FairnessReport or None
    soft_trajectory: np.ndarray              # (T+1, N) soft labels per iterate
    feature_trajectory: np.ndarray | None    # (T+1, N, d) when recorded

    def __post_init__(self):
        for arr in (self.clean_features, self.features_adv,
                    self.objective_values, self.soft_trajectory):
            arr.flags.writeable = False
        if self.feature_trajectory is not None:
            self.feature_trajectory.flags.writeable = False


def soft_label_delta(result: AttackResult) -> np.ndarray:
    """Per-sample |f(x_final) - f(x_clean)|, always non-negative."""
    return np.abs(result.soft_trajectory[-1] - result.soft_trajectory[0])


def iteration_soft_deltas(result: AttackResult) -> np.ndarray:
    """Per-iteration per-sample |f(x_t) - f(x_{t-1})|, shape (T, N)."""
    return np.abs(np.diff(result.soft_trajectory, axis=0))


def _objective_value(objective, soft, labels, sensitive):
    if objective == "accuracy":
        return float(cross_entropy(soft, labels).mean())
    if objective == "di":
        return relaxed_di(soft, sensitive)
    return relaxed_eod(soft, labels, sensitive)


def _full_report(soft, labels, sensitive, threshold):
    """Snapshot metrics, or None when the slice lacks a (y, a) cell."""
    y, a = labels, sensitive
    for j in (0, 1):
        for k in (0, 1):
            if not ((y == j) & (a == k)).any():
                return None
    return report_from_arrays(soft, y, a, threshold)


def _di_signs(soft, sensitive, locked) -> np.ndarray:
    """+1 for samples in the advantaged group (higher mean f, tie -> a=1)."""
    if locked is not None:
        return locked
    mean1 = soft[sensitive == 1].mean()
    mean0 = soft[sensitive == 0].mean()
    advantaged = 1 if mean1 >= mean0 else 0
    return np.where(sensitive == advantaged, 1.0, -1.0)


def _eod_signs(soft, labels, sensitive, locked) -> np.ndarray:
    """Per-sample sign from the per-label group gap derivative.

    Within true-label slice y the objective term is |mean_{y,1} - mean_{y,0}|;
    samples on the larger side step up, the smaller side steps down. An exact
    tie treats group 1 as the larger side.
    """
    if locked is not None:
        return locked
    signs = np.zeros(len(soft))
    for j in (0, 1):
        in_y = labels == j
        gap = soft[in_y & (sensitive == 1)].mean() - soft[in_y & (sensitive == 0)].mean()
        sigma = 1.0 if gap >= 0 else -1.0
        signs[in_y] = np.where(sensitive[in_y] == 1, sigma, -sigma)
    return signs


def _input_grad(model, trace, loss_kind, values, chunk_size) -> np.ndarray:
    if chunk_size is None:
        return backward_loss(model, trace, loss_kind, values).input_grad
    n = trace.inputs.shape[0]
    grad = np.zeros_like(trace.inputs)
    for start in range(0, n, chunk_size):
        stop = min(start + chunk_size, n)
        sub = ForwardTrace(
            inputs=trace.inputs[start:stop],
            pre_activations=tuple(z[start:stop] for z in trace.pre_activations),
            activations=tuple(h[start:stop] for h in trace.activations),
            soft_labels=trace.soft_labels[start:stop])
        grad[start:stop] = backward_loss(model, sub, loss_kind,
                                         values[start:stop]).input_grad
    return grad


def _run_pgd(model: MlpModel, view: SplitView, cfg: AttackConfig) -> AttackResult:
    x0 = np.asarray(view.features, dtype=np.float64).copy()
    labels = np.asarray(view.labels).astype(np.int64)
    sensitive = np.asarray(view.sensitive).astype(np.int64)
    threshold = model.group_thresholds if model.group_thresholds is not None else 0.5

    lower = x0 - cfg.epsilon
    upper = x0 + cfg.epsilon
    if cfg.box:
        lower = np.maximum(lower, 0.0)
        upper = np.minimum(upper, 1.0)
        x0 = np.clip(x0, 0.0, 1.0)
    movable = ~view.frozen_mask if view.frozen_mask is not None else None

    x = x0.copy()
    trace = forward(model, x)
    n_steps = cfg.iterations
    objective_values = np.zeros(n_steps + 1)
    soft_traj = np.zeros((n_steps + 1, len(labels)))
    reports: list[FairnessReport | None] = []
    feat_traj = (np.zeros((n_steps + 1,) + x0.shape)
                 if cfg.record_trajectory else None)

    locked_signs = None
    for t in range(n_steps + 1):
        soft_traj[t] = trace.soft_labels
        objective_values[t] = _objective_value(cfg.objective, trace.soft_labels,
                                               labels, sensitive)
        reports.append(_full_report(trace.soft_labels, labels, sensitive, threshold))
        if feat_traj is not None:
            feat_traj[t] = x
        if t == n_steps:
            break

        if cfg.objective == "accuracy":
            grad = _input_grad(model, trace, "ce", labels, cfg.chunk_size)
        else:
            if cfg.objective == "di":
                signs = _di_signs(trace.soft_labels, sensitive, locked_signs)
            else:
                signs = _eod_signs(trace.soft_labels, labels, sensitive, locked_signs)
            if cfg.group_sign_policy == "fixed_initial":
                locked_signs = signs
            grad = _input_grad(model, trace, "signed_soft_label", signs,
                               cfg.chunk_size)

        step = cfg.step * np.sign(grad)
        if movable is not None:
            step = step * movable
        x = np.clip(x + step, lower, upper)
        trace = forward(model, x)

    return AttackResult(
        config=cfg, clean_features=view.features.copy(), features_adv=x,
        objective_values=objective_values, reports=tuple(reports),
        soft_trajectory=soft_traj, feature_trajectory=feat_traj)


def pgd_accuracy(model: MlpModel, view: SplitView, cfg: AttackConfig) -> AttackResult:
    """Raise per-sample cross-entropy inside the perturbation ball."""
    if cfg.objective != "accuracy":
        raise DomainError(f"config objective is {cfg.objective!r}, wanted 'accuracy'")
    return _run_pgd(model, view, cfg)


def pgd_di(model: MlpModel, view: SplitView, cfg: AttackConfig) -> AttackResult:
    """Widen the group mean soft-label gap inside the perturbation ball."""
    if cfg.objective != "di":
        raise DomainError(f"config objective is {cfg.objective!r}, wanted 'di'")
    a = np.asarray(view.sensitive)
    if not ((a == 0).any() and (a == 1).any()):
        raise DegenerateDataError("both sensitive groups must be present")
    return _run_pgd(model, view, cfg)


def pgd_eod(model: MlpModel, view: SplitView, cfg: AttackConfig) -> AttackResult:
    """Widen the per-label group gaps inside the perturbation ball."""
    if cfg.objective != "eod":
        raise DomainError(f"config objective is {cfg.objective!r}, wanted 'eod'")
    y, a = np.asarray(view.labels), np.asarray(view.sensitive)
    for j in (0, 1):
        for k in (0, 1):
            if not ((y == j) & (a == k)).any():
                raise DegenerateDataError(f"cell (y={j}, a={k}) is empty")
    return _run_pgd(model, view, cfg)


def run_attack(model: MlpModel, view: SplitView, cfg: AttackConfig) -> AttackResult:
    """Dispatch on cfg.objective."""
    return {"accuracy": pgd_accuracy, "di": pgd_di, "eod": pgd_eod}[cfg.objective](
        model, view, cfg)


def trace_csv_lines(result: AttackResult) -> list[str]:
    """Per-iteration trace rows: objective plus hard metric snapshots."""
    lines = [TRACE_CSV_HEADER]
    for t, (value, report) in enumerate(zip(result.objective_values, result.reports)):
        if report is None:
            lines.append("%d,%.17g,,," % (t, value))
        else:
            lines.append("%d,%.17g,%.17g,%.17g,%.17g"
                         % (t, value, report.accuracy, report.di_hard, report.eod_hard))
    return lines
