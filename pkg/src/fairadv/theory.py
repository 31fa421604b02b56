"""Mechanical audits of the alignment structure between accuracy attacks and
group-gap attacks.

Four families of checks:

* an algebraic lower bound relating the odds-gap objective to a weighted
  group-gap objective, with its two limit cases (forcing one group's soft
  labels to 1 maximizes both objectives; a flipped per-cell pattern maximizes
  the odds gap while the plain group gap stays small);
* a sign-pattern identity: per coordinate, the accuracy attack's step
  direction equals the group-gap attack's for samples in the aligned
  confusion cells and is exactly opposite in the misaligned cells;
* transfer bounds: the spread of per-sample loss change under the group-gap
  attack is bounded through the partner sample's accuracy-attack robustness
  (and vice versa for soft-label shift), using an empirically sampled
  gradient-Lipschitz constant. These are first-order bounds, so they are
  audited and reported, never asserted;
* a perturbed-gap triangle inequality: the group gap after a gap attack is
  at most the clean gap plus the per-group mean soft-label change. This one
  is exact algebra and is asserted hard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacks import (AttackConfig, AttackResult, iteration_soft_deltas,
                      pgd_accuracy, pgd_di, soft_label_delta)
from .data import SplitView
from .errors import DegenerateDataError, DomainError
from .metrics import partition_from_arrays, relaxed_di, relaxed_eod
from .mlp import MlpModel, backward_loss, cross_entropy, forward

SOFT_FLOOR = 1e-12      # clamp for soft-label denominators in bound terms

AUDIT_CSV_HEADER = "pair_id,lhs,rhs,slack,holds"


def check_odds_gap_lower_bound(soft_labels, labels, sensitive):
    """Odds gap >= |signed sum of per-cell mean soft labels|.

    Returns (lhs, rhs, holds). The right side adds the y=0 and y=1 group
    gaps with their signs folded together, so it can only be smaller in
    magnitude than the sum of absolute gaps on the left.
    """
    lhs = relaxed_eod(soft_labels, labels, sensitive)
    f = np.asarray(soft_labels, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    a = np.asarray(sensitive).ravel()
    cell_mean = {}
    for j in (0, 1):
        for k in (0, 1):
            cell = f[(y == j) & (a == k)]
            if cell.size == 0:
                raise DegenerateDataError(f"cell (y={j}, a={k}) is empty")
            cell_mean[(j, k)] = float(cell.mean())
    rhs = abs(cell_mean[(0, 0)] + cell_mean[(1, 0)]
              - cell_mean[(0, 1)] - cell_mean[(1, 1)])
    return lhs, rhs, bool(lhs >= rhs - 1e-12)


def check_attack_sign_alignment(model: MlpModel, view: SplitView,
                                threshold=0.5) -> dict:
    """Componentwise sign comparison of the two attacks' step directions.

    For each populated (confusion cell, group) the returned fraction is the
    share of coordinates, over all samples in the cell and all coordinates
    with a nonzero soft-label gradient, where the accuracy-attack direction
    matches the group-gap direction (aligned cells) or exactly opposes it
    (misaligned cells). Both gradients reuse one forward trace, so the
    comparison is an identity and the fractions are exactly 1. Empty cells
    are reported as None.
    """
    if model.group_thresholds is not None:
        threshold = model.group_thresholds
    trace = forward(model, view.features)
    y = np.asarray(view.labels).astype(np.int64)
    a = np.asarray(view.sensitive).astype(np.int64)
    ce_grad = backward_loss(model, trace, "ce", y).input_grad
    gap_signs = np.where(a == 1, 1.0, -1.0)
    gap_grad = backward_loss(model, trace, "signed_soft_label", gap_signs).input_grad
    soft_grad = gap_grad * gap_signs[:, None]     # d f / d x rows

    partition = partition_from_arrays(trace.soft_labels, y, a, threshold)
    fractions = {}
    for (kind, group), idx in partition.cells.items():
        if idx.size == 0:
            fractions[(kind, group)] = None
            continue
        live = soft_grad[idx] != 0.0
        if not live.any():
            fractions[(kind, group)] = None
            continue
        same = np.sign(ce_grad[idx]) == np.sign(gap_grad[idx])
        if partition.alignment(kind, group) == "aligned":
            fractions[(kind, group)] = float(same[live].mean())
        else:
            fractions[(kind, group)] = float((~same)[live].mean())
    return fractions


def estimate_lipschitz(model: MlpModel, features: np.ndarray, n_pairs: int = 200,
                       seed: int = 0) -> float:
    """Sampled gradient-Lipschitz estimate.

    Draws index pairs from ``features`` (which may include attack-trajectory
    points stacked onto the clean rows) and returns the largest ratio
    ||grad f(x) - grad f(x')||_2 / ||x - x'||_2. Pairs are drawn one at a
    time, so a larger n_pairs with the same seed extends the same sequence
    and the estimate is non-decreasing in n_pairs. Coincident pairs are
    skipped. The estimate is a lower bound on the true constant.
    """
    if n_pairs < 1:
        raise DomainError("n_pairs must be >= 1")
    pool = np.asarray(features, dtype=np.float64)
    if pool.ndim != 2 or len(pool) < 2:
        raise DomainError("need at least two feature rows")
    rng = np.random.default_rng(seed)
    pairs = [(int(rng.integers(len(pool))), int(rng.integers(len(pool))))
             for _ in range(n_pairs)]
    used = sorted({i for pair in pairs for i in pair})
    trace = forward(model, pool[used])
    ones = np.ones(len(used))
    grads = backward_loss(model, trace, "signed_soft_label", ones).input_grad
    grad_of = dict(zip(used, grads))
    best = 0.0
    for i, j in pairs:
        dist = float(np.linalg.norm(pool[i] - pool[j]))
        if dist == 0.0:
            continue
        ratio = float(np.linalg.norm(grad_of[i] - grad_of[j])) / dist
        best = max(best, ratio)
    return best


@dataclass(frozen=True)
class PairRecord:
    pair_id: int
    anchor_index: int       # row index into the audited view
    partner_index: int      # RHS-minimizing partner row
    lhs: float
    rhs: float
    slack: float            # rhs - lhs
    holds: bool


@dataclass(frozen=True)
class BoundAudit:
    """Per-pair audit of one transfer bound over one attacked split."""

    kind: str               # e.g. "loss_gap_fn" or "soft_shift_tp"
    k_hat: float
    epsilon: float
    step: float
    iterations: int
    pairs: tuple[PairRecord, ...]
    skipped: str | None = None     # reason when a required cell is empty

    @property
    def n_violations(self) -> int:
        return sum(1 for p in self.pairs if not p.holds)


def audit_csv_lines(audit: BoundAudit) -> list[str]:
    lines = [
        "# kind %s" % audit.kind,
        "# k_hat %.17g" % audit.k_hat,
        "# epsilon %.17g" % audit.epsilon,
        "# step %.17g" % audit.step,
        "# iterations %d" % audit.iterations,
        "# pairs %d violations %d" % (len(audit.pairs), audit.n_violations),
    ]
    if audit.skipped:
        lines.append("# skipped %s" % audit.skipped)
    lines.append(AUDIT_CSV_HEADER)
    for p in audit.pairs:
        lines.append("%d,%.17g,%.17g,%.17g,%d"
                     % (p.pair_id, p.lhs, p.rhs, p.slack, int(p.holds)))
    return lines


def _pairwise_distances(xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
    diff = xa[:, None, :] - xb[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def _k_hat_pool(view: SplitView, *results: AttackResult) -> np.ndarray:
    parts = [view.features]
    parts.extend(r.features_adv for r in results)
    return np.vstack(parts)


def _build_audit(kind, anchors, partners, lhs_values, rhs_matrix, cfg, k_hat):
    records = []
    for row, anchor in enumerate(anchors):
        col = int(np.argmin(rhs_matrix[row]))
        rhs = float(rhs_matrix[row, col])
        lhs = float(lhs_values[row])
        records.append(PairRecord(
            pair_id=row, anchor_index=int(anchor),
            partner_index=int(partners[col]), lhs=lhs, rhs=rhs,
            slack=rhs - lhs, holds=bool(lhs <= rhs + 1e-9)))
    return BoundAudit(kind=kind, k_hat=k_hat, epsilon=cfg.epsilon, step=cfg.step,
                      iterations=cfg.iterations, pairs=tuple(records))


def _skipped_audit(kind, cfg, k_hat, reason):
    return BoundAudit(kind=kind, k_hat=k_hat, epsilon=cfg.epsilon, step=cfg.step,
                      iterations=cfg.iterations, pairs=(), skipped=reason)


def audit_fairness_attack_loss_gap(model: MlpModel, view: SplitView,
                                   epsilon: float, step: float | None = None,
                                   iterations: int = 20, k_hat: float | None = None,
                                   k_pairs: int = 200, seed: int = 0,
                                   threshold=0.5) -> tuple[BoundAudit, BoundAudit]:
    """Bound the spread of per-sample loss change under the group-gap attack.

    For each false negative of the advantaged group, the gap between its
    cross-entropy change and a disadvantaged false negative's is bounded by
    accumulated trajectory-distance terms plus the partner's per-iteration
    accuracy-attack robustness; the partner is chosen to minimize the bound.
    Returns the (false negative, false positive) audits; the false positive
    form swaps the roles of the two groups.
    """
    di_cfg = AttackConfig("di", epsilon=epsilon, step=step, iterations=iterations,
                          record_trajectory=True)
    acc_cfg = AttackConfig("accuracy", epsilon=epsilon, step=step,
                           iterations=iterations)
    di_res = pgd_di(model, view, di_cfg)
    acc_res = pgd_accuracy(model, view, acc_cfg)
    if k_hat is None:
        k_hat = estimate_lipschitz(model, _k_hat_pool(view, di_res, acc_res),
                                   n_pairs=k_pairs, seed=seed)

    if model.group_thresholds is not None:
        threshold = model.group_thresholds
    partition = partition_from_arrays(di_res.soft_trajectory[0], view.labels,
                                      view.sensitive, threshold)
    ce_clean = cross_entropy(di_res.soft_trajectory[0], view.labels)
    ce_adv = cross_entropy(di_res.soft_trajectory[-1], view.labels)
    loss_change = np.abs(ce_adv - ce_clean)
    acc_deltas = iteration_soft_deltas(acc_res)          # (T, N)
    traj = di_res.feature_trajectory                     # (T+1, N, d)
    soft_traj = di_res.soft_trajectory
    n_features = view.features.shape[1]

    def one_side(kind, anchor_cell, partner_cell):
        anchors = partition.indices(*anchor_cell)
        partners = partition.indices(*partner_cell)
        if anchors.size == 0 or partners.size == 0:
            empty = anchor_cell if anchors.size == 0 else partner_cell
            return _skipped_audit(kind, di_cfg, k_hat,
                                  "no rows in cell %s group %d" % empty)
        rhs = np.zeros((anchors.size, partners.size))
        for t in range(1, iterations + 1):
            xa = traj[t - 1][anchors]
            xp = traj[t - 1][partners]
            fa = np.maximum(soft_traj[t - 1][anchors], SOFT_FLOOR)
            fp = np.maximum(soft_traj[t - 1][partners], SOFT_FLOOR)
            dist = _pairwise_distances(xa, xp)
            eta = np.abs(fp[None, :] - fa[:, None]) / (fa[:, None] * fp[None, :])
            rhs += (np.sqrt(n_features) * k_hat * dist / fa[:, None]
                    + eta * acc_deltas[t - 1][partners][None, :])
        rhs *= di_cfg.step
        lhs = np.abs(loss_change[anchors][:, None] - loss_change[partners][None, :])
        picked = np.argmin(rhs, axis=1)
        lhs_picked = lhs[np.arange(anchors.size), picked]
        return _build_audit(kind, anchors, partners, lhs_picked, rhs, di_cfg, k_hat)

    fn_audit = one_side("loss_gap_fn", ("fn", 1), ("fn", 0))
    fp_audit = one_side("loss_gap_fp", ("fp", 0), ("fp", 1))
    return fn_audit, fp_audit


def audit_accuracy_attack_soft_shift(model: MlpModel, view: SplitView,
                                     epsilon: float, step: float | None = None,
                                     iterations: int = 20,
                                     k_hat: float | None = None,
                                     k_pairs: int = 200, seed: int = 0,
                                     threshold=0.5) -> tuple[BoundAudit, BoundAudit]:
    """Bound the soft-label shift under the accuracy attack.

    For each true positive of the advantaged group, its soft-label change is
    bounded by a disadvantaged true positive's change under the group-gap
    attack plus accumulated trajectory-distance terms. Returns the
    (true positive, true negative) audits; the true negative form swaps the
    groups.
    """
    acc_cfg = AttackConfig("accuracy", epsilon=epsilon, step=step,
                           iterations=iterations, record_trajectory=True)
    di_cfg = AttackConfig("di", epsilon=epsilon, step=step, iterations=iterations)
    acc_res = pgd_accuracy(model, view, acc_cfg)
    di_res = pgd_di(model, view, di_cfg)
    if k_hat is None:
        k_hat = estimate_lipschitz(model, _k_hat_pool(view, di_res, acc_res),
                                   n_pairs=k_pairs, seed=seed)

    if model.group_thresholds is not None:
        threshold = model.group_thresholds
    partition = partition_from_arrays(acc_res.soft_trajectory[0], view.labels,
                                      view.sensitive, threshold)
    shift = soft_label_delta(acc_res)                 # F per sample
    gap_change = soft_label_delta(di_res)             # xi per sample
    traj = acc_res.feature_trajectory
    n_features = view.features.shape[1]

    def one_side(kind, anchor_cell, partner_cell):
        anchors = partition.indices(*anchor_cell)
        partners = partition.indices(*partner_cell)
        if anchors.size == 0 or partners.size == 0:
            empty = anchor_cell if anchors.size == 0 else partner_cell
            return _skipped_audit(kind, acc_cfg, k_hat,
                                  "no rows in cell %s group %d" % empty)
        rhs = np.tile(gap_change[partners][None, :], (anchors.size, 1))
        for t in range(1, iterations + 1):
            dist = _pairwise_distances(traj[t - 1][anchors], traj[t - 1][partners])
            rhs += np.sqrt(n_features) * acc_cfg.step * k_hat * dist
        lhs_picked = shift[anchors]
        return _build_audit(kind, anchors, partners, lhs_picked, rhs, acc_cfg, k_hat)

    tp_audit = one_side("soft_shift_tp", ("tp", 1), ("tp", 0))
    tn_audit = one_side("soft_shift_tn", ("tn", 0), ("tn", 1))
    return tp_audit, tn_audit


def check_perturbed_gap_bound(model: MlpModel, view: SplitView, epsilon: float,
                              step: float | None = None, iterations: int = 20):
    """Group gap after the gap attack vs clean gap plus mean soft-label
    change per group. Exact triangle inequality; returns (lhs, rhs, holds)
    with holds meaning lhs <= rhs + 1e-9."""
    cfg = AttackConfig("di", epsilon=epsilon, step=step, iterations=iterations)
    res = pgd_di(model, view, cfg)
    a = np.asarray(view.sensitive).astype(np.int64)
    xi = soft_label_delta(res)
    lhs = relaxed_di(res.soft_trajectory[-1], a)
    rhs = relaxed_di(res.soft_trajectory[0], a)
    for k in (0, 1):
        rhs += float(xi[a == k].mean())
    return lhs, rhs, bool(lhs <= rhs + 1e-9)


def paired_le_fraction(values_adv, values_base, indices) -> float:
    """Share of the given rows where the first series is <= the second.
    Used for the trained-vs-baseline robustness trend checks."""
    idx = np.asarray(indices)
    if idx.size == 0:
        raise DegenerateDataError("no shared rows to compare")
    va = np.asarray(values_adv)[idx]
    vb = np.asarray(values_base)[idx]
    return float((va <= vb).mean())
