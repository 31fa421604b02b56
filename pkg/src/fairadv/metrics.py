"""Hard and relaxed group-fairness metrics for binary classifiers.

The relaxed metrics are the soft-label gaps that the fairness attacks
maximize: the relaxed demographic disparity is the absolute gap between group
mean soft labels, and the relaxed odds disparity sums that gap within each
true-label slice (so it lives in [0,2]). Hard metrics threshold the soft
labels first and report accuracy, per-group TPR/TNR, positive-rate gap, and
TPR-gap + FPR-gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .errors import DegenerateDataError, DomainError
from .mlp import MlpModel, forward

CELL_KINDS = ("tp", "fn", "tn", "fp")
ALIGNED_CELLS = frozenset({("tp", 0), ("fn", 0), ("tn", 1), ("fp", 1)})


def _as_float(x, name):
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size == 0:
        raise DegenerateDataError(f"{name} is empty")
    return arr


def _as_binary(x, name):
    arr = np.asarray(x).ravel().astype(np.int64)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise DomainError(f"{name} must be 0/1 valued")
    return arr


def relaxed_di(soft_labels, sensitive) -> float:
    """Absolute gap between group mean soft labels, in [0,1]."""
    f = _as_float(soft_labels, "soft_labels")
    a = _as_binary(sensitive, "sensitive")
    if len(f) != len(a):
        raise DomainError("soft_labels and sensitive length mismatch")
    if not ((a == 0).any() and (a == 1).any()):
        raise DegenerateDataError("one sensitive group is empty")
    return abs(float(f[a == 1].mean()) - float(f[a == 0].mean()))


def relaxed_eod(soft_labels, labels, sensitive) -> float:
    """Sum over true labels of the group mean soft-label gap, in [0,2]."""
    f = _as_float(soft_labels, "soft_labels")
    y = _as_binary(labels, "labels")
    a = _as_binary(sensitive, "sensitive")
    if not (len(f) == len(y) == len(a)):
        raise DomainError("soft_labels/labels/sensitive length mismatch")
    total = 0.0
    for j in (0, 1):
        cells = [f[(y == j) & (a == k)] for k in (0, 1)]
        if cells[0].size == 0 or cells[1].size == 0:
            raise DegenerateDataError(f"cell (y={j}, a={0 if cells[0].size == 0 else 1}) is empty")
        total += abs(float(cells[1].mean()) - float(cells[0].mean()))
    return total


def _threshold_pair(threshold) -> tuple[float, float]:
    if np.isscalar(threshold):
        pair = (float(threshold),) * 2
    else:
        pair = tuple(float(t) for t in threshold)
        if len(pair) != 2:
            raise DomainError("threshold must be a scalar or a (t0, t1) pair")
    if not all(np.isfinite(t) for t in pair):
        raise DomainError("thresholds must be finite")
    return pair


def hard_predictions(soft_labels, sensitive, threshold=0.5) -> np.ndarray:
    """Threshold soft labels, optionally with one threshold per group."""
    f = _as_float(soft_labels, "soft_labels")
    a = _as_binary(sensitive, "sensitive")
    t0, t1 = _threshold_pair(threshold)
    cut = np.where(a == 1, t1, t0)
    return (f >= cut).astype(np.int64)


@dataclass(frozen=True)
class FairnessReport:
    accuracy: float
    di_hard: float       # |positive-rate gap| between groups
    eod_hard: float      # |TPR gap| + |FPR gap|
    di_relaxed: float
    eod_relaxed: float
    tpr_g0: float
    tpr_g1: float
    tnr_g0: float
    tnr_g1: float
    threshold: tuple[float, float]

    def __post_init__(self):
        rates = (self.accuracy, self.tpr_g0, self.tpr_g1, self.tnr_g0, self.tnr_g1,
                 self.di_hard, self.di_relaxed)
        if not all(-1e-12 <= r <= 1 + 1e-12 for r in rates):
            raise DomainError("rate outside [0,1]")
        if not (-1e-12 <= self.eod_hard <= 2 + 1e-12
                and -1e-12 <= self.eod_relaxed <= 2 + 1e-12):
            raise DomainError("odds disparity outside [0,2]")


def report_from_arrays(soft_labels, labels, sensitive, threshold=0.5) -> FairnessReport:
    """Full metric set from precomputed soft labels."""
    f = _as_float(soft_labels, "soft_labels")
    y = _as_binary(labels, "labels")
    a = _as_binary(sensitive, "sensitive")
    if not (len(f) == len(y) == len(a)):
        raise DomainError("soft_labels/labels/sensitive length mismatch")
    yhat = hard_predictions(f, a, threshold)

    tpr, tnr, pos_rate = {}, {}, {}
    for k in (0, 1):
        g = a == k
        pos = g & (y == 1)
        neg = g & (y == 0)
        if pos.sum() == 0 or neg.sum() == 0:
            raise DegenerateDataError(f"cell (y={1 if pos.sum() == 0 else 0}, a={k}) is empty")
        tpr[k] = float(yhat[pos].mean())
        tnr[k] = float(1.0 - yhat[neg].mean())
        pos_rate[k] = float(yhat[g].mean())

    fpr = {k: 1.0 - tnr[k] for k in (0, 1)}
    return FairnessReport(
        accuracy=float((yhat == y).mean()),
        di_hard=abs(pos_rate[1] - pos_rate[0]),
        eod_hard=abs(tpr[0] - tpr[1]) + abs(fpr[0] - fpr[1]),
        di_relaxed=relaxed_di(f, a),
        eod_relaxed=relaxed_eod(f, y, a),
        tpr_g0=tpr[0], tpr_g1=tpr[1], tnr_g0=tnr[0], tnr_g1=tnr[1],
        threshold=_threshold_pair(threshold),
    )


def hard_report(model: MlpModel, ds: LabeledDataset, split: str,
                threshold=0.5) -> FairnessReport:
    """Evaluate one model on one split. A model carrying fitted per-group
    thresholds uses those instead of the scalar default."""
    view = ds.view(split)
    if model.group_thresholds is not None:
        threshold = model.group_thresholds
    soft = forward(model, view.features).soft_labels
    return report_from_arrays(soft, view.labels, view.sensitive, threshold)


@dataclass(frozen=True)
class SubgroupPartition:
    """Disjoint index sets per (confusion cell, group), with the cell's role
    under a joint fairness/accuracy attack: in aligned cells both attacks
    push the soft label the same way, in misaligned cells they oppose."""

    cells: dict[tuple[str, int], np.ndarray]
    n_rows: int

    def indices(self, kind: str, group: int) -> np.ndarray:
        return self.cells[(kind, group)]

    @staticmethod
    def alignment(kind: str, group: int) -> str:
        if kind not in CELL_KINDS:
            raise DomainError(f"unknown cell kind {kind!r}")
        return "aligned" if (kind, group) in ALIGNED_CELLS else "misaligned"


def partition_from_arrays(soft_labels, labels, sensitive,
                          threshold=0.5) -> SubgroupPartition:
    f = _as_float(soft_labels, "soft_labels")
    y = _as_binary(labels, "labels")
    a = _as_binary(sensitive, "sensitive")
    yhat = hard_predictions(f, a, threshold)
    masks = {"tp": (y == 1) & (yhat == 1), "fn": (y == 1) & (yhat == 0),
             "tn": (y == 0) & (yhat == 0), "fp": (y == 0) & (yhat == 1)}
    cells = {(kind, k): np.flatnonzero(mask & (a == k))
             for kind, mask in masks.items() for k in (0, 1)}
    return SubgroupPartition(cells=cells, n_rows=len(f))


def partition_subgroups(model: MlpModel, ds: LabeledDataset, split: str,
                        threshold=0.5) -> SubgroupPartition:
    view = ds.view(split)
    if model.group_thresholds is not None:
        threshold = model.group_thresholds
    soft = forward(model, view.features).soft_labels
    return partition_from_arrays(soft, view.labels, view.sensitive, threshold)


REPORT_CSV_HEADER = ("epsilon,accuracy,di,eod,tpr_g0,tpr_g1,tnr_g0,tnr_g1,"
                     "di_relaxed,eod_relaxed")


def report_csv_row(epsilon: float, report: FairnessReport) -> str:
    fields = (epsilon, report.accuracy, report.di_hard, report.eod_hard,
              report.tpr_g0, report.tpr_g1, report.tnr_g0, report.tnr_g1,
              report.di_relaxed, report.eod_relaxed)
    return ",".join("%.17g" % v for v in fields)
