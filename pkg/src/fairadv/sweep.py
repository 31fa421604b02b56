"""Attack sweeps: train one model per (mode, seed), evaluate over an eps grid.

A sweep expands into independent (mode, seed, epsilon) cells. Training runs
once per (mode, seed); each cell then attacks the test split of the shared
dataset at its own radius and records a full metric row. Cells are
order-independent, so a bounded worker pool may execute them in any order;
rows are assembled in deterministic (mode, seed, epsilon) order afterwards.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .attacks import OBJECTIVES, AttackConfig, run_attack
from .data import LabeledDataset, SplitView
from .errors import DegenerateDataError, DomainError
from .metrics import (REPORT_CSV_HEADER, FairnessReport, report_csv_row,
                      report_from_arrays)
from .mlp import MlpModel, forward
from .training import MODES, TrainConfig, TrainResult, train

DEFAULT_GRID = tuple(round(0.05 * k, 2) for k in range(11))   # 0.00 .. 0.50
ROWS_CSV_HEADER = "dataset,mode,seed," + REPORT_CSV_HEADER + ",status"

# metric attribute order matching REPORT_CSV_HEADER past the epsilon column
_METRIC_ATTRS = ("accuracy", "di_hard", "eod_hard", "tpr_g0", "tpr_g1",
                 "tnr_g0", "tnr_g1", "di_relaxed", "eod_relaxed")
_METRIC_NAMES = ("accuracy", "di", "eod", "tpr_g0", "tpr_g1",
                 "tnr_g0", "tnr_g1", "di_relaxed", "eod_relaxed")


@dataclass(frozen=True)
class SweepSpec:
    """Full description of one sweep; every output is a function of this."""

    dataset_id: str
    modes: tuple[str, ...]
    objective: str = "di"
    grid: tuple[float, ...] = DEFAULT_GRID
    seeds: tuple[int, ...] = (0, 1, 2)
    train_epsilon: float = 0.0
    attack_iterations: int = 20
    epochs: int = 40
    batch_size: int = 128
    lr: float = 0.5
    fairness_weight: float = 1.0
    threads: int = 1

    def __post_init__(self):
        if not self.modes:
            raise DomainError("need at least one training mode")
        for m in self.modes:
            if m not in MODES:
                raise DomainError(f"unknown mode {m!r}")
        if self.objective not in OBJECTIVES:
            raise DomainError(f"unknown objective {self.objective!r}")
        if not self.seeds:
            raise DomainError("need at least one seed")
        g = tuple(float(e) for e in self.grid)
        if not g or g[0] != 0.0:
            raise DomainError("epsilon grid must start at 0")
        if any(b <= a for a, b in zip(g, g[1:])):
            raise DomainError("epsilon grid must be strictly ascending")
        if self.threads < 1:
            raise DomainError("threads must be >= 1")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def train_config(self, mode: str, seed: int) -> TrainConfig:
        return TrainConfig(mode=mode, epochs=self.epochs,
                           batch_size=self.batch_size, lr=self.lr,
                           train_epsilon=self.train_epsilon,
                           fairness_weight=self.fairness_weight, seed=seed)


@dataclass(frozen=True)
class SweepRow:
    mode: str
    seed: int
    epsilon: float
    report: FairnessReport | None     # None when the cell was degenerate
    status: str                       # "ok" or "degenerate"


@dataclass(frozen=True)
class SweepOutcome:
    spec: SweepSpec
    rows: tuple[SweepRow, ...]
    trained: dict            # (mode, seed) -> TrainResult


def evaluate_cell(model: MlpModel, view: SplitView, objective: str,
                  epsilon: float, iterations: int = 20) -> FairnessReport:
    """Metric row for one model under one attack radius.

    epsilon == 0 skips the attack entirely, so the row reproduces the clean
    evaluation bit for bit.
    """
    if epsilon == 0.0:
        soft = forward(model, view.features).soft_labels
    else:
        cfg = AttackConfig(objective=objective, epsilon=epsilon,
                           iterations=iterations)
        soft = run_attack(model, view, cfg).soft_trajectory[-1]
    threshold = model.group_thresholds if model.group_thresholds is not None else 0.5
    return report_from_arrays(soft, view.labels, view.sensitive, threshold)


def run_sweep(ds: LabeledDataset, spec: SweepSpec) -> SweepOutcome:
    view = ds.view("test")
    train_keys = [(m, s) for m in spec.modes for s in spec.seeds]

    def _train_one(key):
        mode, seed = key
        return train(ds, spec.train_config(mode, seed))

    with ThreadPoolExecutor(max_workers=spec.threads) as pool:
        trained = dict(zip(train_keys, pool.map(_train_one, train_keys)))

    cells = [(m, s, e) for m in spec.modes for s in spec.seeds
             for e in spec.grid]

    def _eval_one(cell):
        mode, seed, eps = cell
        model = trained[(mode, seed)].model
        try:
            report = evaluate_cell(model, view, spec.objective, eps,
                                   spec.attack_iterations)
            return SweepRow(mode, seed, eps, report, "ok")
        except DegenerateDataError:
            return SweepRow(mode, seed, eps, None, "degenerate")

    with ThreadPoolExecutor(max_workers=spec.threads) as pool:
        rows = tuple(pool.map(_eval_one, cells))
    return SweepOutcome(spec=spec, rows=rows, trained=trained)


def _header_comments(spec: SweepSpec) -> list[str]:
    return [
        "# sweep v1",
        "# dataset %s" % spec.dataset_id,
        "# objective %s" % spec.objective,
        "# modes %s" % ",".join(spec.modes),
        "# seeds %s" % ",".join(str(s) for s in spec.seeds),
        "# grid %s" % ",".join("%.17g" % e for e in spec.grid),
        "# train_epsilon %.17g" % spec.train_epsilon,
        "# attack iterations=%d step=epsilon/10" % spec.attack_iterations,
    ]


def rows_csv_lines(outcome: SweepOutcome) -> list[str]:
    """Raw per-(mode, seed, epsilon) rows with sweep parameters up top."""
    spec = outcome.spec
    lines = _header_comments(spec) + [ROWS_CSV_HEADER]
    for row in outcome.rows:
        if row.report is None:
            body = "%.17g" % row.epsilon + "," * len(_METRIC_ATTRS)
        else:
            body = report_csv_row(row.epsilon, row.report)
        lines.append("%s,%s,%d,%s,%s"
                     % (spec.dataset_id, row.mode, row.seed, body, row.status))
    return lines


def curve_csv_lines(outcome: SweepOutcome, mode: str) -> list[str]:
    """Per-epsilon mean/min/max across seeds for one mode."""
    spec = outcome.spec
    header = "epsilon,n_seeds," + ",".join(
        "%s_%s" % (name, agg) for name in _METRIC_NAMES
        for agg in ("mean", "min", "max"))
    lines = _header_comments(spec) + ["# mode %s" % mode, header]
    for eps in spec.grid:
        reports = [r.report for r in outcome.rows
                   if r.mode == mode and r.epsilon == eps and r.report is not None]
        fields = ["%.17g" % eps, "%d" % len(reports)]
        for attr in _METRIC_ATTRS:
            if reports:
                vals = np.array([getattr(rep, attr) for rep in reports])
                fields += ["%.17g" % v for v in
                           (vals.mean(), vals.min(), vals.max())]
            else:
                fields += ["", "", ""]
        lines.append(",".join(fields))
    return lines


def curve_series(outcome: SweepOutcome, attr: str) -> dict[str, tuple]:
    """Seed-mean metric trajectories keyed by mode, for plotting."""
    series = {}
    for mode in outcome.spec.modes:
        xs, ys = [], []
        for eps in outcome.spec.grid:
            vals = [getattr(r.report, attr) for r in outcome.rows
                    if r.mode == mode and r.epsilon == eps and r.report is not None]
            if vals:
                xs.append(eps)
                ys.append(float(np.mean(vals)))
        if xs:
            series[mode] = (np.array(xs), np.array(ys))
    return series


MERGED_CSV_HEADER = "dataset,mode,epsilon,n_rows," + ",".join(
    "%s_%s" % (name, agg) for name in _METRIC_NAMES
    for agg in ("mean", "spread"))


def parse_rows_csv(lines) -> tuple[list[str], list[dict]]:
    """Read a raw sweep rows file back into dicts; returns (comments, rows)."""
    comments, rows = [], []
    header = None
    for ln in lines:
        ln = ln.rstrip("\n")
        if not ln:
            continue
        if ln.startswith("#"):
            comments.append(ln)
            continue
        if header is None:
            if ln != ROWS_CSV_HEADER:
                raise DomainError("unexpected sweep row header: %r" % ln)
            header = ln.split(",")
            continue
        parts = ln.split(",")
        if len(parts) != len(header):
            raise DomainError("row width %d does not match header width %d"
                              % (len(parts), len(header)))
        rows.append(dict(zip(header, parts)))
    if header is None:
        raise DomainError("no sweep row header found")
    return comments, rows


def merge_rows(row_dicts) -> list[str]:
    """Aggregate raw rows into one table keyed (dataset, mode, epsilon).

    Each key's metrics are reported as mean and spread (max - min) across
    the contributing rows; degenerate rows are excluded. Key order follows
    first appearance of datasets and modes, then ascending epsilon, so
    merged output is stable for a fixed input order.
    """
    groups: dict[tuple, list[dict]] = {}
    dataset_order, mode_order = [], []
    for row in row_dicts:
        if row.get("status") != "ok":
            continue
        key = (row["dataset"], row["mode"], float(row["epsilon"]))
        if row["dataset"] not in dataset_order:
            dataset_order.append(row["dataset"])
        if row["mode"] not in mode_order:
            mode_order.append(row["mode"])
        groups.setdefault(key, []).append(row)

    def _key_rank(key):
        dataset, mode, eps = key
        return (dataset_order.index(dataset), mode_order.index(mode), eps)

    lines = [MERGED_CSV_HEADER]
    for key in sorted(groups, key=_key_rank):
        dataset, mode, eps = key
        bucket = groups[key]
        fields = [dataset, mode, "%.17g" % eps, "%d" % len(bucket)]
        for name in _METRIC_NAMES:
            vals = np.array([float(r[name]) for r in bucket])
            fields += ["%.17g" % vals.mean(), "%.17g" % (vals.max() - vals.min())]
        lines.append(",".join(fields))
    return lines
