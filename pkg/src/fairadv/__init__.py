"""Fairness-targeted PGD attacks, fair adversarial training, and robustness
bound audits for tabular binary classifiers."""

from .attacks import (
    AttackConfig,
    AttackResult,
    iteration_soft_deltas,
    pgd_accuracy,
    pgd_di,
    pgd_eod,
    run_attack,
    soft_label_delta,
    trace_csv_lines,
)
from .data import (
    DatasetSchema,
    LabeledDataset,
    SplitView,
    group_counts,
    load_csv,
    load_dataset,
    packaged_schema_path,
    read_schema,
    save_dataset,
)
from .errors import (
    DegenerateDataError,
    DomainError,
    FairadvError,
    NumericError,
    SchemaError,
    ShapeError,
    TrainingError,
)
from .metrics import (
    FairnessReport,
    SubgroupPartition,
    hard_predictions,
    hard_report,
    partition_subgroups,
    relaxed_di,
    relaxed_eod,
    report_from_arrays,
)
from .mlp import (
    ForwardTrace,
    GradientPair,
    MlpModel,
    backward_loss,
    cross_entropy,
    default_model,
    forward,
    load_model,
    new_model,
    predict,
    save_model,
    sgd_step,
)
from .sweep import SweepOutcome, SweepRow, SweepSpec, evaluate_cell, run_sweep
from .theory import (
    BoundAudit,
    PairRecord,
    audit_accuracy_attack_soft_shift,
    audit_fairness_attack_loss_gap,
    check_attack_sign_alignment,
    check_odds_gap_lower_bound,
    check_perturbed_gap_bound,
    estimate_lipschitz,
    paired_le_fraction,
)
from .training import (
    PostprocessThresholds,
    SampleWeights,
    TrainConfig,
    TrainResult,
    fit_group_thresholds,
    reweigh_labels,
    train,
)

__all__ = [
    "AttackConfig", "AttackResult", "iteration_soft_deltas", "pgd_accuracy",
    "pgd_di", "pgd_eod", "run_attack", "soft_label_delta", "trace_csv_lines",
    "DatasetSchema", "LabeledDataset", "SplitView", "group_counts",
    "load_csv", "load_dataset", "packaged_schema_path", "read_schema",
    "save_dataset",
    "DegenerateDataError", "DomainError", "FairadvError", "NumericError",
    "SchemaError", "ShapeError", "TrainingError",
    "FairnessReport", "SubgroupPartition", "hard_predictions", "hard_report",
    "partition_subgroups", "relaxed_di", "relaxed_eod", "report_from_arrays",
    "ForwardTrace", "GradientPair", "MlpModel", "backward_loss",
    "cross_entropy", "default_model", "forward", "load_model", "new_model",
    "predict", "save_model", "sgd_step",
    "SweepOutcome", "SweepRow", "SweepSpec", "evaluate_cell", "run_sweep",
    "BoundAudit", "PairRecord", "audit_accuracy_attack_soft_shift",
    "audit_fairness_attack_loss_gap", "check_attack_sign_alignment",
    "check_odds_gap_lower_bound", "check_perturbed_gap_bound",
    "estimate_lipschitz", "paired_le_fraction",
    "PostprocessThresholds", "SampleWeights", "TrainConfig", "TrainResult",
    "fit_group_thresholds", "reweigh_labels", "train",
]
